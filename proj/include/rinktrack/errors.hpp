#pragma once

#include <stdexcept>
#include <string>

namespace rinktrack {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kNumeric = 3,
};

/// Root of the library's exception hierarchy. Every error knows which exit
/// code the CLI should report for it.
class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code)
      : std::runtime_error(what), code_(code) {}
  ExitCode exit_code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what, ExitCode::kData) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(what, ExitCode::kNumeric) {}
};

#define RINKTRACK_DEFINE_ERROR(Name, Base) \
  class Name : public Base {               \
   public:                                 \
    using Base::Base;                      \
  };

RINKTRACK_DEFINE_ERROR(InvalidBox, DataError)
RINKTRACK_DEFINE_ERROR(DimensionMismatch, DataError)
RINKTRACK_DEFINE_ERROR(FormatError, DataError)
RINKTRACK_DEFINE_ERROR(MissingHomography, DataError)
RINKTRACK_DEFINE_ERROR(CorruptModelFile, DataError)
RINKTRACK_DEFINE_ERROR(CorruptGroundTruth, DataError)
RINKTRACK_DEFINE_ERROR(NoTrainingData, DataError)
RINKTRACK_DEFINE_ERROR(IoError, DataError)
RINKTRACK_DEFINE_ERROR(InvalidConfig, DataError)

RINKTRACK_DEFINE_ERROR(DegenerateProjection, NumericError)
RINKTRACK_DEFINE_ERROR(SingularHomography, NumericError)
RINKTRACK_DEFINE_ERROR(ZeroEmbedding, NumericError)
RINKTRACK_DEFINE_ERROR(UndefinedMetric, NumericError)

#undef RINKTRACK_DEFINE_ERROR

}  // namespace rinktrack
