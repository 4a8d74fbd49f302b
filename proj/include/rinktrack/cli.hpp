#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rinktrack/sequence.hpp"

namespace rinktrack {

/// Entry point of the rinktrack tool. Returns the process exit code.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args[0] is the program

/// A sequence directory, or a directory whose sub-directories (sorted by
/// name) are sequence directories.
std::vector<Sequence> load_sequences(const std::filesystem::path& dir);

}  // namespace rinktrack
