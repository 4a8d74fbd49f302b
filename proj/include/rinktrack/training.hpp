#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rinktrack/graph_mpn.hpp"
#include "rinktrack/neuralnet.hpp"
#include "rinktrack/sequence.hpp"
#include "rinktrack/tracker.hpp"

namespace rinktrack {

/// Per-edge labels in prev-major order: 1 iff both endpoints carry the same
/// ground-truth id. Throws CorruptGroundTruth on a repeated id within a frame
/// or a missing (negative) id.
std::vector<int> make_labels(std::span<const int> prev_ids,
                             std::span<const int> curr_ids);

/// Two consecutive non-empty frames of a training sequence.
struct TrainingPair {
  AssociationGraph graph;  // raw features only
  std::vector<int> labels;
};

TrainingPair make_training_pair(const FrameData& prev, const FrameData& curr,
                                const SequenceInfo& info, bool use_projection);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss = 0.0;  // mean pair loss over the epoch
  double lr = 0.0;
  std::optional<double> val_idf1;
};

struct TrainConfig {
  int epochs = 30;
  int batch = 16;  // frame-pair graphs per optimizer step
  int steps = kDefaultSteps;
  double alpha = 0.25;
  double gamma = 2.0;
  std::uint64_t seed = 0;
  bool use_projection = true;
  int threads = 1;
  int validate_every = 2;
  /// Defaults to the standard schedule stretched to `epochs`.
  std::optional<nn::LrSchedule> schedule;
  TrackerConfig tracker;  // used for validation runs

  std::function<void(const EpochRecord&)> on_epoch;

  void validate() const;
  nn::LrSchedule resolved_schedule() const;
};

struct Checkpoint {
  ModelParameters params;
  int epoch = 0;
  std::optional<double> val_idf1;
};

struct TrainResult {
  Checkpoint best;   // highest validation IDF1, else the final epoch
  ModelParameters final_params;
  std::vector<EpochRecord> history;
};

/// Throws NoTrainingData when no sequence contributes a labelled frame pair.
TrainResult train(std::span<const Sequence> train_set,
                  std::span<const Sequence> val_set, const TrainConfig& cfg);

/// IDF1 of full online inference, with counts pooled over the sequences.
double validation_idf1(std::span<const Sequence> seqs,
                       const ModelParameters& params,
                       const TrackerConfig& cfg, int threads = 1);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rinktrack
