#include "rinktrack/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <mutex>
#include <thread>

#include "rinktrack/errors.hpp"
#include "rinktrack/io.hpp"
#include "rinktrack/metrics.hpp"
#include "fp_guard.hpp"

namespace rinktrack {
namespace {

// Runs fn(i) for i in [0, n) over up to `threads` workers, each taking a
// contiguous block. Results must be written to per-index slots.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mu;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      detail::FlushDenormals ftz;
      try {
        for (std::size_t i = w * n / workers; i < (w + 1) * n / workers; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

std::vector<int> gt_ids(const FrameData& f) {
  std::vector<int> ids;
  ids.reserve(f.detections.size());
  for (const auto& d : f.detections) ids.push_back(d.gt_id);
  return ids;
}

struct PairRef {
  std::size_t seq;
  std::size_t frame;  // pair is (frame, frame + 1)
};

}  // namespace

std::vector<int> make_labels(std::span<const int> prev_ids,
                             std::span<const int> curr_ids) {
  auto check = [](std::span<const int> ids, const char* side) {
    std::set<int> seen;
    for (int id : ids) {
      if (id < 0) {
        throw CorruptGroundTruth(std::string(side) + " frame has an unlabelled detection");
      }
      if (!seen.insert(id).second) {
        throw CorruptGroundTruth(std::string(side) + " frame repeats gt id " +
                                 std::to_string(id));
      }
    }
  };
  check(prev_ids, "previous");
  check(curr_ids, "current");
  std::vector<int> labels;
  labels.reserve(prev_ids.size() * curr_ids.size());
  for (int a : prev_ids) {
    for (int b : curr_ids) labels.push_back(a == b ? 1 : 0);
  }
  return labels;
}

TrainingPair make_training_pair(const FrameData& prev, const FrameData& curr,
                                const SequenceInfo& info, bool use_projection) {
  TrainingPair p;
  p.labels = make_labels(gt_ids(prev), gt_ids(curr));
  p.graph = build_bipartite(make_nodes(prev, info.rink, use_projection),
                            make_nodes(curr, info.rink, use_projection));
  return p;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidConfig("epochs must be >= 1");
  if (batch < 1) throw InvalidConfig("batch must be >= 1");
  if (steps < 1) throw InvalidConfig("steps must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidConfig("alpha must be in [0, 1]");
  if (!(gamma >= 0.0)) throw InvalidConfig("gamma must be >= 0");
  if (threads < 1) throw InvalidConfig("threads must be >= 1");
  if (validate_every < 1) throw InvalidConfig("validate_every must be >= 1");
  resolved_schedule().validate();
}

nn::LrSchedule TrainConfig::resolved_schedule() const {
  if (schedule) return *schedule;
  nn::LrSchedule s;
  s.total_epochs = epochs;
  s.warmup_epochs = epochs == 30 ? 10 : static_cast<int>(epochs / 3);
  return s;
}

double validation_idf1(std::span<const Sequence> seqs,
                       const ModelParameters& params, const TrackerConfig& cfg,
                       int threads) {
  std::vector<EvalInput> inputs(seqs.size());
  parallel_for(seqs.size(), threads, [&](std::size_t i) {
    inputs[i] = {seqs[i].info.name, ground_truth_tracks(seqs[i]),
                 run_sequence(seqs[i], params, cfg)};
  });
  return evaluate(inputs).idf1;
}

TrainResult train(std::span<const Sequence> train_set,
                  std::span<const Sequence> val_set, const TrainConfig& cfg) {
  cfg.validate();
  detail::FlushDenormals ftz;
  const nn::LrSchedule sched = cfg.resolved_schedule();
  const nn::FocalLoss focal{cfg.alpha, cfg.gamma};

  std::vector<PairRef> pairs;
  for (std::size_t s = 0; s < train_set.size(); ++s) {
    const auto& frames = train_set[s].frames;
    for (std::size_t f = 0; f + 1 < frames.size(); ++f) {
      if (!frames[f].detections.empty() && !frames[f + 1].detections.empty()) {
        pairs.push_back({s, f});
      }
    }
    if (!frames.empty() && !train_set[s].has_gt_ids()) {
      throw NoTrainingData("training sequence '" + train_set[s].info.name +
                           "' has no ground-truth ids");
    }
  }
  if (pairs.empty()) throw NoTrainingData("no labelled frame pairs to train on");

  ModelParameters params = ModelParameters::random(cfg.seed);
  params.config.steps = cfg.steps;
  params.config.use_projection = cfg.use_projection;

  std::mt19937_64 rng(cfg.seed ^ 0xA5A5A5A5ULL);
  nn::AdamState adam;
  const std::size_t bsz = static_cast<std::size_t>(cfg.batch);
  std::vector<ModelGrad> grads(bsz, ModelGrad::zeros_like(params));
  std::vector<double> losses(bsz, 0.0);
  ModelGrad total = ModelGrad::zeros_like(params);

  TrainResult result;
  bool have_best = false;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = sched.lr_at(epoch - 1);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < pairs.size(); start += bsz) {
      const std::size_t n = std::min(bsz, pairs.size() - start);
      parallel_for(n, cfg.threads, [&](std::size_t k) {
        const PairRef& ref = pairs[start + k];
        const Sequence& seq = train_set[ref.seq];
        const TrainingPair tp =
            make_training_pair(seq.frames[ref.frame], seq.frames[ref.frame + 1],
                               seq.info, cfg.use_projection);
        grads[k].set_zero();
        losses[k] = pair_loss_and_grad(tp.graph, tp.labels, params, focal,
                                       cfg.steps, &grads[k]);
      });
      total.set_zero();
      for (std::size_t k = 0; k < n; ++k) {
        total += grads[k];
        epoch_loss += losses[k];
      }
      if (!std::isfinite(epoch_loss)) {
        throw NumericError("training loss became non-finite at epoch " +
                           std::to_string(epoch));
      }
      const auto slots = param_slots(params, total);
      adam.step(slots, lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = epoch_loss / static_cast<double>(pairs.size());
    rec.lr = lr;
    const bool validate_now =
        !val_set.empty() && (epoch % cfg.validate_every == 0 || epoch == cfg.epochs);
    if (validate_now) {
      rec.val_idf1 = validation_idf1(val_set, params, cfg.tracker, cfg.threads);
      if (!have_best || *rec.val_idf1 > *result.best.val_idf1) {
        result.best = {params, epoch, rec.val_idf1};
        have_best = true;
      }
    }
    result.history.push_back(rec);
    if (cfg.on_epoch) cfg.on_epoch(rec);
  }
  result.final_params = params;
  if (!have_best) result.best = {params, cfg.epochs, std::nullopt};
  return result;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  save_model(path, c.params, {c.epoch, c.val_idf1});
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  LoadedModel m = load_model(path);
  return {std::move(m.params), m.meta.epoch.value_or(0), m.meta.val_idf1};
}

}  // namespace rinktrack
