#include <gtest/gtest.h>

#include <algorithm>

#include "rinktrack/errors.hpp"
#include "rinktrack/io.hpp"
#include "rinktrack/metrics.hpp"
#include "rinktrack/simulator.hpp"
#include "rinktrack/training.hpp"
#include "test_util.hpp"

using namespace rinktrack;

namespace {

std::vector<Sequence> clean_set(int count, std::uint64_t seed, double seconds,
                                int players = 5) {
  std::vector<Sequence> out;
  for (int k = 0; k < count; ++k) {
    sim::SimConfig c;
    c.seed = seed + static_cast<std::uint64_t>(k);
    c.duration_s = seconds;
    c.n_players = players;
    c.embed_noise_sigma = 0.0;
    c.occlusion_drop_prob = 0.0;
    c.occlusion_mix = 0.0;
    c.name = "clean_" + std::to_string(k);
    out.push_back(sim::simulate(c).sequence);
  }
  return out;
}

bool same_params(const ModelParameters& a, const ModelParameters& b) {
  return encode_model(a) == encode_model(b);
}

}  // namespace

TEST(Labels, WorkedExamples) {
  const std::vector<int> same{4, 7, 9};
  const auto l = make_labels(same, same);
  EXPECT_EQ(std::count(l.begin(), l.end(), 1), 3);
  EXPECT_EQ(l.size(), 9u);
  EXPECT_EQ(l[0], 1);
  EXPECT_EQ(l[4], 1);
  EXPECT_EQ(l[8], 1);

  const std::vector<int> a{1, 2}, b{3, 4, 5};
  const auto none = make_labels(a, b);
  EXPECT_EQ(std::count(none.begin(), none.end(), 1), 0);

  // Player 1 exits, player 8 enters.
  const std::vector<int> prev{1, 2, 3}, curr{8, 3, 2};
  EXPECT_EQ(make_labels(prev, curr), (std::vector<int>{0, 0, 0, 0, 0, 1, 0, 1, 0}));
}

TEST(Labels, RejectsCorruptGroundTruth) {
  const std::vector<int> dup{1, 1}, ok{1, 2}, missing{-1, 2};
  EXPECT_THROW(make_labels(dup, ok), CorruptGroundTruth);
  EXPECT_THROW(make_labels(ok, dup), CorruptGroundTruth);
  EXPECT_THROW(make_labels(missing, ok), CorruptGroundTruth);
}

TEST(Labels, AtMostOnePositivePerNode) {
  const auto seqs = clean_set(1, 50, 1.0, 8);
  const auto& frames = seqs[0].frames;
  for (std::size_t f = 0; f + 1 < frames.size(); ++f) {
    const TrainingPair tp =
        make_training_pair(frames[f], frames[f + 1], seqs[0].info, true);
    const int np = static_cast<int>(tp.graph.prev_nodes.size());
    const int nc = static_cast<int>(tp.graph.curr_nodes.size());
    ASSERT_EQ(tp.labels.size(), static_cast<std::size_t>(np * nc));
    for (int i = 0; i < np; ++i) {
      int row = 0;
      for (int j = 0; j < nc; ++j) row += tp.labels[tp.graph.edge_index(i, j)];
      EXPECT_LE(row, 1);
    }
    for (int j = 0; j < nc; ++j) {
      int col = 0;
      for (int i = 0; i < np; ++i) col += tp.labels[tp.graph.edge_index(i, j)];
      EXPECT_LE(col, 1);
    }
  }
}

TEST(TrainingPairs, FreshNodesOnBothSides) {
  const auto seqs = clean_set(1, 51, 0.2);
  const TrainingPair tp =
      make_training_pair(seqs[0].frames[0], seqs[0].frames[1], seqs[0].info, true);
  for (const auto& n : tp.graph.prev_nodes) EXPECT_FALSE(n.carried);
  for (const auto& n : tp.graph.curr_nodes) EXPECT_FALSE(n.carried);
}

TEST(Train, RejectsEmptyOrUnlabelledData) {
  TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train({}, {}, cfg), NoTrainingData);

  auto seqs = clean_set(1, 52, 0.2);
  for (auto& f : seqs[0].frames) {
    for (auto& d : f.detections) d.gt_id = -1;
  }
  EXPECT_THROW(train(seqs, {}, cfg), NoTrainingData);

  Sequence single = clean_set(1, 53, 0.2)[0];
  single.frames.resize(1);
  const std::vector<Sequence> one{single};
  EXPECT_THROW(train(one, {}, cfg), NoTrainingData);
}

TEST(Train, ConfigValidation) {
  TrainConfig cfg;
  cfg.batch = 0;
  EXPECT_THROW(cfg.validate(), InvalidConfig);
  cfg = {};
  cfg.steps = 0;
  EXPECT_THROW(cfg.validate(), InvalidConfig);
  cfg = {};
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), InvalidConfig);
}

TEST(Train, DefaultScheduleEndpoints) {
  const nn::LrSchedule s = TrainConfig{}.resolved_schedule();
  EXPECT_NEAR(s.lr_at(10), 0.01, 1e-15);
  EXPECT_NEAR(s.lr_at(30), 0.001, 1e-15);
}

TEST(Train, DeterministicUnderSeed) {
  const auto seqs = clean_set(2, 60, 0.5);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 7;
  const TrainResult a = train(seqs, seqs, cfg);
  const TrainResult b = train(seqs, seqs, cfg);
  EXPECT_TRUE(same_params(a.final_params, b.final_params));
  EXPECT_TRUE(same_params(a.best.params, b.best.params));
  ASSERT_EQ(a.history.size(), 2u);
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    EXPECT_EQ(a.history[k].loss, b.history[k].loss);
  }
  cfg.threads = 3;
  const TrainResult c = train(seqs, seqs, cfg);
  EXPECT_TRUE(same_params(a.final_params, c.final_params));
}

TEST(Train, HistoryAndValidationCadence) {
  const auto seqs = clean_set(1, 61, 0.3);
  TrainConfig cfg;
  cfg.epochs = 5;
  int calls = 0;
  cfg.on_epoch = [&](const EpochRecord&) { ++calls; };
  const TrainResult r = train(seqs, seqs, cfg);
  EXPECT_EQ(calls, 5);
  ASSERT_EQ(r.history.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(r.history[k].epoch, static_cast<int>(k) + 1);
    EXPECT_GE(r.history[k].loss, 0.0);
    const bool validated = (k + 1) % 2 == 0 || k == 4;
    EXPECT_EQ(r.history[k].val_idf1.has_value(), validated);
  }
  double best = -1.0;
  for (const auto& h : r.history) {
    if (h.val_idf1) best = std::max(best, *h.val_idf1);
  }
  EXPECT_EQ(*r.best.val_idf1, best);
}

TEST(Train, LossDecreasesOverFirstEpochs) {
  std::vector<double> first, last;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto seqs = clean_set(2, 100 + 10 * seed, 1.0);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = seed;
    cfg.schedule = TrainConfig{}.resolved_schedule();
    const TrainResult r = train(seqs, {}, cfg);
    first.push_back(r.history.front().loss);
    last.push_back(r.history.back().loss);
  }
  std::vector<double> drop(5);
  for (int k = 0; k < 5; ++k) drop[k] = first[k] - last[k];
  std::sort(drop.begin(), drop.end());
  EXPECT_GT(drop[2], 0.0);
}

TEST(Train, ZeroNoiseEndToEndIsPerfect) {
  const auto seqs = clean_set(4, 70, 3.0, 6);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 1;
  const TrainResult r = train(seqs, seqs, cfg);
  std::vector<EvalInput> in;
  for (const auto& s : seqs) {
    in.push_back({s.info.name, ground_truth_tracks(s), run_sequence(s, r.best.params)});
  }
  const MetricsReport m = evaluate(in);
  EXPECT_EQ(m.idf1, 1.0);
  EXPECT_EQ(m.idsw, 0);
}

TEST(Checkpoint, RoundTrip) {
  testutil::TempDir dir("ckpt");
  Checkpoint c{ModelParameters::random(3), 14, 0.9375};
  c.params.config.steps = 3;
  save_checkpoint(dir / "c.bin", c);
  const Checkpoint back = load_checkpoint(dir / "c.bin");
  EXPECT_TRUE(same_params(back.params, c.params));
  EXPECT_EQ(back.epoch, 14);
  EXPECT_EQ(*back.val_idf1, 0.9375);

  const std::string bytes = read_file(dir / "c.bin");
  write_file(dir / "t.bin", bytes.substr(0, bytes.size() - 9));
  EXPECT_THROW(load_checkpoint(dir / "t.bin"), CorruptModelFile);
}
