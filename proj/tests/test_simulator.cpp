#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "rinktrack/errors.hpp"
#include "rinktrack/io.hpp"
#include "rinktrack/simulator.hpp"
#include "test_util.hpp"

using namespace rinktrack;
using namespace rinktrack::sim;

namespace {

SimConfig short_cfg(std::uint64_t seed) {
  SimConfig c;
  c.seed = seed;
  c.duration_s = 3.0;
  return c;
}

// Condition number with both planes rescaled to unit extent, so that pixel
// and rink units do not dominate the singular values.
double condition(const HomographyMatrix& h, const SimConfig& cfg) {
  const Eigen::Matrix3d to_unit_rink =
      Eigen::Vector3d(1.0 / cfg.rink.length, 1.0 / cfg.rink.length, 1.0).asDiagonal();
  const Eigen::Matrix3d from_unit_image =
      Eigen::Vector3d(cfg.img_width, cfg.img_width, 1.0).asDiagonal();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(to_unit_rink * h.matrix() * from_unit_image);
  const auto& s = svd.singularValues();
  return s(0) / s(2);
}

}  // namespace

TEST(SimConfig, Validation) {
  SimConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.frame_count(), 300);
  c.occlusion_mix = 1.5;
  EXPECT_THROW(c.validate(), InvalidConfig);
  c = {};
  c.occlusion_drop_prob = -0.1;
  EXPECT_THROW(c.validate(), InvalidConfig);
  c = {};
  c.embed_noise_sigma = -1.0;
  EXPECT_THROW(c.validate(), InvalidConfig);
  c = {};
  c.fps = 25;
  EXPECT_THROW(c.validate(), InvalidConfig);
}

TEST(Trajectories, DeterministicUnderSeed) {
  const auto a = gen_trajectories(short_cfg(3));
  const auto b = gen_trajectories(short_cfg(3));
  const auto c = gen_trajectories(short_cfg(4));
  ASSERT_EQ(a.size(), 10u);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(a[i].prototype == b[i].prototype);
    for (std::size_t t = 0; t < a[i].position.size(); ++t) {
      EXPECT_EQ(a[i].position[t].rx, b[i].position[t].rx);
      EXPECT_EQ(a[i].position[t].ry, b[i].position[t].ry);
    }
    differs |= a[i].position[5].rx != c[i].position[5].rx;
  }
  EXPECT_TRUE(differs);
}

TEST(Trajectories, SpeedCapAndRinkBounds) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SimConfig cfg = short_cfg(seed);
    cfg.crossing_interval_s = seed % 2 ? 1.0 : 0.0;
    const auto players = gen_trajectories(cfg);
    for (const auto& p : players) {
      ASSERT_EQ(p.position.size(), static_cast<std::size_t>(cfg.frame_count()));
      for (std::size_t t = 0; t < p.position.size(); ++t) {
        EXPECT_LE(std::hypot(p.velocity[t].rx, p.velocity[t].ry), cfg.max_speed + 1e-9);
        EXPECT_GE(p.position[t].rx, 0.0);
        EXPECT_LE(p.position[t].rx, cfg.rink.length);
        EXPECT_GE(p.position[t].ry, 0.0);
        EXPECT_LE(p.position[t].ry, cfg.rink.width);
      }
    }
  }
}

TEST(Trajectories, PrototypesUnitAndDistinct) {
  const auto players = gen_trajectories(short_cfg(5));
  for (std::size_t i = 0; i < players.size(); ++i) {
    EXPECT_NEAR(players[i].prototype.norm(), 1.0, 1e-12);
    for (std::size_t j = i + 1; j < players.size(); ++j) {
      EXPECT_LT(players[i].prototype.dot(players[j].prototype), 1.0 - 1e-6);
    }
  }
}

TEST(Camera, StaticCameraIsConstant) {
  SimConfig cfg = short_cfg(1);
  cfg.static_camera = true;
  const auto cams = gen_camera(cfg);
  for (const auto& h : cams) EXPECT_EQ(h, cams.front());
}

TEST(Camera, SmoothInvertibleAndConditioned) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SimConfig cfg = short_cfg(seed);
    const auto params = gen_camera_params(cfg);
    for (std::size_t t = 1; t < params.size(); ++t) {
      EXPECT_LE(std::abs(params[t].pan - params[t - 1].pan), kMaxPanStep + 1e-12);
      EXPECT_LE(std::abs(params[t].zoom - params[t - 1].zoom), kMaxZoomStep + 1e-12);
      EXPECT_LE(std::abs(params[t].shear - params[t - 1].shear), kMaxShearStep + 1e-12);
    }
    double worst = 0.0;
    for (const auto& h : gen_camera(cfg)) {
      EXPECT_NO_THROW(invert(h));
      EXPECT_LE(condition(h, cfg), 1e4);
      worst = std::max(worst, condition(h, cfg));
    }
    RecordProperty("worst_condition_" + std::to_string(seed), std::to_string(worst));
  }
}

TEST(Render, FootpointsReprojectOntoTruth) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const SimConfig cfg = short_cfg(seed);
    const auto truth = gen_trajectories(cfg);
    const Rendered r = render(truth, gen_camera(cfg), cfg);
    for (std::size_t t = 0; t < r.sequence.frames.size(); ++t) {
      const FrameData& f = r.sequence.frames[t];
      for (const auto& d : f.detections) {
        const RinkPoint p = project(*f.homography, footpoint(d.box));
        const RinkPoint& want = truth[static_cast<std::size_t>(d.gt_id)].position[t];
        EXPECT_LE(std::hypot(p.rx - want.rx, p.ry - want.ry), 1e-6);
      }
    }
  }
}

TEST(Render, UnitEmbeddingsAndRowCounts) {
  const Rendered r = simulate(short_cfg(7));
  ASSERT_EQ(r.raw_embeddings.size(), r.sequence.frames.size());
  std::size_t rows = 0;
  for (std::size_t t = 0; t < r.sequence.frames.size(); ++t) {
    const FrameData& f = r.sequence.frames[t];
    ASSERT_EQ(f.embeddings.size(), f.detections.size());
    ASSERT_EQ(r.raw_embeddings[t].size(), f.detections.size());
    for (const auto& e : f.embeddings) EXPECT_NEAR(e.values().norm(), 1.0, 1e-12);
    std::vector<int> ids;
    for (const auto& d : f.detections) ids.push_back(d.gt_id);
    std::sort(ids.begin(), ids.end());
    EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
    rows += f.detections.size();
  }
  EXPECT_EQ(rows, r.gt.rows.size());
}

TEST(Render, ZeroNoiseWithoutOcclusionKeepsEmbeddingsConstant) {
  SimConfig cfg = short_cfg(2);
  cfg.embed_noise_sigma = 0.0;
  cfg.occlusion_radius = 0.0;
  const Rendered r = simulate(cfg);
  EXPECT_EQ(r.occlusion_events, 0);
  std::map<int, Eigen::VectorXd> first;
  for (const auto& f : r.sequence.frames) {
    for (std::size_t k = 0; k < f.detections.size(); ++k) {
      const int id = f.detections[k].gt_id;
      if (!first.count(id)) first[id] = f.embeddings[k].values();
      EXPECT_TRUE(f.embeddings[k].values() == first[id]);
    }
  }
}

TEST(Render, CoincidentPlayersDropOne) {
  SimConfig cfg;
  cfg.n_players = 2;
  cfg.duration_s = 0.1;
  cfg.occlusion_drop_prob = 1.0;
  cfg.static_camera = true;
  auto truth = gen_trajectories(cfg);
  truth[1].position = truth[0].position;
  const Rendered r = render(truth, gen_camera(cfg), cfg);
  for (const auto& f : r.sequence.frames) EXPECT_EQ(f.detections.size(), 1u);
  EXPECT_EQ(r.dropped, cfg.frame_count());
}

TEST(Render, SinglePlayerHasNoOcclusions) {
  SimConfig cfg = short_cfg(1);
  cfg.n_players = 1;
  EXPECT_EQ(simulate(cfg).occlusion_events, 0);
}

TEST(Render, OcclusionsHappenAtDefaults) {
  std::vector<int> events;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SimConfig cfg;
    cfg.seed = seed;
    events.push_back(simulate(cfg).occlusion_events);
  }
  std::sort(events.begin(), events.end());
  EXPECT_GE(events[2], 1);
}

TEST(Render, Deterministic) {
  const Rendered a = simulate(short_cfg(11));
  const Rendered b = simulate(short_cfg(11));
  EXPECT_EQ(a.gt, b.gt);
  EXPECT_EQ(a.raw_embeddings, b.raw_embeddings);
}

TEST(EmitDataset, ReingestsLosslessly) {
  testutil::TempDir dir("emit");
  SimConfig cfg = short_cfg(4);
  cfg.duration_s = 1.0;
  emit_dataset(dir.path(), cfg);
  const Sequence s = parse_sequence(dir.path());
  const Rendered r = simulate(cfg);
  EXPECT_EQ(s.detection_count(), r.gt.rows.size());
  EXPECT_EQ(read_embeddings(dir / "embeddings.bin").size(), s.detection_count());
  EXPECT_EQ(parse_tracks(dir / "gt.csv"), r.gt);
  EXPECT_EQ(ground_truth_tracks(s), r.gt);

  testutil::TempDir again("emit2");
  write_sequence(again.path(), s);
  for (const char* f : {"seq.ini", "det.csv", "homography.csv"}) {
    EXPECT_EQ(read_file(dir / f), read_file(again / f)) << f;
  }

  testutil::TempDir twice("emit3");
  emit_dataset(twice.path(), cfg);
  for (const char* f : {"seq.ini", "det.csv", "homography.csv", "embeddings.bin", "gt.csv"}) {
    EXPECT_EQ(read_file(dir / f), read_file(twice / f)) << f;
  }
}

TEST(EmitDataset, UnwritablePath) {
  testutil::TempDir dir("blocked");
  write_file(dir / "file", "x");
  EXPECT_THROW(emit_dataset(dir / "file" / "sub", short_cfg(1)), IoError);
}
