#include "rinktrack/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rinktrack/errors.hpp"
#include "rinktrack/features.hpp"
#include "rinktrack/io.hpp"

namespace rinktrack::sim {
namespace {

// Camera model constants: pixels per rink unit at zoom 1, vertical
// foreshortening of the ice plane, and depth-dependent perspective strength.
constexpr double kBaseScale = 4.2;
constexpr double kTilt = 0.5;
constexpr double kPerspective = 0.3;
constexpr double kVerticalOffset = 40.0;
constexpr double kPlayerHeight = 6.0;
constexpr double kBoxAspect = 0.45;

constexpr double kPanMin = 88.0, kPanMax = 112.0;
constexpr double kZoomMin = 0.93, kZoomMax = 1.05;
constexpr double kShearMax = 0.05;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t salt) {
  return std::mt19937_64(splitmix(seed ^ splitmix(salt)));
}

Eigen::VectorXd random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(kEmbeddingDim);
  for (int i = 0; i < kEmbeddingDim; ++i) v[i] = n(rng);
  return v / v.norm();
}

double reflect(double x, double lo, double hi, double& vel) {
  if (x < lo) {
    x = 2.0 * lo - x;
    vel = -vel;
  } else if (x > hi) {
    x = 2.0 * hi - x;
    vel = -vel;
  }
  return std::clamp(x, lo, hi);
}

RinkPoint random_waypoint(std::mt19937_64& rng, const RinkTemplate& r) {
  std::uniform_real_distribution<double> ux(10.0, r.length - 10.0);
  std::uniform_real_distribution<double> uy(8.0, r.width - 8.0);
  const double x = ux(rng);
  return {x, uy(rng)};
}

RinkPoint clamp_inside(RinkPoint p, const RinkTemplate& r) {
  p.rx = std::clamp(p.rx, kWallMargin, r.length - kWallMargin);
  p.ry = std::clamp(p.ry, kWallMargin, r.width - kWallMargin);
  return p;
}

}  // namespace

void SimConfig::validate() const {
  if (n_players < 0) throw InvalidConfig("n_players must be >= 0");
  if (fps != 30 && fps != 60) throw InvalidConfig("fps must be 30 or 60");
  if (!(duration_s > 0.0)) throw InvalidConfig("duration must be positive");
  if (!(occlusion_radius >= 0.0)) throw InvalidConfig("occlusion radius < 0");
  if (!(occlusion_drop_prob >= 0.0 && occlusion_drop_prob <= 1.0)) {
    throw InvalidConfig("occlusion drop probability must be in [0, 1]");
  }
  if (!(occlusion_mix >= 0.0 && occlusion_mix <= 1.0)) {
    throw InvalidConfig("occlusion mix must be in [0, 1]");
  }
  if (!(embed_noise_sigma >= 0.0)) throw InvalidConfig("noise sigma < 0");
  if (!(team_similarity >= 0.0 && team_similarity < 1.0)) {
    throw InvalidConfig("team similarity must be in [0, 1)");
  }
  if (!(max_speed > 0.0)) throw InvalidConfig("max speed must be positive");
  if (!(rink.length > 0.0 && rink.width > 0.0)) {
    throw InvalidConfig("rink template must have positive size");
  }
  if (img_width <= 0 || img_height <= 0) {
    throw InvalidConfig("image size must be positive");
  }
}

int SimConfig::frame_count() const {
  return std::max(1, static_cast<int>(std::lround(duration_s * fps)));
}

std::vector<PlayerTruth> gen_trajectories(const SimConfig& cfg) {
  cfg.validate();
  auto rng = stream(cfg.seed, 1);
  const int frames = cfg.frame_count();
  const double dt = 1.0 / cfg.fps;
  const RinkTemplate& rink = cfg.rink;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const Eigen::VectorXd team_dir[2] = {random_unit(rng), random_unit(rng)};
  const double ts = cfg.team_similarity;

  struct State {
    RinkPoint pos, vel, acc_noise, waypoint;
    double cruise;
  };
  std::vector<PlayerTruth> players(static_cast<std::size_t>(cfg.n_players));
  std::vector<State> st(players.size());
  for (int i = 0; i < cfg.n_players; ++i) {
    auto& p = players[i];
    p.identity = i;
    p.team = i % 2;
    const Eigen::VectorXd mix = ts * team_dir[p.team] + (1.0 - ts) * random_unit(rng);
    p.prototype = mix / mix.norm();
    // Spread initial positions out so the first frames are unambiguous.
    RinkPoint start;
    for (int attempt = 0; attempt < 200; ++attempt) {
      start = random_waypoint(rng, rink);
      bool ok = true;
      for (int k = 0; k < i; ++k) {
        if (std::hypot(st[k].pos.rx - start.rx, st[k].pos.ry - start.ry) < 8.0) {
          ok = false;
        }
      }
      if (ok) break;
    }
    st[i].pos = start;
    st[i].vel = {0.0, 0.0};
    st[i].acc_noise = {0.0, 0.0};
    st[i].waypoint = random_waypoint(rng, rink);
    st[i].cruise = cfg.max_speed * (0.35 + 0.4 * unit(rng));
  }

  constexpr double kSeekGain = 2.0;
  constexpr double kNoiseReversion = 1.5;
  constexpr double kNoiseScale = 12.0;
  const int crossing_every =
      cfg.crossing_interval_s > 0.0
          ? std::max(1, static_cast<int>(std::lround(cfg.crossing_interval_s * cfg.fps)))
          : 0;

  for (int t = 0; t < frames; ++t) {
    if (t > 0) {
      if (crossing_every > 0 && cfg.n_players >= 2 && t % crossing_every == 0) {
        std::uniform_int_distribution<int> pick(0, cfg.n_players - 1);
        const int a = pick(rng);
        int b = pick(rng);
        if (b == a) b = (a + 1) % cfg.n_players;
        const RinkPoint pa = st[a].pos, pb = st[b].pos;
        st[a].waypoint = clamp_inside(
            {pb.rx + 0.6 * (pb.rx - pa.rx), pb.ry + 0.6 * (pb.ry - pa.ry)}, rink);
        st[b].waypoint = clamp_inside(
            {pa.rx + 0.6 * (pa.rx - pb.rx), pa.ry + 0.6 * (pa.ry - pb.ry)}, rink);
        st[a].cruise = st[b].cruise = 0.7 * cfg.max_speed;
      }
      for (auto& s : st) {
        const double dx = s.waypoint.rx - s.pos.rx;
        const double dy = s.waypoint.ry - s.pos.ry;
        const double dist = std::hypot(dx, dy);
        if (dist < 5.0) {
          s.waypoint = random_waypoint(rng, rink);
          s.cruise = cfg.max_speed * (0.35 + 0.4 * unit(rng));
        }
        const double dvx = dist > 1e-9 ? s.cruise * dx / dist : 0.0;
        const double dvy = dist > 1e-9 ? s.cruise * dy / dist : 0.0;
        const double sq = std::sqrt(dt);
        s.acc_noise.rx += -kNoiseReversion * s.acc_noise.rx * dt +
                          kNoiseScale * sq * gauss(rng);
        s.acc_noise.ry += -kNoiseReversion * s.acc_noise.ry * dt +
                          kNoiseScale * sq * gauss(rng);
        s.vel.rx += (kSeekGain * (dvx - s.vel.rx) + s.acc_noise.rx) * dt;
        s.vel.ry += (kSeekGain * (dvy - s.vel.ry) + s.acc_noise.ry) * dt;
        const double speed = std::hypot(s.vel.rx, s.vel.ry);
        if (speed > cfg.max_speed) {
          s.vel.rx *= cfg.max_speed / speed;
          s.vel.ry *= cfg.max_speed / speed;
        }
        s.pos.rx = reflect(s.pos.rx + s.vel.rx * dt, kWallMargin,
                           rink.length - kWallMargin, s.vel.rx);
        s.pos.ry = reflect(s.pos.ry + s.vel.ry * dt, kWallMargin,
                           rink.width - kWallMargin, s.vel.ry);
      }
    }
    for (std::size_t i = 0; i < players.size(); ++i) {
      players[i].position.push_back(st[i].pos);
      players[i].velocity.push_back(st[i].vel);
    }
  }
  return players;
}

std::vector<CameraParams> gen_camera_params(const SimConfig& cfg) {
  cfg.validate();
  auto rng = stream(cfg.seed, 2);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int frames = cfg.frame_count();
  std::vector<CameraParams> out;
  out.reserve(static_cast<std::size_t>(frames));
  CameraParams c;
  if (cfg.static_camera) {
    out.assign(static_cast<std::size_t>(frames), c);
    return out;
  }
  double vp = 0.0, vz = 0.0, vs = 0.0;
  for (int t = 0; t < frames; ++t) {
    if (t > 0) {
      vp = std::clamp(0.97 * vp + 0.05 * gauss(rng), -kMaxPanStep, kMaxPanStep);
      vz = std::clamp(0.97 * vz + 0.0003 * gauss(rng), -kMaxZoomStep, kMaxZoomStep);
      vs = std::clamp(0.97 * vs + 0.0003 * gauss(rng), -kMaxShearStep, kMaxShearStep);
      c.pan = reflect(c.pan + vp, kPanMin, kPanMax, vp);
      c.zoom = reflect(c.zoom + vz, kZoomMin, kZoomMax, vz);
      c.shear = reflect(c.shear + vs, -kShearMax, kShearMax, vs);
    }
    out.push_back(c);
  }
  return out;
}

HomographyMatrix rink_to_image(const CameraParams& c, const SimConfig& cfg) {
  const double s = kBaseScale * c.zoom;
  const double yc = cfg.rink.width / 2.0;
  Eigen::Matrix3d to_rink_centre, body, to_image;
  to_rink_centre << 1, 0, -c.pan, 0, 1, -yc, 0, 0, 1;
  body << s, s * c.shear, 0, 0, -s * kTilt, 0, 0, kPerspective / cfg.rink.width, 1;
  to_image << 1, 0, cfg.img_width / 2.0, 0, 1,
      cfg.img_height / 2.0 + kVerticalOffset, 0, 0, 1;
  return HomographyMatrix::from_matrix(to_image * body * to_rink_centre);
}

std::vector<HomographyMatrix> gen_camera(const SimConfig& cfg) {
  std::vector<HomographyMatrix> out;
  for (const auto& c : gen_camera_params(cfg)) {
    out.push_back(invert(rink_to_image(c, cfg)));
  }
  return out;
}

Rendered render(const std::vector<PlayerTruth>& truth,
                const std::vector<HomographyMatrix>& cameras,
                const SimConfig& cfg) {
  cfg.validate();
  auto rng = stream(cfg.seed, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double noise = cfg.embed_noise_sigma / std::sqrt(double(kEmbeddingDim));
  const auto params = gen_camera_params(cfg);

  Rendered out;
  out.sequence.info = {cfg.name, cfg.fps, cfg.img_width, cfg.img_height, cfg.rink};
  const int frames = static_cast<int>(cameras.size());
  for (int t = 0; t < frames; ++t) {
    const HomographyMatrix to_image = invert(cameras[t]);
    const CameraParams& cam = params[static_cast<std::size_t>(t)];
    const double px_per_unit = kBaseScale * cam.zoom;

    struct Obs {
      int player;
      ImagePoint foot;
      double ry;
      Eigen::VectorXd emb;
      bool dropped = false;
    };
    std::vector<Obs> obs;
    for (const auto& p : truth) {
      const RinkPoint rp = p.position[static_cast<std::size_t>(t)];
      const RinkPoint img = project(to_image, ImagePoint{rp.rx, rp.ry});
      Obs o{p.identity, {img.rx, img.ry}, rp.ry, p.prototype};
      for (int k = 0; k < kEmbeddingDim; ++k) o.emb[k] += noise * gauss(rng);
      o.emb /= o.emb.norm();
      obs.push_back(std::move(o));
    }
    for (std::size_t a = 0; a < obs.size(); ++a) {
      for (std::size_t b = a + 1; b < obs.size(); ++b) {
        const double d = std::hypot(obs[a].foot.u - obs[b].foot.u,
                                    obs[a].foot.v - obs[b].foot.v) /
                         px_per_unit;
        if (d >= cfg.occlusion_radius) continue;
        ++out.occlusion_events;
        const double u = unit(rng);
        if (obs[a].dropped || obs[b].dropped) continue;
        if (u < cfg.occlusion_drop_prob) {
          (obs[a].ry > obs[b].ry ? obs[a] : obs[b]).dropped = true;
          ++out.dropped;
        } else {
          const Eigen::VectorXd ea = obs[a].emb, eb = obs[b].emb;
          const double m = cfg.occlusion_mix;
          obs[a].emb = (1.0 - m) * ea + m * eb;
          obs[b].emb = (1.0 - m) * eb + m * ea;
          for (auto* e : {&obs[a].emb, &obs[b].emb}) {
            const double n = e->norm();
            if (n > 1e-12) *e /= n;
          }
        }
      }
    }

    FrameData frame;
    frame.frame_id = t + 1;
    frame.homography = cameras[t];
    std::vector<std::vector<float>> raw;
    std::vector<std::size_t> order(obs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return obs[x].foot.u < obs[y].foot.u;
    });
    for (std::size_t k : order) {
      const Obs& o = obs[k];
      if (o.dropped) continue;
      if (o.foot.u < 0 || o.foot.u > cfg.img_width || o.foot.v < 0 ||
          o.foot.v > cfg.img_height) {
        continue;
      }
      const double yc = cfg.rink.width / 2.0;
      const double w = 1.0 + kPerspective * (o.ry - yc) / cfg.rink.width;
      const double ht = kPlayerHeight * px_per_unit / w;
      const double wd = kBoxAspect * ht;
      Detection det;
      det.box = {o.foot.u - wd / 2.0, o.foot.v - ht, wd, ht};
      det.conf = 1.0;
      det.gt_id = o.player;
      std::vector<float> f(kEmbeddingDim);
      for (int i = 0; i < kEmbeddingDim; ++i) f[i] = static_cast<float>(o.emb[i]);
      frame.embeddings.push_back(l2_normalize(std::span<const float>(f)));
      frame.detections.push_back(det);
      out.gt.rows.push_back({frame.frame_id, o.player, det.box, 1.0});
      raw.push_back(std::move(f));
    }
    out.sequence.frames.push_back(std::move(frame));
    out.raw_embeddings.push_back(std::move(raw));
  }
  return out;
}

Rendered simulate(const SimConfig& cfg) {
  return render(gen_trajectories(cfg), gen_camera(cfg), cfg);
}

void emit_dataset(const std::filesystem::path& out_dir, const SimConfig& cfg) {
  const Rendered r = simulate(cfg);
  write_sequence(out_dir, r.sequence, &r.raw_embeddings);
  write_tracks(out_dir / "gt.csv", r.gt);
}

}  // namespace rinktrack::sim
