#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "rinktrack/geometry.hpp"
#include "rinktrack/sequence.hpp"

namespace rinktrack::sim {

struct SimConfig {
  std::string name = "sim";
  int n_players = 10;
  int fps = 30;
  double duration_s = 10.0;
  double occlusion_radius = 3.0;    // rink units, measured on the image
  double occlusion_drop_prob = 0.02;
  double embed_noise_sigma = 0.05;  // expected norm of the noise vector
  double occlusion_mix = 0.3;
  std::uint64_t seed = 0;

  // Scene shaping beyond the core knobs.
  int img_width = 1280;
  int img_height = 720;
  RinkTemplate rink;
  double max_speed = 30.0;          // rink units per second
  double team_similarity = 0.5;     // weight of the shared team direction
  bool static_camera = false;
  double crossing_interval_s = 0.0; // 0 disables forced crossings

  /// Throws InvalidConfig when a field is out of range.
  void validate() const;
  int frame_count() const;
};

struct PlayerTruth {
  int identity = 0;
  int team = 0;
  std::vector<RinkPoint> position;  // per frame
  std::vector<RinkPoint> velocity;
  Eigen::VectorXd prototype;        // unit 512-d
};

/// Broadcast camera pose for one frame.
struct CameraParams {
  double pan = 100.0;   // rink x at the image centre
  double zoom = 1.0;
  double shear = 0.0;
};

// Limits shared by the generator and its tests.
inline constexpr double kMaxPanStep = 0.5;
inline constexpr double kMaxZoomStep = 0.002;
inline constexpr double kMaxShearStep = 0.002;
inline constexpr double kWallMargin = 2.0;

std::vector<PlayerTruth> gen_trajectories(const SimConfig& cfg);

std::vector<CameraParams> gen_camera_params(const SimConfig& cfg);
/// Rink -> image map for one camera pose.
HomographyMatrix rink_to_image(const CameraParams& c, const SimConfig& cfg);
/// Per-frame image -> rink homographies.
std::vector<HomographyMatrix> gen_camera(const SimConfig& cfg);

struct Rendered {
  Sequence sequence;       // detections carry gt ids
  TrackOutput gt;          // boxes and ids, conf 1
  std::vector<std::vector<std::vector<float>>> raw_embeddings;  // [frame][det]
  int occlusion_events = 0;
  int dropped = 0;
};

Rendered render(const std::vector<PlayerTruth>& truth,
                const std::vector<HomographyMatrix>& cameras,
                const SimConfig& cfg);

/// gen_trajectories + gen_camera + render.
Rendered simulate(const SimConfig& cfg);

/// Writes the full on-disk sequence layout, including gt.csv.
void emit_dataset(const std::filesystem::path& out_dir, const SimConfig& cfg);

}  // namespace rinktrack::sim
