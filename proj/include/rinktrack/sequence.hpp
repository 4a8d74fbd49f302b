#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rinktrack/features.hpp"
#include "rinktrack/geometry.hpp"

namespace rinktrack {

struct Detection {
  BoundingBox box;
  double conf = 1.0;
  int gt_id = -1;  // -1 when identity is unknown (inference input)
};

struct FrameData {
  int frame_id = 0;
  std::optional<HomographyMatrix> homography;  // image -> rink
  std::vector<Detection> detections;
  std::vector<ReIDEmbedding> embeddings;  // parallel to detections
};

struct SequenceInfo {
  std::string name = "sequence";
  int fps = 30;
  int img_width = 1280;
  int img_height = 720;
  RinkTemplate rink;
};

struct Sequence {
  SequenceInfo info;
  std::vector<FrameData> frames;  // strictly increasing frame ids

  /// True when every detection carries a ground-truth identity.
  bool has_gt_ids() const;
  std::size_t detection_count() const;
};

struct TrackRow {
  int frame_id = 0;
  int track_id = 0;
  BoundingBox box;
  double conf = 1.0;

  bool operator==(const TrackRow&) const = default;
};

/// Per-frame identity assignments, ordered by frame then emission order.
struct TrackOutput {
  std::vector<TrackRow> rows;

  bool operator==(const TrackOutput&) const = default;
};

/// Ground-truth rows of a labelled sequence in tracking-output form.
TrackOutput ground_truth_tracks(const Sequence& seq);

}  // namespace rinktrack
