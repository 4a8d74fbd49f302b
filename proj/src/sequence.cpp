#include "rinktrack/sequence.hpp"

namespace rinktrack {

bool Sequence::has_gt_ids() const {
  bool any = false;
  for (const auto& f : frames) {
    for (const auto& d : f.detections) {
      if (d.gt_id < 0) return false;
      any = true;
    }
  }
  return any;
}

std::size_t Sequence::detection_count() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.detections.size();
  return n;
}

TrackOutput ground_truth_tracks(const Sequence& seq) {
  TrackOutput out;
  for (const auto& f : seq.frames) {
    for (const auto& d : f.detections) {
      out.rows.push_back({f.frame_id, d.gt_id, d.box, 1.0});
    }
  }
  return out;
}

}  // namespace rinktrack
