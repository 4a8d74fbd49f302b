#pragma once

#include <span>
#include <vector>

#include "rinktrack/graph_mpn.hpp"
#include "rinktrack/sequence.hpp"

namespace rinktrack {

enum class ResolveMode {
  kGreedy,   // descending score, accept when both endpoints are free
  kOptimal,  // maximum total score assignment
};

struct TrackerConfig {
  double xi = 0.9;
  ResolveMode resolve = ResolveMode::kGreedy;
  /// Previous-frame nodes reuse their post-message-passing state instead of
  /// being re-encoded from raw features. Off by default: training only ever
  /// sees freshly encoded nodes.
  bool carry_states = false;
};

struct ScoredEdge {
  int prev = 0;
  int curr = 0;
  double score = 0.0;

  bool operator==(const ScoredEdge&) const = default;
};

/// One-to-one subset of the surviving edges.
struct Matching {
  std::vector<ScoredEdge> pairs;
};

/// Identity bookkeeping across frames. active[i] is the track id held by
/// node i of the most recent frame.
struct TrackletStore {
  int next_id = 0;
  std::vector<int> active;
};

/// Edges with score strictly above xi.
std::vector<ScoredEdge> prune(std::span<const ScoredEdge> scores, double xi);

/// Greedy many-to-one removal: sort by score descending (ties by prev, then
/// curr ascending) and accept an edge iff both endpoints are unmatched.
Matching resolve_violations(std::span<const ScoredEdge> kept);
/// Maximum-total-score alternative to resolve_violations.
Matching resolve_optimal(std::span<const ScoredEdge> kept);

/// Matched current nodes inherit their partner's id; the rest receive fresh
/// ids in detection order. Rebuilds store.active for the current frame.
std::vector<int> assign_ids(const Matching& m, TrackletStore& store,
                            int num_curr);

/// Graph nodes for every detection of a frame. Throws MissingHomography when
/// the frame has no homography.
std::vector<GraphNode> make_nodes(const FrameData& frame,
                                  const RinkTemplate& rink,
                                  bool use_projection);

struct StepResult {
  std::vector<int> ids;              // per current detection
  std::vector<GraphNode> learned;    // carried into the next step
  std::vector<ScoredEdge> scores;    // final-step score of every edge
  std::vector<ScoredEdge> pruned;
  Matching matching;
  bool ran_mpn = false;
};

/// One online association step between the learned previous frame and the
/// detections of the current frame.
StepResult step(const std::vector<GraphNode>& prev_learned,
                const FrameData& frame, const SequenceInfo& info,
                const ModelParameters& params, const TrackerConfig& cfg,
                TrackletStore& store);

TrackOutput run_sequence(const Sequence& seq, const ModelParameters& params,
                         const TrackerConfig& cfg = {});

}  // namespace rinktrack
