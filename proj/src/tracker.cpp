#include "rinktrack/tracker.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "rinktrack/assignment.hpp"
#include "rinktrack/errors.hpp"
#include "fp_guard.hpp"

namespace rinktrack {

std::vector<ScoredEdge> prune(std::span<const ScoredEdge> scores, double xi) {
  std::vector<ScoredEdge> kept;
  for (const auto& e : scores) {
    if (e.score > xi) kept.push_back(e);
  }
  return kept;
}

Matching resolve_violations(std::span<const ScoredEdge> kept) {
  std::vector<ScoredEdge> order(kept.begin(), kept.end());
  std::sort(order.begin(), order.end(),
            [](const ScoredEdge& a, const ScoredEdge& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.prev != b.prev) return a.prev < b.prev;
              return a.curr < b.curr;
            });
  std::vector<int> used_prev, used_curr;
  Matching m;
  for (const auto& e : order) {
    const bool prev_free =
        std::find(used_prev.begin(), used_prev.end(), e.prev) == used_prev.end();
    const bool curr_free =
        std::find(used_curr.begin(), used_curr.end(), e.curr) == used_curr.end();
    if (prev_free && curr_free) {
      m.pairs.push_back(e);
      used_prev.push_back(e.prev);
      used_curr.push_back(e.curr);
    }
  }
  return m;
}

Matching resolve_optimal(std::span<const ScoredEdge> kept) {
  Matching m;
  if (kept.empty()) return m;
  int np = 0, nc = 0;
  for (const auto& e : kept) {
    np = std::max(np, e.prev + 1);
    nc = std::max(nc, e.curr + 1);
  }
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(np, nc);
  for (const auto& e : kept) w(e.prev, e.curr) = std::max(w(e.prev, e.curr), e.score);
  const std::vector<int> match = max_weight_matching(w);
  for (int i = 0; i < np; ++i) {
    if (match[i] >= 0) m.pairs.push_back({i, match[i], w(i, match[i])});
  }
  std::sort(m.pairs.begin(), m.pairs.end(),
            [](const ScoredEdge& a, const ScoredEdge& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.prev < b.prev;
            });
  return m;
}

std::vector<int> assign_ids(const Matching& m, TrackletStore& store,
                            int num_curr) {
  std::vector<int> ids(static_cast<std::size_t>(num_curr), -1);
  for (const auto& p : m.pairs) {
    if (p.prev < 0 || p.prev >= static_cast<int>(store.active.size()) ||
        p.curr < 0 || p.curr >= num_curr) {
      throw std::out_of_range("matching refers to a node outside the frame");
    }
    ids[p.curr] = store.active[p.prev];
  }
  for (auto& id : ids) {
    if (id < 0) id = store.next_id++;
  }
  store.active = ids;
  return ids;
}

std::vector<GraphNode> make_nodes(const FrameData& frame,
                                  const RinkTemplate& rink,
                                  bool use_projection) {
  if (!frame.homography) {
    throw MissingHomography("frame " + std::to_string(frame.frame_id) +
                            " has no homography");
  }
  if (frame.embeddings.size() != frame.detections.size()) {
    throw DimensionMismatch("frame " + std::to_string(frame.frame_id) +
                            ": one embedding per detection required");
  }
  std::vector<GraphNode> nodes;
  nodes.reserve(frame.detections.size());
  for (std::size_t k = 0; k < frame.detections.size(); ++k) {
    RinkPoint p{0.0, 0.0};
    if (use_projection) {
      p = normalize_rink(
          project(*frame.homography, footpoint(frame.detections[k].box)), rink);
    }
    GraphNode n;
    n.frame_id = frame.frame_id;
    n.local_index = static_cast<int>(k);
    n.raw = node_raw(frame.embeddings[k], p);
    nodes.push_back(std::move(n));
  }
  return nodes;
}

namespace {

void check_one_to_one(const Matching& m) {
  std::vector<int> prev, curr;
  for (const auto& p : m.pairs) {
    prev.push_back(p.prev);
    curr.push_back(p.curr);
  }
  std::sort(prev.begin(), prev.end());
  std::sort(curr.begin(), curr.end());
  if (std::adjacent_find(prev.begin(), prev.end()) != prev.end() ||
      std::adjacent_find(curr.begin(), curr.end()) != curr.end()) {
    throw std::logic_error("matching violates the one-edge-per-node rule");
  }
}

}  // namespace

StepResult step(const std::vector<GraphNode>& prev_learned,
                const FrameData& frame, const SequenceInfo& info,
                const ModelParameters& params, const TrackerConfig& cfg,
                TrackletStore& store) {
  StepResult r;
  std::vector<GraphNode> curr =
      make_nodes(frame, info.rink, params.config.use_projection);
  const int nc = static_cast<int>(curr.size());
  if (prev_learned.empty() || curr.empty()) {
    r.ids = assign_ids(r.matching, store, nc);
    r.learned = std::move(curr);
    return r;
  }
  std::vector<GraphNode> prev = prev_learned;
  if (!cfg.carry_states) {
    for (auto& n : prev) n.carried = false;
  }
  AssociationGraph g = build_bipartite(std::move(prev), std::move(curr));
  encode_initial(g, params);
  propagate(g, params, params.config.steps);
  r.ran_mpn = true;
  r.scores.reserve(g.edges.size());
  for (const auto& e : g.edges) {
    r.scores.push_back({e.src, e.dst, e.score_per_step.back()});
  }
  r.pruned = prune(r.scores, cfg.xi);
  r.matching = cfg.resolve == ResolveMode::kGreedy
                   ? resolve_violations(r.pruned)
                   : resolve_optimal(r.pruned);
  check_one_to_one(r.matching);
  r.ids = assign_ids(r.matching, store, nc);
  r.learned = std::move(g.curr_nodes);
  for (auto& n : r.learned) n.carried = true;
  return r;
}

TrackOutput run_sequence(const Sequence& seq, const ModelParameters& params,
                         const TrackerConfig& cfg) {
  detail::FlushDenormals ftz;
  TrackOutput out;
  TrackletStore store;
  std::vector<GraphNode> learned;
  for (const auto& frame : seq.frames) {
    StepResult r = step(learned, frame, seq.info, params, cfg, store);
    for (std::size_t k = 0; k < frame.detections.size(); ++k) {
      const auto& d = frame.detections[k];
      out.rows.push_back({frame.frame_id, r.ids[k], d.box, d.conf});
    }
    learned = std::move(r.learned);
  }
  return out;
}

}  // namespace rinktrack
