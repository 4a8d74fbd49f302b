#include "rinktrack/metrics.hpp"

#include <algorithm>
#include <set>

#include "rinktrack/assignment.hpp"
#include "rinktrack/errors.hpp"

namespace rinktrack {
namespace {

using FrameIndex = std::map<int, std::vector<TrackRow>>;

FrameIndex by_frame(const TrackOutput& t) {
  FrameIndex idx;
  for (const auto& r : t.rows) idx[r.frame_id].push_back(r);
  return idx;
}

Eigen::MatrixXd iou_matrix(std::span<const TrackRow> a,
                           std::span<const TrackRow> b) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(a.size()),
                    static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          iou(a[i].box, b[j].box);
    }
  }
  return m;
}

// When every row and column contains exactly one exact box identity (the
// ground-truth-as-detections case), that permutation is the optimal match.
bool exact_identity_match(std::span<const TrackRow> gt,
                          std::span<const TrackRow> pred,
                          const std::vector<int>& gt_rows,
                          const std::vector<int>& pred_cols,
                          std::vector<std::pair<int, int>>& out) {
  if (gt_rows.size() != pred_cols.size()) return false;
  std::vector<char> used(pred_cols.size(), 0);
  for (int r : gt_rows) {
    int hit = -1;
    for (std::size_t c = 0; c < pred_cols.size(); ++c) {
      if (pred[pred_cols[c]].box == gt[r].box) {
        if (hit >= 0 || used[c]) return false;
        hit = static_cast<int>(c);
      }
    }
    if (hit < 0) return false;
    used[hit] = 1;
    out.emplace_back(r, pred_cols[hit]);
  }
  return true;
}

}  // namespace

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.wd, b.x + b.wd) -
                                      std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.ht, b.y + b.ht) -
                                      std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.wd * a.ht + b.wd * b.ht - inter;
  if (!(uni > 0.0)) return 0.0;
  return inter / uni;
}

FrameCorrespondence match_frame(std::span<const TrackRow> gt,
                                std::span<const TrackRow> pred,
                                CorrespondenceState& state, double iou_min) {
  FrameCorrespondence fc;
  std::vector<char> gt_done(gt.size(), 0), pred_done(pred.size(), 0);
  std::vector<std::pair<int, int>> pairs;  // row indices

  for (std::size_t g = 0; g < gt.size(); ++g) {
    const auto it = state.find(gt[g].track_id);
    if (it == state.end()) continue;
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (pred_done[p] || pred[p].track_id != it->second) continue;
      if (iou(gt[g].box, pred[p].box) >= iou_min) {
        gt_done[g] = pred_done[p] = 1;
        pairs.emplace_back(static_cast<int>(g), static_cast<int>(p));
      }
      break;
    }
  }
  const std::size_t persisted = pairs.size();

  std::vector<int> rows, cols;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (!gt_done[g]) rows.push_back(static_cast<int>(g));
  }
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (!pred_done[p]) cols.push_back(static_cast<int>(p));
  }
  if (!rows.empty() && !cols.empty() &&
      !exact_identity_match(gt, pred, rows, cols, pairs)) {
    constexpr double kForbidden = 1e6;
    Eigen::MatrixXd cost(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(cols.size()));
    Eigen::MatrixXd ov(cost.rows(), cost.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const double v = iou(gt[rows[r]].box, pred[cols[c]].box);
        ov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            v >= iou_min ? 1.0 - v : kForbidden;
      }
    }
    const std::vector<int> match = min_cost_assignment(cost);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const int c = match[r];
      if (c >= 0 && ov(static_cast<Eigen::Index>(r), c) >= iou_min) {
        pairs.emplace_back(rows[r], cols[c]);
      }
    }
  }

  std::fill(gt_done.begin(), gt_done.end(), 0);
  std::fill(pred_done.begin(), pred_done.end(), 0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [g, p] = pairs[k];
    gt_done[g] = pred_done[p] = 1;
    const int gid = gt[g].track_id;
    const int pid = pred[p].track_id;
    if (k >= persisted) {
      const auto it = state.find(gid);
      if (it != state.end() && it->second != pid) ++fc.idsw;
    }
    state[gid] = pid;
    fc.matched.emplace_back(gid, pid);
  }
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (!gt_done[g]) fc.unmatched_gt.push_back(gt[g].track_id);
  }
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (!pred_done[p]) fc.unmatched_pred.push_back(pred[p].track_id);
  }
  return fc;
}

MotTotals& MotTotals::operator+=(const MotTotals& o) {
  gt += o.gt;
  matches += o.matches;
  fp += o.fp;
  fn += o.fn;
  idsw += o.idsw;
  return *this;
}

double mota(const MotTotals& t) {
  if (t.gt <= 0) throw UndefinedMetric("MOTA is undefined without ground truth");
  return 1.0 - static_cast<double>(t.fn + t.fp + t.idsw) /
                   static_cast<double>(t.gt);
}

MotTotals clear_mot(const TrackOutput& gt, const TrackOutput& pred,
                    double iou_min) {
  const FrameIndex g = by_frame(gt);
  const FrameIndex p = by_frame(pred);
  std::set<int> frames;
  for (const auto& [f, rows] : g) frames.insert(f);
  for (const auto& [f, rows] : p) frames.insert(f);
  CorrespondenceState state;
  MotTotals t;
  static const std::vector<TrackRow> kEmpty;
  for (int f : frames) {
    const auto gi = g.find(f);
    const auto pi = p.find(f);
    const auto& gr = gi == g.end() ? kEmpty : gi->second;
    const auto& pr = pi == p.end() ? kEmpty : pi->second;
    const FrameCorrespondence fc = match_frame(gr, pr, state, iou_min);
    t.gt += static_cast<std::int64_t>(gr.size());
    t.matches += static_cast<std::int64_t>(fc.matched.size());
    t.fn += static_cast<std::int64_t>(fc.unmatched_gt.size());
    t.fp += static_cast<std::int64_t>(fc.unmatched_pred.size());
    t.idsw += fc.idsw;
  }
  return t;
}

void IdScores::finalize() {
  const double tp = static_cast<double>(idtp);
  const double denom = 2.0 * tp + static_cast<double>(idfp + idfn);
  idf1 = denom > 0.0 ? 2.0 * tp / denom : 0.0;
  idp = (idtp + idfp) > 0 ? tp / static_cast<double>(idtp + idfp) : 0.0;
  idr = (idtp + idfn) > 0 ? tp / static_cast<double>(idtp + idfn) : 0.0;
}

IdOverlap id_overlap(const TrackOutput& gt, const TrackOutput& pred,
                     double iou_min) {
  IdOverlap o;
  std::set<int> gids, pids;
  for (const auto& r : gt.rows) gids.insert(r.track_id);
  for (const auto& r : pred.rows) pids.insert(r.track_id);
  o.gt_ids.assign(gids.begin(), gids.end());
  o.pred_ids.assign(pids.begin(), pids.end());
  o.counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(o.gt_ids.size()),
                                   static_cast<Eigen::Index>(o.pred_ids.size()));
  o.gt_detections = static_cast<std::int64_t>(gt.rows.size());
  o.pred_detections = static_cast<std::int64_t>(pred.rows.size());
  auto index_of = [](const std::vector<int>& v, int id) {
    return static_cast<Eigen::Index>(
        std::lower_bound(v.begin(), v.end(), id) - v.begin());
  };
  const FrameIndex g = by_frame(gt);
  const FrameIndex p = by_frame(pred);
  for (const auto& [f, grows] : g) {
    const auto pi = p.find(f);
    if (pi == p.end()) continue;
    const Eigen::MatrixXd m = iou_matrix(grows, pi->second);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (m(r, c) >= iou_min) {
          o.counts(index_of(o.gt_ids, grows[r].track_id),
                   index_of(o.pred_ids, pi->second[c].track_id)) += 1.0;
        }
      }
    }
  }
  return o;
}

IdScores idf1(const TrackOutput& gt, const TrackOutput& pred, double iou_min) {
  const IdOverlap o = id_overlap(gt, pred, iou_min);
  IdScores s;
  if (o.counts.size() > 0) {
    const std::vector<int> match = max_weight_matching(o.counts);
    for (std::size_t r = 0; r < match.size(); ++r) {
      if (match[r] >= 0) {
        s.idtp += static_cast<std::int64_t>(
            o.counts(static_cast<Eigen::Index>(r), match[r]));
      }
    }
  }
  s.idfn = o.gt_detections - s.idtp;
  s.idfp = o.pred_detections - s.idtp;
  s.finalize();
  return s;
}

MetricsReport evaluate(std::span<const EvalInput> inputs, double iou_min) {
  MetricsReport rep;
  MotTotals all;
  IdScores ids;
  for (const auto& in : inputs) {
    SequenceMetrics sm;
    sm.name = in.name;
    sm.totals = clear_mot(in.gt, in.pred, iou_min);
    sm.ids = idf1(in.gt, in.pred, iou_min);
    sm.mota = mota(sm.totals);
    all += sm.totals;
    ids.idtp += sm.ids.idtp;
    ids.idfp += sm.ids.idfp;
    ids.idfn += sm.ids.idfn;
    rep.per_sequence.push_back(std::move(sm));
  }
  ids.finalize();
  rep.mota = mota(all);
  rep.fp = all.fp;
  rep.fn = all.fn;
  rep.idsw = all.idsw;
  rep.gt = all.gt;
  rep.idf1 = ids.idf1;
  rep.idp = ids.idp;
  rep.idr = ids.idr;
  return rep;
}

}  // namespace rinktrack
