#include "rinktrack/features.hpp"

#include <cmath>
#include <string>

#include "rinktrack/errors.hpp"

namespace rinktrack {
namespace {

constexpr double kMinEmbeddingNorm = 1e-12;

void check_dim(Eigen::Index n, Eigen::Index expected, const char* what) {
  if (n != expected) {
    throw DimensionMismatch(std::string(what) + ": expected " +
                            std::to_string(expected) + " entries, got " +
                            std::to_string(n));
  }
}

}  // namespace

ReIDEmbedding ReIDEmbedding::from_unit(const Eigen::VectorXd& e) {
  check_dim(e.size(), kEmbeddingDim, "embedding");
  if (!e.allFinite()) throw ZeroEmbedding("embedding has non-finite entries");
  const double n = e.norm();
  if (std::abs(n - 1.0) > kNormTolerance) {
    throw ZeroEmbedding("embedding is not unit-norm (norm = " +
                        std::to_string(n) + ")");
  }
  return ReIDEmbedding(e);
}

ReIDEmbedding l2_normalize(const Eigen::VectorXd& e) {
  check_dim(e.size(), kEmbeddingDim, "embedding");
  if (!e.allFinite()) throw ZeroEmbedding("embedding has non-finite entries");
  const double n = e.norm();
  if (!(n > kMinEmbeddingNorm)) {
    throw ZeroEmbedding("embedding norm is ~0, cannot normalise");
  }
  return ReIDEmbedding(e / n);
}

ReIDEmbedding l2_normalize(std::span<const float> e) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(e.size()));
  for (std::size_t i = 0; i < e.size(); ++i) d[static_cast<Eigen::Index>(i)] = e[i];
  return l2_normalize(d);
}

NodeRawFeatures node_raw(const ReIDEmbedding& r, const RinkPoint& normalized) {
  check_dim(r.values().size(), kEmbeddingDim, "embedding");
  NodeRawFeatures v(kNodeRawDim);
  v.head(kEmbeddingDim) = r.values();
  v[kEmbeddingDim] = normalized.rx;
  v[kEmbeddingDim + 1] = normalized.ry;
  v[kEmbeddingDim + 2] = 1.0;
  return v;
}

AppearanceDelta edge_appearance(const ReIDEmbedding& ri,
                                const ReIDEmbedding& rj) {
  check_dim(ri.values().size(), kEmbeddingDim, "embedding");
  check_dim(rj.values().size(), kEmbeddingDim, "embedding");
  return {(ri.values() - rj.values()).lpNorm<1>(), ri.values().dot(rj.values())};
}

PositionDelta edge_position(const RinkPoint& pi, const RinkPoint& pj) {
  const double dx = pi.rx - pj.rx;
  const double dy = pi.ry - pj.ry;
  return {std::hypot(dx, dy), std::abs(dx) + std::abs(dy)};
}

EdgeRawFeatures edge_raw(const NodeRawFeatures& vi, const NodeRawFeatures& vj) {
  check_dim(vi.size(), kNodeRawDim, "node features");
  check_dim(vj.size(), kNodeRawDim, "node features");
  const auto ai = vi.head(kEmbeddingDim);
  const auto aj = vj.head(kEmbeddingDim);
  const PositionDelta pos =
      edge_position({vi[kEmbeddingDim], vi[kEmbeddingDim + 1]},
                    {vj[kEmbeddingDim], vj[kEmbeddingDim + 1]});
  EdgeRawFeatures e;
  e << (ai - aj).lpNorm<1>(), ai.dot(aj), pos.l2, pos.l1;
  return e;
}

}  // namespace rinktrack
