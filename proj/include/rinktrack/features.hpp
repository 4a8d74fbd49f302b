#pragma once

#include <span>

#include <Eigen/Core>

#include "rinktrack/geometry.hpp"

namespace rinktrack {

inline constexpr int kEmbeddingDim = 512;
inline constexpr int kNodeRawDim = kEmbeddingDim + 3;
inline constexpr int kEdgeRawDim = 4;

/// Unit-norm appearance descriptor. Only constructible through l2_normalize
/// or from data that already satisfies the norm invariant.
class ReIDEmbedding {
 public:
  static constexpr double kNormTolerance = 1e-6;

  ReIDEmbedding() = default;

  /// Validates an already-normalised vector.
  static ReIDEmbedding from_unit(const Eigen::VectorXd& e);

  const Eigen::VectorXd& values() const { return e_; }
  double operator[](int i) const { return e_[i]; }

 private:
  explicit ReIDEmbedding(Eigen::VectorXd e) : e_(std::move(e)) {}
  Eigen::VectorXd e_;

  friend ReIDEmbedding l2_normalize(const Eigen::VectorXd& e);
};

/// 515 entries: appearance(512), normalised rink x, normalised rink y, 1.
using NodeRawFeatures = Eigen::VectorXd;
/// [L1 appearance distance, cosine similarity, L2 position distance,
///  L1 position distance].
using EdgeRawFeatures = Eigen::Vector4d;

struct AppearanceDelta {
  double l1 = 0.0;
  double cos = 0.0;
};

struct PositionDelta {
  double l2 = 0.0;
  double l1 = 0.0;
};

ReIDEmbedding l2_normalize(const Eigen::VectorXd& e);
ReIDEmbedding l2_normalize(std::span<const float> e);

NodeRawFeatures node_raw(const ReIDEmbedding& r, const RinkPoint& normalized);

AppearanceDelta edge_appearance(const ReIDEmbedding& ri,
                                const ReIDEmbedding& rj);
PositionDelta edge_position(const RinkPoint& pi, const RinkPoint& pj);

/// Builds the edge vector straight from two node vectors; used by the graph
/// builder so the embedding is not copied twice.
EdgeRawFeatures edge_raw(const NodeRawFeatures& vi, const NodeRawFeatures& vj);

}  // namespace rinktrack
