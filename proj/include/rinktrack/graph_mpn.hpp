#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rinktrack/features.hpp"
#include "rinktrack/neuralnet.hpp"

namespace rinktrack {

inline constexpr int kNodeStateDim = 32;
inline constexpr int kEdgeStateDim = 6;
inline constexpr int kNodeHiddenDim = 128;
inline constexpr int kEdgeHiddenDim = 8;
inline constexpr int kNodeMsgHiddenDim = 64;
inline constexpr int kEdgeMsgHiddenDim = 32;
inline constexpr int kClsHiddenDim = 4;
inline constexpr int kDefaultSteps = 6;

/// Model-level settings that must agree between training and inference and
/// therefore travel with the weights.
struct ModelConfig {
  int steps = kDefaultSteps;
  bool use_projection = true;
};

/// The five networks of the association model.
///   f_v_fe  515 -> 128 -> 32   node encoder
///   f_e_fe    4 ->   8 ->  6   edge encoder
///   f_v_me   38 ->  64 -> 32   node update (message) network
///   f_e_me   70 ->  32 ->  6   edge update network
///   f_cls     6 ->   4 ->  1   edge classifier, sigmoid output
struct ModelParameters {
  nn::Mlp f_v_fe;
  nn::Mlp f_e_fe;
  nn::Mlp f_v_me;
  nn::Mlp f_e_me;
  nn::Mlp f_cls;
  ModelConfig config;

  static ModelParameters zeros();
  /// Every layer initialised with Mlp::init_fan_in from one seeded stream.
  static ModelParameters random(std::uint64_t seed);

  /// Throws DimensionMismatch unless every network has exactly the shapes
  /// listed above.
  void validate_shapes() const;

  std::vector<std::pair<std::string, const nn::Mlp*>> networks() const;
  std::vector<std::pair<std::string, nn::Mlp*>> networks();
  std::size_t parameter_count() const;
};

struct ModelGrad {
  nn::MlpGrad f_v_fe;
  nn::MlpGrad f_e_fe;
  nn::MlpGrad f_v_me;
  nn::MlpGrad f_e_me;
  nn::MlpGrad f_cls;

  static ModelGrad zeros_like(const ModelParameters& m);
  void set_zero();
  ModelGrad& operator+=(const ModelGrad& o);
};

/// Flattened views over parameters and matching gradients, in a fixed order.
std::vector<nn::ParamSlot> param_slots(ModelParameters& m, const ModelGrad& g);

struct GraphNode {
  int frame_id = 0;
  int local_index = 0;
  NodeRawFeatures raw;
  Eigen::VectorXd state;  // h_v, length 32 once encoded
  bool carried = false;   // state comes from the previous learned graph
};

struct GraphEdge {
  int src = 0;  // index into prev_nodes
  int dst = 0;  // index into curr_nodes
  EdgeRawFeatures raw = EdgeRawFeatures::Zero();
  Eigen::VectorXd state;  // h_e, length 6 once encoded
  std::vector<double> score_per_step;
};

/// Complete bipartite graph between two consecutive frames. Edges are stored
/// prev-major: edge (i, j) sits at index i * |curr| + j.
struct AssociationGraph {
  std::vector<GraphNode> prev_nodes;
  std::vector<GraphNode> curr_nodes;
  std::vector<GraphEdge> edges;
  std::vector<std::vector<int>> prev_adjacency;
  std::vector<std::vector<int>> curr_adjacency;

  int edge_index(int prev, int curr) const {
    return prev * static_cast<int>(curr_nodes.size()) + curr;
  }
};

AssociationGraph build_bipartite(std::vector<GraphNode> prev,
                                 std::vector<GraphNode> curr);

void encode_initial(AssociationGraph& g, const ModelParameters& m);
/// One edge update at step l (l >= 1) from the current node and edge states.
void edge_update(AssociationGraph& g, const ModelParameters& m, int l);
/// One node update at step l; edges must already hold their step-l states.
void node_update(AssociationGraph& g, const ModelParameters& m, int l);
/// L rounds of edge update, node update and classification. Expects encoded
/// states. Throws InvalidConfig if steps < 1.
void propagate(AssociationGraph& g, const ModelParameters& m, int steps);
double classify(const Eigen::VectorXd& edge_state, const ModelParameters& m);

/// Deep-supervised focal loss of a propagated graph: sum over steps of the
/// per-step mean over edges.
double pair_loss(const AssociationGraph& g, std::span<const int> labels,
                 const nn::FocalLoss& focal);

/// Encodes, propagates and evaluates the pair loss of a graph in one pass,
/// then back-propagates into grad when it is non-null. The graph itself is
/// not modified. Returns the loss.
double pair_loss_and_grad(const AssociationGraph& g,
                          std::span<const int> labels,
                          const ModelParameters& m, const nn::FocalLoss& focal,
                          int steps, ModelGrad* grad);

}  // namespace rinktrack
