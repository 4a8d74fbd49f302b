#include "rinktrack/graph_mpn.hpp"

#include <string>

#include "rinktrack/errors.hpp"

namespace rinktrack {

using nn::Activation;
using nn::Matrix;
using nn::Mlp;
using nn::MlpCache;

namespace {

void expect_shape(const Mlp& net, const std::string& name,
                  const std::vector<Eigen::Index>& dims,
                  const std::vector<Activation>& acts) {
  if (net.num_layers() != acts.size()) {
    throw DimensionMismatch(name + ": expected " + std::to_string(acts.size()) +
                            " layers, found " +
                            std::to_string(net.num_layers()));
  }
  for (std::size_t i = 0; i < acts.size(); ++i) {
    const auto& l = net.layer(i);
    if (l.in_dim() != dims[i] || l.out_dim() != dims[i + 1] ||
        l.b.size() != dims[i + 1]) {
      throw DimensionMismatch(
          name + " layer " + std::to_string(i) + ": expected " +
          std::to_string(dims[i]) + "->" + std::to_string(dims[i + 1]) +
          ", found " + std::to_string(l.in_dim()) + "->" +
          std::to_string(l.out_dim()));
    }
    if (l.activation != acts[i]) {
      throw DimensionMismatch(name + " layer " + std::to_string(i) +
                              ": unexpected activation");
    }
  }
}

const std::vector<Eigen::Index> kVfeDims{kNodeRawDim, kNodeHiddenDim,
                                         kNodeStateDim};
const std::vector<Eigen::Index> kEfeDims{kEdgeRawDim, kEdgeHiddenDim,
                                         kEdgeStateDim};
const std::vector<Eigen::Index> kVmeDims{kNodeStateDim + kEdgeStateDim,
                                         kNodeMsgHiddenDim, kNodeStateDim};
const std::vector<Eigen::Index> kEmeDims{2 * kNodeStateDim + kEdgeStateDim,
                                         kEdgeMsgHiddenDim, kEdgeStateDim};
const std::vector<Eigen::Index> kClsDims{kEdgeStateDim, kClsHiddenDim, 1};
const std::vector<Activation> kGeluGelu{Activation::kGelu, Activation::kGelu};
const std::vector<Activation> kGeluSigmoid{Activation::kGelu,
                                           Activation::kSigmoid};

// Packed message-passing pass over one bipartite graph.
//
// Node states are columns of a 32 x N matrix with the previous frame first.
// Edge (i, j) is column i * nc + j. The first layers of the edge and node
// update networks act on concatenations whose blocks are shared across many
// edges, so they are evaluated block-wise: W [a; b; c] = Wa a + Wb b + Wc c,
// with the per-node products computed once. The results equal the
// concatenated form up to floating-point reassociation.
class MpnPass {
 public:
  MpnPass(const ModelParameters& m, int np, int nc, bool record)
      : m_(m), np_(np), nc_(nc), ne_(np * nc), record_(record) {}

  void encode(const Matrix& fresh_raw, const std::vector<int>& fresh_cols,
              const Matrix& carried_states, const std::vector<int>& carried_cols,
              const Matrix& edge_raw) {
    const int n = np_ + nc_;
    Matrix H(kNodeStateDim, n);
    fresh_cols_ = fresh_cols;
    if (!fresh_cols.empty()) {
      Matrix enc = m_.f_v_fe.forward(fresh_raw, record_ ? &vfe_cache_ : nullptr);
      for (std::size_t k = 0; k < fresh_cols.size(); ++k) {
        H.col(fresh_cols[k]) = enc.col(static_cast<Eigen::Index>(k));
      }
    }
    for (std::size_t k = 0; k < carried_cols.size(); ++k) {
      H.col(carried_cols[k]) = carried_states.col(static_cast<Eigen::Index>(k));
    }
    Matrix He = ne_ > 0 ? m_.f_e_fe.forward(edge_raw,
                                            record_ ? &efe_cache_ : nullptr)
                        : Matrix(kEdgeStateDim, 0);
    node_states_.push_back(std::move(H));
    edge_states_.push_back(std::move(He));
  }

  // Starts from already-encoded states; backward is unavailable then.
  void seed(Matrix H, Matrix He) {
    node_states_.push_back(std::move(H));
    edge_states_.push_back(std::move(He));
  }

  // Runs step l = current depth + 1. Node update is skipped when
  // update_nodes is false (its output would be unused).
  void step(bool update_nodes) {
    const Matrix& H = node_states_.back();
    const Matrix& He = edge_states_.back();
    Step s;

    // Edge update: f_e_me([h_src, h_dst, h_e]).
    const auto& le = m_.f_e_me.layer(0);
    const Matrix Pp = le.W.leftCols(kNodeStateDim) * H.leftCols(np_);
    const Matrix Pc =
        le.W.middleCols(kNodeStateDim, kNodeStateDim) * H.rightCols(nc_);
    Matrix Z0e = le.W.rightCols(kEdgeStateDim) * He;
    Z0e.colwise() += le.b;
    for (int i = 0; i < np_; ++i) {
      for (int j = 0; j < nc_; ++j) {
        Z0e.col(i * nc_ + j) += Pp.col(i) + Pc.col(j);
      }
    }
    Matrix A0e;
    nn::apply_activation(le.activation, Z0e, A0e);
    Matrix He_next = m_.f_e_me.forward(A0e, record_ ? &s.eme : nullptr, 1);

    // Node update: sum over neighbours of f_v_me([h_neighbour, h_e]).
    // Message e goes to prev node i from curr node j; message ne + e goes to
    // curr node j from prev node i.
    Matrix H_next = Matrix::Zero(kNodeStateDim, np_ + nc_);
    if (update_nodes && ne_ > 0) {
      const auto& lv = m_.f_v_me.layer(0);
      const Matrix Q = lv.W.leftCols(kNodeStateDim) * H;
      Matrix R = lv.W.rightCols(kEdgeStateDim) * He_next;
      R.colwise() += lv.b;
      Matrix Z0m(lv.W.rows(), 2 * ne_);
      for (int i = 0; i < np_; ++i) {
        for (int j = 0; j < nc_; ++j) {
          const int e = i * nc_ + j;
          Z0m.col(e) = R.col(e) + Q.col(np_ + j);
          Z0m.col(ne_ + e) = R.col(e) + Q.col(i);
        }
      }
      Matrix A0m;
      nn::apply_activation(lv.activation, Z0m, A0m);
      const Matrix M = m_.f_v_me.forward(A0m, record_ ? &s.vme : nullptr, 1);
      for (int i = 0; i < np_; ++i) {
        for (int j = 0; j < nc_; ++j) H_next.col(i) += M.col(i * nc_ + j);
      }
      for (int j = 0; j < nc_; ++j) {
        for (int i = 0; i < np_; ++i) {
          H_next.col(np_ + j) += M.col(ne_ + i * nc_ + j);
        }
      }
      s.nodes_updated = true;
      if (record_) s.Z0m = std::move(Z0m);
    }

    Matrix scores = ne_ > 0 ? m_.f_cls.forward(He_next, record_ ? &s.cls : nullptr)
                            : Matrix(1, 0);
    if (record_) s.Z0e = std::move(Z0e);
    scores_.push_back(std::move(scores));
    steps_.push_back(std::move(s));
    node_states_.push_back(std::move(H_next));
    edge_states_.push_back(std::move(He_next));
  }

  const Matrix& node_states() const { return node_states_.back(); }
  const Matrix& edge_states() const { return edge_states_.back(); }
  const std::vector<Matrix>& scores() const { return scores_; }

  // dscores[l] is dLoss/dscore for step l + 1 (1 x ne).
  void backward(const std::vector<Matrix>& dscores, ModelGrad& g) const {
    const int L = static_cast<int>(steps_.size());
    Matrix dH = Matrix::Zero(kNodeStateDim, np_ + nc_);
    Matrix dHe = Matrix::Zero(kEdgeStateDim, ne_);
    for (int l = L; l >= 1; --l) {
      const Step& s = steps_[l - 1];
      const Matrix& H_in = node_states_[l - 1];
      const Matrix& He_in = edge_states_[l - 1];
      const Matrix& He_out = edge_states_[l];

      if (ne_ > 0) dHe += m_.f_cls.backward(s.cls, dscores[l - 1], g.f_cls);

      Matrix dH_in = Matrix::Zero(kNodeStateDim, np_ + nc_);
      if (s.nodes_updated) {
        Matrix dM(kNodeStateDim, 2 * ne_);
        for (int i = 0; i < np_; ++i) {
          for (int j = 0; j < nc_; ++j) {
            const int e = i * nc_ + j;
            dM.col(e) = dH.col(i);
            dM.col(ne_ + e) = dH.col(np_ + j);
          }
        }
        const auto& lv = m_.f_v_me.layer(0);
        const Matrix dA0m = m_.f_v_me.backward(s.vme, dM, g.f_v_me, 1);
        const Matrix dZ0m = nn::activation_backward(
            lv.activation, s.Z0m, s.vme.inputs[1], dA0m);
        Matrix S = Matrix::Zero(lv.W.rows(), np_ + nc_);
        for (int i = 0; i < np_; ++i) {
          for (int j = 0; j < nc_; ++j) {
            const int e = i * nc_ + j;
            S.col(np_ + j) += dZ0m.col(e);
            S.col(i) += dZ0m.col(ne_ + e);
          }
        }
        const Matrix T = dZ0m.leftCols(ne_) + dZ0m.rightCols(ne_);
        g.f_v_me.dW[0].leftCols(kNodeStateDim).noalias() += S * H_in.transpose();
        g.f_v_me.dW[0].rightCols(kEdgeStateDim).noalias() +=
            T * He_out.transpose();
        g.f_v_me.db[0] += dZ0m.rowwise().sum();
        dH_in.noalias() += lv.W.leftCols(kNodeStateDim).transpose() * S;
        dHe.noalias() += lv.W.rightCols(kEdgeStateDim).transpose() * T;
      }

      Matrix dHe_in = Matrix::Zero(kEdgeStateDim, ne_);
      if (ne_ > 0) {
        const auto& le = m_.f_e_me.layer(0);
        const Matrix dA0e = m_.f_e_me.backward(s.eme, dHe, g.f_e_me, 1);
        const Matrix dZ0e = nn::activation_backward(
            le.activation, s.Z0e, s.eme.inputs[1], dA0e);
        Matrix Sp = Matrix::Zero(dZ0e.rows(), np_);
        Matrix Sc = Matrix::Zero(dZ0e.rows(), nc_);
        for (int i = 0; i < np_; ++i) {
          for (int j = 0; j < nc_; ++j) {
            Sp.col(i) += dZ0e.col(i * nc_ + j);
            Sc.col(j) += dZ0e.col(i * nc_ + j);
          }
        }
        auto& dW = g.f_e_me.dW[0];
        dW.leftCols(kNodeStateDim).noalias() += Sp * H_in.leftCols(np_).transpose();
        dW.middleCols(kNodeStateDim, kNodeStateDim).noalias() +=
            Sc * H_in.rightCols(nc_).transpose();
        dW.rightCols(kEdgeStateDim).noalias() += dZ0e * He_in.transpose();
        g.f_e_me.db[0] += dZ0e.rowwise().sum();
        dH_in.leftCols(np_).noalias() +=
            le.W.leftCols(kNodeStateDim).transpose() * Sp;
        dH_in.rightCols(nc_).noalias() +=
            le.W.middleCols(kNodeStateDim, kNodeStateDim).transpose() * Sc;
        dHe_in.noalias() = le.W.rightCols(kEdgeStateDim).transpose() * dZ0e;
      }
      dH = std::move(dH_in);
      dHe = std::move(dHe_in);
    }
    if (ne_ > 0) m_.f_e_fe.backward(efe_cache_, dHe, g.f_e_fe);
    if (!fresh_cols_.empty()) {
      Matrix dFresh(kNodeStateDim, static_cast<Eigen::Index>(fresh_cols_.size()));
      for (std::size_t k = 0; k < fresh_cols_.size(); ++k) {
        dFresh.col(static_cast<Eigen::Index>(k)) = dH.col(fresh_cols_[k]);
      }
      m_.f_v_fe.backward(vfe_cache_, dFresh, g.f_v_fe);
    }
  }

 private:
  struct Step {
    Matrix Z0e;
    MlpCache eme;
    Matrix Z0m;
    MlpCache vme;
    MlpCache cls;
    bool nodes_updated = false;
  };

  const ModelParameters& m_;
  int np_, nc_, ne_;
  bool record_;
  std::vector<int> fresh_cols_;
  MlpCache vfe_cache_, efe_cache_;
  std::vector<Matrix> node_states_;  // depth 0..L
  std::vector<Matrix> edge_states_;
  std::vector<Matrix> scores_;       // step 1..L
  std::vector<Step> steps_;
};

struct Packed {
  Matrix fresh_raw;
  std::vector<int> fresh_cols;
  Matrix carried;
  std::vector<int> carried_cols;
  Matrix edge_raw;
};

// Gathers raw inputs; nodes with a 32-d state and carried == true bypass the
// node encoder.
Packed pack(const AssociationGraph& g, bool honour_carried) {
  Packed p;
  const int np = static_cast<int>(g.prev_nodes.size());
  const int nc = static_cast<int>(g.curr_nodes.size());
  auto node_at = [&](int c) -> const GraphNode& {
    return c < np ? g.prev_nodes[c] : g.curr_nodes[c - np];
  };
  for (int c = 0; c < np + nc; ++c) {
    const GraphNode& n = node_at(c);
    if (honour_carried && n.carried) {
      if (n.state.size() != kNodeStateDim) {
        throw DimensionMismatch("carried node has no 32-d state");
      }
      p.carried_cols.push_back(c);
    } else {
      if (n.raw.size() != kNodeRawDim) {
        throw DimensionMismatch("node raw features must have 515 entries");
      }
      p.fresh_cols.push_back(c);
    }
  }
  p.fresh_raw.resize(kNodeRawDim, static_cast<Eigen::Index>(p.fresh_cols.size()));
  for (std::size_t k = 0; k < p.fresh_cols.size(); ++k) {
    p.fresh_raw.col(static_cast<Eigen::Index>(k)) = node_at(p.fresh_cols[k]).raw;
  }
  p.carried.resize(kNodeStateDim, static_cast<Eigen::Index>(p.carried_cols.size()));
  for (std::size_t k = 0; k < p.carried_cols.size(); ++k) {
    p.carried.col(static_cast<Eigen::Index>(k)) = node_at(p.carried_cols[k]).state;
  }
  p.edge_raw.resize(kEdgeRawDim, static_cast<Eigen::Index>(g.edges.size()));
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    p.edge_raw.col(static_cast<Eigen::Index>(e)) = g.edges[e].raw;
  }
  return p;
}

Matrix gather_node_states(const AssociationGraph& g) {
  const int np = static_cast<int>(g.prev_nodes.size());
  const int nc = static_cast<int>(g.curr_nodes.size());
  Matrix H(kNodeStateDim, np + nc);
  for (int i = 0; i < np; ++i) {
    if (g.prev_nodes[i].state.size() != kNodeStateDim) {
      throw DimensionMismatch("node state missing; run encode_initial first");
    }
    H.col(i) = g.prev_nodes[i].state;
  }
  for (int j = 0; j < nc; ++j) {
    if (g.curr_nodes[j].state.size() != kNodeStateDim) {
      throw DimensionMismatch("node state missing; run encode_initial first");
    }
    H.col(np + j) = g.curr_nodes[j].state;
  }
  return H;
}

Matrix gather_edge_states(const AssociationGraph& g) {
  Matrix He(kEdgeStateDim, static_cast<Eigen::Index>(g.edges.size()));
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (g.edges[e].state.size() != kEdgeStateDim) {
      throw DimensionMismatch("edge state missing; run encode_initial first");
    }
    He.col(static_cast<Eigen::Index>(e)) = g.edges[e].state;
  }
  return He;
}

void scatter_states(AssociationGraph& g, const Matrix& H, const Matrix& He) {
  const int np = static_cast<int>(g.prev_nodes.size());
  for (int i = 0; i < np; ++i) g.prev_nodes[i].state = H.col(i);
  for (std::size_t j = 0; j < g.curr_nodes.size(); ++j) {
    g.curr_nodes[j].state = H.col(np + static_cast<Eigen::Index>(j));
  }
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    g.edges[e].state = He.col(static_cast<Eigen::Index>(e));
  }
}

}  // namespace

ModelParameters ModelParameters::zeros() {
  ModelParameters m;
  m.f_v_fe = Mlp::zeros(kVfeDims, kGeluGelu);
  m.f_e_fe = Mlp::zeros(kEfeDims, kGeluGelu);
  m.f_v_me = Mlp::zeros(kVmeDims, kGeluGelu);
  m.f_e_me = Mlp::zeros(kEmeDims, kGeluGelu);
  m.f_cls = Mlp::zeros(kClsDims, kGeluSigmoid);
  return m;
}

ModelParameters ModelParameters::random(std::uint64_t seed) {
  ModelParameters m = zeros();
  std::mt19937_64 rng(seed);
  for (auto& [name, net] : m.networks()) net->init_fan_in(rng);
  return m;
}

void ModelParameters::validate_shapes() const {
  expect_shape(f_v_fe, "f_v_fe", kVfeDims, kGeluGelu);
  expect_shape(f_e_fe, "f_e_fe", kEfeDims, kGeluGelu);
  expect_shape(f_v_me, "f_v_me", kVmeDims, kGeluGelu);
  expect_shape(f_e_me, "f_e_me", kEmeDims, kGeluGelu);
  expect_shape(f_cls, "f_cls", kClsDims, kGeluSigmoid);
}

std::vector<std::pair<std::string, const Mlp*>> ModelParameters::networks()
    const {
  return {{"f_v_fe", &f_v_fe},
          {"f_e_fe", &f_e_fe},
          {"f_v_me", &f_v_me},
          {"f_e_me", &f_e_me},
          {"f_cls", &f_cls}};
}

std::vector<std::pair<std::string, Mlp*>> ModelParameters::networks() {
  return {{"f_v_fe", &f_v_fe},
          {"f_e_fe", &f_e_fe},
          {"f_v_me", &f_v_me},
          {"f_e_me", &f_e_me},
          {"f_cls", &f_cls}};
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, net] : networks()) n += net->parameter_count();
  return n;
}

ModelGrad ModelGrad::zeros_like(const ModelParameters& m) {
  return {m.f_v_fe.zero_grad(), m.f_e_fe.zero_grad(), m.f_v_me.zero_grad(),
          m.f_e_me.zero_grad(), m.f_cls.zero_grad()};
}

void ModelGrad::set_zero() {
  for (auto* g : {&f_v_fe, &f_e_fe, &f_v_me, &f_e_me, &f_cls}) g->set_zero();
}

ModelGrad& ModelGrad::operator+=(const ModelGrad& o) {
  f_v_fe += o.f_v_fe;
  f_e_fe += o.f_e_fe;
  f_v_me += o.f_v_me;
  f_e_me += o.f_e_me;
  f_cls += o.f_cls;
  return *this;
}

std::vector<nn::ParamSlot> param_slots(ModelParameters& m, const ModelGrad& g) {
  std::vector<nn::ParamSlot> slots;
  const nn::MlpGrad* grads[] = {&g.f_v_fe, &g.f_e_fe, &g.f_v_me, &g.f_e_me,
                                &g.f_cls};
  auto nets = m.networks();
  for (std::size_t k = 0; k < nets.size(); ++k) {
    Mlp& net = *nets[k].second;
    for (std::size_t i = 0; i < net.num_layers(); ++i) {
      auto& l = net.layer(i);
      const auto& gw = grads[k]->dW[i];
      const auto& gb = grads[k]->db[i];
      slots.push_back({{l.W.data(), static_cast<std::size_t>(l.W.size())},
                       {gw.data(), static_cast<std::size_t>(gw.size())}});
      slots.push_back({{l.b.data(), static_cast<std::size_t>(l.b.size())},
                       {gb.data(), static_cast<std::size_t>(gb.size())}});
    }
  }
  return slots;
}

AssociationGraph build_bipartite(std::vector<GraphNode> prev,
                                 std::vector<GraphNode> curr) {
  AssociationGraph g;
  g.prev_nodes = std::move(prev);
  g.curr_nodes = std::move(curr);
  const int np = static_cast<int>(g.prev_nodes.size());
  const int nc = static_cast<int>(g.curr_nodes.size());
  g.edges.reserve(static_cast<std::size_t>(np * nc));
  g.prev_adjacency.assign(np, {});
  g.curr_adjacency.assign(nc, {});
  for (int i = 0; i < np; ++i) {
    for (int j = 0; j < nc; ++j) {
      GraphEdge e;
      e.src = i;
      e.dst = j;
      e.raw = edge_raw(g.prev_nodes[i].raw, g.curr_nodes[j].raw);
      g.prev_adjacency[i].push_back(static_cast<int>(g.edges.size()));
      g.curr_adjacency[j].push_back(static_cast<int>(g.edges.size()));
      g.edges.push_back(std::move(e));
    }
  }
  return g;
}

void encode_initial(AssociationGraph& g, const ModelParameters& m) {
  const Packed p = pack(g, true);
  MpnPass pass(m, static_cast<int>(g.prev_nodes.size()),
               static_cast<int>(g.curr_nodes.size()), false);
  pass.encode(p.fresh_raw, p.fresh_cols, p.carried, p.carried_cols, p.edge_raw);
  scatter_states(g, pass.node_states(), pass.edge_states());
  for (auto& e : g.edges) e.score_per_step.clear();
}

void edge_update(AssociationGraph& g, const ModelParameters& m, int l) {
  if (l < 1) throw InvalidConfig("message-passing step index must be >= 1");
  const int np = static_cast<int>(g.prev_nodes.size());
  const int nc = static_cast<int>(g.curr_nodes.size());
  const Matrix H = gather_node_states(g);
  const Matrix He = gather_edge_states(g);
  const auto& le = m.f_e_me.layer(0);
  Matrix X(le.in_dim(), np * nc);
  for (int i = 0; i < np; ++i) {
    for (int j = 0; j < nc; ++j) {
      X.col(i * nc + j) << H.col(i), H.col(np + j), He.col(i * nc + j);
    }
  }
  const Matrix out = m.f_e_me.forward(X);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    g.edges[e].state = out.col(static_cast<Eigen::Index>(e));
  }
}

void node_update(AssociationGraph& g, const ModelParameters& m, int l) {
  if (l < 1) throw InvalidConfig("message-passing step index must be >= 1");
  const int np = static_cast<int>(g.prev_nodes.size());
  const int nc = static_cast<int>(g.curr_nodes.size());
  const Matrix H = gather_node_states(g);
  const Matrix He = gather_edge_states(g);
  Matrix Hn = Matrix::Zero(kNodeStateDim, np + nc);
  const int ne = np * nc;
  if (ne > 0) {
    Matrix X(m.f_v_me.input_dim(), 2 * ne);
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < nc; ++j) {
        const int e = i * nc + j;
        X.col(e) << H.col(np + j), He.col(e);
        X.col(ne + e) << H.col(i), He.col(e);
      }
    }
    const Matrix M = m.f_v_me.forward(X);
    for (int i = 0; i < np; ++i) {
      for (int e : g.prev_adjacency[i]) Hn.col(i) += M.col(e);
    }
    for (int j = 0; j < nc; ++j) {
      for (int e : g.curr_adjacency[j]) Hn.col(np + j) += M.col(ne + e);
    }
  }
  for (int i = 0; i < np; ++i) g.prev_nodes[i].state = Hn.col(i);
  for (int j = 0; j < nc; ++j) g.curr_nodes[j].state = Hn.col(np + j);
}

void propagate(AssociationGraph& g, const ModelParameters& m, int steps) {
  if (steps < 1) {
    throw InvalidConfig("at least one message-passing step is required");
  }
  const Matrix H0 = gather_node_states(g);
  const Matrix He0 = gather_edge_states(g);
  const int np = static_cast<int>(g.prev_nodes.size());
  const int nc = static_cast<int>(g.curr_nodes.size());
  MpnPass pass(m, np, nc, false);
  pass.seed(H0, He0);
  for (int l = 1; l <= steps; ++l) pass.step(true);
  scatter_states(g, pass.node_states(), pass.edge_states());
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    auto& sp = g.edges[e].score_per_step;
    sp.clear();
    for (const auto& s : pass.scores()) {
      sp.push_back(s(0, static_cast<Eigen::Index>(e)));
    }
  }
}

double classify(const Eigen::VectorXd& edge_state, const ModelParameters& m) {
  return m.f_cls.forward(edge_state)[0];
}

double pair_loss(const AssociationGraph& g, std::span<const int> labels,
                 const nn::FocalLoss& focal) {
  if (labels.size() != g.edges.size()) {
    throw DimensionMismatch("one label per edge required");
  }
  if (g.edges.empty()) return 0.0;
  const std::size_t steps = g.edges.front().score_per_step.size();
  double total = 0.0;
  for (std::size_t l = 0; l < steps; ++l) {
    double sum = 0.0;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      sum += focal.value(g.edges[e].score_per_step.at(l), labels[e]);
    }
    total += sum / static_cast<double>(g.edges.size());
  }
  return total;
}

double pair_loss_and_grad(const AssociationGraph& g,
                          std::span<const int> labels,
                          const ModelParameters& m, const nn::FocalLoss& focal,
                          int steps, ModelGrad* grad) {
  if (steps < 1) {
    throw InvalidConfig("at least one message-passing step is required");
  }
  if (labels.size() != g.edges.size()) {
    throw DimensionMismatch("one label per edge required");
  }
  const int np = static_cast<int>(g.prev_nodes.size());
  const int nc = static_cast<int>(g.curr_nodes.size());
  const int ne = np * nc;
  if (ne == 0) return 0.0;
  const Packed p = pack(g, true);
  MpnPass pass(m, np, nc, grad != nullptr);
  pass.encode(p.fresh_raw, p.fresh_cols, p.carried, p.carried_cols, p.edge_raw);
  for (int l = 1; l <= steps; ++l) pass.step(l < steps);

  const double inv_e = 1.0 / static_cast<double>(ne);
  double loss = 0.0;
  std::vector<Matrix> dscores;
  for (const auto& s : pass.scores()) {
    Matrix d(1, ne);
    double sum = 0.0;
    for (int e = 0; e < ne; ++e) {
      sum += focal.value(s(0, e), labels[e]);
      d(0, e) = focal.derivative(s(0, e), labels[e]) * inv_e;
    }
    loss += sum * inv_e;
    dscores.push_back(std::move(d));
  }
  if (grad) pass.backward(dscores, *grad);
  return loss;
}

}  // namespace rinktrack
