#include "rinktrack/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rinktrack/errors.hpp"

namespace rinktrack::nn {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Chebyshev series in s = 2t - 1, t = 2 / (2 + y), of log(erfc(y) / t) + y^2
// on y >= 0. Truncation error is below 1e-17.
constexpr double kErfcCheb[] = {
    -6.5132685989085472e-1, 6.4196979235649026e-1, 1.9476473204185836e-2,
    -9.5615147868086316e-3, -9.4659534448203687e-4, 3.6683949785276145e-4,
    4.2523324806907772e-5, -2.0278578112534243e-5, -1.6242900046470255e-6,
    1.3036558355805232e-6, 1.5626441722066143e-8, -8.5238095914926543e-8,
    6.5290544390988515e-9, 5.0593434955514689e-9, -9.9136415649303309e-10,
    -2.2736512229318359e-10, 9.6467911020155268e-11, 2.3940380830391147e-12,
    -6.8860275264975534e-12, 8.9448792730907257e-13, 3.1309213993429581e-13,
    -1.1270822361367252e-13, 3.8109052551892321e-16, 7.106097613609237e-15,
    -1.5230282014571043e-15, -9.457494571291234e-17, 1.210237189224279e-16,
    -2.816663087747177e-17, 5.0030055594459017e-20, 2.3281042579529253e-18,
};
// erfc underflows past this point.
constexpr double kErfcZero = 26.6;

using Chunk = Eigen::Array<double, 32, 1>;

// Branch-free Phi(x) for one chunk, evaluated with packet math.
Chunk normal_cdf_chunk(const Chunk& x) {
  const Chunk a = x.abs() * kInvSqrt2;
  const Chunk t = 2.0 / (2.0 + a);
  const Chunk s2 = 4.0 * t - 2.0;
  constexpr int n = static_cast<int>(std::size(kErfcCheb));
  Chunk b1 = Chunk::Zero(), b2 = Chunk::Zero();
  for (int k = n - 1; k >= 1; --k) {
    const Chunk b0 = kErfcCheb[k] + s2 * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  const Chunk series = kErfcCheb[0] + 0.5 * s2 * b1 - b2;
  const Chunk half_tail = 0.5 * t * (series - a.square()).exp();
  // Eigen's select has no packet path; a plain loop vectorises as blends.
  Chunk out;
  for (int i = 0; i < Chunk::SizeAtCompileTime; ++i) {
    const double h = a[i] < kErfcZero ? half_tail[i] : 0.0;
    out[i] = x[i] < 0.0 ? h : 1.0 - h;
  }
  return out;
}

}  // namespace

Eigen::ArrayXXd normal_cdf(const Eigen::ArrayXXd& x) {
  Eigen::ArrayXXd out(x.rows(), x.cols());
  const Eigen::Index n = x.size();
  const Eigen::Index full = n - n % Chunk::SizeAtCompileTime;
  for (Eigen::Index i = 0; i < full; i += Chunk::SizeAtCompileTime) {
    Eigen::Map<Chunk>(out.data() + i) =
        normal_cdf_chunk(Eigen::Map<const Chunk>(x.data() + i));
  }
  if (full < n) {
    Chunk tail = Chunk::Zero();
    tail.head(n - full) = Eigen::Map<const Eigen::ArrayXd>(x.data() + full, n - full);
    const Chunk r = normal_cdf_chunk(tail);
    Eigen::Map<Eigen::ArrayXd>(out.data() + full, n - full) = r.head(n - full);
  }
  return out;
}

double gelu(double x) {
  return x * normal_cdf(Eigen::ArrayXXd::Constant(1, 1, x))(0, 0);
}

double gelu_derivative(double x) {
  const double cdf = normal_cdf(Eigen::ArrayXXd::Constant(1, 1, x))(0, 0);
  return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void apply_activation(Activation act, const Matrix& Z, Matrix& A) {
  A.resize(Z.rows(), Z.cols());
  const Eigen::Index n = Z.size();
  const double* z = Z.data();
  double* a = A.data();
  switch (act) {
    case Activation::kGelu:
      A.array() = Z.array() * normal_cdf(Z.array());
      break;
    case Activation::kSigmoid:
      for (Eigen::Index i = 0; i < n; ++i) a[i] = sigmoid(z[i]);
      break;
    case Activation::kNone:
      A = Z;
      break;
  }
}

Matrix activation_backward(Activation act, const Matrix& Z, const Matrix& A,
                           const Matrix& dA) {
  switch (act) {
    case Activation::kGelu: {
      // Phi(z) is recovered from the forward output a = z Phi(z); near zero
      // the ratio loses accuracy and the linearisation is exact to O(z^3).
      const Eigen::ArrayXXd pdf = (-0.5 * Z.array().square()).exp() * kInvSqrt2Pi;
      Matrix dZ(Z.rows(), Z.cols());
      const Eigen::Index n = Z.size();
      const double* z = Z.data();
      const double* a = A.data();
      const double* g = dA.data();
      const double* p = pdf.data();
      double* d = dZ.data();
      for (Eigen::Index i = 0; i < n; ++i) {
        const double cdf =
            std::abs(z[i]) > 1e-6 ? a[i] / z[i] : 0.5 + kInvSqrt2Pi * z[i];
        d[i] = g[i] * (cdf + z[i] * p[i]);
      }
      return dZ;
    }
    case Activation::kSigmoid:
      return (dA.array() * A.array() * (1.0 - A.array())).matrix();
    case Activation::kNone:
      return dA;
  }
  return dA;
}

void MlpGrad::set_zero() {
  for (auto& w : dW) w.setZero();
  for (auto& b : db) b.setZero();
}

MlpGrad& MlpGrad::operator+=(const MlpGrad& o) {
  for (std::size_t i = 0; i < dW.size(); ++i) {
    dW[i] += o.dW[i];
    db[i] += o.db[i];
  }
  return *this;
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.b.size() != l.out_dim()) {
      throw DimensionMismatch("layer " + std::to_string(i) +
                              ": bias length does not match output width");
    }
    if (i > 0 && l.in_dim() != layers_[i - 1].out_dim()) {
      throw DimensionMismatch("layer " + std::to_string(i) + " expects " +
                              std::to_string(l.in_dim()) +
                              " inputs but previous layer emits " +
                              std::to_string(layers_[i - 1].out_dim()));
    }
  }
}

Mlp Mlp::zeros(const std::vector<Eigen::Index>& dims,
               const std::vector<Activation>& activations) {
  if (dims.size() != activations.size() + 1) {
    throw DimensionMismatch("need one activation per layer");
  }
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i < activations.size(); ++i) {
    layers.push_back({Matrix::Zero(dims[i + 1], dims[i]),
                      Vector::Zero(dims[i + 1]), activations[i]});
  }
  return Mlp(std::move(layers));
}

void Mlp::init_glorot(std::mt19937_64& rng) {
  for (auto& l : layers_) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(l.in_dim() + l.out_dim()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index c = 0; c < l.W.cols(); ++c) {
      for (Eigen::Index r = 0; r < l.W.rows(); ++r) l.W(r, c) = dist(rng);
    }
    l.b.setZero();
  }
}

void Mlp::init_fan_in(std::mt19937_64& rng) {
  for (auto& l : layers_) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(l.in_dim()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index c = 0; c < l.W.cols(); ++c) {
      for (Eigen::Index r = 0; r < l.W.rows(); ++r) l.W(r, c) = dist(rng);
    }
    for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b[r] = dist(rng);
  }
}

Eigen::Index Mlp::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().in_dim();
}

Eigen::Index Mlp::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

Matrix Mlp::forward(const Matrix& X, MlpCache* cache, std::size_t first) const {
  if (first >= layers_.size() || X.rows() != layers_[first].in_dim()) {
    throw DimensionMismatch("mlp input has " + std::to_string(X.rows()) +
                            " rows, expected " +
                            std::to_string(first < layers_.size()
                                               ? layers_[first].in_dim()
                                               : 0));
  }
  if (cache) {
    cache->inputs.assign(layers_.size(), Matrix());
    cache->pre.assign(layers_.size(), Matrix());
  }
  Matrix A = X;
  for (std::size_t i = first; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    Matrix Z = l.W * A;
    Z.colwise() += l.b;
    Matrix next;
    apply_activation(l.activation, Z, next);
    if (cache) {
      cache->inputs[i] = std::move(A);
      cache->pre[i] = std::move(Z);
    }
    A = std::move(next);
  }
  if (cache) cache->output = A;
  return A;
}

Vector Mlp::forward(const Vector& x) const {
  Matrix X = x;
  return forward(X, nullptr, 0).col(0);
}

Matrix Mlp::backward(const MlpCache& cache, const Matrix& dY, MlpGrad& grad,
                     std::size_t first) const {
  Matrix dA = dY;
  for (std::size_t k = layers_.size(); k-- > first;) {
    const auto& l = layers_[k];
    const Matrix& A =
        (k + 1 < layers_.size()) ? cache.inputs[k + 1] : cache.output;
    Matrix dZ = activation_backward(l.activation, cache.pre[k], A, dA);
    grad.dW[k].noalias() += dZ * cache.inputs[k].transpose();
    grad.db[k] += dZ.rowwise().sum();
    dA.noalias() = l.W.transpose() * dZ;
  }
  return dA;
}

MlpGrad Mlp::zero_grad() const {
  MlpGrad g;
  for (const auto& l : layers_) {
    g.dW.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
    g.db.push_back(Vector::Zero(l.b.size()));
  }
  return g;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    n += static_cast<std::size_t>(l.W.size() + l.b.size());
  }
  return n;
}

double FocalLoss::value(double p, int label) const {
  p = std::clamp(p, kClamp, 1.0 - kClamp);
  if (label == 1) return -alpha * std::pow(1.0 - p, gamma) * std::log(p);
  return -(1.0 - alpha) * std::pow(p, gamma) * std::log(1.0 - p);
}

double FocalLoss::derivative(double p, int label) const {
  if (!(p > kClamp && p < 1.0 - kClamp)) return 0.0;
  if (label == 1) {
    const double q = 1.0 - p;
    return alpha * gamma * std::pow(q, gamma - 1.0) * std::log(p) -
           alpha * std::pow(q, gamma) / p;
  }
  return -(1.0 - alpha) * (gamma * std::pow(p, gamma - 1.0) * std::log(1.0 - p) -
                           std::pow(p, gamma) / (1.0 - p));
}

void LrSchedule::validate() const {
  if (!(min_lr > 0.0 && min_lr <= base_lr)) {
    throw InvalidConfig("learning-rate schedule needs 0 < min_lr <= base_lr");
  }
  if (warmup_epochs < 0 || warmup_epochs >= total_epochs) {
    throw InvalidConfig("warmup must be shorter than the schedule");
  }
}

double LrSchedule::lr_at(int epoch) const {
  if (epoch < warmup_epochs) {
    const double start = base_lr / 10.0;
    return start + (base_lr - start) * static_cast<double>(epoch) /
                       static_cast<double>(warmup_epochs);
  }
  const int span = total_epochs - warmup_epochs;
  const double t =
      std::min(1.0, static_cast<double>(epoch - warmup_epochs) / span);
  return min_lr +
         (base_lr - min_lr) * (1.0 + std::cos(std::numbers::pi * t)) / 2.0;
}

void AdamState::step(std::span<const ParamSlot> slots, double lr) {
  if (m_.empty()) {
    for (const auto& s : slots) {
      m_.emplace_back(s.value.size(), 0.0);
      v_.emplace_back(s.value.size(), 0.0);
    }
  }
  if (m_.size() != slots.size()) {
    throw DimensionMismatch("optimizer state does not match parameter set");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < slots.size(); ++k) {
    auto value = slots[k].value;
    auto grad = slots[k].grad;
    auto& m = m_[k];
    auto& v = v_[k];
    if (grad.size() != value.size() || m.size() != value.size()) {
      throw DimensionMismatch("gradient shape does not match parameter");
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace rinktrack::nn
