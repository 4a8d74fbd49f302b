#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace rinktrack::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kGelu, kSigmoid, kNone };

/// Standard normal CDF, elementwise, accurate to a few ulp.
Eigen::ArrayXXd normal_cdf(const Eigen::ArrayXXd& x);

/// Exact GELU, x * Phi(x) with the erf-based Gaussian CDF.
double gelu(double x);
/// d/dx gelu(x) = Phi(x) + x * phi(x).
double gelu_derivative(double x);
double sigmoid(double x);

/// Fully connected layer y = act(W x + b). Batched inputs are stored one
/// sample per column.
struct DenseLayer {
  Matrix W;  // out x in
  Vector b;  // out
  Activation activation = Activation::kGelu;

  Eigen::Index in_dim() const { return W.cols(); }
  Eigen::Index out_dim() const { return W.rows(); }
};

struct MlpCache {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
  Matrix output;
};

struct MlpGrad {
  std::vector<Matrix> dW;
  std::vector<Vector> db;

  void set_zero();
  MlpGrad& operator+=(const MlpGrad& o);
};

class Mlp {
 public:
  Mlp() = default;
  /// Throws DimensionMismatch if adjacent layer dimensions do not chain.
  explicit Mlp(std::vector<DenseLayer> layers);

  /// Zero-initialised network with the given widths; dims has one more entry
  /// than activations.
  static Mlp zeros(const std::vector<Eigen::Index>& dims,
                   const std::vector<Activation>& activations);

  /// Uniform in +-sqrt(6 / (fan_in + fan_out)) per layer, zero biases.
  void init_glorot(std::mt19937_64& rng);
  /// Weights and biases uniform in +-1/sqrt(fan_in).
  void init_fan_in(std::mt19937_64& rng);

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  std::size_t num_layers() const { return layers_.size(); }
  const DenseLayer& layer(std::size_t i) const { return layers_[i]; }
  DenseLayer& layer(std::size_t i) { return layers_[i]; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Forward pass over a batch (one column per sample) starting at layer
  /// `first`; X must have that layer's input width. When cache is non-null it
  /// receives what backward needs.
  Matrix forward(const Matrix& X, MlpCache* cache = nullptr,
                 std::size_t first = 0) const;
  Vector forward(const Vector& x) const;

  /// Accumulates parameter gradients for layers >= first into grad and
  /// returns the gradient with respect to the input of layer `first`.
  Matrix backward(const MlpCache& cache, const Matrix& dY, MlpGrad& grad,
                  std::size_t first = 0) const;

  MlpGrad zero_grad() const;
  std::size_t parameter_count() const;

 private:
  std::vector<DenseLayer> layers_;
};

void apply_activation(Activation act, const Matrix& Z, Matrix& A);
/// dZ = dA * act'(Z), elementwise. A is act(Z) as produced by the forward.
Matrix activation_backward(Activation act, const Matrix& Z, const Matrix& A,
                           const Matrix& dA);

/// Sigmoid focal loss on a probability. Probabilities are clamped to
/// [kClamp, 1 - kClamp] before evaluation.
struct FocalLoss {
  static constexpr double kClamp = 1e-7;
  double alpha = 0.25;
  double gamma = 2.0;

  double value(double p, int label) const;
  /// dL/dp; zero where the clamp is active.
  double derivative(double p, int label) const;
};

struct LrSchedule {
  double base_lr = 0.01;
  double min_lr = 0.001;
  int warmup_epochs = 10;
  int total_epochs = 30;

  /// Throws InvalidConfig on an inconsistent schedule.
  void validate() const;
  double lr_at(int epoch) const;
};

/// A parameter tensor and its gradient, both flattened.
struct ParamSlot {
  std::span<double> value;
  std::span<const double> grad;
};

/// Bias-corrected Adam without weight decay.
class AdamState {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void step(std::span<const ParamSlot> slots, double lr);
  std::int64_t t() const { return t_; }

 private:
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t t_ = 0;
};

}  // namespace rinktrack::nn
