#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>

#include "rinktrack/graph_mpn.hpp"
#include "rinktrack/neuralnet.hpp"

namespace rinktrack::testutil {

inline constexpr double kFdStep = 1e-5;

/// |analytic - numeric| relative to the larger magnitude, floored so that
/// gradients that are zero up to rounding do not blow up the ratio.
inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Worst relative error between backward() and central differences of the
/// scalar sum(R .* net(X)) for random X and R. Checks every parameter of
/// small layers and `samples` random entries of large ones, plus the input
/// gradient.
inline double mlp_fd_worst(nn::Mlp net, std::uint64_t seed, int batch = 3,
                           int samples = 64) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto in = net.input_dim();
  nn::Matrix X(in, batch), R(net.output_dim(), batch);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = n(rng);

  auto loss = [&](const nn::Matrix& x) { return (net.forward(x).array() * R.array()).sum(); };

  nn::MlpCache cache;
  net.forward(X, &cache);
  nn::MlpGrad g = net.zero_grad();
  const nn::Matrix dX = net.backward(cache, R, g);

  double worst = 0.0;
  auto check = [&](double& v, double analytic) {
    const double v0 = v;
    v = v0 + kFdStep;
    const double lp = loss(X);
    v = v0 - kFdStep;
    const double lm = loss(X);
    v = v0;
    worst = std::max(worst, rel_error(analytic, (lp - lm) / (2 * kFdStep)));
  };
  auto visit = [&](double* data, const double* grad, Eigen::Index size) {
    if (size <= samples) {
      for (Eigen::Index i = 0; i < size; ++i) check(data[i], grad[i]);
      return;
    }
    std::uniform_int_distribution<Eigen::Index> pick(0, size - 1);
    for (int s = 0; s < samples; ++s) {
      const Eigen::Index i = pick(rng);
      check(data[i], grad[i]);
    }
  };
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    auto& l = net.layer(k);
    visit(l.W.data(), g.dW[k].data(), l.W.size());
    visit(l.b.data(), g.db[k].data(), l.b.size());
  }
  visit(X.data(), dX.data(), X.size());
  return worst;
}

/// Worst relative error of pair_loss_and_grad against central differences,
/// over `samples` random entries of every parameter tensor.
inline double pair_fd_worst(const AssociationGraph& g, std::span<const int> labels,
                            ModelParameters m, int steps, std::uint64_t seed,
                            int samples = 6) {
  const nn::FocalLoss focal;
  ModelGrad grad = ModelGrad::zeros_like(m);
  pair_loss_and_grad(g, labels, m, focal, steps, &grad);
  const auto slots = param_slots(m, grad);
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (const auto& s : slots) {
    std::uniform_int_distribution<std::size_t> pick(0, s.value.size() - 1);
    for (int t = 0; t < samples; ++t) {
      const std::size_t k = pick(rng);
      double& v = s.value[k];
      const double v0 = v;
      v = v0 + kFdStep;
      const double lp = pair_loss_and_grad(g, labels, m, focal, steps, nullptr);
      v = v0 - kFdStep;
      const double lm = pair_loss_and_grad(g, labels, m, focal, steps, nullptr);
      v = v0;
      worst = std::max(worst, rel_error(s.grad[k], (lp - lm) / (2 * kFdStep)));
    }
  }
  return worst;
}

}  // namespace rinktrack::testutil
