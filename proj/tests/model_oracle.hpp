#pragma once

// Scalar-loop reference for the decision network and a central-difference
// gradient check built on it. Shares nothing with the library's matrix code
// beyond the parameter containers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cgrkit/decision/model.hpp"

namespace cgrkit::test {

using Mlpd = BasicMlp<double>;

struct OracleRun {
  std::vector<double> p;
  std::vector<bool> active;  // every ReLU input > 0, in evaluation order
  double loss = 0.0;
};

inline OracleRun oracle_forward(const Mlpd& m, const std::vector<std::vector<double>>& x,
                                const std::vector<std::uint8_t>& y, bool batch_stats) {
  const auto& s = m.shape;
  const std::size_t n = x.size();
  std::vector<std::vector<double>> a = x;  // a[sample][feature]
  std::vector<std::vector<double>> skip;
  OracleRun out;
  for (int l = 0; l < s.layers; ++l) {
    const auto& L = m.layers[l];
    if (l == s.skip_to - 1)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t f = 0; f < a[k].size(); ++f) a[k][f] += skip[k][f];
    const auto rows = static_cast<std::size_t>(L.w.rows());
    std::vector<std::vector<double>> z(n, std::vector<double>(rows));
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = L.b[r];
        for (std::size_t c = 0; c < a[k].size(); ++c) acc += L.w(r, c) * a[k][c];
        z[k][r] = acc;
      }
    if (l == s.layers - 1) {
      for (std::size_t k = 0; k < n; ++k) out.p.push_back(1.0 / (1.0 + std::exp(-z[k][0])));
      break;
    }
    for (std::size_t r = 0; r < rows; ++r) {
      double mean = L.mean[r], var = L.var[r];
      if (batch_stats) {
        mean = 0.0;
        for (std::size_t k = 0; k < n; ++k) mean += z[k][r];
        mean /= static_cast<double>(n);
        var = 0.0;
        for (std::size_t k = 0; k < n; ++k) var += (z[k][r] - mean) * (z[k][r] - mean);
        var /= static_cast<double>(n);
      }
      for (std::size_t k = 0; k < n; ++k) {
        const double v = L.gamma[r] * (z[k][r] - mean) / std::sqrt(var + 1e-5) + L.beta[r];
        out.active.push_back(v > 0);
        z[k][r] = std::max(0.0, v);
      }
    }
    a = z;
    if (l == s.skip_from - 1) skip = a;
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double q = std::clamp(out.p[k], 1e-7, 1.0 - 1e-7);
    sum += y[k] ? std::log(q) : std::log(1.0 - q);
  }
  out.loss = -sum / static_cast<double>(n);
  return out;
}

struct GradCheckResult {
  std::vector<int> checked_per_layer;
  int kinks = 0;          // coordinates whose +-h step flips a ReLU
  double max_rel = 0.0;   // over checked coordinates
};

/// Compares every trainable coordinate's analytic gradient with a central
/// difference of the oracle loss. Relative error uses a 1e-6 floor so that
/// gradients which vanish identically (biases ahead of batch normalization)
/// compare on absolute terms. Steps that flip a ReLU are not differentiable
/// there and are counted rather than compared.
inline GradCheckResult gradient_check(const Mlpd& model, const std::vector<std::vector<double>>& x,
                                      const std::vector<std::uint8_t>& y, bool batch_stats, double h = 1e-4) {
  Mlpd::Matrix xm(model.shape.input, static_cast<Eigen::Index>(x.size()));
  for (std::size_t k = 0; k < x.size(); ++k)
    for (int f = 0; f < model.shape.input; ++f) xm(f, static_cast<Eigen::Index>(k)) = x[k][f];
  const auto g = gradients(model, xm, y, batch_stats ? NormMode::batch : NormMode::running);
  std::vector<double> analytic;
  auto grad = g.grad;
  for_each_trainable<double>(grad, [&](int, double& v) { analytic.push_back(v); });
  const auto base = oracle_forward(model, x, y, batch_stats);

  GradCheckResult res;
  res.checked_per_layer.assign(model.shape.layers, 0);
  Mlpd probe = model;
  std::size_t index = 0;
  for_each_trainable<double>(probe, [&](int layer, double& v) {
    const double keep = v;
    v = keep + h;
    const auto up = oracle_forward(probe, x, y, batch_stats);
    v = keep - h;
    const auto down = oracle_forward(probe, x, y, batch_stats);
    v = keep;
    const double a = analytic[index++];
    if (up.active != base.active || down.active != base.active) {
      ++res.kinks;
      return;
    }
    const double numeric = (up.loss - down.loss) / (2.0 * h);
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    res.max_rel = std::max(res.max_rel, rel);
    ++res.checked_per_layer[layer];
  });
  return res;
}

/// Two isotropic Gaussian blobs whose means sit +-separation/2 apart along a
/// fixed random direction; linearly separable up to the Gaussian tails.
inline LabeledSet gaussian_blobs(std::size_t n, int dim, double separation, double sigma, std::uint64_t seed) {
  std::mt19937_64 dir_rng(12345);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> axis(dim);
  double norm = 0.0;
  for (auto& v : axis) {
    v = g(dir_rng);
    norm += v * v;
  }
  for (auto& v : axis) v /= std::sqrt(norm);
  std::mt19937_64 rng(seed);
  LabeledSet set;
  set.dim = dim;
  std::vector<float> sample(dim);
  for (std::size_t k = 0; k < n; ++k) {
    const bool label = (rng() & 1) != 0;
    const double side = label ? 0.5 * separation : -0.5 * separation;
    for (int f = 0; f < dim; ++f) sample[f] = static_cast<float>(side * axis[f] + sigma * g(rng));
    set.append(sample, label);
  }
  return set;
}

}  // namespace cgrkit::test
