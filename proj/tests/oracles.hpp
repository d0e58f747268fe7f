#pragma once

// Test-only reference implementations. Straight loops over std::vector, no
// Eigen expressions and no calls into the code under test beyond reading
// parameter values.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fedaboost/nn.hpp"

namespace fedaboost::oracle {

// Logits for one input row via explicit loops.
inline std::vector<double> forward_row(const ModelParameters& model, const std::vector<double>& x) {
  std::vector<double> activation = x;
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l].weight;
    const auto& b = layers[l].bias;
    std::vector<double> next(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index o = 0; o < w.rows(); ++o) {
      double sum = b(o);
      for (Eigen::Index i = 0; i < w.cols(); ++i) sum += w(o, i) * activation[static_cast<std::size_t>(i)];
      next[static_cast<std::size_t>(o)] = l + 1 < layers.size() ? std::max(sum, 0.0) : sum;
    }
    activation = std::move(next);
  }
  return activation;
}

// Mean focal loss (gamma = 0 gives cross-entropy) from raw logits.
inline double focal_loss_from_logits(const std::vector<std::vector<double>>& logits,
                                     const std::vector<int>& labels, double gamma, double beta) {
  double total = 0.0;
  for (std::size_t r = 0; r < logits.size(); ++r) {
    const auto& z = logits[r];
    const double m = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (const double v : z) denom += std::exp(v - m);
    const double p = std::exp(z[static_cast<std::size_t>(labels[r])] - m) / denom;
    total += -beta * std::pow(1.0 - p, gamma) * std::log(p);
  }
  return total / static_cast<double>(logits.size());
}

inline double model_loss(const ModelParameters& model, const Matrix& inputs,
                         const std::vector<int>& labels, double gamma, double beta) {
  std::vector<std::vector<double>> logits;
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    std::vector<double> x(inputs.row(r).data(), inputs.row(r).data() + inputs.cols());
    logits.push_back(forward_row(model, x));
  }
  return focal_loss_from_logits(logits, labels, gamma, beta);
}

// Central differences of `loss` with respect to every parameter.
inline std::vector<double> finite_difference_gradient(
    const ModelParameters& model, const std::function<double(const ModelParameters&)>& loss,
    double step = 1e-5) {
  std::vector<double> flat = model.flatten();
  std::vector<double> grad(flat.size());
  ModelParameters probe = model;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double saved = flat[i];
    flat[i] = saved + step;
    probe.assign_flat(flat);
    const double up = loss(probe);
    flat[i] = saved - step;
    probe.assign_flat(flat);
    const double down = loss(probe);
    flat[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

// Element-wise sum(alpha * theta) / sum(alpha) over alpha > 0.
inline std::vector<double> alpha_weighted_mean(const std::vector<std::vector<double>>& thetas,
                                               const std::vector<double>& alphas) {
  std::vector<double> out(thetas.front().size(), 0.0);
  double total = 0.0;
  for (std::size_t m = 0; m < thetas.size(); ++m) {
    if (alphas[m] <= 0.0) continue;
    total += alphas[m];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += alphas[m] * thetas[m][i];
  }
  for (auto& v : out) v /= total;
  return out;
}

// Fraction of entries whose relative error exceeds `tolerance`. Entries where
// both values are below `floor` in magnitude count as matching.
inline double mismatch_fraction(const std::vector<double>& analytic,
                                const std::vector<double>& numeric, double tolerance,
                                double floor = 1e-7) {
  std::size_t bad = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    if (scale < floor) continue;
    if (std::abs(analytic[i] - numeric[i]) / scale > tolerance) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(analytic.size());
}

}  // namespace fedaboost::oracle
