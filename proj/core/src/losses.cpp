#include "fedaboost/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedaboost/errors.hpp"

namespace fedaboost {
namespace {

double clamp_probability(double p) {
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

void check_labels(const Matrix& probabilities, std::span<const int> labels) {
  if (static_cast<std::size_t>(probabilities.rows()) != labels.size()) {
    throw ShapeError("loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(probabilities.rows()) + " rows");
  }
  if (labels.empty()) throw InvalidArgument("loss: empty batch");
  for (const int label : labels) {
    if (label < 0 || label >= probabilities.cols()) {
      throw InvalidArgument("loss: label " + std::to_string(label) + " out of range");
    }
  }
}

}  // namespace

double clamp_gamma(double gamma) {
  if (std::isnan(gamma)) throw NumericError("clamp_gamma: NaN");
  return std::clamp(gamma, kMinGamma, kMaxGamma);
}

FocalLossParams::FocalLossParams(double gamma, double beta) : gamma_(gamma), beta_(beta) {
  if (!(gamma >= kMinGamma && gamma <= kMaxGamma)) {
    throw InvalidArgument("focal loss gamma must lie in [0, 5]");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw InvalidArgument("focal loss beta must be positive");
  }
}

LossResult cross_entropy(const Matrix& probabilities, std::span<const int> labels) {
  check_labels(probabilities, labels);
  const auto batch = static_cast<double>(labels.size());
  LossResult result;
  result.grad_logits = probabilities;
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    total += -std::log(clamp_probability(probabilities(row, labels[i])));
    result.grad_logits(row, labels[i]) -= 1.0;
  }
  result.grad_logits /= batch;
  result.loss = total / batch;
  return result;
}

double focal_term(double p_t, const FocalLossParams& params) {
  const double p = clamp_probability(p_t);
  return -params.beta() * std::pow(1.0 - p, params.gamma()) * std::log(p);
}

LossResult focal_loss(const Matrix& probabilities, std::span<const int> labels,
                      const FocalLossParams& params) {
  check_labels(probabilities, labels);
  const auto batch = static_cast<double>(labels.size());
  const double gamma = params.gamma();
  const double beta = params.beta();
  LossResult result;
  result.grad_logits.resize(probabilities.rows(), probabilities.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double p = clamp_probability(probabilities(row, labels[i]));
    const double log_p = std::log(p);
    const double modulator = std::pow(1.0 - p, gamma);
    total += -beta * modulator * log_p;
    // dL/dp_t * p_t, so that dL/dz_k = scale * (1[k = t] - p_k).
    const double scale =
        beta * (gamma * std::pow(1.0 - p, gamma - 1.0) * p * log_p - modulator);
    result.grad_logits.row(row) = -scale * probabilities.row(row);
    result.grad_logits(row, labels[i]) += scale;
  }
  result.grad_logits /= batch;
  result.loss = total / batch;
  return result;
}

}  // namespace fedaboost
