#pragma once

#include <span>

#include "fedaboost/nn.hpp"

namespace fedaboost {

inline constexpr double kMinGamma = 0.0;
inline constexpr double kMaxGamma = 5.0;
// Probabilities are clamped to [kProbabilityFloor, 1 - kProbabilityFloor]
// before any logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

// min(max(gamma, 0), 5). Throws NumericError on NaN.
double clamp_gamma(double gamma);

// Focusing parameter gamma in [0, 5] and balancing factor beta > 0.
class FocalLossParams {
 public:
  explicit FocalLossParams(double gamma = 0.0, double beta = 1.0);

  double gamma() const { return gamma_; }
  double beta() const { return beta_; }

 private:
  double gamma_;
  double beta_;
};

struct LossResult {
  double loss = 0.0;   // mean over the batch
  Matrix grad_logits;  // d(loss)/d(logits), already divided by the batch size
};

// Mean of -log(p_t); gradient (p - one_hot) / batch.
LossResult cross_entropy(const Matrix& probabilities, std::span<const int> labels);

// Mean of -beta * (1 - p_t)^gamma * log(p_t). The gradient goes through the
// softmax and includes the derivative of the modulating factor:
//   dL/dz_k = beta * [gamma (1-p_t)^(gamma-1) p_t log p_t - (1-p_t)^gamma]
//             * (1[k = t] - p_k) / batch
LossResult focal_loss(const Matrix& probabilities, std::span<const int> labels,
                      const FocalLossParams& params);

// Per-example focal loss value for a single ground-truth probability.
double focal_term(double p_t, const FocalLossParams& params);

}  // namespace fedaboost
