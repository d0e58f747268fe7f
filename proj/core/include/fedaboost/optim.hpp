#pragma once

#include <cstdint>
#include <string_view>
#include <utility>

#include "fedaboost/nn.hpp"

namespace fedaboost {

enum class OptimizerKind { kSgd, kAdamW };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  // AdamW only.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

// Per-model optimizer memory. For SGD only the config is used.
struct OptimizerState {
  OptimizerConfig config;
  ModelParameters first_moment;
  ModelParameters second_moment;
  std::uint64_t step = 0;

  // Moments zero-initialized to the model's shape.
  static OptimizerState fresh(const OptimizerConfig& config, const ModelParameters& model);
};

// theta' = theta - lr * (grad + weight_decay * theta)
ModelParameters sgd_step(const ModelParameters& model, const Gradient& grad,
                         double learning_rate, double weight_decay);

// Decoupled weight decay with bias-corrected moments:
//   theta <- theta * (1 - lr * wd)
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
std::pair<ModelParameters, OptimizerState> adamw_step(const ModelParameters& model,
                                                      const Gradient& grad,
                                                      const OptimizerState& state);

// In-place variants used by the training loops; same arithmetic as above.
void sgd_update(ModelParameters& model, const Gradient& grad, double learning_rate,
                double weight_decay);
void adamw_update(ModelParameters& model, const Gradient& grad, OptimizerState& state);

// Dispatches on state.config.kind.
void optimizer_update(ModelParameters& model, const Gradient& grad, OptimizerState& state);

}  // namespace fedaboost
