#include "fedaboost/optim.hpp"

#include <cmath>
#include <string>

#include "fedaboost/errors.hpp"

namespace fedaboost {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd:
      return "sgd";
    case OptimizerKind::kAdamW:
      return "adamw";
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adamw") return OptimizerKind::kAdamW;
  throw InvalidArgument("unknown optimizer '" + std::string(name) + "'");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("optimizer learning rate must be positive");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw InvalidArgument("optimizer weight decay must be non-negative");
  }
  if (kind == OptimizerKind::kAdamW) {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw InvalidArgument("AdamW betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw InvalidArgument("AdamW epsilon must be positive");
  }
}

OptimizerState OptimizerState::fresh(const OptimizerConfig& config,
                                     const ModelParameters& model) {
  OptimizerState state;
  state.config = config;
  if (config.kind == OptimizerKind::kAdamW) {
    state.first_moment = model.zeros_like();
    state.second_moment = model.zeros_like();
  }
  return state;
}

void sgd_update(ModelParameters& model, const Gradient& grad, double learning_rate,
                double weight_decay) {
  if (!model.same_architecture(grad)) throw ShapeError("sgd: gradient shape mismatch");
  if (!(learning_rate > 0.0)) throw InvalidArgument("sgd: learning rate must be positive");
  auto& layers = model.layers();
  const auto& grads = grad.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (weight_decay != 0.0) {
      layers[l].weight -= learning_rate * (grads[l].weight + weight_decay * layers[l].weight);
      layers[l].bias -= learning_rate * (grads[l].bias + weight_decay * layers[l].bias);
    } else {
      layers[l].weight -= learning_rate * grads[l].weight;
      layers[l].bias -= learning_rate * grads[l].bias;
    }
  }
}

ModelParameters sgd_step(const ModelParameters& model, const Gradient& grad,
                         double learning_rate, double weight_decay) {
  ModelParameters out = model;
  sgd_update(out, grad, learning_rate, weight_decay);
  return out;
}

void adamw_update(ModelParameters& model, const Gradient& grad, OptimizerState& state) {
  if (state.config.kind != OptimizerKind::kAdamW) {
    throw InvalidArgument("adamw_step: optimizer state is not AdamW");
  }
  if (!model.same_architecture(grad) || !model.same_architecture(state.first_moment) ||
      !model.same_architecture(state.second_moment)) {
    throw ShapeError("adamw_step: shape mismatch");
  }
  const auto& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - cfg.learning_rate * cfg.weight_decay;

  auto step_tensor = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    param *= decay;
    param.array() -= cfg.learning_rate * (m.array() / bias1) /
                     ((v.array() / bias2).sqrt() + cfg.epsilon);
  };
  auto& layers = model.layers();
  const auto& grads = grad.layers();
  auto& first = state.first_moment.layers();
  auto& second = state.second_moment.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    step_tensor(layers[l].weight, grads[l].weight, first[l].weight, second[l].weight);
    step_tensor(layers[l].bias, grads[l].bias, first[l].bias, second[l].bias);
  }
}

std::pair<ModelParameters, OptimizerState> adamw_step(const ModelParameters& model,
                                                      const Gradient& grad,
                                                      const OptimizerState& state) {
  ModelParameters out = model;
  OptimizerState next = state;
  adamw_update(out, grad, next);
  return {std::move(out), std::move(next)};
}

void optimizer_update(ModelParameters& model, const Gradient& grad, OptimizerState& state) {
  switch (state.config.kind) {
    case OptimizerKind::kSgd:
      sgd_update(model, grad, state.config.learning_rate, state.config.weight_decay);
      state.step += 1;
      return;
    case OptimizerKind::kAdamW:
      adamw_update(model, grad, state);
      return;
  }
}

}  // namespace fedaboost
