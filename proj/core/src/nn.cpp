#include "fedaboost/nn.hpp"

#include <cmath>
#include <string>

#include "fedaboost/errors.hpp"
#include "fedaboost/rng.hpp"

namespace fedaboost {

ModelParameters::ModelParameters(std::vector<DenseLayer> layers)
    : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidArchitecture("model needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weight.rows() == 0 || layer.weight.cols() == 0) {
      throw InvalidArchitecture("layer " + std::to_string(l) + " has an empty weight");
    }
    if (layer.bias.size() != layer.weight.rows()) {
      throw InvalidArchitecture("layer " + std::to_string(l) + " bias size mismatch");
    }
    if (l > 0 && layers_[l - 1].fan_out() != layer.fan_in()) {
      throw InvalidArchitecture("layer " + std::to_string(l) +
                                " fan_in does not chain with the previous layer");
    }
  }
}

std::vector<std::size_t> ModelParameters::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (layers_.empty()) return sizes;
  sizes.push_back(layers_.front().fan_in());
  for (const auto& layer : layers_) sizes.push_back(layer.fan_out());
  return sizes;
}

std::size_t ModelParameters::input_size() const {
  return layers_.empty() ? 0 : layers_.front().fan_in();
}

std::size_t ModelParameters::output_size() const {
  return layers_.empty() ? 0 : layers_.back().fan_out();
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers_) {
    total += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  }
  return total;
}

bool ModelParameters::same_architecture(const ModelParameters& other) const {
  return layer_sizes() == other.layer_sizes();
}

bool ModelParameters::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

ModelParameters ModelParameters::zeros_like() const {
  ModelParameters out = *this;
  for (auto& layer : out.layers_) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  return out;
}

void ModelParameters::add_scaled(const ModelParameters& other, double scale) {
  if (!same_architecture(other)) throw ShapeError("add_scaled: architecture mismatch");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].weight += scale * other.layers_[l].weight;
    layers_[l].bias += scale * other.layers_[l].bias;
  }
}

void ModelParameters::scale(double factor) {
  for (auto& layer : layers_) {
    layer.weight *= factor;
    layer.bias *= factor;
  }
}

double ModelParameters::squared_distance(const ModelParameters& other) const {
  if (!same_architecture(other)) throw ShapeError("squared_distance: architecture mismatch");
  double total = 0.0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    total += (layers_[l].weight - other.layers_[l].weight).squaredNorm();
    total += (layers_[l].bias - other.layers_[l].bias).squaredNorm();
  }
  return total;
}

std::vector<double> ModelParameters::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& layer : layers_) {
    flat.insert(flat.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
    flat.insert(flat.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return flat;
}

void ModelParameters::assign_flat(std::span<const double> values) {
  if (values.size() != parameter_count()) throw ShapeError("assign_flat: size mismatch");
  std::size_t offset = 0;
  for (auto& layer : layers_) {
    std::copy_n(values.data() + offset, layer.weight.size(), layer.weight.data());
    offset += static_cast<std::size_t>(layer.weight.size());
    std::copy_n(values.data() + offset, layer.bias.size(), layer.bias.data());
    offset += static_cast<std::size_t>(layer.bias.size());
  }
}

bool operator==(const ModelParameters& a, const ModelParameters& b) {
  if (!a.same_architecture(b)) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    if (a.layers_[l].weight != b.layers_[l].weight) return false;
    if (a.layers_[l].bias != b.layers_[l].bias) return false;
  }
  return true;
}

ModelParameters init_mlp(std::span<const std::size_t> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) {
    throw InvalidArchitecture("init_mlp: need at least an input and an output size");
  }
  for (const auto size : layer_sizes) {
    if (size == 0) throw InvalidArchitecture("init_mlp: layer sizes must be positive");
  }
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  layers.reserve(layer_sizes.size() - 1);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(layer_sizes[l]);
    const auto fan_out = static_cast<Eigen::Index>(layer_sizes[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = rng.uniform(-limit, limit);
    }
    layers.push_back(std::move(layer));
  }
  return ModelParameters(std::move(layers));
}

namespace {

void check_inputs(const ModelParameters& model, const Matrix& inputs) {
  if (model.depth() == 0) throw ShapeError("forward: empty model");
  if (static_cast<std::size_t>(inputs.cols()) != model.input_size()) {
    throw ShapeError("forward: batch has " + std::to_string(inputs.cols()) +
                     " features, model expects " + std::to_string(model.input_size()));
  }
}

}  // namespace

ForwardResult forward(const ModelParameters& model, const Matrix& inputs) {
  check_inputs(model, inputs);
  ForwardResult result;
  result.cache.layer_sizes = model.layer_sizes();
  result.cache.activations.reserve(model.depth());
  result.cache.activations.push_back(inputs);
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z;
    z.noalias() = result.cache.activations.back() * layers[l].weight.transpose();
    z.rowwise() += layers[l].bias.transpose();
    if (l + 1 == layers.size()) {
      result.logits = std::move(z);
    } else {
      result.cache.activations.push_back(z.cwiseMax(0.0));
    }
  }
  return result;
}

Matrix predict_logits(const ModelParameters& model, const Matrix& inputs) {
  check_inputs(model, inputs);
  Matrix activation = inputs;
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z;
    z.noalias() = activation * layers[l].weight.transpose();
    z.rowwise() += layers[l].bias.transpose();
    if (l + 1 < layers.size()) z = z.cwiseMax(0.0);
    activation = std::move(z);
  }
  return activation;
}

Matrix softmax(const Matrix& logits) {
  if (!logits.allFinite()) throw NumericError("softmax: non-finite logits");
  Matrix probs(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double row_max = logits.row(r).maxCoeff();
    probs.row(r) = (logits.row(r).array() - row_max).exp();
    probs.row(r) /= probs.row(r).sum();
  }
  return probs;
}

Gradient backward(const ModelParameters& model, const ForwardCache& cache,
                  const Matrix& grad_logits) {
  if (cache.layer_sizes != model.layer_sizes() ||
      cache.activations.size() != model.depth()) {
    throw ShapeError("backward: cache does not match the model");
  }
  const auto batch = cache.activations.front().rows();
  if (grad_logits.rows() != batch ||
      static_cast<std::size_t>(grad_logits.cols()) != model.output_size()) {
    throw ShapeError("backward: grad_logits shape mismatch");
  }
  const auto& layers = model.layers();
  std::vector<DenseLayer> grads(layers.size());
  Matrix upstream = grad_logits;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Matrix& input = cache.activations[l];
    grads[l].weight.noalias() = upstream.transpose() * input;
    grads[l].bias = upstream.colwise().sum().transpose();
    if (l > 0) {
      Matrix next;
      next.noalias() = upstream * layers[l].weight;
      upstream = (input.array() > 0.0).select(next, 0.0);
    }
  }
  return Gradient(std::move(grads));
}

ModelParameters combine(std::span<const ModelParameters* const> models,
                        std::span<const double> coefficients) {
  if (models.empty()) throw InvalidArgument("combine: no models");
  if (models.size() != coefficients.size()) {
    throw InvalidArgument("combine: one coefficient per model required");
  }
  double total = 0.0;
  for (const double c : coefficients) {
    if (!std::isfinite(c)) throw NumericError("combine: non-finite coefficient");
    total += c;
  }
  if (!(total > 0.0)) throw InvalidArgument("combine: coefficient sum must be positive");
  for (const auto* model : models) {
    if (!model->same_architecture(*models.front())) {
      throw ShapeError("combine: architecture mismatch");
    }
  }
  ModelParameters out = models.front()->zeros_like();
  for (std::size_t i = 0; i < models.size(); ++i) {
    out.add_scaled(*models[i], coefficients[i] / total);
  }
  return out;
}

ModelParameters combine(std::span<const ModelParameters> models,
                        std::span<const double> coefficients) {
  std::vector<const ModelParameters*> pointers;
  pointers.reserve(models.size());
  for (const auto& model : models) pointers.push_back(&model);
  return combine(std::span<const ModelParameters* const>(pointers), coefficients);
}

}  // namespace fedaboost
