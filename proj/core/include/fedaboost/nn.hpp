#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fedaboost {

// Row-major so a batch row is one contiguous example.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct DenseLayer {
  Matrix weight;  // [fan_out x fan_in]
  Vector bias;    // [fan_out]

  std::size_t fan_in() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t fan_out() const { return static_cast<std::size_t>(weight.rows()); }
};

// Flat, ordered stack of dense layers. Hidden layers use ReLU, the last layer
// emits raw logits. Also used to hold gradients and optimizer moments, which
// share the model's shape.
class ModelParameters {
 public:
  ModelParameters() = default;
  explicit ModelParameters(std::vector<DenseLayer> layers);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  std::size_t depth() const { return layers_.size(); }

  // [fan_in of layer 0, fan_out of layer 0, fan_out of layer 1, ...]
  std::vector<std::size_t> layer_sizes() const;
  std::size_t input_size() const;
  std::size_t output_size() const;
  std::size_t parameter_count() const;

  bool same_architecture(const ModelParameters& other) const;
  bool all_finite() const;

  // Zero-filled parameters with the same shape.
  ModelParameters zeros_like() const;

  // this += scale * other
  void add_scaled(const ModelParameters& other, double scale);
  void scale(double factor);

  // Squared Euclidean distance over every parameter.
  double squared_distance(const ModelParameters& other) const;

  // Parameters flattened layer by layer (weight row-major, then bias).
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);

  friend bool operator==(const ModelParameters& a, const ModelParameters& b);

 private:
  std::vector<DenseLayer> layers_;
};

using Gradient = ModelParameters;

// Inputs and labels for one minibatch.
struct Batch {
  Matrix inputs;            // [batch x features]
  std::vector<int> labels;  // [batch], each in [0, C)
};

// Activations recorded by forward() for use in backward().
struct ForwardCache {
  std::vector<std::size_t> layer_sizes;
  // activations[0] is the input, activations[l] the ReLU output of hidden
  // layer l. The logits are not stored.
  std::vector<Matrix> activations;
};

struct ForwardResult {
  Matrix logits;
  ForwardCache cache;
};

// Glorot-uniform weights in [-sqrt(6/(fan_in+fan_out)), +sqrt(...)] drawn from
// Rng(seed) layer by layer in row-major order; zero biases.
ModelParameters init_mlp(std::span<const std::size_t> layer_sizes, std::uint64_t seed);

ForwardResult forward(const ModelParameters& model, const Matrix& inputs);

// Logits only, no cache.
Matrix predict_logits(const ModelParameters& model, const Matrix& inputs);

// Row-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

Gradient backward(const ModelParameters& model, const ForwardCache& cache,
                  const Matrix& grad_logits);

// Element-wise sum_i c_i * theta_i / sum_i c_i. Coefficients are normalized
// before accumulation, and models are accumulated in the order given.
ModelParameters combine(std::span<const ModelParameters* const> models,
                        std::span<const double> coefficients);
ModelParameters combine(std::span<const ModelParameters> models,
                        std::span<const double> coefficients);

}  // namespace fedaboost
