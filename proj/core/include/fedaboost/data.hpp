#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fedaboost/nn.hpp"

namespace fedaboost {

struct Dataset {
  Matrix features;          // [N x d], finite
  std::vector<int> labels;  // [N], each in [0, class_count)
  int class_count = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dims() const { return static_cast<std::size_t>(features.cols()); }

  // Rows in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;

  // Number of distinct labels present.
  int distinct_labels() const;

  // Throws DataError when the invariants above do not hold.
  void validate() const;
};

struct ClientDataset {
  int client_id = 0;
  Dataset train;
  Dataset validation;
  Dataset holdout;
  // Classes with at least one training example (C_j).
  int class_count_local = 0;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Reads a big-endian IDX image/label pair. Pixels are scaled by 1/255 and the
// class count is max label + 1.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

// Writes features as bytes round(255 * x) with the given image geometry.
void write_idx(const Dataset& data, std::size_t rows, std::size_t cols,
               const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

// Isotropic unit-variance Gaussian blobs. With dims >= classes, class c is
// centred at (separation / sqrt 2) * e_c so every pair of means is exactly
// `separation` apart; otherwise means are random directions of norm
// separation / sqrt 2. Rows are ordered by class.
Dataset gen_synthetic(int classes, std::size_t dims, std::size_t per_class,
                      double separation, std::uint64_t seed);

struct PartitionOptions {
  std::size_t min_per_client = 20;
  int min_classes = 2;
  int max_attempts = 1000;
};

// Label-skew partition: for each class a Dirichlet(concentration * 1_k) draw
// splits that class's shuffled indices among k clients. Redrawn until every
// client has at least min_per_client samples and min_classes classes.
std::vector<std::vector<std::size_t>> dirichlet_partition(const Dataset& data, std::size_t k,
                                                          double concentration,
                                                          std::uint64_t seed,
                                                          const PartitionOptions& options = {});

// Stratified train/validation/holdout split. Holdout gets round(holdout_frac * N)
// rows and validation round(validation_frac * N), apportioned across classes by
// largest remainder while leaving at least one row of every class in train.
ClientDataset split_client(const Dataset& shard, double holdout_frac, double validation_frac,
                           std::uint64_t seed, int client_id = 0);

}  // namespace fedaboost
