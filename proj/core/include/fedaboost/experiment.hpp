#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fedaboost/data.hpp"
#include "fedaboost/federation.hpp"

namespace fedaboost {

struct DatasetSpec {
  enum class Kind { kIdx, kSynthetic };
  Kind kind = Kind::kSynthetic;
  std::filesystem::path images;
  std::filesystem::path labels;
  // Synthetic blobs.
  int classes = 10;
  std::size_t dims = 20;
  std::size_t per_class = 100;
  double separation = 4.0;
  // When > 0, keep a seeded random subset of this many rows.
  std::size_t subsample = 0;
};

struct PartitionSpec {
  std::size_t clients = 0;
  double concentration = 0.5;
  std::size_t min_per_client = 20;
  double holdout_fraction = 0.2;
  double validation_fraction = 0.2;
};

// Convergence window for summary statistics, as 1-based inclusive rounds.
// When first_round is 0 the window is the last `last_rounds` rounds.
struct WindowSpec {
  std::size_t first_round = 0;
  std::size_t last_round = 0;
  std::size_t last_rounds = 10;
};

struct ExperimentConfig {
  std::string label = "run";
  DatasetSpec dataset;
  PartitionSpec partition;
  FederationConfig federation;
  std::filesystem::path output_dir = "out";
  WindowSpec window;

  void validate() const;
};

// Reads the sectioned `key = value` format documented in the README.
// Relative paths resolve against the config file's directory. Unknown keys,
// duplicates, malformed values and missing required keys throw ConfigError.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(std::string_view text,
                                   const std::filesystem::path& base_dir = ".");

// Sub-seeds come from derive_seed(seed, "data" | "subsample" | "partition" | "split").
Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed);
std::vector<ClientDataset> build_clients(const Dataset& data, const PartitionSpec& spec,
                                         std::uint64_t seed);

// Resolves the window against the number of completed rounds; the "last N"
// form is clamped to what exists.
std::pair<std::size_t, std::size_t> resolve_window(const WindowSpec& window,
                                                   std::size_t rounds);

}  // namespace fedaboost
