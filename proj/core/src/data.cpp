#include "fedaboost/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <string>

#include "fedaboost/errors.hpp"
#include "fedaboost/rng.hpp"

namespace fedaboost {
namespace {

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, 4> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), 4)) {
    throw DataError("truncated IDX header in " + path.string());
  }
  return (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) |
         (std::uint32_t{bytes[2]} << 8) | std::uint32_t{bytes[3]};
}

void write_be32(std::ostream& out, std::uint32_t value) {
  const std::array<char, 4> bytes{static_cast<char>(value >> 24), static_cast<char>(value >> 16),
                                  static_cast<char>(value >> 8), static_cast<char>(value)};
  out.write(bytes.data(), 4);
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& data) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.class_count));
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
  }
  return by_class;
}

// Distributes `target` units over buckets with fractional quotas, capped per
// bucket. Floors first, then the largest remainders (ties to the lower index).
std::vector<std::size_t> apportion(std::span<const double> quotas,
                                   std::span<const std::size_t> caps, std::size_t target) {
  std::vector<std::size_t> counts(quotas.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < quotas.size(); ++c) {
    counts[c] = std::min(static_cast<std::size_t>(std::floor(quotas[c])), caps[c]);
    assigned += counts[c];
  }
  if (assigned > target) throw InvalidArgument("apportion: floors exceed the target");
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return quotas[a] - std::floor(quotas[a]) > quotas[b] - std::floor(quotas[b]);
  });
  // Repeated passes in remainder order until the target is met or every
  // bucket is at its cap.
  while (assigned < target) {
    bool progressed = false;
    for (const std::size_t c : order) {
      if (assigned == target) break;
      if (counts[c] < caps[c]) {
        ++counts[c];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  if (assigned < target) {
    throw DataError("shard too small: cannot place " + std::to_string(target) +
                    " rows while keeping every class in train");
  }
  return counts;
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.class_count = class_count;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw InvalidArgument("Dataset::subset: index out of range");
    out.features.row(static_cast<Eigen::Index>(i)) =
        features.row(static_cast<Eigen::Index>(indices[i]));
    out.labels.push_back(labels[indices[i]]);
  }
  return out;
}

int Dataset::distinct_labels() const {
  return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
}

void Dataset::validate() const {
  if (labels.empty()) throw DataError("dataset is empty");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw DataError("dataset feature/label row counts differ");
  }
  for (const int label : labels) {
    if (label < 0 || label >= class_count) throw DataError("dataset label out of range");
  }
  if (!features.allFinite()) throw DataError("dataset has non-finite features");
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  auto images = open_binary(images_path);
  auto labels_in = open_binary(labels_path);

  if (const auto magic = read_be32(images, images_path); magic != kIdxImagesMagic) {
    throw DataError("bad IDX image magic in " + images_path.string());
  }
  const std::size_t image_count = read_be32(images, images_path);
  const std::size_t rows = read_be32(images, images_path);
  const std::size_t cols = read_be32(images, images_path);

  if (const auto magic = read_be32(labels_in, labels_path); magic != kIdxLabelsMagic) {
    throw DataError("bad IDX label magic in " + labels_path.string());
  }
  const std::size_t label_count = read_be32(labels_in, labels_path);
  if (image_count != label_count) {
    throw DataError("IDX count mismatch: " + std::to_string(image_count) + " images, " +
                    std::to_string(label_count) + " labels");
  }
  if (image_count == 0 || rows * cols == 0) throw DataError("IDX file holds no data");

  const std::size_t pixels = rows * cols;
  std::vector<unsigned char> buffer(image_count * pixels);
  if (!images.read(reinterpret_cast<char*>(buffer.data()),
                   static_cast<std::streamsize>(buffer.size()))) {
    throw DataError("truncated IDX image data in " + images_path.string());
  }
  std::vector<unsigned char> label_bytes(label_count);
  if (!labels_in.read(reinterpret_cast<char*>(label_bytes.data()),
                      static_cast<std::streamsize>(label_bytes.size()))) {
    throw DataError("truncated IDX label data in " + labels_path.string());
  }

  Dataset data;
  data.features.resize(static_cast<Eigen::Index>(image_count), static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    data.features.data()[i] = static_cast<double>(buffer[i]) / 255.0;
  }
  data.labels.assign(label_bytes.begin(), label_bytes.end());
  data.class_count = *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  return data;
}

void write_idx(const Dataset& data, std::size_t rows, std::size_t cols,
               const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  if (rows * cols != data.dims()) throw ShapeError("write_idx: geometry does not match dims");
  std::ofstream images(images_path, std::ios::binary);
  std::ofstream labels(labels_path, std::ios::binary);
  if (!images || !labels) throw DataError("write_idx: cannot open output files");
  write_be32(images, kIdxImagesMagic);
  write_be32(images, static_cast<std::uint32_t>(data.size()));
  write_be32(images, static_cast<std::uint32_t>(rows));
  write_be32(images, static_cast<std::uint32_t>(cols));
  for (Eigen::Index i = 0; i < data.features.size(); ++i) {
    const double scaled = std::round(std::clamp(data.features.data()[i], 0.0, 1.0) * 255.0);
    images.put(static_cast<char>(static_cast<unsigned char>(scaled)));
  }
  write_be32(labels, kIdxLabelsMagic);
  write_be32(labels, static_cast<std::uint32_t>(data.size()));
  for (const int label : data.labels) {
    if (label < 0 || label > 255) throw DataError("write_idx: label does not fit in a byte");
    labels.put(static_cast<char>(static_cast<unsigned char>(label)));
  }
  if (!images || !labels) throw DataError("write_idx: write failed");
}

Dataset gen_synthetic(int classes, std::size_t dims, std::size_t per_class,
                      double separation, std::uint64_t seed) {
  if (classes < 2) throw InvalidArgument("gen_synthetic: need at least 2 classes");
  if (per_class < 1 || dims < 1) throw InvalidArgument("gen_synthetic: empty dataset");
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw InvalidArgument("gen_synthetic: separation must be finite and non-negative");
  }
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(dims);
  const double radius = separation / std::sqrt(2.0);
  Matrix means = Matrix::Zero(classes, d);
  for (int c = 0; c < classes; ++c) {
    if (dims >= static_cast<std::size_t>(classes)) {
      means(c, c) = radius;
    } else {
      for (Eigen::Index j = 0; j < d; ++j) means(c, j) = rng.normal();
      means.row(c) *= radius / means.row(c).norm();
    }
  }
  Dataset data;
  data.class_count = classes;
  data.features.resize(static_cast<Eigen::Index>(per_class) * classes, d);
  data.labels.reserve(per_class * static_cast<std::size_t>(classes));
  Eigen::Index row = 0;
  for (int c = 0; c < classes; ++c) {
    for (std::size_t n = 0; n < per_class; ++n, ++row) {
      for (Eigen::Index j = 0; j < d; ++j) data.features(row, j) = means(c, j) + rng.normal();
      data.labels.push_back(c);
    }
  }
  return data;
}

std::vector<std::vector<std::size_t>> dirichlet_partition(const Dataset& data, std::size_t k,
                                                          double concentration,
                                                          std::uint64_t seed,
                                                          const PartitionOptions& options) {
  if (k < 2) throw InvalidArgument("dirichlet_partition: need at least 2 clients");
  if (!(concentration > 0.0) || !std::isfinite(concentration)) {
    throw InvalidArgument("dirichlet_partition: concentration must be positive");
  }
  data.validate();
  Rng rng(seed);
  const auto by_class = indices_by_class(data);

  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    std::vector<std::vector<std::size_t>> parts(k);
    for (const auto& class_indices : by_class) {
      if (class_indices.empty()) continue;
      std::vector<std::size_t> shuffled = class_indices;
      rng.shuffle(std::span<std::size_t>(shuffled));

      std::vector<double> proportions(k);
      double total = 0.0;
      while (!(total > 0.0)) {
        total = 0.0;
        for (auto& p : proportions) {
          p = rng.gamma(concentration);
          total += p;
        }
      }
      // Cut points floor(cumsum(p) * n); the last client takes the tail.
      const double n = static_cast<double>(shuffled.size());
      std::size_t begin = 0;
      double cumulative = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        cumulative += proportions[j] / total;
        std::size_t end = j + 1 == k ? shuffled.size()
                                     : std::min(shuffled.size(),
                                                static_cast<std::size_t>(cumulative * n));
        end = std::max(end, begin);
        parts[j].insert(parts[j].end(), shuffled.begin() + static_cast<std::ptrdiff_t>(begin),
                        shuffled.begin() + static_cast<std::ptrdiff_t>(end));
        begin = end;
      }
    }

    const bool ok = std::all_of(parts.begin(), parts.end(), [&](const auto& part) {
      if (part.size() < options.min_per_client) return false;
      std::set<int> classes;
      for (const auto i : part) classes.insert(data.labels[i]);
      return static_cast<int>(classes.size()) >= options.min_classes;
    });
    if (ok) {
      for (auto& part : parts) std::sort(part.begin(), part.end());
      return parts;
    }
  }
  throw PartitionError("dirichlet_partition: constraints not met after " +
                       std::to_string(options.max_attempts) + " attempts");
}

ClientDataset split_client(const Dataset& shard, double holdout_frac, double validation_frac,
                           std::uint64_t seed, int client_id) {
  if (!(holdout_frac > 0.0 && holdout_frac < 1.0) ||
      !(validation_frac > 0.0 && validation_frac < 1.0) ||
      !(holdout_frac + validation_frac < 1.0)) {
    throw InvalidArgument("split_client: fractions must lie in (0,1) and sum below 1");
  }
  shard.validate();
  const std::size_t n = shard.size();
  const auto holdout_target = static_cast<std::size_t>(std::llround(holdout_frac * n));
  const auto validation_target = static_cast<std::size_t>(std::llround(validation_frac * n));
  if (holdout_target == 0 || validation_target == 0 ||
      holdout_target + validation_target >= n) {
    throw DataError("shard too small: " + std::to_string(n) + " rows");
  }

  Rng rng(seed);
  auto by_class = indices_by_class(shard);
  for (auto& indices : by_class) rng.shuffle(std::span<std::size_t>(indices));

  const std::size_t classes = by_class.size();
  std::vector<double> quotas(classes);
  std::vector<std::size_t> caps(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    quotas[c] = holdout_frac * static_cast<double>(by_class[c].size());
    caps[c] = by_class[c].empty() ? 0 : by_class[c].size() - 1;
  }
  const auto holdout_counts = apportion(quotas, caps, holdout_target);
  for (std::size_t c = 0; c < classes; ++c) {
    quotas[c] = validation_frac * static_cast<double>(by_class[c].size());
    caps[c] -= holdout_counts[c];
  }
  const auto validation_counts = apportion(quotas, caps, validation_target);

  std::vector<std::size_t> holdout, validation, train;
  for (std::size_t c = 0; c < classes; ++c) {
    const auto& indices = by_class[c];
    const std::size_t h = holdout_counts[c];
    const std::size_t v = validation_counts[c];
    holdout.insert(holdout.end(), indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(h));
    validation.insert(validation.end(), indices.begin() + static_cast<std::ptrdiff_t>(h),
                      indices.begin() + static_cast<std::ptrdiff_t>(h + v));
    train.insert(train.end(), indices.begin() + static_cast<std::ptrdiff_t>(h + v), indices.end());
  }
  std::sort(holdout.begin(), holdout.end());
  std::sort(validation.begin(), validation.end());
  std::sort(train.begin(), train.end());

  ClientDataset client;
  client.client_id = client_id;
  client.train = shard.subset(train);
  client.validation = shard.subset(validation);
  client.holdout = shard.subset(holdout);
  client.class_count_local = client.train.distinct_labels();
  if (client.class_count_local < 2) {
    throw DataError("client " + std::to_string(client_id) +
                    " has fewer than two classes in its training split");
  }
  return client;
}

}  // namespace fedaboost
