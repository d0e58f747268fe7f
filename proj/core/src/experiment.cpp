#include "fedaboost/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "fedaboost/errors.hpp"
#include "fedaboost/rng.hpp"

namespace fedaboost {
namespace {

std::string_view trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

struct Entry {
  std::string value;
  int line = 0;
};

[[noreturn]] void fail(const std::string& key, const Entry& entry, const std::string& what) {
  throw ConfigError("line " + std::to_string(entry.line) + ": " + key + ": " + what);
}

double to_double(const std::string& key, const Entry& entry) {
  double value = 0.0;
  const auto* first = entry.value.data();
  const auto* last = first + entry.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) fail(key, entry, "expected a number, got '" + entry.value + "'");
  return value;
}

std::uint64_t to_unsigned(const std::string& key, const Entry& entry) {
  std::uint64_t value = 0;
  const auto* first = entry.value.data();
  const auto* last = first + entry.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    fail(key, entry, "expected a non-negative integer, got '" + entry.value + "'");
  }
  return value;
}

bool to_bool(const std::string& key, const Entry& entry) {
  if (entry.value == "true") return true;
  if (entry.value == "false") return false;
  fail(key, entry, "expected true or false");
}

std::vector<std::size_t> to_sizes(const std::string& key, const Entry& entry) {
  std::vector<std::size_t> sizes;
  if (trim(entry.value).empty() || entry.value == "none") return sizes;
  std::stringstream stream(entry.value);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const Entry part{std::string(trim(item)), entry.line};
    const auto size = to_unsigned(key, part);
    if (size == 0) fail(key, entry, "layer widths must be positive");
    sizes.push_back(static_cast<std::size_t>(size));
  }
  return sizes;
}

// Fractional range checks here so the error names the offending key.
void check_range(const std::string& key, const Entry& entry, double value, double lo, double hi,
                 bool lo_open, bool hi_open) {
  const bool low_ok = lo_open ? value > lo : value >= lo;
  const bool high_ok = hi_open ? value < hi : value <= hi;
  if (!low_ok || !high_ok) {
    fail(key, entry, "value " + entry.value + " outside " + (lo_open ? "(" : "[") +
                         std::to_string(lo) + ", " + std::to_string(hi) + (hi_open ? ")" : "]"));
  }
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const Entry&)>;

void set_optimizer(OptimizerConfig& opt, const std::string& field, const std::string& key,
                   const Entry& entry) {
  if (field == "kind") {
    try {
      opt.kind = parse_optimizer_kind(entry.value);
    } catch (const InvalidArgument& e) {
      fail(key, entry, e.what());
    }
  } else if (field == "lr") {
    opt.learning_rate = to_double(key, entry);
    if (!(opt.learning_rate > 0.0)) fail(key, entry, "must be positive");
  } else if (field == "weight_decay") {
    opt.weight_decay = to_double(key, entry);
    if (!(opt.weight_decay >= 0.0)) fail(key, entry, "must be non-negative");
  } else if (field == "beta1") {
    opt.beta1 = to_double(key, entry);
    check_range(key, entry, opt.beta1, 0.0, 1.0, false, true);
  } else if (field == "beta2") {
    opt.beta2 = to_double(key, entry);
    check_range(key, entry, opt.beta2, 0.0, 1.0, false, true);
  } else if (field == "eps") {
    opt.epsilon = to_double(key, entry);
    if (!(opt.epsilon > 0.0)) fail(key, entry, "must be positive");
  }
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["experiment.label"] = [](auto& c, auto&, auto& e) { c.label = e.value; };
    t["experiment.seed"] = [](auto& c, auto& k, auto& e) { c.federation.seed = to_unsigned(k, e); };
    t["experiment.output"] = [](auto& c, auto&, auto& e) { c.output_dir = e.value; };

    t["dataset.kind"] = [](auto& c, auto& k, auto& e) {
      if (e.value == "idx") {
        c.dataset.kind = DatasetSpec::Kind::kIdx;
      } else if (e.value == "synthetic") {
        c.dataset.kind = DatasetSpec::Kind::kSynthetic;
      } else {
        fail(k, e, "expected idx or synthetic");
      }
    };
    t["dataset.images"] = [](auto& c, auto&, auto& e) { c.dataset.images = e.value; };
    t["dataset.labels"] = [](auto& c, auto&, auto& e) { c.dataset.labels = e.value; };
    t["dataset.classes"] = [](auto& c, auto& k, auto& e) {
      c.dataset.classes = static_cast<int>(to_unsigned(k, e));
      if (c.dataset.classes < 2) fail(k, e, "need at least 2 classes");
    };
    t["dataset.dims"] = [](auto& c, auto& k, auto& e) {
      c.dataset.dims = to_unsigned(k, e);
      if (c.dataset.dims < 1) fail(k, e, "must be positive");
    };
    t["dataset.per_class"] = [](auto& c, auto& k, auto& e) {
      c.dataset.per_class = to_unsigned(k, e);
      if (c.dataset.per_class < 1) fail(k, e, "must be positive");
    };
    t["dataset.separation"] = [](auto& c, auto& k, auto& e) {
      c.dataset.separation = to_double(k, e);
      if (!(c.dataset.separation >= 0.0)) fail(k, e, "must be non-negative");
    };
    t["dataset.subsample"] = [](auto& c, auto& k, auto& e) { c.dataset.subsample = to_unsigned(k, e); };

    t["partition.clients"] = [](auto& c, auto& k, auto& e) {
      c.partition.clients = to_unsigned(k, e);
      if (c.partition.clients < 2) fail(k, e, "need at least 2 clients");
    };
    t["partition.concentration"] = [](auto& c, auto& k, auto& e) {
      c.partition.concentration = to_double(k, e);
      if (!(c.partition.concentration > 0.0)) fail(k, e, "must be positive");
    };
    t["partition.min_per_client"] = [](auto& c, auto& k, auto& e) {
      c.partition.min_per_client = to_unsigned(k, e);
    };
    t["partition.holdout_fraction"] = [](auto& c, auto& k, auto& e) {
      c.partition.holdout_fraction = to_double(k, e);
      check_range(k, e, c.partition.holdout_fraction, 0.0, 1.0, true, true);
    };
    t["partition.validation_fraction"] = [](auto& c, auto& k, auto& e) {
      c.partition.validation_fraction = to_double(k, e);
      check_range(k, e, c.partition.validation_fraction, 0.0, 1.0, true, true);
    };

    t["model.hidden"] = [](auto& c, auto& k, auto& e) { c.federation.hidden_layers = to_sizes(k, e); };

    t["federation.algo"] = [](auto& c, auto& k, auto& e) {
      try {
        c.federation.strategy = parse_strategy(e.value);
      } catch (const InvalidArgument& error) {
        fail(k, e, error.what());
      }
    };
    t["federation.rounds"] = [](auto& c, auto& k, auto& e) { c.federation.total_rounds = to_unsigned(k, e); };
    t["federation.participation"] = [](auto& c, auto& k, auto& e) {
      c.federation.participation_fraction = to_double(k, e);
      check_range(k, e, c.federation.participation_fraction, 0.0, 1.0, true, false);
    };
    t["federation.local_epochs"] = [](auto& c, auto& k, auto& e) {
      c.federation.local_epochs = to_unsigned(k, e);
    };
    t["federation.batch_size"] = [](auto& c, auto& k, auto& e) {
      c.federation.batch_size = to_unsigned(k, e);
      if (c.federation.batch_size < 1) fail(k, e, "must be positive");
    };
    t["federation.eta"] = [](auto& c, auto& k, auto& e) {
      c.federation.eta = to_double(k, e);
      check_range(k, e, c.federation.eta, 0.0, 1.0, false, false);
    };
    t["federation.error_threshold"] = [](auto& c, auto& k, auto& e) {
      c.federation.error_threshold = to_double(k, e);
      check_range(k, e, c.federation.error_threshold, 0.0, 1.0, true, true);
    };
    t["federation.epsilon"] = [](auto& c, auto& k, auto& e) {
      c.federation.epsilon = to_double(k, e);
      check_range(k, e, c.federation.epsilon, 0.0, 0.5, true, true);
    };
    t["federation.focal_beta"] = [](auto& c, auto& k, auto& e) {
      c.federation.focal_beta = to_double(k, e);
      if (!(c.federation.focal_beta > 0.0)) fail(k, e, "must be positive");
    };
    t["federation.gamma_on_threshold"] = [](auto& c, auto& k, auto& e) {
      c.federation.gamma_on_threshold = to_bool(k, e);
    };
    t["federation.ditto_lambda"] = [](auto& c, auto& k, auto& e) {
      c.federation.ditto_lambda = to_double(k, e);
      if (!(c.federation.ditto_lambda >= 0.0)) fail(k, e, "must be non-negative");
    };
    t["federation.workers"] = [](auto& c, auto& k, auto& e) {
      c.federation.workers = to_unsigned(k, e);
      if (c.federation.workers < 1) fail(k, e, "must be positive");
    };

    for (const char* field : {"kind", "lr", "weight_decay", "beta1", "beta2", "eps"}) {
      const std::string name(field);
      t["optimizer." + name] = [name](auto& c, auto& k, auto& e) {
        set_optimizer(c.federation.optimizer, name, k, e);
      };
      t["personal_optimizer." + name] = [name](auto& c, auto& k, auto& e) {
        set_optimizer(c.federation.personal_optimizer, name, k, e);
      };
    }

    t["summary.window"] = [](auto& c, auto& k, auto& e) {
      c.window.last_rounds = to_unsigned(k, e);
      if (c.window.last_rounds < 1) fail(k, e, "must be positive");
    };
    t["summary.window_first"] = [](auto& c, auto& k, auto& e) {
      c.window.first_round = to_unsigned(k, e);
      if (c.window.first_round < 1) fail(k, e, "rounds are 1-based");
    };
    t["summary.window_last"] = [](auto& c, auto& k, auto& e) { c.window.last_round = to_unsigned(k, e); };
    return t;
  }();
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.kind == DatasetSpec::Kind::kIdx) {
    if (dataset.images.empty() || dataset.labels.empty()) {
      throw ConfigError("dataset.kind = idx requires dataset.images and dataset.labels");
    }
    for (const auto& path : {dataset.images, dataset.labels}) {
      if (!std::filesystem::exists(path)) throw ConfigError("file not found: " + path.string());
    }
  }
  if (partition.clients < 2) throw ConfigError("partition.clients must be at least 2");
  if (!(partition.holdout_fraction + partition.validation_fraction < 1.0)) {
    throw ConfigError("holdout_fraction + validation_fraction must be below 1");
  }
  if ((window.first_round == 0) != (window.last_round == 0)) {
    throw ConfigError("summary.window_first and summary.window_last go together");
  }
  if (window.first_round > window.last_round) {
    throw ConfigError("summary.window_first must not exceed summary.window_last");
  }
  if (window.first_round != 0 && federation.total_rounds > 0 &&
      window.last_round > federation.total_rounds) {
    throw ConfigError("summary window ends at round " + std::to_string(window.last_round) +
                      " but only " + std::to_string(federation.total_rounds) + " rounds are run");
  }
  try {
    federation.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (federation.total_clients != partition.clients) {
    throw ConfigError("federation client count does not match partition.clients");
  }
}

ExperimentConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir) {
  std::map<std::string, Entry> entries;
  std::string section;
  std::istringstream stream{std::string(text)};
  std::string raw;
  int line_number = 0;
  while (std::getline(stream, raw)) {
    ++line_number;
    std::string_view line = raw;
    if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_number) + ": malformed section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_number) + ": expected key = value");
    }
    const std::string key = section + "." + std::string(trim(line.substr(0, eq)));
    if (!setters().contains(key)) {
      throw ConfigError("line " + std::to_string(line_number) + ": unknown key '" + key + "'");
    }
    if (entries.contains(key)) {
      throw ConfigError("line " + std::to_string(line_number) + ": duplicate key '" + key + "'");
    }
    entries[key] = Entry{std::string(trim(line.substr(eq + 1))), line_number};
  }

  for (const char* required : {"dataset.kind", "partition.clients"}) {
    if (!entries.contains(required)) {
      throw ConfigError(std::string("missing required key '") + required + "'");
    }
  }

  ExperimentConfig config;
  // Optimizer first so personal_optimizer overrides start from it.
  for (const auto& [key, entry] : entries) {
    if (key.starts_with("optimizer.")) setters().at(key)(config, key, entry);
  }
  config.federation.personal_optimizer = config.federation.optimizer;
  for (const auto& [key, entry] : entries) {
    if (!key.starts_with("optimizer.")) setters().at(key)(config, key, entry);
  }
  config.federation.total_clients = config.partition.clients;

  auto resolve = [&](std::filesystem::path& path) {
    if (!path.empty() && path.is_relative()) path = base_dir / path;
  };
  resolve(config.dataset.images);
  resolve(config.dataset.labels);
  resolve(config.output_dir);
  config.validate();
  return config;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.parent_path().empty() ? "." : path.parent_path());
}

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  Dataset data = spec.kind == DatasetSpec::Kind::kIdx
                     ? load_idx(spec.images, spec.labels)
                     : gen_synthetic(spec.classes, spec.dims, spec.per_class, spec.separation,
                                     derive_seed(seed, "data"));
  if (spec.subsample > 0 && spec.subsample < data.size()) {
    std::vector<std::size_t> indices(data.size());
    std::iota(indices.begin(), indices.end(), 0);
    Rng rng(derive_seed(seed, "subsample"));
    rng.shuffle(std::span<std::size_t>(indices));
    indices.resize(spec.subsample);
    std::sort(indices.begin(), indices.end());
    data = data.subset(indices);
  }
  data.validate();
  return data;
}

std::vector<ClientDataset> build_clients(const Dataset& data, const PartitionSpec& spec,
                                         std::uint64_t seed) {
  PartitionOptions options;
  options.min_per_client = spec.min_per_client;
  const auto parts = dirichlet_partition(data, spec.clients, spec.concentration,
                                         derive_seed(seed, "partition"), options);
  std::vector<ClientDataset> clients;
  clients.reserve(parts.size());
  for (std::size_t j = 0; j < parts.size(); ++j) {
    const int id = static_cast<int>(j + 1);
    clients.push_back(split_client(data.subset(parts[j]), spec.holdout_fraction,
                                   spec.validation_fraction,
                                   derive_seed(seed, "split", static_cast<std::uint64_t>(id)), id));
  }
  return clients;
}

std::pair<std::size_t, std::size_t> resolve_window(const WindowSpec& window, std::size_t rounds) {
  if (rounds == 0) throw InvalidArgument("resolve_window: no rounds");
  if (window.first_round != 0) {
    if (window.last_round > rounds) {
      throw InvalidArgument("summary window ends at round " + std::to_string(window.last_round) +
                            " but only " + std::to_string(rounds) + " rounds ran");
    }
    return {window.first_round, window.last_round};
  }
  const std::size_t span = std::min(std::max<std::size_t>(window.last_rounds, 1), rounds);
  return {rounds - span + 1, rounds};
}

}  // namespace fedaboost
