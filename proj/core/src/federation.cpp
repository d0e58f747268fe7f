#include "fedaboost/federation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

#include "fedaboost/errors.hpp"
#include "fedaboost/metrics.hpp"

namespace fedaboost {

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kFedAvg:
      return "fedavg";
    case Strategy::kFeDABoost:
      return "fedaboost";
    case Strategy::kFeDABoostNoBoost:
      return "fedaboost-noboost";
    case Strategy::kDitto:
      return "ditto";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "fedavg") return Strategy::kFedAvg;
  if (name == "fedaboost") return Strategy::kFeDABoost;
  if (name == "fedaboost-noboost") return Strategy::kFeDABoostNoBoost;
  if (name == "ditto") return Strategy::kDitto;
  throw InvalidArgument("unknown algorithm '" + std::string(name) +
                        "' (expected fedavg, fedaboost, fedaboost-noboost or ditto)");
}

void FederationConfig::validate() const {
  if (total_clients < 1) throw InvalidArgument("total_clients must be at least 1");
  if (!(participation_fraction > 0.0 && participation_fraction <= 1.0)) {
    throw InvalidArgument("participation fraction must lie in (0, 1]");
  }
  if (batch_size < 1) throw InvalidArgument("batch size must be at least 1");
  if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidArgument("eta must lie in [0, 1]");
  if (!(error_threshold > 0.0 && error_threshold < 1.0)) {
    throw InvalidArgument("error threshold must lie in (0, 1)");
  }
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw InvalidArgument("epsilon must lie in (0, 0.5)");
  if (!(focal_beta > 0.0) || !std::isfinite(focal_beta)) {
    throw InvalidArgument("focal beta must be positive");
  }
  if (!(ditto_lambda >= 0.0) || !std::isfinite(ditto_lambda)) {
    throw InvalidArgument("ditto lambda must be non-negative");
  }
  if (workers < 1) throw InvalidArgument("workers must be at least 1");
  for (const auto width : hidden_layers) {
    if (width == 0) throw InvalidArgument("hidden layer widths must be positive");
  }
  optimizer.validate();
  personal_optimizer.validate();
}

double compute_alpha(double error, int class_count, double epsilon) {
  if (class_count < 2) {
    throw InvalidArgument("compute_alpha: class count " + std::to_string(class_count) +
                          " leaves ln(C - 1) undefined");
  }
  if (std::isnan(error) || error < 0.0 || error > 1.0) {
    throw InvalidArgument("compute_alpha: error must lie in [0, 1]");
  }
  const double clipped = std::clamp(error, epsilon, 1.0 - epsilon);
  return std::log((1.0 - clipped) / clipped) + std::log(static_cast<double>(class_count - 1));
}

double update_boost_weight(double previous_weight, double alpha, bool meets_threshold,
                           double eta) {
  if (meets_threshold) return previous_weight;
  return previous_weight * std::exp(-eta * alpha);
}

ClientBoostState update_gamma(ClientBoostState state) {
  state.gamma = clamp_gamma(state.gamma + state.weight);
  return state;
}

void local_train(ModelParameters& model, const Dataset& data, std::size_t epochs,
                 std::size_t batch_size, const FocalLossParams& loss, OptimizerState& optimizer,
                 Rng& rng, const ModelParameters* anchor, double lambda) {
  if (epochs == 0) return;
  if (data.size() == 0) throw InvalidArgument("local_train: empty training set");
  if (batch_size == 0) throw InvalidArgument("local_train: batch size must be positive");
  const bool plain_ce = loss.gamma() == 0.0 && loss.beta() == 1.0;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Batch batch;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t rows = std::min(batch_size, order.size() - start);
      batch.inputs.resize(static_cast<Eigen::Index>(rows), data.features.cols());
      batch.labels.resize(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t index = order[start + r];
        batch.inputs.row(static_cast<Eigen::Index>(r)) =
            data.features.row(static_cast<Eigen::Index>(index));
        batch.labels[r] = data.labels[index];
      }
      auto pass = forward(model, batch.inputs);
      const Matrix probs = softmax(pass.logits);
      const LossResult result =
          plain_ce ? cross_entropy(probs, batch.labels) : focal_loss(probs, batch.labels, loss);
      if (!std::isfinite(result.loss)) throw NumericError("local_train: non-finite loss");
      Gradient grad = backward(model, pass.cache, result.grad_logits);
      if (anchor != nullptr) {
        ditto_step(model, *anchor, grad, lambda, optimizer);
      } else {
        optimizer_update(model, grad, optimizer);
      }
    }
  }
}

ClientUpdateResult client_update(const ClientDataset& client, const ClientBoostState& boost,
                                 const ModelParameters& global_model,
                                 const FederationConfig& config, Rng& rng) {
  if (global_model.input_size() != client.train.dims()) {
    throw ShapeError("client_update: model input size does not match client features");
  }
  ClientUpdateResult out;
  out.boost = boost;

  const double pre_error = error_rate(global_model, client.validation);
  if (config.strategy == Strategy::kFeDABoost) {
    const double alpha = compute_alpha(pre_error, client.class_count_local, config.epsilon);
    const bool meets = pre_error <= config.error_threshold;
    out.boost.weight = update_boost_weight(out.boost.weight, alpha, meets, config.eta);
    if (!config.freeze_gamma && (!meets || config.gamma_on_threshold)) {
      out.boost = update_gamma(out.boost);
    }
  }
  const double gamma = config.strategy == Strategy::kFeDABoost ? out.boost.gamma : 0.0;

  ModelParameters model = global_model;
  OptimizerState optimizer = OptimizerState::fresh(config.optimizer, model);
  local_train(model, client.train, config.local_epochs, config.batch_size,
              FocalLossParams(gamma, config.focal_beta), optimizer, rng);
  if (!model.all_finite()) throw NumericError("client_update: trained model is not finite");

  const Evaluation post = evaluate(model, client.validation);
  auto& report = out.report;
  report.client_id = client.client_id;
  report.trained_model = std::move(model);
  report.alpha = compute_alpha(post.error, client.class_count_local, config.epsilon);
  report.error_rate = std::clamp(post.error, config.epsilon, 1.0 - config.epsilon);
  report.pre_error_rate = pre_error;
  report.local_val_f1 = post.f1;
  report.local_val_loss = post.loss;
  report.train_size = client.train.size();
  return out;
}

namespace {

std::vector<const ClientReport*> sorted_by_id(std::span<const ClientReport> reports) {
  std::vector<const ClientReport*> sorted;
  sorted.reserve(reports.size());
  for (const auto& report : reports) sorted.push_back(&report);
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    return a->client_id < b->client_id;
  });
  return sorted;
}

}  // namespace

ModelParameters aggregate_fedaboost(std::span<const ClientReport> reports,
                                    const ModelParameters& previous_global) {
  if (reports.empty()) throw InvalidArgument("aggregate_fedaboost: no reports");
  std::vector<const ModelParameters*> models;
  std::vector<double> alphas;
  for (const auto* report : sorted_by_id(reports)) {
    if (!std::isfinite(report->alpha)) throw NumericError("aggregate_fedaboost: non-finite alpha");
    if (report->alpha <= 0.0) continue;
    models.push_back(&report->trained_model);
    alphas.push_back(report->alpha);
  }
  if (models.empty()) return previous_global;
  return combine(std::span<const ModelParameters* const>(models), alphas);
}

ModelParameters aggregate_fedavg(std::span<const ClientReport> reports) {
  if (reports.empty()) throw InvalidArgument("aggregate_fedavg: no reports");
  std::vector<const ModelParameters*> models;
  std::vector<double> sizes;
  for (const auto* report : sorted_by_id(reports)) {
    if (report->train_size == 0) throw InvalidArgument("aggregate_fedavg: empty client");
    models.push_back(&report->trained_model);
    sizes.push_back(static_cast<double>(report->train_size));
  }
  return combine(std::span<const ModelParameters* const>(models), sizes);
}

void ditto_step(ModelParameters& personal, const ModelParameters& global_model,
                const Gradient& data_gradient, double lambda, OptimizerState& optimizer) {
  if (!personal.same_architecture(global_model)) {
    throw ShapeError("ditto_step: personal and global architectures differ");
  }
  Gradient grad = data_gradient;
  if (lambda != 0.0) {
    grad.add_scaled(personal, lambda);
    grad.add_scaled(global_model, -lambda);
  }
  optimizer_update(personal, grad, optimizer);
}

ModelParameters ditto_personal_update(const ModelParameters& personal,
                                      const ModelParameters& global_model,
                                      const ClientDataset& client, double lambda,
                                      const FederationConfig& config, OptimizerState& optimizer,
                                      Rng& rng) {
  if (!personal.same_architecture(global_model)) {
    throw ShapeError("ditto_personal_update: architecture mismatch");
  }
  if (!(lambda >= 0.0)) throw InvalidArgument("ditto lambda must be non-negative");
  ModelParameters out = personal;
  local_train(out, client.train, config.local_epochs, config.batch_size, FocalLossParams(),
              optimizer, rng, &global_model, lambda);
  return out;
}

std::size_t sample_size(std::size_t k, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidArgument("sample fraction must lie in (0, 1]");
  }
  const auto rounded = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(k) + 0.5));
  return std::clamp<std::size_t>(rounded, 1, std::max<std::size_t>(k, 1));
}

std::vector<int> sample_clients(std::size_t k, double fraction, Rng& rng) {
  const std::size_t m = sample_size(k, fraction);
  std::vector<int> ids(k);
  std::iota(ids.begin(), ids.end(), 1);
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(ids[i], ids[i + rng.below(k - i)]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t threads = std::min(workers, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run(i);
      });
    }
  }
  for (auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
}

Federation::Federation(FederationConfig config, std::vector<ClientDataset> clients)
    : config_(std::move(config)), clients_(std::move(clients)) {
  config_.validate();
  if (clients_.size() != config_.total_clients) {
    throw InvalidArgument("federation: " + std::to_string(clients_.size()) + " clients for k = " +
                          std::to_string(config_.total_clients));
  }
  std::sort(clients_.begin(), clients_.end(),
            [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  for (std::size_t j = 0; j < clients_.size(); ++j) {
    if (clients_[j].client_id != static_cast<int>(j + 1)) {
      throw InvalidArgument("federation: client ids must be 1..k");
    }
    if (clients_[j].train.dims() != clients_.front().train.dims() ||
        clients_[j].train.class_count != clients_.front().train.class_count) {
      throw InvalidArgument("federation: clients disagree on feature or class count");
    }
  }

  std::vector<std::size_t> sizes{clients_.front().train.dims()};
  sizes.insert(sizes.end(), config_.hidden_layers.begin(), config_.hidden_layers.end());
  sizes.push_back(static_cast<std::size_t>(clients_.front().train.class_count));
  state_.global_model = init_mlp(sizes, derive_seed(config_.seed, "init"));

  ClientBoostState initial;
  initial.weight = 1.0 / static_cast<double>(
                             sample_size(config_.total_clients, config_.participation_fraction));
  state_.boost.assign(config_.total_clients, initial);

  if (config_.strategy == Strategy::kDitto) {
    state_.personal_models.assign(config_.total_clients, state_.global_model);
    state_.personal_optimizers.assign(
        config_.total_clients,
        OptimizerState::fresh(config_.personal_optimizer, state_.global_model));
  }
}

RoundLog Federation::run_round() {
  const std::size_t round = state_.round + 1;
  Rng sampler(derive_seed(config_.seed, "sampling", round));
  const std::vector<int> sampled =
      sample_clients(config_.total_clients, config_.participation_fraction, sampler);

  std::vector<int> order = sampled;
  if (order_hook_) order_hook_(order);

  std::vector<std::optional<ClientUpdateResult>> results(config_.total_clients);
  std::vector<ModelParameters> new_personal(
      config_.strategy == Strategy::kDitto ? config_.total_clients : 0);
  const ModelParameters& global = state_.global_model;

  parallel_for(order.size(), config_.workers, [&](std::size_t i) {
    const int id = order[i];
    const auto slot = static_cast<std::size_t>(id - 1);
    const ClientDataset& client = clients_[slot];
    Rng rng(derive_seed(config_.seed, "client", static_cast<std::uint64_t>(id), round));
    results[slot] = client_update(client, state_.boost[slot], global, config_, rng);
    if (config_.strategy == Strategy::kDitto) {
      Rng personal_rng(derive_seed(config_.seed, "personal", static_cast<std::uint64_t>(id), round));
      new_personal[slot] =
          ditto_personal_update(state_.personal_models[slot], global, client, config_.ditto_lambda,
                                config_, state_.personal_optimizers[slot], personal_rng);
    }
  });

  std::vector<ClientReport> reports;
  reports.reserve(sampled.size());
  for (const int id : sampled) {
    reports.push_back(results[static_cast<std::size_t>(id - 1)]->report);
  }
  if (config_.force_equal_alpha) {
    for (auto& report : reports) report.alpha = 1.0;
  }

  ModelParameters next;
  switch (config_.strategy) {
    case Strategy::kFeDABoost:
    case Strategy::kFeDABoostNoBoost:
      next = aggregate_fedaboost(reports, global);
      break;
    case Strategy::kFedAvg:
    case Strategy::kDitto:
      next = aggregate_fedavg(reports);
      break;
  }
  if (!next.all_finite()) {
    throw NumericError("round " + std::to_string(round) + ": aggregated model is not finite");
  }

  for (const int id : sampled) {
    const auto slot = static_cast<std::size_t>(id - 1);
    auto& boost = state_.boost[slot];
    boost = results[slot]->boost;
    boost.last_alpha = results[slot]->report.alpha;
    boost.participation_count += 1;
    if (config_.strategy == Strategy::kDitto) {
      state_.personal_models[slot] = std::move(new_personal[slot]);
    }
  }
  state_.global_model = std::move(next);
  state_.round = round;
  return evaluate_round(sampled);
}

RoundLog Federation::evaluate_round(std::span<const int> sampled) const {
  const std::size_t k = config_.total_clients;
  std::vector<std::optional<Evaluation>> evals(k);
  parallel_for(k, config_.workers, [&](std::size_t slot) {
    const ModelParameters& model = config_.strategy == Strategy::kDitto
                                       ? state_.personal_models[slot]
                                       : state_.global_model;
    evals[slot] = evaluate(model, clients_[slot].holdout);
  });

  RoundLog log;
  log.round = state_.round;
  log.strategy = config_.strategy;
  ConfusionMatrix pooled(clients_.front().holdout.class_count);
  std::vector<double> f1s(k);
  std::vector<double> losses(k);
  log.clients.reserve(k);
  for (std::size_t slot = 0; slot < k; ++slot) {
    const Evaluation& eval = *evals[slot];
    pooled += eval.confusion;
    f1s[slot] = eval.f1;
    losses[slot] = eval.loss;
    const auto& boost = state_.boost[slot];
    const int id = static_cast<int>(slot + 1);
    log.clients.push_back(ClientRow{
        .client_id = id,
        .f1 = eval.f1,
        .loss = eval.loss,
        .alpha = boost.last_alpha,
        .weight = boost.weight,
        .gamma = boost.gamma,
        .participated = std::binary_search(sampled.begin(), sampled.end(), id),
    });
  }
  log.global.f1 = macro_f1(pooled);
  log.global.accuracy = pooled.accuracy();
  log.global.avg_loss = average_loss(losses);
  log.global.var_f1 = performance_variance(f1s);
  log.global.participants = sampled.size();
  return log;
}

std::vector<RoundLog> run_experiment(const FederationConfig& config,
                                     std::vector<ClientDataset> clients) {
  Federation federation(config, std::move(clients));
  std::vector<RoundLog> logs;
  logs.reserve(config.total_rounds);
  for (std::size_t e = 0; e < config.total_rounds; ++e) logs.push_back(federation.run_round());
  return logs;
}

}  // namespace fedaboost
