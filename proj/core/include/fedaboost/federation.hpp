#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedaboost/data.hpp"
#include "fedaboost/losses.hpp"
#include "fedaboost/nn.hpp"
#include "fedaboost/optim.hpp"
#include "fedaboost/rng.hpp"

namespace fedaboost {

enum class Strategy { kFedAvg, kFeDABoost, kFeDABoostNoBoost, kDitto };

// "fedavg", "fedaboost", "fedaboost-noboost", "ditto"
std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view name);

struct FederationConfig {
  std::size_t total_clients = 0;  // k
  double participation_fraction = 1.0;
  std::size_t total_rounds = 0;  // E
  std::size_t local_epochs = 1;
  std::size_t batch_size = 32;
  Strategy strategy = Strategy::kFeDABoost;

  double eta = 0.01;               // boost learning rate, [0, 1]
  double error_threshold = 0.3;    // I = 0 once pre-training error <= this
  double epsilon = 1e-6;           // error clip for alpha
  double focal_beta = 1.0;
  // Also raise gamma for participants whose error already meets the threshold.
  bool gamma_on_threshold = false;

  OptimizerConfig optimizer;
  double ditto_lambda = 0.1;
  OptimizerConfig personal_optimizer;

  std::vector<std::size_t> hidden_layers{128};
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  // Diagnostics for equivalence checks: aggregate with alpha = 1 for every
  // client, and keep gamma pinned at 0.
  bool force_equal_alpha = false;
  bool freeze_gamma = false;

  void validate() const;
};

struct ClientBoostState {
  double weight = 1.0;  // w_j > 0
  double gamma = 0.0;   // [0, 5]
  double last_alpha = 0.0;
  std::size_t participation_count = 0;
};

struct ClientReport {
  int client_id = 0;
  ModelParameters trained_model;
  double alpha = 0.0;       // from the clipped post-training error
  double error_rate = 0.0;  // post-training, clipped into [eps, 1 - eps]
  double pre_error_rate = 0.0;
  double local_val_f1 = 0.0;
  double local_val_loss = 0.0;
  std::size_t train_size = 0;
};

struct ClientUpdateResult {
  ClientReport report;
  ClientBoostState boost;
};

// alpha = ln((1 - E)/E) + ln(C - 1) with E clipped to [epsilon, 1 - epsilon].
double compute_alpha(double error, int class_count, double epsilon);

// w * exp(-eta * alpha * I), I = 0 when the client meets its threshold.
double update_boost_weight(double previous_weight, double alpha, bool meets_threshold, double eta);

// gamma' = clamp(gamma + w); other fields untouched.
ClientBoostState update_gamma(ClientBoostState state);

// Minibatch training of `model` in place: one shuffled pass per epoch,
// focal loss with `loss`, plus lambda * (theta - anchor) when an anchor is set.
void local_train(ModelParameters& model, const Dataset& data, std::size_t epochs,
                 std::size_t batch_size, const FocalLossParams& loss, OptimizerState& optimizer,
                 Rng& rng, const ModelParameters* anchor = nullptr, double lambda = 0.0);

// Client side of one round: score the received model on the validation split,
// update w and gamma (FeDABoost only), train a copy, and report the trained
// model with its post-training alpha.
ClientUpdateResult client_update(const ClientDataset& client, const ClientBoostState& boost,
                                 const ModelParameters& global_model,
                                 const FederationConfig& config, Rng& rng);

// Alpha-weighted mean of the reports with alpha > 0, accumulated in ascending
// client-id order. Returns `previous_global` when every alpha is non-positive.
ModelParameters aggregate_fedaboost(std::span<const ClientReport> reports,
                                    const ModelParameters& previous_global);

// Mean weighted by training-set size, in ascending client-id order.
ModelParameters aggregate_fedavg(std::span<const ClientReport> reports);

// Gradient of the personal objective's data term at `params`.
using GradientFn = std::function<Gradient(const ModelParameters& params)>;

// One proximal step: v <- opt(v, grad(v) + lambda * (v - global)).
void ditto_step(ModelParameters& personal, const ModelParameters& global_model,
                const Gradient& data_gradient, double lambda, OptimizerState& optimizer);

// Ditto personalization for one client: local_epochs of minibatch training on
// the client's train split with the proximal pull toward `global_model`.
ModelParameters ditto_personal_update(const ModelParameters& personal,
                                      const ModelParameters& global_model,
                                      const ClientDataset& client, double lambda,
                                      const FederationConfig& config, OptimizerState& optimizer,
                                      Rng& rng);

// max(1, round_half_up(fraction * k)).
std::size_t sample_size(std::size_t k, double fraction);

// Uniform sample without replacement of 1-based client ids, sorted.
std::vector<int> sample_clients(std::size_t k, double fraction, Rng& rng);

struct GlobalRow {
  double f1 = 0.0;        // macro F1 on the pooled holdout
  double accuracy = 0.0;  // pooled holdout accuracy
  double avg_loss = 0.0;  // mean of per-client holdout losses
  double var_f1 = 0.0;    // population variance of per-client F1
  std::size_t participants = 0;
};

struct ClientRow {
  int client_id = 0;
  double f1 = 0.0;
  double loss = 0.0;
  double alpha = 0.0;
  double weight = 0.0;
  double gamma = 0.0;
  bool participated = false;
};

struct RoundLog {
  std::size_t round = 0;
  Strategy strategy = Strategy::kFedAvg;
  GlobalRow global;
  std::vector<ClientRow> clients;  // one per client, ascending id
};

struct FederationState {
  std::size_t round = 0;
  ModelParameters global_model;
  std::vector<ClientBoostState> boost;  // index = client_id - 1
  std::vector<ModelParameters> personal_models;
  std::vector<OptimizerState> personal_optimizers;
};

// Owns the clients and the evolving state of one experiment.
class Federation {
 public:
  Federation(FederationConfig config, std::vector<ClientDataset> clients);

  const FederationConfig& config() const { return config_; }
  const FederationState& state() const { return state_; }
  const std::vector<ClientDataset>& clients() const { return clients_; }

  // Per-round client order, for order-independence checks. Identity by default.
  void set_execution_order_hook(std::function<void(std::vector<int>&)> hook) {
    order_hook_ = std::move(hook);
  }

  RoundLog run_round();

 private:
  // Scores the current global (or personal) models on every client's holdout.
  RoundLog evaluate_round(std::span<const int> sampled) const;

  FederationConfig config_;
  std::vector<ClientDataset> clients_;
  FederationState state_;
  std::function<void(std::vector<int>&)> order_hook_;
};

// Initializes from config and runs config.total_rounds rounds.
std::vector<RoundLog> run_experiment(const FederationConfig& config,
                                     std::vector<ClientDataset> clients);

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// by index is rethrown after all tasks finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace fedaboost
