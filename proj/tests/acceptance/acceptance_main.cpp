// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.
//   fedaboost_acceptance [--only 1,2,...] [--mnist DIR] [--seeds N]

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "../oracles.hpp"
#include "fedaboost/cli.hpp"
#include "fedaboost/data.hpp"
#include "fedaboost/experiment.hpp"
#include "fedaboost/federation.hpp"
#include "fedaboost/losses.hpp"
#include "fedaboost/metrics.hpp"

namespace {

using namespace fedaboost;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// 1. alpha > 0 exactly when 1 - clip(E) > 1/C.
Outcome alpha_boundary() {
  constexpr double eps = 1e-6;
  std::size_t checked = 0;
  std::size_t wrong = 0;
  std::string first_wrong;
  for (int c = 2; c <= 62; ++c) {
    for (int i = 0; i <= 1000; ++i) {
      const double e = i / 1000.0;
      const double clipped = std::clamp(e, eps, 1.0 - eps);
      const bool positive = compute_alpha(e, c, eps) > 0.0;
      const bool better_than_chance = (1.0 - clipped) > 1.0 / c;
      ++checked;
      if (positive != better_than_chance) {
        if (wrong++ == 0) first_wrong = " first at C=" + std::to_string(c) + " E=" + fmt(e);
      }
    }
  }
  return {wrong == 0,
          std::to_string(checked) + " grid points, " + std::to_string(wrong) + " disagreements" +
              first_wrong};
}

// 2. Clipped extremes, against a long-double reference of the clipped formula.
Outcome alpha_clipping() {
  constexpr double eps = 1e-6;
  const long double odds = std::log((1.0L - 1e-6L) / 1e-6L);
  double worst = 0.0;
  bool finite = true;
  for (int c = 2; c <= 62; ++c) {
    const long double classes = std::log(static_cast<long double>(c - 1));
    const double at_zero = compute_alpha(0.0, c, eps);
    const double at_one = compute_alpha(1.0, c, eps);
    finite = finite && std::isfinite(at_zero) && std::isfinite(at_one);
    worst = std::max(worst, static_cast<double>(std::fabs(at_zero - (odds + classes))));
    worst = std::max(worst, static_cast<double>(std::fabs(at_one - (-odds + classes))));
  }
  return {finite && worst <= 1e-9, "max |error| " + fmt(worst, 3) + " over C in [2, 62]"};
}

// 3. Focal loss reduces to cross-entropy; analytic gradient matches central differences.
Outcome focal_degeneracy() {
  Rng rng(303);
  constexpr int kClasses = 10;
  Matrix logits(1000, kClasses);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = 3.0 * rng.normal();
  std::vector<int> labels(1000);
  for (auto& label : labels) label = static_cast<int>(rng.below(kClasses));
  const Matrix probs = softmax(logits);
  const auto focal = focal_loss(probs, labels, FocalLossParams(0.0, 1.0));
  const auto ce = cross_entropy(probs, labels);
  const double loss_gap = std::abs(focal.loss - ce.loss);
  const double grad_gap = (focal.grad_logits - ce.grad_logits).cwiseAbs().maxCoeff();

  // Per-example losses too: one row at a time.
  double row_gap = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Matrix row = probs.row(r);
    const std::vector<int> one{labels[static_cast<std::size_t>(r)]};
    row_gap = std::max(row_gap, std::abs(focal_loss(row, one, FocalLossParams(0.0, 1.0)).loss -
                                         cross_entropy(row, one).loss));
  }

  double worst_rel = 0.0;
  for (const double gamma : {0.0, 0.5, 1.0, 2.0, 5.0}) {
    Matrix z(8, 5);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
    std::vector<int> y(8);
    for (auto& label : y) label = static_cast<int>(rng.below(5));
    const auto analytic = focal_loss(softmax(z), y, FocalLossParams(gamma, 0.7));
    auto loss_at = [&](const Matrix& m) {
      std::vector<std::vector<double>> rows;
      for (Eigen::Index r = 0; r < m.rows(); ++r) rows.emplace_back(m.row(r).data(), m.row(r).data() + m.cols());
      return oracle::focal_loss_from_logits(rows, y, gamma, 0.7);
    };
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      Matrix up = z, down = z;
      up.data()[i] += 1e-5;
      down.data()[i] -= 1e-5;
      const double numeric = (loss_at(up) - loss_at(down)) / 2e-5;
      const double a = analytic.grad_logits.data()[i];
      worst_rel = std::max(worst_rel, std::abs(a - numeric) / std::max(std::abs(a), 1e-6));
    }
  }
  const bool pass = loss_gap <= 1e-12 && grad_gap <= 1e-12 && row_gap <= 1e-12 && worst_rel <= 1e-4;
  return {pass, "|focal - CE| " + fmt(std::max(loss_gap, row_gap), 3) + ", grad gap " +
                    fmt(grad_gap, 3) + ", worst FD relative error " + fmt(worst_rel, 3)};
}

// 4. Aggregation equals the brute-force alpha-weighted mean.
Outcome aggregation_oracle() {
  Rng rng(404);
  double worst = 0.0;
  int trials = 0;
  int stalls = 0;
  bool stall_ok = true;
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng.below(5);
    const std::vector<std::size_t> sizes{1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(3)};
    std::vector<ClientReport> reports;
    std::vector<std::vector<double>> thetas;
    std::vector<double> alphas;
    for (std::size_t m = 0; m < n; ++m) {
      ClientReport r;
      r.client_id = static_cast<int>(m + 1);
      r.trained_model = init_mlp(sizes, rng.below(1u << 30));
      r.alpha = rng.uniform() < 0.25 ? -rng.uniform(0.0, 2.0) : rng.uniform(0.0, 5.0);
      if (rng.uniform() < 0.05) r.alpha = 0.0;
      thetas.push_back(r.trained_model.flatten());
      alphas.push_back(r.alpha);
      reports.push_back(std::move(r));
    }
    const auto previous = init_mlp(sizes, 7);
    const auto got = aggregate_fedaboost(reports, previous);
    if (std::none_of(alphas.begin(), alphas.end(), [](double a) { return a > 0.0; })) {
      ++stalls;
      stall_ok = stall_ok && got == previous;
      continue;
    }
    ++trials;
    const auto want = oracle::alpha_weighted_mean(thetas, alphas);
    const auto flat = got.flatten();
    for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(flat[i] - want[i]));
  }
  return {worst <= 1e-12 && stall_ok,
          std::to_string(trials) + " mixed-sign trials, max |error| " + fmt(worst, 3) + "; " +
              std::to_string(stalls) + " all-filtered trials keep the previous model"};
}

// 5. Sign behaviour of the boost-weight update.
Outcome boost_weight_signs() {
  Rng rng(505);
  int violations = 0;
  for (int t = 0; t < 100000; ++t) {
    const double w = rng.uniform(1e-4, 1.0);
    double alpha = rng.uniform(-20.0, 20.0);
    if (alpha == 0.0) alpha = 1.0;
    const double eta = rng.uniform(1e-3, 1.0);
    const double updated = update_boost_weight(w, alpha, false, eta);
    if (alpha > 0.0 && !(updated < w)) ++violations;
    if (alpha < 0.0 && !(updated > w)) ++violations;
    if (update_boost_weight(w, alpha, true, eta) != w) ++violations;
    if (update_boost_weight(w, alpha, false, 0.0) != w) ++violations;
  }
  return {violations == 0, "100000 random cases, " + std::to_string(violations) + " violations"};
}

double mean_max_share(const Dataset& data, const std::vector<std::vector<std::size_t>>& parts) {
  double total = 0.0;
  for (const auto& part : parts) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(data.class_count), 0);
    for (const auto index : part) ++counts[static_cast<std::size_t>(data.labels[index])];
    total += static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
             static_cast<double>(part.size());
  }
  return total / static_cast<double>(parts.size());
}

// 6. Conservation and skew of the Dirichlet partition.
Outcome partition_checks(const Dataset& data) {
  bool conserved = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto parts = dirichlet_partition(data, 50, 0.2, seed);
    std::vector<int> seen(data.size(), 0);
    for (const auto& part : parts) {
      for (const auto index : part) ++seen[index];
    }
    conserved = conserved && std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; });
  }
  int skewer = 0;
  std::string shares;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const double low = mean_max_share(data, dirichlet_partition(data, 50, 0.2, seed));
    const double high = mean_max_share(data, dirichlet_partition(data, 50, 1e6, seed));
    if (low > high) ++skewer;
    shares += " " + fmt(low, 3) + "/" + fmt(high, 3);
  }
  return {conserved && skewer >= 3,
          std::string(conserved ? "20 seeds conserve every index" : "conservation violated") +
              "; max-class share at 0.2 vs 1e6 higher in " + std::to_string(skewer) +
              "/5 seeds:" + shares};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// 7. Byte-identical CSVs across repeated runs and worker counts.
Outcome determinism(const fs::path& scratch) {
  fs::create_directories(scratch);
  const auto config = scratch / "determinism.ini";
  std::ofstream(config) << "[experiment]\nseed = 17\n"
                           "[dataset]\nkind = synthetic\nclasses = 5\ndims = 12\nper_class = 80\n"
                           "[partition]\nclients = 8\nconcentration = 0.3\n"
                           "[model]\nhidden = 16\n"
                           "[federation]\nrounds = 6\nparticipation = 0.5\nlocal_epochs = 2\n"
                           "[optimizer]\nlr = 0.05\n";
  bool identical = true;
  std::string detail;
  for (const std::string algo : {"fedavg", "fedaboost", "fedaboost-noboost", "ditto"}) {
    std::vector<std::string> rounds;
    std::vector<std::string> clients;
    for (const std::string workers : {"1", "1", "4"}) {
      const auto out = scratch / (algo + "_w" + workers + "_" + std::to_string(rounds.size()));
      std::ostringstream sink;
      const int code = run_cli({"acceptance", "--config", config.string(), "--algo", algo,
                                "--workers", workers, "--out", out.string()},
                               sink, sink);
      if (code != kExitOk) return {false, algo + " run failed: " + sink.str()};
      rounds.push_back(slurp(out / "rounds.csv"));
      clients.push_back(slurp(out / "clients.csv"));
    }
    const bool same = rounds[0] == rounds[1] && rounds[1] == rounds[2] &&
                      clients[0] == clients[1] && clients[1] == clients[2];
    identical = identical && same;
    detail += " " + algo + (same ? "=ok" : "=DIFF");
  }
  return {identical, "runs x3 (workers 1, 1, 4):" + detail};
}

struct DeskRun {
  double window_var = 0.0;
  double window_f1 = 0.0;
};

DeskRun desk_run(const Dataset& data, Strategy strategy, std::uint64_t seed) {
  PartitionSpec partition;
  partition.clients = 50;
  partition.concentration = 0.2;
  partition.min_per_client = 20;
  FederationConfig config;
  config.total_clients = 50;
  config.participation_fraction = 0.3;
  config.total_rounds = 80;
  config.local_epochs = 5;
  config.batch_size = 32;
  config.strategy = strategy;
  config.eta = 0.01;
  config.error_threshold = 0.3;
  config.optimizer.kind = OptimizerKind::kSgd;
  config.optimizer.learning_rate = 1e-3;
  config.optimizer.weight_decay = 1e-3;
  config.personal_optimizer = config.optimizer;
  config.hidden_layers = {128};
  config.seed = seed;
  const auto logs = run_experiment(config, build_clients(data, partition, seed));
  std::vector<double> var;
  std::vector<double> f1;
  for (const auto& log : logs) {
    var.push_back(log.global.var_f1);
    f1.push_back(log.global.f1);
  }
  return {window_stats(var, 70, 79).mean, window_stats(f1, 70, 79).mean};
}

// 8 and 9 share the desk-scale MNIST runs.
std::pair<Outcome, Outcome> desk_scale(const Dataset& data, std::uint64_t seeds) {
  int fairer = 0;
  int boost_wins = 0;
  double f1_boost = 0.0;
  double f1_avg = 0.0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    const auto start = std::chrono::steady_clock::now();
    const DeskRun avg = desk_run(data, Strategy::kFedAvg, seed);
    const DeskRun boost = desk_run(data, Strategy::kFeDABoost, seed);
    const DeskRun noboost = desk_run(data, Strategy::kFeDABoostNoBoost, seed);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    fairer += boost.window_var < avg.window_var ? 1 : 0;
    boost_wins += boost.window_f1 >= noboost.window_f1 ? 1 : 0;
    f1_boost += boost.window_f1;
    f1_avg += avg.window_f1;
    per_seed << "    seed " << seed << ": var(F1) fedaboost " << fmt(boost.window_var, 4)
             << " fedavg " << fmt(avg.window_var, 4) << "; F1 fedaboost "
             << fmt(boost.window_f1, 4) << " noboost " << fmt(noboost.window_f1, 4) << " fedavg "
             << fmt(avg.window_f1, 4) << " (" << fmt(secs, 3) << " s)\n";
    std::cout << per_seed.str().substr(per_seed.str().rfind("    seed")) << std::flush;
  }
  f1_boost /= static_cast<double>(seeds);
  f1_avg /= static_cast<double>(seeds);
  const auto need8 = (4 * seeds + 4) / 5;  // 4 of 5
  const auto need9 = (3 * seeds + 4) / 5;  // 3 of 5
  Outcome fairness{static_cast<std::uint64_t>(fairer) >= need8 && f1_boost >= f1_avg - 0.01,
                   "lower last-10 var(F1) in " + std::to_string(fairer) + "/" +
                       std::to_string(seeds) + " seeds; mean F1 fedaboost " + fmt(f1_boost, 4) +
                       " vs fedavg " + fmt(f1_avg, 4)};
  Outcome ablation{static_cast<std::uint64_t>(boost_wins) >= need9,
                   "fedaboost F1 >= no-boost in " + std::to_string(boost_wins) + "/" +
                       std::to_string(seeds) + " seeds"};
  return {fairness, ablation};
}

// 10. Degenerate FeDABoost reproduces FedAvg bit for bit.
Outcome baseline_equivalence() {
  const Dataset data = gen_synthetic(4, 10, 50, 3.0, 1010);
  std::vector<ClientDataset> clients;
  for (int j = 0; j < 4; ++j) {
    std::vector<std::size_t> shard;
    for (std::size_t i = static_cast<std::size_t>(j); i < data.size(); i += 4) shard.push_back(i);
    clients.push_back(split_client(data.subset(shard), 0.2, 0.2, 99 + static_cast<std::uint64_t>(j), j + 1));
  }
  for (const auto& c : clients) {
    if (c.train.size() != clients.front().train.size()) return {false, "unequal shard sizes"};
  }
  FederationConfig config;
  config.total_clients = 4;
  config.participation_fraction = 1.0;
  config.total_rounds = 5;
  config.local_epochs = 2;
  config.batch_size = 16;
  config.hidden_layers = {12};
  config.optimizer.learning_rate = 0.05;
  config.personal_optimizer = config.optimizer;
  config.seed = 10;

  FederationConfig avg_config = config;
  avg_config.strategy = Strategy::kFedAvg;
  FederationConfig boost_config = config;
  boost_config.strategy = Strategy::kFeDABoost;
  boost_config.eta = 0.0;
  boost_config.freeze_gamma = true;
  boost_config.force_equal_alpha = true;

  Federation avg(avg_config, clients);
  Federation boost(boost_config, clients);
  int identical_rounds = 0;
  for (int r = 0; r < 5; ++r) {
    const auto a = avg.run_round();
    const auto b = boost.run_round();
    bool same = avg.state().global_model == boost.state().global_model &&
                a.global.f1 == b.global.f1 && a.global.accuracy == b.global.accuracy &&
                a.global.avg_loss == b.global.avg_loss && a.global.var_f1 == b.global.var_f1;
    for (std::size_t j = 0; j < a.clients.size(); ++j) {
      same = same && a.clients[j].f1 == b.clients[j].f1 && a.clients[j].loss == b.clients[j].loss &&
             b.clients[j].gamma == 0.0;
    }
    if (!same) break;
    ++identical_rounds;
  }
  return {identical_rounds == 5,
          std::to_string(identical_rounds) + "/5 rounds bit-identical (global model and rows)"};
}

// 11. Ditto's proximal pull on a quadratic, and independence from the global model at lambda 0.
Outcome ditto_sanity() {
  auto vec_model = [](std::initializer_list<double> values) {
    Matrix w(1, static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (const double v : values) w(0, i++) = v;
    return ModelParameters({DenseLayer{w, Vector::Zero(1)}});
  };
  const auto global = vec_model({1.0, -2.0, 0.5});
  const auto target = vec_model({-3.0, 4.0, 2.0});
  ModelParameters v = vec_model({9.0, 7.0, -6.0});
  OptimizerConfig opt;
  opt.learning_rate = 5e-7;  // contraction 1 - lr (1 + lambda) = 0.4999995
  auto state = OptimizerState::fresh(opt, v);
  constexpr double kLambda = 1e6;
  const double floor_distance = std::sqrt(target.squared_distance(global)) / (1.0 + kLambda);
  double previous = std::sqrt(v.squared_distance(global));
  int strict_steps = 0;
  bool monotone = true;
  for (int step = 0; step < 60; ++step) {
    Gradient g = v;
    g.add_scaled(target, -1.0);
    ditto_step(v, global, g, kLambda, state);
    const double d = std::sqrt(v.squared_distance(global));
    // Strict decrease until the iterate is within rounding of its fixed point.
    if (previous > 2.0 * floor_distance) {
      monotone = monotone && d < previous;
      strict_steps += d < previous ? 1 : 0;
    }
    previous = d;
  }
  const bool converged = previous <= 2.0 * floor_distance;

  // lambda = 0 on real data: two different global models give the same personal model.
  const Dataset data = gen_synthetic(3, 6, 40, 3.0, 1111);
  const auto client = split_client(data, 0.2, 0.2, 5, 1);
  const std::vector<std::size_t> sizes{6, 8, 3};
  const auto personal = init_mlp(sizes, 1);
  FederationConfig config;
  config.local_epochs = 3;
  config.batch_size = 8;
  ModelParameters out[2];
  for (int i = 0; i < 2; ++i) {
    auto personal_state = OptimizerState::fresh(opt, personal);
    Rng rng(77);
    out[i] = ditto_personal_update(personal, init_mlp(sizes, 100 + static_cast<std::uint64_t>(i)),
                                   client, 0.0, config, personal_state, rng);
  }
  const bool ignores = out[0] == out[1] && !(out[0] == personal);
  return {monotone && converged && strict_steps >= 15 && ignores,
          std::to_string(strict_steps) + " strictly decreasing steps to distance " +
              fmt(previous, 3) + " (fixed point " + fmt(floor_distance, 3) + "); lambda 0 " +
              (ignores ? "ignores" : "DEPENDS ON") + " the global model"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-11"};
  std::string only;
  std::string mnist_dir = FEDABOOST_MNIST_DIR;
  std::uint64_t seeds = 5;
  std::string scratch = (fs::temp_directory_path() / "fedaboost_acceptance").string();
  app.add_option("--only", only, "Comma-separated criteria to run");
  app.add_option("--mnist", mnist_dir, "Directory with images-idx3-ubyte and labels-idx1-ubyte");
  app.add_option("--seeds", seeds, "Seeds for criteria 8 and 9");
  app.add_option("--scratch", scratch, "Scratch directory");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  {
    std::stringstream list(only);
    std::string item;
    while (std::getline(list, item, ',')) {
      if (!item.empty()) selected.insert(std::stoi(item));
    }
  }
  auto wanted = [&](int n) { return selected.empty() || selected.contains(n); };

  int failures = 0;
  auto report = [&](int n, const std::string& name, const Outcome& o) {
    std::cout << "criterion " << std::setw(2) << n << " " << (o.pass ? "PASS" : "FAIL") << "  "
              << name << ": " << o.detail << std::endl;
    failures += o.pass ? 0 : 1;
  };
  auto guarded = [&](int n, const std::string& name, const std::function<Outcome()>& fn) {
    if (!wanted(n)) return;
    try {
      report(n, name, fn());
    } catch (const std::exception& e) {
      report(n, name, {false, std::string("exception: ") + e.what()});
    }
  };

  std::optional<Dataset> mnist;
  auto load_mnist = [&]() -> const Dataset& {
    if (!mnist) {
      mnist = load_idx(fs::path(mnist_dir) / "images-idx3-ubyte",
                       fs::path(mnist_dir) / "labels-idx1-ubyte");
    }
    return *mnist;
  };

  guarded(1, "alpha sign boundary", alpha_boundary);
  guarded(2, "alpha clipping", alpha_clipping);
  guarded(3, "focal loss degeneracy and gradient", focal_degeneracy);
  guarded(4, "aggregation oracle", aggregation_oracle);
  guarded(5, "boost weight signs", boost_weight_signs);
  guarded(6, "partition conservation and skew", [&] { return partition_checks(load_mnist()); });
  guarded(7, "determinism across runs and workers", [&] { return determinism(scratch); });
  if (wanted(8) || wanted(9)) {
    try {
      const auto [fairness, ablation] = desk_scale(load_mnist(), seeds);
      if (wanted(8)) report(8, "desk-scale fairness trend", fairness);
      if (wanted(9)) report(9, "boosting ablation direction", ablation);
    } catch (const std::exception& e) {
      if (wanted(8)) report(8, "desk-scale fairness trend", {false, e.what()});
      if (wanted(9)) report(9, "boosting ablation direction", {false, e.what()});
    }
  }
  guarded(10, "degenerate FeDABoost equals FedAvg", baseline_equivalence);
  guarded(11, "Ditto proximal sanity", ditto_sanity);

  std::cout << (failures == 0 ? "all selected criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
