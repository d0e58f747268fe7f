#include "fedaboost/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <optional>

#include "fedaboost/errors.hpp"
#include "fedaboost/experiment.hpp"
#include "fedaboost/report.hpp"

namespace fedaboost {
namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

int run(const ExperimentConfig& config, std::ostream& out) {
  std::filesystem::create_directories(config.output_dir);
  const auto seed = config.federation.seed;
  const Dataset data = load_dataset(config.dataset, seed);
  Federation federation(config.federation, build_clients(data, config.partition, seed));

  auto rounds_csv = open_output(config.output_dir / "rounds.csv");
  auto clients_csv = open_output(config.output_dir / "clients.csv");
  write_rounds_header(rounds_csv);
  write_clients_header(clients_csv);

  std::vector<RoundLog> logs;
  logs.reserve(config.federation.total_rounds);
  for (std::size_t e = 0; e < config.federation.total_rounds; ++e) {
    logs.push_back(federation.run_round());
    write_round_row(rounds_csv, logs.back());
    write_client_rows(clients_csv, logs.back());
    rounds_csv.flush();
    clients_csv.flush();
    if (!rounds_csv || !clients_csv) throw Error("write to " + config.output_dir.string() + " failed");
  }

  std::optional<Summary> summary;
  if (!logs.empty()) {
    const auto [first, last] = resolve_window(config.window, logs.size());
    summary = emit_summary(logs, first, last);
  }
  const SummaryContext context{config.label, std::string(to_string(config.federation.strategy)),
                               seed, config.federation.total_clients, logs.size()};
  auto summary_file = open_output(config.output_dir / "summary.json");
  summary_file << summary_json(context, summary);
  if (!summary_file) throw Error("cannot write summary.json");

  out << to_string(config.federation.strategy) << ": " << logs.size() << " rounds";
  if (summary) {
    out << ", final F1 " << format_double(summary->final_round.global_f1) << ", window var(F1) "
        << format_double(summary->var_f1.mean);
  }
  out << " -> " << config.output_dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated learning simulator: FedAvg, FeDABoost (with and without boosting), Ditto"};
  std::string config_path;
  std::optional<std::string> algo;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> rounds;
  std::optional<std::size_t> workers;
  app.add_option("--config", config_path, "Experiment config file")->required();
  app.add_option("--algo", algo, "fedavg | fedaboost | fedaboost-noboost | ditto");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--rounds", rounds, "Number of global rounds");
  app.add_option("--workers", workers, "Client-update threads");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }

  ExperimentConfig config;
  try {
    config = parse_config(config_path);
    if (algo) config.federation.strategy = parse_strategy(*algo);
    if (seed) config.federation.seed = *seed;
    if (out_dir) config.output_dir = *out_dir;
    if (rounds) config.federation.total_rounds = *rounds;
    if (workers) config.federation.workers = *workers;
    config.validate();
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  }

  try {
    return run(config, out);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace fedaboost
