#include "fedaboost/report.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <json.hpp>
#include <vector>

#include "fedaboost/errors.hpp"

namespace fedaboost {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buffer{};
  const auto [ptr, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  if (ec != std::errc()) throw NumericError("format_double failed");
  return std::string(buffer.data(), ptr);
}

void write_rounds_header(std::ostream& out) { out << kRoundsHeader << '\n'; }

void write_clients_header(std::ostream& out) { out << kClientsHeader << '\n'; }

void write_round_row(std::ostream& out, const RoundLog& log) {
  out << log.round << ',' << to_string(log.strategy) << ',' << format_double(log.global.f1) << ','
      << format_double(log.global.accuracy) << ',' << format_double(log.global.avg_loss) << ','
      << format_double(log.global.var_f1) << ',' << log.global.participants << '\n';
}

void write_client_rows(std::ostream& out, const RoundLog& log) {
  for (const auto& row : log.clients) {
    out << log.round << ',' << row.client_id << ',' << format_double(row.f1) << ','
        << format_double(row.loss) << ',' << format_double(row.alpha) << ','
        << format_double(row.weight) << ',' << format_double(row.gamma) << ','
        << (row.participated ? 1 : 0) << '\n';
  }
}

Summary emit_summary(std::span<const RoundLog> logs, std::size_t first_round,
                     std::size_t last_round) {
  if (logs.empty()) throw InvalidArgument("emit_summary: no rounds logged");
  if (first_round < 1 || last_round > logs.size() || first_round > last_round) {
    throw InvalidArgument("emit_summary: window outside the logged rounds");
  }
  Summary summary;
  const RoundLog& last = logs.back();
  summary.final_round.round = last.round;
  summary.final_round.global_f1 = last.global.f1;
  summary.final_round.global_accuracy = last.global.accuracy;
  summary.final_round.avg_loss = last.global.avg_loss;
  summary.final_round.var_f1 = last.global.var_f1;
  std::vector<double> client_f1;
  client_f1.reserve(last.clients.size());
  for (const auto& row : last.clients) client_f1.push_back(row.f1);
  summary.final_round.median_client_f1 = median(std::move(client_f1));

  std::vector<double> var_f1, global_f1, avg_loss;
  for (const auto& log : logs) {
    var_f1.push_back(log.global.var_f1);
    global_f1.push_back(log.global.f1);
    avg_loss.push_back(log.global.avg_loss);
  }
  summary.window_first = first_round;
  summary.window_last = last_round;
  summary.var_f1 = window_stats(var_f1, first_round - 1, last_round - 1);
  summary.global_f1 = window_stats(global_f1, first_round - 1, last_round - 1);
  summary.avg_loss = window_stats(avg_loss, first_round - 1, last_round - 1);
  return summary;
}

namespace {

nlohmann::ordered_json window_json(const WindowStats& stats) {
  return {{"mean", stats.mean}, {"ci_low", stats.ci_low}, {"ci_high", stats.ci_high}};
}

}  // namespace

std::string summary_json(const SummaryContext& context, const std::optional<Summary>& summary) {
  nlohmann::ordered_json doc;
  doc["label"] = context.label;
  doc["algo"] = context.algo;
  doc["seed"] = context.seed;
  doc["clients"] = context.clients;
  doc["rounds"] = context.rounds;
  if (summary) {
    const auto& f = summary->final_round;
    doc["final"] = {{"round", f.round},
                    {"global_f1", f.global_f1},
                    {"global_accuracy", f.global_accuracy},
                    {"avg_loss", f.avg_loss},
                    {"var_f1", f.var_f1},
                    {"median_client_f1", f.median_client_f1}};
    doc["window"] = {{"first_round", summary->window_first},
                     {"last_round", summary->window_last},
                     {"var_f1", window_json(summary->var_f1)},
                     {"global_f1", window_json(summary->global_f1)},
                     {"avg_loss", window_json(summary->avg_loss)}};
  } else {
    doc["final"] = nullptr;
    doc["window"] = nullptr;
  }
  return doc.dump(2) + "\n";
}

}  // namespace fedaboost
