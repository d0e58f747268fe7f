#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "fedaboost/federation.hpp"
#include "fedaboost/metrics.hpp"

namespace fedaboost {

inline constexpr std::string_view kRoundsHeader =
    "round,algo,global_f1,global_accuracy,avg_loss,var_f1,participants";
inline constexpr std::string_view kClientsHeader =
    "round,client_id,f1,loss,alpha,weight,gamma,participated";

// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

void write_rounds_header(std::ostream& out);
void write_clients_header(std::ostream& out);
void write_round_row(std::ostream& out, const RoundLog& log);
void write_client_rows(std::ostream& out, const RoundLog& log);

struct FinalStats {
  std::size_t round = 0;
  double global_f1 = 0.0;
  double global_accuracy = 0.0;
  double avg_loss = 0.0;
  double var_f1 = 0.0;
  double median_client_f1 = 0.0;
};

struct Summary {
  FinalStats final_round;
  std::size_t window_first = 0;  // 1-based, inclusive
  std::size_t window_last = 0;
  WindowStats var_f1;
  WindowStats global_f1;
  WindowStats avg_loss;
};

// Final-round statistics plus window statistics over rounds
// [first_round, last_round] (1-based, inclusive).
Summary emit_summary(std::span<const RoundLog> logs, std::size_t first_round,
                     std::size_t last_round);

struct SummaryContext {
  std::string label;
  std::string algo;
  std::uint64_t seed = 0;
  std::size_t clients = 0;
  std::size_t rounds = 0;
};

// summary.json contents; "final" and "window" are null when no rounds ran.
std::string summary_json(const SummaryContext& context, const std::optional<Summary>& summary);

}  // namespace fedaboost
