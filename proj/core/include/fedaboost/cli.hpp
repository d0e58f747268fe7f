#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fedaboost {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericError = 3;

// Experiment runner. args[0] is the program name.
//   --config PATH   experiment config (required)
//   --algo NAME     fedavg | fedaboost | fedaboost-noboost | ditto
//   --seed N, --out DIR, --rounds N, --workers N
// Writes rounds.csv, clients.csv and summary.json into the output directory.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fedaboost
