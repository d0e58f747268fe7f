#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedaboost/data.hpp"
#include "fedaboost/nn.hpp"

namespace fedaboost {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes);

  int classes() const { return classes_; }
  void add(int truth, int predicted);
  std::int64_t at(int truth, int predicted) const;
  std::int64_t total() const { return total_; }
  std::int64_t correct() const;
  double accuracy() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

 private:
  int classes_;
  std::vector<std::int64_t> counts_;
  std::int64_t total_ = 0;
};

// Argmax per row; ties go to the lowest class index.
std::vector<int> argmax_rows(const Matrix& scores);
std::vector<int> predict(const ModelParameters& model, const Matrix& inputs);

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 int classes);

// Fraction of misclassified examples.
double error_rate(const ModelParameters& model, const Dataset& data);

// Unweighted mean of per-class F1 over the classes that occur in the truth or
// the predictions. A class with P + R = 0 scores 0. A class absent from both
// contributes nothing.
double macro_f1(const ConfusionMatrix& cm);

// Everything a single evaluation pass yields.
struct Evaluation {
  ConfusionMatrix confusion;
  double loss = 0.0;  // mean cross-entropy
  double error = 0.0;
  double f1 = 0.0;
};

Evaluation evaluate(const ModelParameters& model, const Dataset& data);

// (1/k) sum of per-client losses.
double average_loss(std::span<const double> per_client_losses);

// Population variance (1/k) sum (phi_i - mean)^2.
double performance_variance(std::span<const double> per_client_phi);

struct FairnessReport {
  std::vector<int> client_ids;
  std::vector<double> per_client_phi;
  double mean_phi = 0.0;
  double variance = 0.0;
  double avg_loss = 0.0;
};

FairnessReport make_fairness_report(std::vector<int> client_ids,
                                    std::vector<double> per_client_phi,
                                    std::span<const double> per_client_losses);

enum class Dominance { kNone, kFirst, kSecond };

struct FairnessVerdict {
  Dominance loss = Dominance::kNone;      // lower average loss
  Dominance variance = Dominance::kNone;  // lower variance
  // Strictly lower average loss and strictly lower variance.
  bool first_fairer = false;
  bool second_fairer = false;
};

FairnessVerdict fairness_compare(const FairnessReport& a, const FairnessReport& b);

struct WindowStats {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t count = 0;
};

// Mean of series[first..last] (0-based, inclusive) with a normal-approximation
// 95% interval mean +/- 1.96 * sd / sqrt(n), sd being the sample (n - 1)
// standard deviation; zero width when n = 1.
WindowStats window_stats(std::span<const double> series, std::size_t first, std::size_t last);

double median(std::vector<double> values);

}  // namespace fedaboost
