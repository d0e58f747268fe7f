#include "fedaboost/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedaboost/errors.hpp"
#include "fedaboost/losses.hpp"

namespace fedaboost {

ConfusionMatrix::ConfusionMatrix(int classes) : classes_(classes) {
  if (classes < 1) throw InvalidArgument("confusion matrix needs at least one class");
  counts_.assign(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0);
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_) {
    throw InvalidArgument("confusion matrix: class out of range");
  }
  ++counts_[static_cast<std::size_t>(truth * classes_ + predicted)];
  ++total_;
}

std::int64_t ConfusionMatrix::at(int truth, int predicted) const {
  return counts_.at(static_cast<std::size_t>(truth * classes_ + predicted));
}

std::int64_t ConfusionMatrix::correct() const {
  std::int64_t diagonal = 0;
  for (int c = 0; c < classes_; ++c) diagonal += at(c, c);
  return diagonal;
}

double ConfusionMatrix::accuracy() const {
  if (total_ == 0) throw InvalidArgument("accuracy of an empty confusion matrix");
  return static_cast<double>(correct()) / static_cast<double>(total_);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw ShapeError("confusion matrix class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
  return *this;
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(r, c) > scores(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const ModelParameters& model, const Matrix& inputs) {
  return argmax_rows(predict_logits(model, inputs));
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 int classes) {
  if (truth.size() != predicted.size()) throw ShapeError("confusion_matrix: length mismatch");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

double error_rate(const ModelParameters& model, const Dataset& data) {
  if (data.size() == 0) throw InvalidArgument("error_rate: empty dataset");
  const auto predicted = predict(model, data.features);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) wrong += predicted[i] != data.labels[i];
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

double macro_f1(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw InvalidArgument("macro_f1: empty confusion matrix");
  const int classes = cm.classes();
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < classes; ++c) {
    std::int64_t actual = 0;
    std::int64_t predicted = 0;
    for (int o = 0; o < classes; ++o) {
      actual += cm.at(c, o);
      predicted += cm.at(o, c);
    }
    if (actual == 0 && predicted == 0) continue;
    ++counted;
    const auto tp = static_cast<double>(cm.at(c, c));
    // 2PR/(P+R) == 2TP / (actual + predicted); zero when TP = 0.
    sum += tp == 0.0 ? 0.0 : 2.0 * tp / static_cast<double>(actual + predicted);
  }
  return sum / counted;
}

Evaluation evaluate(const ModelParameters& model, const Dataset& data) {
  if (data.size() == 0) throw InvalidArgument("evaluate: empty dataset");
  const Matrix logits = predict_logits(model, data.features);
  const auto predicted = argmax_rows(logits);
  Evaluation out{confusion_matrix(data.labels, predicted, data.class_count)};
  double total = 0.0;
  const Matrix probs = softmax(logits);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double p = probs(static_cast<Eigen::Index>(i), data.labels[i]);
    total += -std::log(std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor));
  }
  out.loss = total / static_cast<double>(data.size());
  out.error = static_cast<double>(out.confusion.total() - out.confusion.correct()) /
              static_cast<double>(out.confusion.total());
  out.f1 = macro_f1(out.confusion);
  return out;
}

namespace {

// Two-pass mean: the correction pass makes a constant series come back exact.
double corrected_mean(std::span<const double> values) {
  const auto n = static_cast<double>(values.size());
  double total = 0.0;
  for (const double v : values) total += v;
  const double mean = total / n;
  double residual = 0.0;
  for (const double v : values) residual += v - mean;
  return mean + residual / n;
}

}  // namespace

double average_loss(std::span<const double> per_client_losses) {
  if (per_client_losses.empty()) throw InvalidArgument("average_loss: no clients");
  return corrected_mean(per_client_losses);
}

double performance_variance(std::span<const double> per_client_phi) {
  if (per_client_phi.empty()) throw InvalidArgument("performance_variance: no clients");
  const double mean = average_loss(per_client_phi);
  double total = 0.0;
  for (const double phi : per_client_phi) total += (phi - mean) * (phi - mean);
  return total / static_cast<double>(per_client_phi.size());
}

FairnessReport make_fairness_report(std::vector<int> client_ids,
                                    std::vector<double> per_client_phi,
                                    std::span<const double> per_client_losses) {
  if (client_ids.size() != per_client_phi.size() ||
      per_client_phi.size() != per_client_losses.size()) {
    throw ShapeError("make_fairness_report: per-client vectors differ in length");
  }
  FairnessReport report;
  report.mean_phi = average_loss(per_client_phi);
  report.variance = performance_variance(per_client_phi);
  report.avg_loss = average_loss(per_client_losses);
  report.client_ids = std::move(client_ids);
  report.per_client_phi = std::move(per_client_phi);
  return report;
}

FairnessVerdict fairness_compare(const FairnessReport& a, const FairnessReport& b) {
  if (a.client_ids != b.client_ids) {
    throw InvalidArgument("fairness_compare: reports cover different client sets");
  }
  auto lower = [](double x, double y) {
    if (x < y) return Dominance::kFirst;
    if (y < x) return Dominance::kSecond;
    return Dominance::kNone;
  };
  FairnessVerdict verdict;
  verdict.loss = lower(a.avg_loss, b.avg_loss);
  verdict.variance = lower(a.variance, b.variance);
  verdict.first_fairer = verdict.loss == Dominance::kFirst && verdict.variance == Dominance::kFirst;
  verdict.second_fairer =
      verdict.loss == Dominance::kSecond && verdict.variance == Dominance::kSecond;
  return verdict;
}

WindowStats window_stats(std::span<const double> series, std::size_t first, std::size_t last) {
  if (first > last || last >= series.size()) {
    throw InvalidArgument("window_stats: window [" + std::to_string(first) + ", " +
                          std::to_string(last) + "] outside a series of length " +
                          std::to_string(series.size()));
  }
  const auto window = series.subspan(first, last - first + 1);
  WindowStats stats;
  stats.count = window.size();
  stats.mean = average_loss(window);
  double half_width = 0.0;
  if (window.size() > 1) {
    double ss = 0.0;
    for (const double x : window) ss += (x - stats.mean) * (x - stats.mean);
    const double sd = std::sqrt(ss / static_cast<double>(window.size() - 1));
    half_width = 1.96 * sd / std::sqrt(static_cast<double>(window.size()));
  }
  stats.ci_low = stats.mean - half_width;
  stats.ci_high = stats.mean + half_width;
  return stats;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace fedaboost
