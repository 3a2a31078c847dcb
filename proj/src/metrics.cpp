#include "probebench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "probebench/error.hpp"

namespace probebench {
namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.empty()) throw Error(ErrorCode::LengthMismatch, "empty input");
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

bool is_constant(std::span<const double> values) noexcept {
  return std::adjacent_find(values.begin(), values.end(), std::not_equal_to<>()) == values.end();
}

double r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
  check_lengths(y_true, y_pred);
  const double y_mean = mean(y_true);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double r = y_true[i] - y_pred[i];
    const double d = y_true[i] - y_mean;
    ss_res += r * r;
    ss_tot += d * d;
  }
  if (is_constant(y_true)) return ss_res == 0.0 ? 1.0 : kConstantTruthR2;
  return 1.0 - ss_res / ss_tot;
}

double mse(std::span<const double> y_true, std::span<const double> y_pred) {
  check_lengths(y_true, y_pred);
  double sum = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double r = y_true[i] - y_pred[i];
    sum += r * r;
  }
  return sum / static_cast<double>(y_true.size());
}

double mae(std::span<const double> y_true, std::span<const double> y_pred) {
  check_lengths(y_true, y_pred);
  double sum = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) sum += std::abs(y_true[i] - y_pred[i]);
  return sum / static_cast<double>(y_true.size());
}

ConfusionMatrix confusion(std::span<const double> y_true, std::span<const double> prob,
                          double threshold) {
  if (y_true.size() != prob.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(y_true.size()) + " vs " + std::to_string(prob.size()));
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool actual = y_true[i] == 1.0;
    const bool predicted = prob[i] >= threshold;
    if (actual && predicted) ++cm.tp;
    else if (actual) ++cm.fn;
    else if (predicted) ++cm.fp;
    else ++cm.tn;
  }
  return cm;
}

double precision(const ConfusionMatrix& cm) noexcept {
  const auto denom = cm.tp + cm.fp;
  return denom == 0 ? 0.0 : static_cast<double>(cm.tp) / static_cast<double>(denom);
}

double recall(const ConfusionMatrix& cm) noexcept {
  const auto denom = cm.tp + cm.fn;
  return denom == 0 ? 0.0 : static_cast<double>(cm.tp) / static_cast<double>(denom);
}

double f1(const ConfusionMatrix& cm) noexcept {
  if (cm.tp + cm.fp == 0 || cm.tp + cm.fn == 0) return 0.0;
  const double p = precision(cm);
  const double r = recall(cm);
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

double accuracy(const ConfusionMatrix& cm) noexcept {
  const auto total = cm.total();
  return total == 0 ? 0.0 : static_cast<double>(cm.tp + cm.tn) / static_cast<double>(total);
}

std::optional<double> roc_auc(std::span<const double> y_true, std::span<const double> score) {
  if (y_true.size() != score.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(y_true.size()) + " vs " + std::to_string(score.size()));
  }
  // Midranks over the pooled scores; AUC = (R_pos - n_pos(n_pos+1)/2) / (n_pos n_neg).
  const std::size_t n = score.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && score[order[j]] == score[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (y_true[order[k]] == 1.0) {
        rank_sum_pos += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double pos = static_cast<double>(n_pos);
  return (rank_sum_pos - pos * (pos + 1.0) / 2.0) / (pos * static_cast<double>(n_neg));
}

}  // namespace probebench
