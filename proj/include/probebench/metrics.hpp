#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace probebench {

namespace metric {
inline constexpr const char* kR2 = "r2";
inline constexpr const char* kMse = "mse";
inline constexpr const char* kMae = "mae";
inline constexpr const char* kF1 = "f1";
inline constexpr const char* kPrecision = "precision";
inline constexpr const char* kRecall = "recall";
inline constexpr const char* kAccuracy = "accuracy";
inline constexpr const char* kRocAuc = "roc_auc";
}  // namespace metric

// R² reported when the truth is constant but the predictions are not.
inline constexpr double kConstantTruthR2 = -1e9;

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// Score of one train/test split of one task.
struct FoldScore {
  std::string task;
  std::size_t fold_index = 0;
  double primary = 0.0;  // R² (regression) or F1 (classification)
  std::map<std::string, double> secondary;
  std::vector<double> loss_curve;
  std::vector<std::string> warnings;
};

bool is_constant(std::span<const double> values) noexcept;

// 1 - SS_res/SS_tot. With constant truth: 1 when the predictions match
// exactly, kConstantTruthR2 otherwise (callers check is_constant to flag it).
double r_squared(std::span<const double> y_true, std::span<const double> y_pred);
double mse(std::span<const double> y_true, std::span<const double> y_pred);
double mae(std::span<const double> y_true, std::span<const double> y_pred);

// Class 1 iff prob >= threshold.
ConfusionMatrix confusion(std::span<const double> y_true, std::span<const double> prob,
                          double threshold = 0.5);

// Zero-denominator conventions: every ratio below is 0 when undefined.
double precision(const ConfusionMatrix& cm) noexcept;
double recall(const ConfusionMatrix& cm) noexcept;
double f1(const ConfusionMatrix& cm) noexcept;
double accuracy(const ConfusionMatrix& cm) noexcept;

// Mann-Whitney AUC with ties counted 0.5; nullopt when only one class is present.
std::optional<double> roc_auc(std::span<const double> y_true, std::span<const double> score);

}  // namespace probebench
