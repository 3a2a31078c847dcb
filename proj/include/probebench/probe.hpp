#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "probebench/ingest.hpp"
#include "probebench/matrix.hpp"
#include "probebench/metrics.hpp"

namespace probebench {

struct Fold {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

struct SplitPlan {
  std::size_t k = 0;
  double ratio = 0.8;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
};

// Size of the training part for n samples: round(ratio * n).
std::size_t train_size(std::size_t n, double ratio);

// Fold i is a Fisher-Yates shuffle of `ids` driven by the split stream for
// (seed, i), cut at train_size. Throws TooFewSamples.
SplitPlan make_splits(std::span<const std::string> ids, std::size_t k, double ratio, std::uint64_t seed);

// Seeds used for the split shuffle and for the training batch order of a fold.
std::uint64_t split_seed(std::uint64_t seed, std::size_t fold_index) noexcept;
std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold_index) noexcept;

// Per-dimension z-scoring with population std over all rows; zero-variance
// dimensions are only mean-centred.
EmbeddingSet standardize(const EmbeddingSet& embeddings);

// Min-max scaling of regression labels into [0,1]; constant tasks become all
// zeros; classification labels are returned unchanged.
TaskDataset normalize_labels(const TaskDataset& task);

struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;  // outputs x inputs, row-major
  std::vector<double> bias;     // outputs

  std::span<const double> weight_row(std::size_t o) const { return {weights.data() + o * inputs, inputs}; }
};

// Linear probes have a single layer: one output (regression) or two softmax
// logits (classification). MLP probes add one or two ReLU hidden layers.
struct ProbeModel {
  ProbeKind kind = ProbeKind::Linear;
  TaskKind task = TaskKind::Regression;
  std::vector<DenseLayer> layers;

  std::size_t input_width() const { return layers.empty() ? 0 : layers.front().inputs; }
  std::size_t parameter_count() const;
  bool all_finite() const;
  bool operator==(const ProbeModel& other) const;
};

// Untrained model: zeros for Linear, seeded He-uniform hidden layers for MLPs.
ProbeModel init_probe(ProbeKind kind, TaskKind task, std::size_t input_width, std::size_t hidden,
                      std::uint64_t seed);

struct TrainingRun {
  ProbeModel model;
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

// Plain mini-batch gradient descent (no momentum, no decay) for
// config.epochs epochs. Loss: MSE (regression) or softmax cross-entropy.
// Throws NonFiniteLoss when training diverges.
TrainingRun train_probe(const Matrix& features, std::span<const double> labels, TaskKind task,
                        const EvalConfig& config, std::uint64_t fold_seed);

// Regression output, or the class-1 softmax probability. Throws WidthMismatch.
std::vector<double> predict(const ProbeModel& model, const Matrix& features);

// Both class probabilities for one sample of a classification model.
std::pair<double, double> class_probabilities(const ProbeModel& model, std::span<const double> x);

struct FoldPrediction {
  std::string id;
  double y_true = 0.0;
  double y_pred = 0.0;
};

struct FoldResult {
  FoldScore score;
  std::vector<FoldPrediction> predictions;
  std::optional<ConfusionMatrix> confusion;
};

// Gathers feature rows for `ids`; throws MissingId.
Matrix gather_rows(const EmbeddingSet& embeddings, std::span<const std::string> ids);
std::vector<double> gather_labels(const TaskDataset& task, std::span<const std::string> ids);

// Trains on fold.train, scores on fold.test. Inputs are used as given; any
// standardization/normalization happens before.
FoldResult evaluate_fold(const EmbeddingSet& embeddings, const TaskDataset& task, const Fold& fold,
                         std::size_t fold_index, const EvalConfig& config, std::uint64_t fold_seed);

}  // namespace probebench
