#include "probebench/probe.hpp"

#include <algorithm>
#include <cmath>

#include "probebench/error.hpp"
#include "probebench/rng.hpp"

namespace probebench {

std::size_t train_size(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
}

std::uint64_t split_seed(std::uint64_t seed, std::size_t fold_index) noexcept {
  return derive_seed(seed, "split", fold_index);
}

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold_index) noexcept {
  return derive_seed(seed, "train", fold_index);
}

SplitPlan make_splits(std::span<const std::string> ids, std::size_t k, double ratio, std::uint64_t seed) {
  const std::size_t n = ids.size();
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::InvalidValue, "split ratio must lie in (0,1)");
  if (k == 0) throw Error(ErrorCode::InvalidValue, "k must be positive");
  const std::size_t cut = train_size(n, ratio);
  if (n < 2 || cut < 1 || cut >= n) {
    throw Error(ErrorCode::TooFewSamples, std::to_string(n) + " samples at ratio " + format_double(ratio));
  }
  SplitPlan plan{k, ratio, seed, {}};
  plan.folds.reserve(k);
  std::vector<std::size_t> order(n);
  for (std::size_t fold = 0; fold < k; ++fold) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(split_seed(seed, fold));
    rng.shuffle(std::span<std::size_t>(order));
    Fold f;
    f.train.reserve(cut);
    f.test.reserve(n - cut);
    for (std::size_t i = 0; i < n; ++i) (i < cut ? f.train : f.test).push_back(ids[order[i]]);
    plan.folds.push_back(std::move(f));
  }
  return plan;
}

EmbeddingSet standardize(const EmbeddingSet& embeddings) {
  EmbeddingSet result = embeddings;
  Matrix& values = result.values();
  const std::size_t rows = values.rows();
  const std::size_t cols = values.cols();
  if (rows == 0) return result;
  std::vector<double> mean(cols, 0.0);
  std::vector<double> var(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) axpy(1.0, values.row(r), mean);
  for (double& m : mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = values.row(r);
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = row[c] - mean[c];
      var[c] += d * d;
    }
  }
  std::vector<double> scale(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    const double sd = std::sqrt(var[c] / static_cast<double>(rows));
    scale[c] = sd > 0.0 ? sd : 1.0;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = values.row(r);
    for (std::size_t c = 0; c < cols; ++c) row[c] = (row[c] - mean[c]) / scale[c];
  }
  return result;
}

TaskDataset normalize_labels(const TaskDataset& task) {
  TaskDataset result = task;
  if (task.kind() != TaskKind::Regression || task.size() == 0) return result;
  auto& labels = result.labels();
  const auto [lo, hi] = std::minmax_element(labels.begin(), labels.end());
  const double min = *lo;
  const double range = *hi - *lo;
  for (double& y : labels) y = range > 0.0 ? (y - min) / range : 0.0;
  return result;
}

// ---------------------------------------------------------------------------
// Probe model

std::size_t ProbeModel::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers) count += layer.weights.size() + layer.bias.size();
  return count;
}

bool ProbeModel::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return std::all_of(layers.begin(), layers.end(),
                     [&](const DenseLayer& l) { return finite(l.weights) && finite(l.bias); });
}

bool ProbeModel::operator==(const ProbeModel& other) const {
  if (kind != other.kind || task != other.task || layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.inputs != b.inputs || a.outputs != b.outputs || a.weights != b.weights || a.bias != b.bias) {
      return false;
    }
  }
  return true;
}

ProbeModel init_probe(ProbeKind kind, TaskKind task, std::size_t input_width, std::size_t hidden,
                      std::uint64_t seed) {
  ProbeModel model;
  model.kind = kind;
  model.task = task;
  std::vector<std::size_t> widths{input_width};
  if (kind == ProbeKind::Mlp1 || kind == ProbeKind::Mlp2) widths.push_back(hidden);
  if (kind == ProbeKind::Mlp2) widths.push_back(hidden);
  widths.push_back(task == TaskKind::Regression ? 1 : 2);

  Rng rng(derive_seed(seed, "init", 0));
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    layer.inputs = widths[l];
    layer.outputs = widths[l + 1];
    layer.weights.assign(layer.inputs * layer.outputs, 0.0);
    layer.bias.assign(layer.outputs, 0.0);
    const bool hidden_layer = l + 2 < widths.size();
    if (hidden_layer) {
      // He-uniform; the output layer stays at zero.
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.inputs));
      for (double& w : layer.weights) w = (2.0 * rng.uniform() - 1.0) * limit;
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

namespace {

struct Workspace {
  // activations[0] is the input; activations[l+1] is the output of layer l
  // (post-ReLU for hidden layers, raw logits for the last one).
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> deltas;
  std::vector<DenseLayer> grads;

  explicit Workspace(const ProbeModel& model) {
    activations.resize(model.layers.size() + 1);
    deltas.resize(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      activations[l + 1].assign(model.layers[l].outputs, 0.0);
      deltas[l].assign(model.layers[l].outputs, 0.0);
    }
    grads = model.layers;
  }

  void zero_grads() {
    for (auto& g : grads) {
      std::fill(g.weights.begin(), g.weights.end(), 0.0);
      std::fill(g.bias.begin(), g.bias.end(), 0.0);
    }
  }
};

std::span<const double> forward(const ProbeModel& model, std::span<const double> x,
                                std::vector<std::vector<double>>& activations) {
  std::span<const double> input = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const DenseLayer& layer = model.layers[l];
    auto& out = activations[l + 1];
    const bool hidden = l + 1 < model.layers.size();
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      const double z = layer.bias[o] + dot(layer.weight_row(o), input);
      out[o] = hidden ? std::max(z, 0.0) : z;
    }
    input = out;
  }
  return input;
}

// Softmax over two logits; returns (p0, p1) with p0 + p1 == 1 up to rounding.
std::pair<double, double> softmax2(double z0, double z1) {
  const double m = std::max(z0, z1);
  const double e0 = std::exp(z0 - m);
  const double e1 = std::exp(z1 - m);
  const double sum = e0 + e1;
  return {e0 / sum, e1 / sum};
}

// Forward + backward for one sample; accumulates gradients, returns the loss.
double accumulate_sample(const ProbeModel& model, std::span<const double> x, double y, Workspace& ws) {
  const auto output = forward(model, x, ws.activations);
  const std::size_t last = model.layers.size() - 1;
  auto& delta_out = ws.deltas[last];
  double loss = 0.0;
  if (model.task == TaskKind::Regression) {
    const double residual = output[0] - y;
    loss = residual * residual;
    delta_out[0] = 2.0 * residual;
  } else {
    const auto [p0, p1] = softmax2(output[0], output[1]);
    const bool positive = y == 1.0;
    const double m = std::max(output[0], output[1]);
    const double log_sum = m + std::log(std::exp(output[0] - m) + std::exp(output[1] - m));
    loss = log_sum - (positive ? output[1] : output[0]);
    delta_out[0] = p0 - (positive ? 0.0 : 1.0);
    delta_out[1] = p1 - (positive ? 1.0 : 0.0);
  }

  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const DenseLayer& layer = model.layers[l];
    DenseLayer& grad = ws.grads[l];
    const std::span<const double> input = l == 0 ? x : std::span<const double>(ws.activations[l]);
    const auto& delta = ws.deltas[l];
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      if (delta[o] == 0.0) continue;
      axpy(delta[o], input, std::span<double>(grad.weights.data() + o * layer.inputs, layer.inputs));
      grad.bias[o] += delta[o];
    }
    if (l == 0) break;
    auto& prev = ws.deltas[l - 1];
    std::fill(prev.begin(), prev.end(), 0.0);
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      if (delta[o] != 0.0) axpy(delta[o], layer.weight_row(o), prev);
    }
    const auto& act = ws.activations[l];
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (act[i] <= 0.0) prev[i] = 0.0;
    }
  }
  return loss;
}

}  // namespace

TrainingRun train_probe(const Matrix& features, std::span<const double> labels, TaskKind task,
                        const EvalConfig& config, std::uint64_t seed) {
  if (features.rows() != labels.size() || labels.empty()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(features.rows()) + " feature rows vs " +
                                               std::to_string(labels.size()) + " labels");
  }
  if (features.cols() != config.embedding_dim) {
    throw Error(ErrorCode::WidthMismatch, "feature width " + std::to_string(features.cols()) +
                                              " vs embedding_dim " + std::to_string(config.embedding_dim));
  }
  TrainingRun run{init_probe(config.probe_kind, task, features.cols(), config.mlp_hidden, seed), {}};
  ProbeModel& model = run.model;
  Workspace ws(model);
  run.epoch_loss.reserve(config.epochs);

  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "batches", 0));

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      ws.zero_grads();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        batch_loss += accumulate_sample(model, features.row(order[i]), labels[order[i]], ws);
      }
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch + 1));
      }
      epoch_loss += batch_loss;
      const double step = -config.learning_rate / static_cast<double>(end - start);
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        axpy(step, ws.grads[l].weights, model.layers[l].weights);
        axpy(step, ws.grads[l].bias, model.layers[l].bias);
      }
    }
    run.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
  }
  if (!model.all_finite()) throw Error(ErrorCode::NonFiniteLoss, "non-finite parameters after training");
  return run;
}

std::pair<double, double> class_probabilities(const ProbeModel& model, std::span<const double> x) {
  if (x.size() != model.input_width()) throw Error(ErrorCode::WidthMismatch, std::to_string(x.size()));
  std::vector<std::vector<double>> activations(model.layers.size() + 1);
  for (std::size_t l = 0; l < model.layers.size(); ++l) activations[l + 1].resize(model.layers[l].outputs);
  const auto out = forward(model, x, activations);
  return softmax2(out[0], out[1]);
}

std::vector<double> predict(const ProbeModel& model, const Matrix& features) {
  if (features.cols() != model.input_width()) {
    throw Error(ErrorCode::WidthMismatch, "features have width " + std::to_string(features.cols()) +
                                              ", model expects " + std::to_string(model.input_width()));
  }
  std::vector<std::vector<double>> activations(model.layers.size() + 1);
  for (std::size_t l = 0; l < model.layers.size(); ++l) activations[l + 1].resize(model.layers[l].outputs);
  std::vector<double> result(features.rows());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto out = forward(model, features.row(r), activations);
    result[r] = model.task == TaskKind::Regression ? out[0] : softmax2(out[0], out[1]).second;
  }
  return result;
}

Matrix gather_rows(const EmbeddingSet& embeddings, std::span<const std::string> ids) {
  Matrix out(ids.size(), embeddings.dim());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto index = embeddings.find(ids[i]);
    if (!index) throw Error(ErrorCode::MissingId, ids[i]);
    const auto src = embeddings.row(*index);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::vector<double> gather_labels(const TaskDataset& task, std::span<const std::string> ids) {
  std::vector<double> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto index = task.find(ids[i]);
    if (!index) throw Error(ErrorCode::MissingId, ids[i]);
    out[i] = task.labels()[*index];
  }
  return out;
}

FoldResult evaluate_fold(const EmbeddingSet& embeddings, const TaskDataset& task, const Fold& fold,
                         std::size_t fold_index, const EvalConfig& config, std::uint64_t seed) {
  const Matrix train_x = gather_rows(embeddings, fold.train);
  const auto train_y = gather_labels(task, fold.train);
  const Matrix test_x = gather_rows(embeddings, fold.test);
  const auto test_y = gather_labels(task, fold.test);

  auto run = train_probe(train_x, train_y, task.kind(), config, seed);
  const auto y_pred = predict(run.model, test_x);

  FoldResult result;
  FoldScore& score = result.score;
  score.task = task.name();
  score.fold_index = fold_index;
  score.loss_curve = std::move(run.epoch_loss);

  if (task.kind() == TaskKind::Regression) {
    const double r2 = r_squared(test_y, y_pred);
    if (is_constant(test_y)) score.warnings.emplace_back("constant_truth");
    score.primary = r2;
    score.secondary[metric::kR2] = r2;
    score.secondary[metric::kMse] = mse(test_y, y_pred);
    score.secondary[metric::kMae] = mae(test_y, y_pred);
  } else {
    const auto cm = confusion(test_y, y_pred);
    score.primary = f1(cm);
    score.secondary[metric::kF1] = score.primary;
    score.secondary[metric::kPrecision] = precision(cm);
    score.secondary[metric::kRecall] = recall(cm);
    score.secondary[metric::kAccuracy] = accuracy(cm);
    if (const auto auc = roc_auc(test_y, y_pred)) {
      score.secondary[metric::kRocAuc] = *auc;
    } else {
      score.warnings.emplace_back("single_class");
    }
    result.confusion = cm;
  }

  result.predictions.reserve(fold.test.size());
  for (std::size_t i = 0; i < fold.test.size(); ++i) {
    result.predictions.push_back({fold.test[i], test_y[i], y_pred[i]});
  }
  return result;
}

}  // namespace probebench
