#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "probebench/matrix.hpp"

namespace probebench {

enum class TaskKind { Regression, Classification };
enum class ProbeKind { Linear, Mlp1, Mlp2 };

std::string_view to_string(TaskKind kind) noexcept;
std::string_view to_string(ProbeKind kind) noexcept;

// A submission: one fixed-width embedding per sample id, in file order.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  explicit EmbeddingSet(std::size_t dim) : dim_(dim), values_(0, dim) {}

  // Throws DuplicateId, DimensionMismatch or NonFiniteValue.
  void add(std::string id, std::span<const double> values);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Matrix& values() const noexcept { return values_; }
  Matrix& values() noexcept { return values_; }

  std::optional<std::size_t> find(std::string_view id) const;
  std::span<const double> row(std::size_t index) const { return values_.row(index); }

  bool operator==(const EmbeddingSet& other) const {
    return dim_ == other.dim_ && ids_ == other.ids_ && values_ == other.values_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  Matrix values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// A hidden downstream task: labels keyed by sample id, in file order.
class TaskDataset {
 public:
  TaskDataset() = default;
  TaskDataset(std::string name, TaskKind kind) : name_(std::move(name)), kind_(kind) {}

  // Throws DuplicateId, NonFiniteValue or NonBinaryLabel.
  void add(std::string id, double label);

  const std::string& name() const noexcept { return name_; }
  TaskKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<double>& labels() const noexcept { return labels_; }
  std::vector<double>& labels() noexcept { return labels_; }
  std::optional<std::size_t> find(std::string_view id) const;

  bool operator==(const TaskDataset& other) const {
    return name_ == other.name_ && kind_ == other.kind_ && ids_ == other.ids_ &&
           labels_ == other.labels_;
  }

 private:
  std::string name_;
  TaskKind kind_ = TaskKind::Regression;
  std::vector<std::string> ids_;
  std::vector<double> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct EvalConfig {
  std::size_t embedding_dim = 1024;
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
  double learning_rate = 0.001;
  std::size_t k_folds = 40;
  bool standardize_embeddings = true;
  bool normalize_labels = true;
  std::optional<std::vector<std::string>> task_filter;
  std::uint64_t seed = 0;
  double epsilon = 0.02;
  double split_ratio = 0.8;
  ProbeKind probe_kind = ProbeKind::Linear;
  std::size_t mlp_hidden = 256;
  bool ghost_task = false;
  bool weighted_ranking = true;

  bool operator==(const EvalConfig&) const = default;
};

// Throws InvalidValue when a field breaks its documented range.
void validate(const EvalConfig& config);

EmbeddingSet parse_submission(const std::filesystem::path& path, std::size_t expected_dim);
EmbeddingSet parse_submission_text(std::string_view text, std::size_t expected_dim);

// Task name and kind from a filename such as `crops__regr.csv`.
std::pair<std::string, TaskKind> task_identity(const std::filesystem::path& path);
TaskDataset parse_task(const std::filesystem::path& path);
TaskDataset parse_task_text(std::string_view text, std::string name, TaskKind kind);

// Top-level `*.csv` files only, sorted by task name.
std::vector<TaskDataset> load_annotations(const std::filesystem::path& dir,
                                          const std::optional<std::vector<std::string>>& filter);

EvalConfig load_config(const std::filesystem::path& path);
EvalConfig parse_config_text(const std::string& text);
// Flat key: value rendering accepted by parse_config_text.
std::string render_config(const EvalConfig& config);

std::string serialize_submission(const EmbeddingSet& embeddings);
std::string serialize_task(const TaskDataset& task);
// Writes `<dir>/<name>__regr.csv` or `__cls.csv`; returns the path.
std::filesystem::path write_task(const TaskDataset& task, const std::filesystem::path& dir);

// Shortest round-trip decimal rendering.
std::string format_double(double value);

}  // namespace probebench
