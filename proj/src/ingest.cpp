#include "probebench/ingest.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "probebench/error.hpp"

namespace probebench {
namespace fs = std::filesystem;

std::string_view to_string(TaskKind kind) noexcept {
  return kind == TaskKind::Regression ? "regression" : "classification";
}

std::string_view to_string(ProbeKind kind) noexcept {
  switch (kind) {
    case ProbeKind::Linear: return "linear";
    case ProbeKind::Mlp1: return "mlp1";
    case ProbeKind::Mlp2: return "mlp2";
  }
  return "linear";
}

void EmbeddingSet::add(std::string id, std::span<const double> values) {
  if (values.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch,
                "row '" + id + "' has " + std::to_string(values.size()) + " values, expected " +
                    std::to_string(dim_));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, id);
  }
  if (index_.contains(id)) throw Error(ErrorCode::DuplicateId, id);
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  values_.push_row(values);
}

std::optional<std::size_t> EmbeddingSet::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void TaskDataset::add(std::string id, double label) {
  if (!std::isfinite(label)) throw Error(ErrorCode::NonFiniteValue, id);
  if (kind_ == TaskKind::Classification && label != 0.0 && label != 1.0) {
    throw Error(ErrorCode::NonBinaryLabel, id + "=" + format_double(label));
  }
  if (index_.contains(id)) throw Error(ErrorCode::DuplicateId, id);
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  labels_.push_back(label);
}

std::optional<std::size_t> TaskDataset::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Splits text into non-empty lines (LF or CRLF), reporting 1-based line numbers.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto end = text.find('\n');
    std::string_view line = text.substr(0, end);
    text = end == std::string_view::npos ? std::string_view{} : text.substr(end + 1);
    ++line_no;
    line = trim(line);
    if (!line.empty()) fn(line, line_no);
  }
}

void split_fields(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
}

double parse_number(std::string_view field, std::string_view row_id, std::size_t line_no) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec == std::errc::result_out_of_range) {
    throw Error(ErrorCode::NonFiniteValue, std::string(row_id));
  }
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::MalformedCsv, "line " + std::to_string(line_no) + ": not a number '" +
                                             std::string(field) + "'");
  }
  if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteValue, std::string(row_id));
  return value;
}

void check_id(std::string_view id, std::size_t line_no) {
  if (id.empty()) throw Error(ErrorCode::MalformedCsv, "line " + std::to_string(line_no) + ": empty id");
}

}  // namespace

EmbeddingSet parse_submission_text(std::string_view text, std::size_t expected_dim) {
  if (expected_dim == 0) throw Error(ErrorCode::InvalidValue, "expected_dim must be positive");
  EmbeddingSet result(expected_dim);
  bool header_seen = false;
  std::vector<std::string_view> fields;
  std::vector<double> values(expected_dim);
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    split_fields(line, fields);
    if (!header_seen) {
      if (fields.front() != "id") {
        throw Error(ErrorCode::MalformedCsv, "header must start with 'id'");
      }
      if (fields.size() != expected_dim + 1) {
        throw Error(ErrorCode::DimensionMismatch,
                    "header has " + std::to_string(fields.size() - 1) + " embedding columns, expected " +
                        std::to_string(expected_dim));
      }
      header_seen = true;
      return;
    }
    check_id(fields.front(), line_no);
    if (fields.size() != expected_dim + 1) {
      throw Error(ErrorCode::DimensionMismatch,
                  "row '" + std::string(fields.front()) + "' has " + std::to_string(fields.size() - 1) +
                      " values, expected " + std::to_string(expected_dim));
    }
    for (std::size_t i = 0; i < expected_dim; ++i) {
      values[i] = parse_number(fields[i + 1], fields.front(), line_no);
    }
    result.add(std::string(fields.front()), values);
  });
  if (!header_seen) throw Error(ErrorCode::MalformedCsv, "missing header");
  if (result.size() == 0) throw Error(ErrorCode::MalformedCsv, "no data rows");
  return result;
}

EmbeddingSet parse_submission(const fs::path& path, std::size_t expected_dim) {
  try {
    return parse_submission_text(read_file(path), expected_dim);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedCsv) {
      throw Error(e.code(), path.filename().string() + ": " + e.detail());
    }
    throw;
  }
}

std::pair<std::string, TaskKind> task_identity(const fs::path& path) {
  const std::string stem = path.stem().string();
  constexpr std::string_view kRegr = "__regr";
  constexpr std::string_view kCls = "__cls";
  if (stem.size() > kRegr.size() && stem.ends_with(kRegr)) {
    return {stem.substr(0, stem.size() - kRegr.size()), TaskKind::Regression};
  }
  if (stem.size() > kCls.size() && stem.ends_with(kCls)) {
    return {stem.substr(0, stem.size() - kCls.size()), TaskKind::Classification};
  }
  throw Error(ErrorCode::UnknownTaskSuffix, path.filename().string());
}

TaskDataset parse_task_text(std::string_view text, std::string name, TaskKind kind) {
  TaskDataset task(std::move(name), kind);
  bool header_seen = false;
  std::vector<std::string_view> fields;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    split_fields(line, fields);
    if (fields.size() != 2) {
      throw Error(ErrorCode::MalformedCsv,
                  "line " + std::to_string(line_no) + ": expected 2 columns (id,label)");
    }
    if (!header_seen) {
      if (fields[0] != "id" || fields[1] != "label") {
        throw Error(ErrorCode::MalformedCsv, "header must be 'id,label'");
      }
      header_seen = true;
      return;
    }
    check_id(fields[0], line_no);
    task.add(std::string(fields[0]), parse_number(fields[1], fields[0], line_no));
  });
  if (!header_seen) throw Error(ErrorCode::MalformedCsv, "missing header");
  if (task.size() == 0) throw Error(ErrorCode::MalformedCsv, "no data rows");
  return task;
}

TaskDataset parse_task(const fs::path& path) {
  auto [name, kind] = task_identity(path);
  try {
    return parse_task_text(read_file(path), std::move(name), kind);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedCsv) {
      throw Error(e.code(), path.filename().string() + ": " + e.detail());
    }
    throw;
  }
}

std::vector<TaskDataset> load_annotations(const fs::path& dir,
                                          const std::optional<std::vector<std::string>>& filter) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoFailure, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  if (files.empty()) throw Error(ErrorCode::EmptyAnnotationDir, dir.string());

  std::vector<std::pair<std::string, fs::path>> named;
  for (const auto& file : files) named.emplace_back(task_identity(file).first, file);
  std::sort(named.begin(), named.end());
  for (std::size_t i = 1; i < named.size(); ++i) {
    if (named[i].first == named[i - 1].first) {
      throw Error(ErrorCode::DuplicateId, "task '" + named[i].first + "' defined twice");
    }
  }

  if (filter) {
    std::set<std::string> wanted(filter->begin(), filter->end());
    for (const auto& name : wanted) {
      const bool found = std::any_of(named.begin(), named.end(),
                                     [&](const auto& entry) { return entry.first == name; });
      if (!found) throw Error(ErrorCode::FilterNameNotFound, name);
    }
    std::erase_if(named, [&](const auto& entry) { return !wanted.contains(entry.first); });
  }

  std::vector<TaskDataset> tasks;
  tasks.reserve(named.size());
  for (const auto& [name, file] : named) tasks.push_back(parse_task(file));
  return tasks;
}

void validate(const EvalConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidValue, what); };
  if (c.embedding_dim == 0) fail("embedding_dim must be positive");
  if (c.batch_size == 0) fail("batch_size must be positive");
  if (c.epochs == 0) fail("epochs must be positive");
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) fail("learning_rate must be positive");
  if (c.k_folds == 0) fail("k_folds must be positive");
  if (!(c.epsilon > 0.0) || !std::isfinite(c.epsilon)) fail("epsilon must be positive");
  if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) fail("split_ratio must lie in (0,1)");
  if (c.mlp_hidden == 0) fail("mlp_hidden must be positive");
  if (c.task_filter && c.task_filter->empty()) fail("task_filter must not be an empty list");
}

namespace {

std::size_t positive_integer(const YAML::Node& node, const std::string& key) {
  const auto value = node.as<long long>();
  if (value <= 0) throw Error(ErrorCode::InvalidValue, key + " must be a positive integer");
  return static_cast<std::size_t>(value);
}

ProbeKind parse_probe_kind(const std::string& text) {
  if (text == "linear") return ProbeKind::Linear;
  if (text == "mlp1") return ProbeKind::Mlp1;
  if (text == "mlp2") return ProbeKind::Mlp2;
  throw Error(ErrorCode::InvalidValue, "probe_kind must be linear, mlp1 or mlp2");
}

}  // namespace

EvalConfig parse_config_text(const std::string& text) {
  EvalConfig config;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::InvalidValue, std::string("unparseable config: ") + e.what());
  }
  if (root.IsNull()) return config;
  if (!root.IsMap()) throw Error(ErrorCode::InvalidValue, "config must be a key: value mapping");

  for (const auto& item : root) {
    const auto key = item.first.as<std::string>();
    const YAML::Node& value = item.second;
    try {
      if (key == "embedding_dim") config.embedding_dim = positive_integer(value, key);
      else if (key == "batch_size") config.batch_size = positive_integer(value, key);
      else if (key == "epochs") config.epochs = positive_integer(value, key);
      else if (key == "learning_rate") config.learning_rate = value.as<double>();
      else if (key == "k_folds") config.k_folds = positive_integer(value, key);
      else if (key == "standardize_embeddings") config.standardize_embeddings = value.as<bool>();
      else if (key == "normalize_labels") config.normalize_labels = value.as<bool>();
      else if (key == "task_filter") {
        if (value.IsNull() || (value.IsScalar() && !value.as<bool>())) {
          config.task_filter.reset();
        } else if (value.IsSequence()) {
          config.task_filter = value.as<std::vector<std::string>>();
        } else {
          throw Error(ErrorCode::InvalidValue, "task_filter must be false or a list of names");
        }
      }
      else if (key == "seed") {
        const auto seed = value.as<long long>();
        if (seed < 0) throw Error(ErrorCode::InvalidValue, "seed must be non-negative");
        config.seed = static_cast<std::uint64_t>(seed);
      }
      else if (key == "epsilon") config.epsilon = value.as<double>();
      else if (key == "split_ratio") config.split_ratio = value.as<double>();
      else if (key == "probe_kind") config.probe_kind = parse_probe_kind(value.as<std::string>());
      else if (key == "mlp_hidden") config.mlp_hidden = positive_integer(value, key);
      else if (key == "ghost_task") config.ghost_task = value.as<bool>();
      else if (key == "weighted_ranking") config.weighted_ranking = value.as<bool>();
      else throw Error(ErrorCode::UnknownKey, key);
    } catch (const YAML::Exception&) {
      throw Error(ErrorCode::InvalidValue, "bad value for " + key);
    }
  }
  validate(config);
  return config;
}

EvalConfig load_config(const fs::path& path) {
  return parse_config_text(read_file(path));
}

std::string render_config(const EvalConfig& c) {
  std::ostringstream out;
  out << "embedding_dim: " << c.embedding_dim << '\n'
      << "batch_size: " << c.batch_size << '\n'
      << "epochs: " << c.epochs << '\n'
      << "learning_rate: " << format_double(c.learning_rate) << '\n'
      << "k_folds: " << c.k_folds << '\n'
      << "standardize_embeddings: " << (c.standardize_embeddings ? "true" : "false") << '\n'
      << "normalize_labels: " << (c.normalize_labels ? "true" : "false") << '\n';
  out << "task_filter: ";
  if (c.task_filter) {
    out << '[';
    for (std::size_t i = 0; i < c.task_filter->size(); ++i) {
      out << (i ? ", " : "") << '"' << (*c.task_filter)[i] << '"';
    }
    out << "]\n";
  } else {
    out << "false\n";
  }
  out << "seed: " << c.seed << '\n'
      << "epsilon: " << format_double(c.epsilon) << '\n'
      << "split_ratio: " << format_double(c.split_ratio) << '\n'
      << "probe_kind: " << to_string(c.probe_kind) << '\n'
      << "mlp_hidden: " << c.mlp_hidden << '\n'
      << "ghost_task: " << (c.ghost_task ? "true" : "false") << '\n'
      << "weighted_ranking: " << (c.weighted_ranking ? "true" : "false") << '\n';
  return out.str();
}

std::string format_double(double value) {
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

std::string serialize_submission(const EmbeddingSet& embeddings) {
  std::string out = "id";
  for (std::size_t i = 0; i < embeddings.dim(); ++i) out += ",e" + std::to_string(i);
  out += '\n';
  for (std::size_t r = 0; r < embeddings.size(); ++r) {
    out += embeddings.ids()[r];
    for (double v : embeddings.row(r)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::string serialize_task(const TaskDataset& task) {
  std::string out = "id,label\n";
  for (std::size_t i = 0; i < task.size(); ++i) {
    out += task.ids()[i] + ',' + format_double(task.labels()[i]) + '\n';
  }
  return out;
}

fs::path write_task(const TaskDataset& task, const fs::path& dir) {
  const auto suffix = task.kind() == TaskKind::Regression ? "__regr.csv" : "__cls.csv";
  const fs::path path = dir / (task.name() + suffix);
  std::ofstream out(path, std::ios::binary);
  out << serialize_task(task);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  return path;
}

}  // namespace probebench
