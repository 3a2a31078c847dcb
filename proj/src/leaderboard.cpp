#include "probebench/leaderboard.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "probebench/error.hpp"

namespace probebench {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Timestamps

std::string format_iso8601(Timestamp ts) {
  using namespace std::chrono;
  const auto day = floor<days>(ts);
  const year_month_day ymd{day};
  const hh_mm_ss tod{ts - day};
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02u-%02uT%02d:%02d:%02lld.%03lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<long long>(tod.seconds().count()),
                static_cast<long long>(tod.subseconds().count()));
  return buffer;
}

Timestamp parse_iso8601(const std::string& text) {
  using namespace std::chrono;
  int y = 0;
  unsigned mo = 0, d = 0;
  int h = 0, mi = 0, s = 0, ms = 0;
  if (std::sscanf(text.c_str(), "%d-%u-%uT%d:%d:%d.%dZ", &y, &mo, &d, &h, &mi, &s, &ms) != 7) {
    throw Error(ErrorCode::InvalidValue, "bad timestamp '" + text + "'");
  }
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok()) throw Error(ErrorCode::InvalidValue, "bad timestamp '" + text + "'");
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} + milliseconds{ms};
}

std::string format_compact(Timestamp ts) {
  const std::string iso = format_iso8601(ts);
  // YYYY-MM-DDTHH:MM:SS -> YYYYMMDD_HHMMSS
  return iso.substr(0, 4) + iso.substr(5, 2) + iso.substr(8, 2) + "_" + iso.substr(11, 2) + iso.substr(14, 2) +
         iso.substr(17, 2);
}

// ---------------------------------------------------------------------------
// Records

double ExperimentRecord::mean_q() const {
  std::vector<TaskQuality> qualities;
  for (const auto& task : tasks) qualities.push_back(task.quality);
  return probebench::mean_q(qualities);
}

namespace {

TaskKind kind_from_string(const std::string& text) {
  if (text == "regression") return TaskKind::Regression;
  if (text == "classification") return TaskKind::Classification;
  throw Error(ErrorCode::InvalidValue, "unknown task kind '" + text + "'");
}

}  // namespace

ordered_json to_json(const ExperimentRecord& record) {
  ordered_json doc;
  doc["phase"] = record.phase;
  doc["method"] = record.method;
  doc["timestamp"] = format_iso8601(record.timestamp);
  doc["epsilon"] = record.epsilon;
  doc["config_fingerprint"] = record.config_fingerprint;
  doc["submission_fingerprint"] = record.submission_fingerprint;
  doc["tasks"] = ordered_json::array();
  for (const auto& task : record.tasks) {
    ordered_json t;
    t["name"] = task.name;
    t["kind"] = std::string(to_string(task.kind));
    t["fold_scores"] = task.fold_scores;
    t["mean_s"] = task.quality.mean_s;
    t["std_s"] = task.quality.std_s;
    t["q"] = task.quality.q;
    t["k_used"] = task.quality.k_used;
    t["unreliable"] = task.quality.unreliable;
    doc["tasks"].push_back(std::move(t));
  }
  doc["mean_q"] = record.mean_q();
  return doc;
}

ExperimentRecord record_from_json(const json& doc) {
  try {
    ExperimentRecord record;
    record.phase = doc.at("phase").get<std::string>();
    record.method = doc.at("method").get<std::string>();
    record.timestamp = parse_iso8601(doc.at("timestamp").get<std::string>());
    record.epsilon = doc.at("epsilon").get<double>();
    record.config_fingerprint = doc.at("config_fingerprint").get<std::string>();
    record.submission_fingerprint = doc.at("submission_fingerprint").get<std::string>();
    for (const auto& t : doc.at("tasks")) {
      TaskRecord task;
      task.name = t.at("name").get<std::string>();
      task.kind = kind_from_string(t.at("kind").get<std::string>());
      task.fold_scores = t.at("fold_scores").get<std::vector<double>>();
      task.quality.task = task.name;
      task.quality.mean_s = t.at("mean_s").get<double>();
      task.quality.std_s = t.at("std_s").get<double>();
      task.quality.q = t.at("q").get<double>();
      task.quality.k_used = t.at("k_used").get<std::size_t>();
      task.quality.unreliable = t.at("unreliable").get<bool>();
      record.tasks.push_back(std::move(task));
    }
    return record;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidValue, std::string("malformed experiment record: ") + e.what());
  }
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoFailure, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string file_fingerprint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return sha256_hex(buffer.str());
}

std::string config_fingerprint(const EvalConfig& config) {
  return sha256_hex(render_config(config));
}

// ---------------------------------------------------------------------------
// Scoring database

namespace {

void fsync_path(const fs::path& path, bool directory) {
  const int fd = ::open(path.c_str(), directory ? O_RDONLY | O_DIRECTORY : O_RDONLY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

ScoringDatabase ScoringDatabase::open(const fs::path& path) {
  ScoringDatabase db;
  db.path_ = path;
  if (!fs::exists(path)) return db;

  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  std::size_t start = 0;
  std::size_t valid_end = 0;
  while (start < text.size()) {
    const auto newline = text.find('\n', start);
    if (newline == std::string::npos) break;  // torn tail
    const std::string_view line(text.data() + start, newline - start);
    if (!line.empty()) {
      try {
        db.records_.push_back(record_from_json(json::parse(line)));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidValue, path.string() + ": corrupt record: " + e.what());
      }
    }
    start = newline + 1;
    valid_end = start;
  }
  if (valid_end < text.size()) fs::resize_file(path, valid_end);
  return db;
}

void ScoringDatabase::append(ExperimentRecord record) {
  for (const auto& existing : records_) {
    if (existing.phase == record.phase && existing.method == record.method &&
        existing.timestamp == record.timestamp) {
      throw Error(ErrorCode::DuplicateRecord,
                  record.phase + "/" + record.method + "@" + format_iso8601(record.timestamp));
    }
  }
  if (path_) {
    const std::string line = to_json(record).dump() + "\n";
    const int fd = ::open(path_->c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw Error(ErrorCode::IoFailure, "cannot open " + path_->string());
    const auto written = ::write(fd, line.data(), line.size());
    const bool ok = written == static_cast<ssize_t>(line.size()) && ::fsync(fd) == 0;
    ::close(fd);
    if (!ok) throw Error(ErrorCode::IoFailure, "append to " + path_->string() + " failed");
  }
  records_.push_back(std::move(record));
}

std::vector<std::string> ScoringDatabase::phases() const {
  std::set<std::string> names;
  for (const auto& record : records_) names.insert(record.phase);
  return {names.begin(), names.end()};
}

// ---------------------------------------------------------------------------
// Leaderboard

namespace {

Leaderboard rank_records(const std::vector<const ExperimentRecord*>& selected, const std::string& phase,
                         const RankingOptions& options) {
  Leaderboard board;
  board.phase = phase;

  std::set<std::string> shared;
  std::set<std::string> all_tasks;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    std::set<std::string> names;
    for (const auto& task : selected[i]->tasks) names.insert(task.name);
    all_tasks.insert(names.begin(), names.end());
    if (i == 0) {
      shared = names;
    } else {
      std::erase_if(shared, [&](const std::string& name) { return !names.contains(name); });
    }
  }
  if (shared.empty()) throw Error(ErrorCode::InvalidValue, "experiments in phase '" + phase + "' share no task");
  if (shared.size() != all_tasks.size()) {
    std::string dropped;
    for (const auto& name : all_tasks) {
      if (!shared.contains(name)) dropped += (dropped.empty() ? "" : ",") + name;
    }
    board.warnings.push_back("tasks_not_shared:" + dropped);
  }

  std::map<std::string, std::map<std::string, double>> experiments;
  std::map<std::string, Timestamp> stamps;
  for (const auto* record : selected) {
    auto& per_task = experiments[record->method];
    for (const auto& task : record->tasks) {
      if (shared.contains(task.name)) per_task[task.name] = task.quality.q;
    }
    stamps[record->method] = record->timestamp;
    board.generated_at = std::max(board.generated_at, record->timestamp);
  }

  const Ranking ranking = final_ranking(experiments, options);
  if (ranking.weights.uniform_fallback) board.warnings.emplace_back("uniform_weights:all_task_stds_zero");
  board.ghost_weight = ranking.weights.ghost_weight;
  for (const auto& [name, weight] : ranking.weights.weights) {
    board.tasks.push_back({name, weight, ranking.weights.stds.at(name)});
  }
  for (const auto& ranked : ranking.entries) {
    board.entries.push_back({ranked.experiment, stamps.at(ranked.experiment), ranked.q_per_task,
                             ranked.mean_q, ranked.weighted_score, ranked.final_rank});
  }
  return board;
}

// Latest record per method among the first `limit` records of `phase`.
std::vector<const ExperimentRecord*> latest_per_method(const ScoringDatabase& db, const std::string& phase,
                                                       std::size_t limit) {
  std::map<std::string, const ExperimentRecord*> latest;
  std::size_t seen = 0;
  for (const auto& record : db.records()) {
    if (record.phase != phase) continue;
    if (seen++ == limit) break;
    auto& slot = latest[record.method];
    if (slot == nullptr || record.timestamp > slot->timestamp) slot = &record;
  }
  std::vector<const ExperimentRecord*> out;
  for (const auto& [method, record] : latest) out.push_back(record);
  return out;
}

}  // namespace

Leaderboard rebuild_leaderboard(const ScoringDatabase& db, const std::string& phase,
                                const RankingOptions& options) {
  const auto selected = latest_per_method(db, phase, SIZE_MAX);
  if (selected.empty()) throw Error(ErrorCode::UnknownPhase, phase);
  return rank_records(selected, phase, options);
}

std::vector<TrajectoryStep> replay_rank_trajectory(const ScoringDatabase& db, const std::string& phase,
                                                   const RankingOptions& options) {
  std::vector<TrajectoryStep> steps;
  std::vector<const ExperimentRecord*> in_phase;
  for (const auto& record : db.records()) {
    if (record.phase == phase) in_phase.push_back(&record);
  }
  if (in_phase.empty()) throw Error(ErrorCode::UnknownPhase, phase);
  for (std::size_t i = 0; i < in_phase.size(); ++i) {
    const auto board = rank_records(latest_per_method(db, phase, i + 1), phase, options);
    TrajectoryStep step{i + 1, in_phase[i]->method, {}};
    for (const auto& entry : board.entries) step.ranks[entry.method] = entry.rank;
    steps.push_back(std::move(step));
  }
  return steps;
}

ordered_json to_json(const Leaderboard& board) {
  ordered_json doc;
  doc["phase"] = board.phase;
  doc["generated_at"] = format_iso8601(board.generated_at);
  doc["tasks"] = ordered_json::array();
  for (const auto& task : board.tasks) {
    doc["tasks"].push_back({{"name", task.name}, {"weight", task.weight}, {"std", task.std}});
  }
  if (board.ghost_weight) doc["ghost_weight"] = *board.ghost_weight;
  doc["warnings"] = board.warnings;
  doc["entries"] = ordered_json::array();
  for (const auto& entry : board.entries) {
    ordered_json e;
    e["method"] = entry.method;
    e["timestamp"] = format_iso8601(entry.timestamp);
    e["q_per_task"] = ordered_json::object();
    for (const auto& [task, q] : entry.q_per_task) e["q_per_task"][task] = q;
    e["mean_q"] = entry.mean_q;
    e["weighted_score"] = entry.weighted_score;
    e["rank"] = entry.rank;
    doc["entries"].push_back(std::move(e));
  }
  return doc;
}

void validate_leaderboard_json(const json& doc) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidValue, "leaderboard: " + what); };
  if (!doc.is_object()) fail("not an object");
  for (const char* key : {"phase", "generated_at", "tasks", "warnings", "entries"}) {
    if (!doc.contains(key)) fail(std::string("missing key '") + key + "'");
  }
  if (!doc["phase"].is_string() || !doc["generated_at"].is_string()) fail("phase/generated_at must be strings");
  if (!doc["tasks"].is_array() || doc["tasks"].empty()) fail("tasks must be a non-empty array");
  if (!doc["entries"].is_array() || doc["entries"].empty()) fail("entries must be a non-empty array");
  if (!doc["warnings"].is_array()) fail("warnings must be an array");

  std::set<std::string> task_names;
  double weight_sum = 0.0;
  for (const auto& task : doc["tasks"]) {
    if (!task.is_object() || !task.contains("name") || !task.contains("weight") || !task.contains("std")) {
      fail("task entries need name, weight, std");
    }
    if (!task["name"].is_string() || !task["weight"].is_number() || !task["std"].is_number()) {
      fail("task field types");
    }
    const double w = task["weight"].get<double>();
    if (w < 0.0 || w > 1.0) fail("weight outside [0,1]");
    if (task["std"].get<double>() < 0.0) fail("negative std");
    weight_sum += w;
    task_names.insert(task["name"].get<std::string>());
  }
  if (doc.contains("ghost_weight")) weight_sum += doc["ghost_weight"].get<double>();
  bool fallback = false;
  for (const auto& w : doc["warnings"]) {
    if (w.is_string() && w.get<std::string>().starts_with("uniform_weights")) fallback = true;
  }
  if (std::abs(weight_sum - 1.0) > 1e-9 && !fallback) fail("weights do not sum to 1");

  int previous_rank = 0;
  for (const auto& entry : doc["entries"]) {
    for (const char* key : {"method", "timestamp", "q_per_task", "mean_q", "weighted_score", "rank"}) {
      if (!entry.contains(key)) fail(std::string("entry missing '") + key + "'");
    }
    if (!entry["q_per_task"].is_object()) fail("q_per_task must be an object");
    std::set<std::string> entry_tasks;
    for (const auto& [name, value] : entry["q_per_task"].items()) {
      if (!value.is_number()) fail("q values must be numbers");
      entry_tasks.insert(name);
    }
    if (entry_tasks != task_names) fail("q_per_task does not match task list");
    const int rank = entry["rank"].get<int>();
    if (rank < 1 || rank < previous_rank) fail("entries not sorted by rank");
    previous_rank = rank;
  }
}

// ---------------------------------------------------------------------------
// Output files

void atomic_write(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
  }
  fsync_path(tmp, false);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "rename to " + path.string() + ": " + ec.message());
  fsync_path(path.parent_path(), true);
}

fs::path experiment_dir(const fs::path& output_dir, const std::string& phase, const std::string& method,
                        Timestamp ts) {
  const std::string base = method + "_" + format_compact(ts);
  fs::path candidate = output_dir / phase / base;
  for (int suffix = 2; fs::exists(candidate); ++suffix) {
    candidate = output_dir / phase / (base + "_" + std::to_string(suffix));
  }
  return candidate;
}

namespace {

ordered_json config_json(const EvalConfig& c) {
  ordered_json doc;
  doc["embedding_dim"] = c.embedding_dim;
  doc["batch_size"] = c.batch_size;
  doc["epochs"] = c.epochs;
  doc["learning_rate"] = c.learning_rate;
  doc["k_folds"] = c.k_folds;
  doc["standardize_embeddings"] = c.standardize_embeddings;
  doc["normalize_labels"] = c.normalize_labels;
  doc["task_filter"] = c.task_filter ? ordered_json(*c.task_filter) : ordered_json(false);
  doc["seed"] = c.seed;
  doc["epsilon"] = c.epsilon;
  doc["split_ratio"] = c.split_ratio;
  doc["probe_kind"] = std::string(to_string(c.probe_kind));
  doc["mlp_hidden"] = c.mlp_hidden;
  doc["ghost_task"] = c.ghost_task;
  doc["weighted_ranking"] = c.weighted_ranking;
  return doc;
}

std::string fold_dir_name(std::size_t index) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "fold_%03zu", index);
  return buffer;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
}

}  // namespace

ordered_json result_document(const ExperimentRecord& record, const std::vector<TaskDiagnostics>& diagnostics,
                             const EvalConfig& config) {
  ordered_json doc;
  doc["phase"] = record.phase;
  doc["method"] = record.method;
  doc["timestamp"] = format_iso8601(record.timestamp);
  doc["config_fingerprint"] = record.config_fingerprint;
  doc["submission_fingerprint"] = record.submission_fingerprint;
  doc["config"] = config_json(config);
  doc["mean_q"] = record.mean_q();
  doc["tasks"] = ordered_json::array();
  for (const auto& task : record.tasks) {
    ordered_json t;
    t["name"] = task.name;
    t["kind"] = std::string(to_string(task.kind));
    t["q"] = task.quality.q;
    t["mean_s"] = task.quality.mean_s;
    t["std_s"] = task.quality.std_s;
    t["k_used"] = task.quality.k_used;
    t["unreliable"] = task.quality.unreliable;
    t["fold_scores"] = task.fold_scores;

    // Secondary metrics averaged over the folds that report them.
    std::map<std::string, std::pair<double, std::size_t>> sums;
    std::map<std::string, std::size_t> warning_counts;
    const auto it = std::find_if(diagnostics.begin(), diagnostics.end(),
                                 [&](const TaskDiagnostics& d) { return d.task == task.name; });
    if (it != diagnostics.end()) {
      for (const auto& fold : it->folds) {
        for (const auto& [name, value] : fold.score.secondary) {
          sums[name].first += value;
          ++sums[name].second;
        }
        for (const auto& w : fold.score.warnings) ++warning_counts[w];
      }
    }
    ordered_json metrics = ordered_json::object();
    for (const auto& [name, acc] : sums) metrics[name] = acc.first / static_cast<double>(acc.second);
    t["metrics"] = std::move(metrics);
    ordered_json warnings = ordered_json::array();
    for (const auto& [name, count] : warning_counts) {
      warnings.push_back(name + " (" + std::to_string(count) + " folds)");
    }
    t["warnings"] = std::move(warnings);
    doc["tasks"].push_back(std::move(t));
  }
  return doc;
}

void write_experiment(const fs::path& target, const ExperimentRecord& record,
                      const std::vector<TaskDiagnostics>& diagnostics, const EvalConfig& config) {
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + target.parent_path().string());
  const fs::path staging = target.parent_path() / (".staging-" + target.filename().string());
  fs::remove_all(staging, ec);
  try {
    fs::create_directories(staging);
    write_text(staging / kResultFile, result_document(record, diagnostics, config).dump(2) + "\n");
    for (const auto& task : diagnostics) {
      for (const auto& fold : task.folds) {
        const fs::path dir = staging / task.task / fold_dir_name(fold.score.fold_index);
        fs::create_directories(dir);
        std::string loss = "epoch,loss\n";
        for (std::size_t e = 0; e < fold.score.loss_curve.size(); ++e) {
          loss += std::to_string(e + 1) + "," + format_double(fold.score.loss_curve[e]) + "\n";
        }
        write_text(dir / "loss_curve.csv", loss);
        std::string predictions = "id,y_true,y_pred\n";
        for (const auto& p : fold.predictions) {
          predictions += p.id + "," + format_double(p.y_true) + "," + format_double(p.y_pred) + "\n";
        }
        write_text(dir / "predictions.csv", predictions);
        if (fold.confusion) {
          const auto& cm = *fold.confusion;
          ordered_json c;
          c["tp"] = cm.tp;
          c["fp"] = cm.fp;
          c["tn"] = cm.tn;
          c["fn"] = cm.fn;
          c["threshold"] = 0.5;
          write_text(dir / "confusion.json", c.dump(2) + "\n");
        }
      }
    }
    fs::rename(staging, target);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(staging, ec);
    throw Error(ErrorCode::IoFailure, e.what());
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
}

fs::path write_leaderboard(const fs::path& output_dir, const Leaderboard& board) {
  const fs::path dir = output_dir / board.phase;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string());
  const fs::path path = dir / kLeaderboardFile;
  atomic_write(path, to_json(board).dump(2) + "\n");

  std::ifstream in(path, std::ios::binary);
  validate_leaderboard_json(json::parse(in));
  return path;
}

WrittenPaths write_outputs(const ExperimentRecord& record, const std::vector<TaskDiagnostics>& diagnostics,
                           const EvalConfig& config, const Leaderboard& board, const fs::path& output_dir) {
  WrittenPaths paths;
  paths.experiment = experiment_dir(output_dir, record.phase, record.method, record.timestamp);
  write_experiment(paths.experiment, record, diagnostics, config);
  paths.leaderboard = write_leaderboard(output_dir, board);
  return paths;
}

}  // namespace probebench
