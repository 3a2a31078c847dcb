#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "probebench/ingest.hpp"
#include "probebench/probe.hpp"
#include "probebench/scoring.hpp"

namespace probebench {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

// 2025-06-01T09:30:05.000Z
std::string format_iso8601(Timestamp ts);
Timestamp parse_iso8601(const std::string& text);
// 20250601_093005
std::string format_compact(Timestamp ts);

struct TaskRecord {
  std::string name;
  TaskKind kind = TaskKind::Regression;
  std::vector<double> fold_scores;
  TaskQuality quality;
};

struct ExperimentRecord {
  std::string phase;
  std::string method;
  Timestamp timestamp{};
  double epsilon = kDefaultEpsilon;
  std::string config_fingerprint;
  std::string submission_fingerprint;
  std::vector<TaskRecord> tasks;

  double mean_q() const;
};

nlohmann::ordered_json to_json(const ExperimentRecord& record);
ExperimentRecord record_from_json(const nlohmann::json& doc);

// Hex SHA-256 digests used as fingerprints.
std::string sha256_hex(std::string_view bytes);
std::string file_fingerprint(const std::filesystem::path& path);
std::string config_fingerprint(const EvalConfig& config);

// Append-only store of experiment records, optionally backed by a JSON-lines
// file. A torn final line (crash mid-append) is dropped on open.
class ScoringDatabase {
 public:
  ScoringDatabase() = default;
  static ScoringDatabase open(const std::filesystem::path& path);

  // Throws DuplicateRecord for a repeated (phase, method, timestamp).
  void append(ExperimentRecord record);

  const std::vector<ExperimentRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  std::vector<std::string> phases() const;
  const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

 private:
  std::optional<std::filesystem::path> path_;
  std::vector<ExperimentRecord> records_;
};

struct LeaderboardTask {
  std::string name;
  double weight = 0.0;
  double std = 0.0;
};

struct LeaderboardEntry {
  std::string method;
  Timestamp timestamp{};
  std::map<std::string, double> q_per_task;
  double mean_q = 0.0;
  double weighted_score = 0.0;
  int rank = 0;
};

struct Leaderboard {
  std::string phase;
  Timestamp generated_at{};
  std::vector<LeaderboardTask> tasks;
  std::optional<double> ghost_weight;
  std::vector<std::string> warnings;
  std::vector<LeaderboardEntry> entries;
};

// Latest record per method in `phase`, ranked with final_ranking. Depends
// only on the database contents. Throws UnknownPhase.
Leaderboard rebuild_leaderboard(const ScoringDatabase& db, const std::string& phase,
                                const RankingOptions& options);

nlohmann::ordered_json to_json(const Leaderboard& board);
// Throws InvalidValue describing the first schema violation.
void validate_leaderboard_json(const nlohmann::json& doc);

// Rank of every method after each record of `phase` was appended, in order.
struct TrajectoryStep {
  std::size_t step = 0;
  std::string submitted;
  std::map<std::string, int> ranks;
  bool operator==(const TrajectoryStep&) const = default;
};
std::vector<TrajectoryStep> replay_rank_trajectory(const ScoringDatabase& db, const std::string& phase,
                                                   const RankingOptions& options);

// Writes to a sibling temporary and renames it into place.
void atomic_write(const std::filesystem::path& path, std::string_view content);

struct TaskDiagnostics {
  std::string task;
  TaskKind kind = TaskKind::Regression;
  std::vector<FoldResult> folds;
};

// `<output_dir>/<phase>/<method>_<YYYYMMDD>_<HHmmSS>` plus `_2`, `_3`, ...
// when that directory already exists.
std::filesystem::path experiment_dir(const std::filesystem::path& output_dir, const std::string& phase,
                                     const std::string& method, Timestamp ts);

nlohmann::ordered_json result_document(const ExperimentRecord& record,
                                       const std::vector<TaskDiagnostics>& diagnostics,
                                       const EvalConfig& config);

// Writes result.json and per-fold diagnostics into a staging directory that is
// renamed to `target` once complete. Throws IoFailure.
void write_experiment(const std::filesystem::path& target, const ExperimentRecord& record,
                      const std::vector<TaskDiagnostics>& diagnostics, const EvalConfig& config);

// Rewrites `<output_dir>/<phase>/leaderboard.json` atomically and revalidates it.
std::filesystem::path write_leaderboard(const std::filesystem::path& output_dir, const Leaderboard& board);

struct WrittenPaths {
  std::filesystem::path experiment;
  std::filesystem::path leaderboard;
};

// Experiment directory + leaderboard refresh for one finished evaluation.
WrittenPaths write_outputs(const ExperimentRecord& record, const std::vector<TaskDiagnostics>& diagnostics,
                           const EvalConfig& config, const Leaderboard& board,
                           const std::filesystem::path& output_dir);

inline constexpr const char* kDatabaseFile = "scoring_db.jsonl";
inline constexpr const char* kLeaderboardFile = "leaderboard.json";
inline constexpr const char* kResultFile = "result.json";

}  // namespace probebench
