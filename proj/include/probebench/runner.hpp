#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "probebench/ingest.hpp"
#include "probebench/leaderboard.hpp"

namespace probebench {

using Clock = std::function<Timestamp()>;
Timestamp system_now();

struct RunOptions {
  std::size_t workers = 0;  // 0: hardware concurrency
  Clock clock = system_now;
  std::ostream* log = nullptr;
};

// Runs fn(i) for i in [0, count) on up to `workers` threads. The exception of
// the lowest failing index is rethrown after all workers finish.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

struct ScoredSubmission {
  std::vector<TaskRecord> tasks;
  std::vector<TaskDiagnostics> diagnostics;
};

// Probing core without any file output: preprocessing per config, K folds per
// task, quality scores. Throws MissingId when a task id is absent from the
// submission.
ScoredSubmission score_submission(const EmbeddingSet& embeddings, const std::vector<TaskDataset>& tasks,
                                  const EvalConfig& config, const RunOptions& options = {});

struct EvaluationRequest {
  std::filesystem::path submission;
  std::filesystem::path annotations;
  std::filesystem::path output_dir;
  EvalConfig config;
  std::string method;
  std::string phase;
};

struct EvaluationResult {
  ExperimentRecord record;
  std::filesystem::path experiment_dir;
  std::filesystem::path leaderboard;
};

// Full pipeline: parse, score, write the experiment directory, append to the
// scoring database and refresh the phase leaderboard. Nothing is left behind
// on failure.
EvaluationResult evaluate_submission(const EvaluationRequest& request, const RunOptions& options = {});

RankingOptions ranking_options(const EvalConfig& config);

enum class TicketStatus { Pending, Evaluating, Done, Failed };
std::string_view to_string(TicketStatus status) noexcept;

// One queued submission. Each transition happens at most once:
// Pending -> Evaluating -> Done | Failed.
class SubmissionTicket {
 public:
  SubmissionTicket(std::filesystem::path source, std::string method, std::string phase, Timestamp discovered_at);

  const std::filesystem::path& source() const noexcept { return source_; }
  const std::string& method() const noexcept { return method_; }
  const std::string& phase() const noexcept { return phase_; }
  Timestamp discovered_at() const noexcept { return discovered_at_; }
  TicketStatus status() const noexcept { return status_; }
  const std::string& reason() const noexcept { return reason_; }

  void start();
  void finish();
  void fail(std::string reason);

 private:
  std::filesystem::path source_;
  std::string method_;
  std::string phase_;
  Timestamp discovered_at_;
  TicketStatus status_ = TicketStatus::Pending;
  std::string reason_;
};

// Where queued submissions come from. The filesystem queue is the only
// implementation; a remote source would implement the same three calls.
class SubmissionSource {
 public:
  virtual ~SubmissionSource() = default;
  virtual std::vector<SubmissionTicket> list_pending() = 0;
  virtual std::filesystem::path fetch(const SubmissionTicket& ticket) = 0;
  virtual void acknowledge(const SubmissionTicket& ticket) = 0;
};

// `*.csv` files directly inside watch_dir, in filename order. Acknowledged
// files move to `done/` or `failed/` (with a `.reason.txt` next to them).
class FilesystemQueue : public SubmissionSource {
 public:
  FilesystemQueue(std::filesystem::path watch_dir, std::string phase, Clock clock = system_now);

  std::vector<SubmissionTicket> list_pending() override;
  std::filesystem::path fetch(const SubmissionTicket& ticket) override;
  void acknowledge(const SubmissionTicket& ticket) override;

 private:
  std::filesystem::path watch_dir_;
  std::string phase_;
  Clock clock_;
};

struct ServeOptions {
  std::filesystem::path watch_dir;
  std::chrono::milliseconds interval{60'000};
  std::filesystem::path annotations;
  EvalConfig config;
  std::filesystem::path output_dir;
  std::string phase;
  RunOptions run;
  std::optional<std::size_t> max_polls;  // stop after this many polls
};

struct ServeStats {
  std::size_t polls = 0;
  std::size_t done = 0;
  std::size_t failed = 0;
  std::size_t recovered = 0;  // already in the database from a previous run
};

// Polls the queue until `stop` is set (or max_polls is reached). Individual
// failures never end the loop.
ServeStats serve(const ServeOptions& options, SubmissionSource& source, const std::atomic<bool>& stop);
ServeStats serve(const ServeOptions& options, const std::atomic<bool>& stop);

// Removes staging directories and temporary files left by an interrupted run.
void discard_partial_outputs(const std::filesystem::path& output_dir, const std::string& phase);

// `probebench evaluate|serve|synth ...`. Exit codes: 0 success, 1 evaluation
// failure, 2 usage error.
int run_cli(int argc, const char* const* argv);

}  // namespace probebench
