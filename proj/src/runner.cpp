#include "probebench/runner.hpp"

#include <algorithm>
#include <csignal>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "probebench/error.hpp"
#include "probebench/synth.hpp"

namespace probebench {
namespace fs = std::filesystem;

Timestamp system_now() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::size_t failed_index = count;
  std::exception_ptr failure;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mutex);
            if (i < failed_index) {
              failed_index = i;
              failure = std::current_exception();
            }
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

RankingOptions ranking_options(const EvalConfig& config) {
  return {config.weighted_ranking, config.ghost_task, config.epsilon};
}

namespace {

void log_line(const RunOptions& options, const std::string& text) {
  if (options.log) *options.log << text << std::endl;
}

void check_coverage(const EmbeddingSet& embeddings, const TaskDataset& task) {
  for (const auto& id : task.ids()) {
    if (!embeddings.find(id)) throw Error(ErrorCode::MissingId, "task '" + task.name() + "': " + id);
  }
}

}  // namespace

ScoredSubmission score_submission(const EmbeddingSet& raw_embeddings, const std::vector<TaskDataset>& raw_tasks,
                                  const EvalConfig& config, const RunOptions& options) {
  validate(config);
  if (raw_embeddings.dim() != config.embedding_dim) {
    throw Error(ErrorCode::DimensionMismatch, "submission dim " + std::to_string(raw_embeddings.dim()) +
                                                  " vs embedding_dim " + std::to_string(config.embedding_dim));
  }
  for (const auto& task : raw_tasks) check_coverage(raw_embeddings, task);
  const EmbeddingSet embeddings = config.standardize_embeddings ? standardize(raw_embeddings) : raw_embeddings;

  ScoredSubmission scored;
  for (const auto& raw_task : raw_tasks) {
    const auto started = std::chrono::steady_clock::now();
    const TaskDataset task = config.normalize_labels ? normalize_labels(raw_task) : raw_task;
    const SplitPlan plan = make_splits(task.ids(), config.k_folds, config.split_ratio, config.seed);

    TaskDiagnostics diagnostics{task.name(), task.kind(), std::vector<FoldResult>(plan.k)};
    parallel_for(plan.k, options.workers, [&](std::size_t k) {
      diagnostics.folds[k] =
          evaluate_fold(embeddings, task, plan.folds[k], k, config, fold_seed(config.seed, k));
    });

    TaskRecord record;
    record.name = task.name();
    record.kind = task.kind();
    for (const auto& fold : diagnostics.folds) record.fold_scores.push_back(fold.score.primary);
    record.quality = quality_score(record.fold_scores, config.epsilon, task.name());
    scored.tasks.push_back(std::move(record));
    scored.diagnostics.push_back(std::move(diagnostics));

    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    log_line(options, "task " + task.name() + ": " + std::to_string(plan.k) + " folds, q=" +
                          format_double(scored.tasks.back().quality.q) + ", " + std::to_string(elapsed.count()) +
                          " s");
  }
  return scored;
}

EvaluationResult evaluate_submission(const EvaluationRequest& request, const RunOptions& options) {
  const auto tasks = load_annotations(request.annotations, request.config.task_filter);
  const auto embeddings = parse_submission(request.submission, request.config.embedding_dim);
  auto scored = score_submission(embeddings, tasks, request.config, options);

  EvaluationResult result;
  ExperimentRecord& record = result.record;
  record.phase = request.phase;
  record.method = request.method;
  record.timestamp = options.clock ? options.clock() : system_now();
  record.epsilon = request.config.epsilon;
  record.config_fingerprint = config_fingerprint(request.config);
  record.submission_fingerprint = file_fingerprint(request.submission);
  record.tasks = std::move(scored.tasks);

  fs::create_directories(request.output_dir);
  auto db = ScoringDatabase::open(request.output_dir / kDatabaseFile);
  for (const auto& existing : db.records()) {
    if (existing.phase == record.phase && existing.method == record.method &&
        existing.timestamp == record.timestamp) {
      throw Error(ErrorCode::DuplicateRecord, record.phase + "/" + record.method);
    }
  }

  result.experiment_dir = experiment_dir(request.output_dir, record.phase, record.method, record.timestamp);
  write_experiment(result.experiment_dir, record, scored.diagnostics, request.config);
  try {
    db.append(record);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(result.experiment_dir, ec);
    throw;
  }
  const auto board = rebuild_leaderboard(db, record.phase, ranking_options(request.config));
  result.leaderboard = write_leaderboard(request.output_dir, board);
  log_line(options, "evaluated " + record.method + " (" + record.phase + "): mean_q=" +
                        format_double(record.mean_q()) + " -> " + result.experiment_dir.string());
  return result;
}

// ---------------------------------------------------------------------------
// Submission queue

std::string_view to_string(TicketStatus status) noexcept {
  switch (status) {
    case TicketStatus::Pending: return "pending";
    case TicketStatus::Evaluating: return "evaluating";
    case TicketStatus::Done: return "done";
    case TicketStatus::Failed: return "failed";
  }
  return "pending";
}

SubmissionTicket::SubmissionTicket(fs::path source, std::string method, std::string phase,
                                   Timestamp discovered_at)
    : source_(std::move(source)), method_(std::move(method)), phase_(std::move(phase)), discovered_at_(discovered_at) {}

void SubmissionTicket::start() {
  if (status_ != TicketStatus::Pending) throw std::logic_error("ticket already started");
  status_ = TicketStatus::Evaluating;
}

void SubmissionTicket::finish() {
  if (status_ != TicketStatus::Evaluating) throw std::logic_error("ticket not evaluating");
  status_ = TicketStatus::Done;
}

void SubmissionTicket::fail(std::string reason) {
  if (status_ != TicketStatus::Evaluating) throw std::logic_error("ticket not evaluating");
  status_ = TicketStatus::Failed;
  reason_ = std::move(reason);
}

FilesystemQueue::FilesystemQueue(fs::path watch_dir, std::string phase, Clock clock)
    : watch_dir_(std::move(watch_dir)), phase_(std::move(phase)), clock_(std::move(clock)) {}

std::vector<SubmissionTicket> FilesystemQueue::list_pending() {
  if (!fs::is_directory(watch_dir_)) throw Error(ErrorCode::IoFailure, "not a directory: " + watch_dir_.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(watch_dir_)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  std::vector<SubmissionTicket> tickets;
  for (const auto& file : files) tickets.emplace_back(file, file.stem().string(), phase_, clock_());
  return tickets;
}

fs::path FilesystemQueue::fetch(const SubmissionTicket& ticket) {
  return ticket.source();
}

void FilesystemQueue::acknowledge(const SubmissionTicket& ticket) {
  const bool ok = ticket.status() == TicketStatus::Done;
  if (!ok && ticket.status() != TicketStatus::Failed) throw std::logic_error("ticket not finished");
  const fs::path dir = watch_dir_ / (ok ? "done" : "failed");
  fs::create_directories(dir);
  fs::path target = dir / ticket.source().filename();
  for (int suffix = 2; fs::exists(target); ++suffix) {
    target = dir / (ticket.source().stem().string() + "_" + std::to_string(suffix) + ".csv");
  }
  if (!ok) {
    fs::path reason = target;
    reason += ".reason.txt";
    atomic_write(reason, ticket.reason() + "\n");
  }
  fs::rename(ticket.source(), target);
}

void discard_partial_outputs(const fs::path& output_dir, const std::string& phase) {
  const fs::path dir = output_dir / phase;
  if (!fs::is_directory(dir)) return;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.starts_with(".staging-") || name.ends_with(".tmp")) fs::remove_all(entry.path(), ec);
  }
}

ServeStats serve(const ServeOptions& options, SubmissionSource& source, const std::atomic<bool>& stop) {
  ServeStats stats;
  fs::create_directories(options.output_dir);
  discard_partial_outputs(options.output_dir, options.phase);
  const auto run = options.run;

  while (!stop.load()) {
    ++stats.polls;
    std::vector<SubmissionTicket> tickets;
    try {
      tickets = source.list_pending();
    } catch (const std::exception& e) {
      log_line(run, std::string("poll failed: ") + e.what());
    }
    for (auto& ticket : tickets) {
      if (stop.load()) break;
      ticket.start();
      try {
        const fs::path file = source.fetch(ticket);
        // A crash between the database append and the acknowledge leaves the
        // file in the queue; recognise it instead of scoring it twice.
        const auto fingerprint = file_fingerprint(file);
        const auto db = ScoringDatabase::open(options.output_dir / kDatabaseFile);
        const bool seen = std::any_of(db.records().begin(), db.records().end(), [&](const ExperimentRecord& r) {
          return r.phase == ticket.phase() && r.method == ticket.method() &&
                 r.submission_fingerprint == fingerprint &&
                 r.config_fingerprint == config_fingerprint(options.config);
        });
        if (seen) {
          ++stats.recovered;
          write_leaderboard(options.output_dir,
                            rebuild_leaderboard(db, ticket.phase(), ranking_options(options.config)));
        } else {
          evaluate_submission({file, options.annotations, options.output_dir, options.config, ticket.method(),
                               ticket.phase()},
                              run);
        }
        ticket.finish();
        ++stats.done;
      } catch (const std::exception& e) {
        ticket.fail(e.what());
        ++stats.failed;
        log_line(run, "submission " + ticket.source().filename().string() + " failed: " + e.what());
      }
      try {
        source.acknowledge(ticket);
      } catch (const std::exception& e) {
        log_line(run, std::string("acknowledge failed: ") + e.what());
      }
    }
    if (options.max_polls && stats.polls >= *options.max_polls) break;
    const auto deadline = std::chrono::steady_clock::now() + options.interval;
    while (!stop.load() && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::min<std::chrono::milliseconds>(options.interval, std::chrono::milliseconds(50)));
    }
  }
  return stats;
}

ServeStats serve(const ServeOptions& options, const std::atomic<bool>& stop) {
  FilesystemQueue queue(options.watch_dir, options.phase, options.run.clock ? options.run.clock : system_now);
  return serve(options, queue, stop);
}

// ---------------------------------------------------------------------------
// Command line

namespace {

std::atomic<bool> g_stop{false};

extern "C" void handle_stop_signal(int) { g_stop.store(true); }

int run_synth(const fs::path& out_dir, const synth::SynthSpec& spec, double zero_fraction) {
  fs::create_directories(out_dir / "annotations");
  auto [embeddings, linear] = synth::gen_linear_task(spec);
  atomic_write(out_dir / "submission.csv", serialize_submission(embeddings));
  atomic_write(out_dir / "random_submission.csv",
               serialize_submission(synth::gen_random_embeddings(spec.n_samples, spec.dim, spec.seed + 1)));
  write_task(linear, out_dir / "annotations");
  write_task(synth::gen_majority_zero_task(spec.n_samples, zero_fraction, TaskKind::Classification, spec.seed,
                                           "random_cls"),
             out_dir / "annotations");
  write_task(synth::gen_majority_zero_task(spec.n_samples, zero_fraction, TaskKind::Regression, spec.seed,
                                           "random_regr"),
             out_dir / "annotations");
  std::cout << "wrote fixtures to " << out_dir.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Linear-probing benchmark for fixed-size embeddings"};
  app.require_subcommand(1);

  std::string annotation_path, submission_file, output_dir, config_path, method_name, phase;
  std::size_t workers = 0;
  auto* evaluate = app.add_subcommand("evaluate", "Score one submission and refresh the leaderboard");
  evaluate->add_option("--annotation_path", annotation_path, "Directory of <task>__regr.csv / <task>__cls.csv")->required();
  evaluate->add_option("--submission_file", submission_file, "Embedding CSV (id,e0,...,eN-1)")->required();
  evaluate->add_option("--output_dir", output_dir, "Results directory")->required();
  evaluate->add_option("--config", config_path, "YAML evaluation config")->required();
  evaluate->add_option("--method_name", method_name, "Free-form method name")->required();
  evaluate->add_option("--phase", phase, "Free-form phase name")->required();
  evaluate->add_option("--workers", workers, "Fold worker threads (0: all cores)");

  std::string watch_dir;
  double interval_seconds = 60.0;
  std::size_t max_polls = 0;
  auto* serve_cmd = app.add_subcommand("serve", "Poll a directory of submissions and keep the leaderboard current");
  serve_cmd->add_option("--watch_dir", watch_dir, "Queue directory")->required();
  serve_cmd->add_option("--interval_seconds", interval_seconds, "Poll interval")->capture_default_str();
  serve_cmd->add_option("--annotation_path", annotation_path)->required();
  serve_cmd->add_option("--config", config_path)->required();
  serve_cmd->add_option("--output_dir", output_dir)->required();
  serve_cmd->add_option("--phase", phase)->required();
  serve_cmd->add_option("--workers", workers, "Fold worker threads (0: all cores)");
  serve_cmd->add_option("--max_polls", max_polls, "Stop after this many polls (0: run until signalled)");

  synth::SynthSpec spec;
  double zero_fraction = 0.9;
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic submission and annotation fixtures");
  synth_cmd->add_option("--output_dir", output_dir)->required();
  synth_cmd->add_option("--samples", spec.n_samples)->capture_default_str();
  synth_cmd->add_option("--dim", spec.dim)->capture_default_str();
  synth_cmd->add_option("--signal_dims", spec.signal_dims)->capture_default_str();
  synth_cmd->add_option("--noise_sigma", spec.noise_sigma)->capture_default_str();
  synth_cmd->add_option("--zero_fraction", zero_fraction)->capture_default_str();
  synth_cmd->add_option("--seed", spec.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  RunOptions run;
  run.workers = workers;
  run.log = &std::cerr;

  try {
    if (*evaluate) {
      const auto config = load_config(config_path);
      const auto result = evaluate_submission(
          {submission_file, annotation_path, output_dir, config, method_name, phase}, run);
      std::cout << result.experiment_dir.string() << '\n';
      return 0;
    }
    if (*serve_cmd) {
      ServeOptions options;
      options.watch_dir = watch_dir;
      options.interval = std::chrono::milliseconds(static_cast<long long>(interval_seconds * 1000.0));
      options.annotations = annotation_path;
      options.config = load_config(config_path);
      options.output_dir = output_dir;
      options.phase = phase;
      options.run = run;
      if (max_polls > 0) options.max_polls = max_polls;
      std::signal(SIGINT, handle_stop_signal);
      std::signal(SIGTERM, handle_stop_signal);
      const auto stats = serve(options, g_stop);
      std::cerr << "serve: " << stats.polls << " polls, " << stats.done << " done, " << stats.failed
                << " failed\n";
      return 0;
    }
    return run_synth(output_dir, spec, zero_fraction);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace probebench
