// Acceptance criteria. Prints one PASS/FAIL line per criterion; exits
// non-zero if any selected criterion fails.
//
//   probebench_acceptance [c1 c2 ...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "oracles.hpp"
#include "probebench/leaderboard.hpp"
#include "probebench/probe.hpp"
#include "probebench/rng.hpp"
#include "probebench/runner.hpp"
#include "probebench/scoring.hpp"
#include "probebench/synth.hpp"
#include "test_support.hpp"

#ifndef PROBEBENCH_FIXTURE_DIR
#error "PROBEBENCH_FIXTURE_DIR must point at tests/fixtures"
#endif

using namespace probebench;
using probebench::testing::read_file;
using probebench::testing::stepping_clock;
using probebench::testing::TempDir;
using probebench::testing::write_file;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

bool rel_close(double a, double b, double tol) {
  if (a == b) return true;
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

std::map<std::string, std::map<std::string, double>> random_table(Rng& rng, std::size_t exps, std::size_t tasks,
                                                                   double scale, bool integer) {
  std::map<std::string, std::map<std::string, double>> out;
  for (std::size_t e = 0; e < exps; ++e) {
    for (std::size_t t = 0; t < tasks; ++t) {
      const double v = integer ? static_cast<double>(rng.below(5)) : scale * rng.uniform();
      out["e" + std::to_string(e)]["t" + std::to_string(t)] = v;
    }
  }
  return out;
}

QMatrix transpose(const std::map<std::string, std::map<std::string, double>>& experiments) {
  QMatrix m;
  for (const auto& [exp, tasks] : experiments) {
    for (const auto& [task, q] : tasks) m[task][exp] = q;
  }
  return m;
}

std::map<std::string, double> scores_of(const Ranking& r) {
  std::map<std::string, double> out;
  for (const auto& e : r.entries) out[e.experiment] = e.weighted_score;
  return out;
}

std::map<std::string, int> ranks_of(const Ranking& r) {
  std::map<std::string, int> out;
  for (const auto& e : r.entries) out[e.experiment] = e.final_rank;
  return out;
}

// -1, 0, +1 for every ordered pair.
std::vector<int> pairwise(const std::map<std::string, int>& ranks) {
  std::vector<int> out;
  for (const auto& [a, ra] : ranks) {
    for (const auto& [b, rb] : ranks) out.push_back((ra > rb) - (ra < rb));
  }
  return out;
}

std::vector<int> pairwise(const std::map<std::string, double>& scores) {
  std::vector<int> out;
  for (const auto& [a, sa] : scores) {
    for (const auto& [b, sb] : scores) out.push_back((sa > sb) - (sa < sb));
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome c1() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const double eps = 0.02;
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double m = 2.0 * rng.uniform() - 1.0;
    const double s = rng.uniform();
    const double lit = oracle::quality_literal(m, s, eps);
    const double q = quality_from_moments(m, s, eps);
    if (lit != 0.0) worst = std::max(worst, std::abs(q - lit) / std::abs(lit));
    o.require(rel_close(q, lit, 1e-12), "moments: q=" + fmt(q, 17) + " literal=" + fmt(lit, 17));

    // Through quality_score on folds with that mean and spread.
    const std::vector<double> folds{m - s, m + s};
    const auto tq = quality_score(folds, eps);
    const double lit2 = oracle::quality_literal(tq.mean_s, tq.std_s, eps);
    o.require(rel_close(tq.q, lit2, 1e-12), "folds: q=" + fmt(tq.q, 17) + " literal=" + fmt(lit2, 17));
    o.require(rel_close(tq.std_s, oracle::pstdev(folds), 1e-12), "population std");

    o.require(quality_from_moments(m, 0.0, eps) == 100.0 * m, "std=0 regime not exact");
    o.require(quality_from_moments(m, eps, eps) == 50.0 * m, "std=eps regime not exact");
    o.require(quality_from_moments(m, 9.0 * eps, eps) == 10.0 * m, "std=9eps regime not exact");
    o.require(quality_score(std::vector<double>(5, m), eps).q == 100.0 * m, "constant folds not 100*mean");
  }
  const double t = seconds_since(start);
  o.require(t < 1.0, "runtime " + fmt(t) + " s");
  if (o.pass) o.detail = "1000 pairs, worst rel err " + fmt(worst, 3) + ", regimes exact, " + fmt(t, 3) + " s";
  return o;
}

Outcome c2() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  Rng rng(202);
  std::size_t ties = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng.below(20);
    std::map<std::string, double> values;
    std::set<double> distinct;
    for (std::size_t k = 0; k < n; ++k) {
      const double v = rng.below(2) ? static_cast<double>(rng.below(8)) : 100.0 * rng.normal();
      values["p" + std::to_string(k)] = v;
      distinct.insert(v);
    }
    ties += distinct.size() < n;
    for (bool desc : {true, false}) {
      o.require(rank_values(values, desc) == oracle::rank_pairwise(values, desc), "mismatch on map " + std::to_string(i));
    }
  }
  const double t = seconds_since(start);
  o.require(ties > 100, "too few tied maps");
  o.require(t < 1.0, "runtime " + fmt(t) + " s");
  if (o.pass) o.detail = "1000 maps (" + std::to_string(ties) + " with ties), " + fmt(t, 3) + " s";
  return o;
}

Outcome c3() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  Rng rng(303);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const auto table = random_table(rng, 2 + rng.below(6), 1 + rng.below(6), 100.0, false);
    for (bool ghost : {false, true}) {
      const auto w = task_weights(transpose(table), ghost, 0.02);
      double sum = w.ghost_weight.value_or(0.0);
      for (const auto& [task, weight] : w.weights) sum += weight;
      worst = std::max(worst, std::abs(sum - 1.0));
    }
  }
  o.require(worst <= 1e-12, "weight sum off by " + fmt(worst, 3));

  for (int i = 0; i < 500; ++i) {
    const bool integer = i % 2 == 0;
    const auto table = random_table(rng, 6, 4, 100.0, integer);
    const auto base = final_ranking(table);
    const double constant = integer ? static_cast<double>(rng.below(5)) : 100.0 * rng.uniform();
    auto extended = table;
    for (auto& [exp, tasks] : extended) tasks["flat"] = constant;
    const auto with_flat = final_ranking(extended);
    o.require(with_flat.weights.weights.at("flat") == 0.0 || base.weights.uniform_fallback,
              "constant task got non-zero weight");
    if (!base.weights.uniform_fallback) {
      o.require(pairwise(ranks_of(base)) == pairwise(ranks_of(with_flat)), "ordering changed on matrix " + std::to_string(i));
    }
  }
  const double t = seconds_since(start);
  o.require(t < 10.0, "runtime " + fmt(t) + " s");
  if (o.pass) o.detail = "max |sum-1| " + fmt(worst, 3) + "; 500 matrices with a constant column, " + fmt(t, 3) + " s";
  return o;
}

Outcome c4() {
  Outcome o;
  const auto doc = nlohmann::json::parse(read_file(fs::path(PROBEBENCH_FIXTURE_DIR) / "rank_swap.json"));
  const auto tasks = doc["tasks"].get<std::vector<std::string>>();
  const Timestamp t0 = parse_iso8601("2025-06-01T00:00:00.000Z");

  ScoringDatabase db;
  auto check = [&](const nlohmann::json& expected, const std::string& label) {
    const auto board = rebuild_leaderboard(db, "test", {});
    o.require(board.tasks.size() == tasks.size(), label + ": task count");
    for (std::size_t t = 0; t < board.tasks.size(); ++t) {
      o.require(board.tasks[t].name == tasks[t], label + ": task order");
      o.require(board.tasks[t].weight == expected["weights"][t].get<double>(),
                label + ": weight " + tasks[t] + " = " + fmt(board.tasks[t].weight, 17));
      o.require(board.tasks[t].std == expected["stds"][t].get<double>(), label + ": std " + tasks[t]);
    }
    o.require(board.entries.size() == expected["rank"].size(), label + ": entry count");
    for (const auto& e : board.entries) {
      o.require(e.rank == expected["rank"][e.method].get<int>(), label + ": rank of " + e.method);
      o.require(e.weighted_score == expected["weighted_score"][e.method].get<double>(),
                label + ": score of " + e.method + " = " + fmt(e.weighted_score, 17));
      o.require(e.mean_q == expected["mean_q"][e.method].get<double>(), label + ": mean_q of " + e.method);
    }
    return board;
  };

  int step = 0;
  for (const char* name : {"A", "B", "C"}) {
    std::map<std::string, std::vector<double>> folds;
    ExperimentRecord r;
    r.phase = "test";
    r.method = name;
    r.timestamp = t0 + std::chrono::seconds(step++);
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const double q = doc["q"][name][t].get<double>();
      const std::vector<double> s{q / 100.0};
      auto quality = quality_score(s, r.epsilon, tasks[t]);
      o.require(quality.q == q, std::string("stored q not reproduced for ") + name);
      r.tasks.push_back({tasks[t], TaskKind::Regression, s, quality});
    }
    db.append(r);
    if (step == 2) check(doc["two"], "two experiments");
  }
  check(doc["three"], "three experiments");

  // The swap itself, with the mean-Q ordering unchanged.
  const auto steps = replay_rank_trajectory(db, "test", {});
  o.require(steps[1].ranks.at("A") == 1 && steps[1].ranks.at("B") == 2, "A should lead before C");
  o.require(steps[2].ranks.at("A") == 2 && steps[2].ranks.at("B") == 1, "B should lead after C");
  o.require(doc["three"]["mean_q"]["A"].get<double>() > doc["three"]["mean_q"]["B"].get<double>(),
            "mean-Q ordering changed");
  if (o.pass) o.detail = "A,B -> ranks (1,2); adding C -> (2,1); weights and scores match stored values";
  return o;
}

EvalConfig c5_config() {
  EvalConfig config;
  config.embedding_dim = 32;
  config.k_folds = 10;
  config.epochs = 100;
  config.learning_rate = 0.05;
  config.batch_size = 64;
  config.seed = 5;
  return config;
}

Outcome c5() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  synth::SynthSpec spec;
  spec.n_samples = 500;
  spec.dim = 32;
  spec.signal_dims = 8;
  spec.noise_sigma = 0.0;
  spec.seed = 55;
  const auto [embeddings, task] = synth::gen_linear_task(spec);
  const auto config = c5_config();
  RunOptions run;
  run.workers = 1;

  const auto scored = score_submission(embeddings, {task}, config, run);
  const auto& folds = scored.diagnostics[0].folds;
  const auto standardized = standardize(embeddings);
  const auto labels = normalize_labels(task);
  const auto plan = make_splits(labels.ids(), config.k_folds, config.split_ratio, config.seed);
  double min_r2 = 1.0;
  double max_excess = -1.0;
  for (std::size_t k = 0; k < folds.size(); ++k) {
    const double r2 = folds[k].score.primary;
    const auto fit = synth::ols_oracle(gather_rows(standardized, plan.folds[k].train),
                                       gather_labels(labels, plan.folds[k].train));
    const double oracle_r2 = r_squared(gather_labels(labels, plan.folds[k].test),
                                       fit.predict(gather_rows(standardized, plan.folds[k].test)));
    min_r2 = std::min(min_r2, r2);
    max_excess = std::max(max_excess, r2 - oracle_r2);
    o.require(r2 >= 0.95, "fold " + std::to_string(k) + " R2 " + fmt(r2));
    o.require(r2 <= oracle_r2 + 1e-6, "fold " + std::to_string(k) + " beats the oracle");
  }

  // Random embeddings against the same labels, and the majority-zero tasks.
  const auto noise = synth::gen_random_embeddings(500, 32, 999);
  std::vector<TaskDataset> random_tasks{task, synth::gen_majority_zero_task(500, 0.9, TaskKind::Regression, 7, "zr"),
                                        synth::gen_majority_zero_task(500, 0.9, TaskKind::Classification, 8, "zc")};
  const auto random_scored = score_submission(noise, random_tasks, config, run);
  std::string qs;
  for (const auto& t : random_scored.tasks) {
    o.require(t.quality.q <= 5.0, "random q " + fmt(t.quality.q) + " on " + t.name);
    o.require(t.quality.unreliable == (t.quality.q < 0.0), "unreliable flag on " + t.name);
    qs += (qs.empty() ? "" : ", ") + t.name + " " + fmt(t.quality.q, 3);
  }
  const double t = seconds_since(start);
  o.require(t < 60.0, "runtime " + fmt(t) + " s");
  if (o.pass) {
    o.detail = "min fold R2 " + fmt(min_r2, 6) + ", max excess over oracle " + fmt(max_excess, 3) +
               "; random q: " + qs + "; " + fmt(t, 3) + " s";
  }
  return o;
}

struct Fixture {
  fs::path submission;
  fs::path random_submission;
  fs::path annotations;
  EvalConfig config;
};

Fixture make_fixture(const fs::path& root) {
  Fixture f;
  synth::SynthSpec spec;
  spec.n_samples = 300;
  spec.dim = 16;
  spec.signal_dims = 6;
  spec.noise_sigma = 0.3;
  spec.seed = 66;
  auto [embeddings, linear] = synth::gen_linear_task(spec);
  f.submission = root / "submission.csv";
  f.random_submission = root / "random.csv";
  f.annotations = root / "annotations";
  write_file(f.submission, serialize_submission(embeddings));
  write_file(f.random_submission, serialize_submission(synth::gen_random_embeddings(300, 16, 67)));
  fs::create_directories(f.annotations);
  write_task(linear, f.annotations);
  write_task(synth::gen_majority_zero_task(300, 0.8, TaskKind::Classification, 68, "cls"), f.annotations);
  write_task(synth::gen_majority_zero_task(300, 0.8, TaskKind::Regression, 69, "regr"), f.annotations);
  f.config.embedding_dim = 16;
  f.config.k_folds = 12;
  f.config.epochs = 40;
  f.config.learning_rate = 0.02;
  f.config.batch_size = 32;
  f.config.seed = 6;
  return f;
}

Outcome c6() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  TempDir dir("probebench-c6");
  const auto f = make_fixture(dir.path());
  std::vector<std::pair<std::string, std::string>> outputs;
  for (std::size_t workers : {1u, 8u}) {
    const auto out = dir / ("out" + std::to_string(workers));
    RunOptions run;
    run.workers = workers;
    run.clock = stepping_clock();
    evaluate_submission({f.random_submission, f.annotations, out, f.config, "baseline", "dev"}, run);
    const auto result = evaluate_submission({f.submission, f.annotations, out, f.config, "model", "dev"}, run);
    outputs.emplace_back(read_file(result.experiment_dir / kResultFile), read_file(result.leaderboard));
  }
  o.require(!outputs[0].first.empty() && !outputs[0].second.empty(), "outputs missing");
  o.require(outputs[0].first == outputs[1].first, "result.json differs between 1 and 8 workers");
  o.require(outputs[0].second == outputs[1].second, "leaderboard.json differs between 1 and 8 workers");
  const double t = seconds_since(start);
  o.require(t < 60.0, "runtime " + fmt(t) + " s");
  if (o.pass) {
    o.detail = "result.json (" + std::to_string(outputs[0].first.size()) + " B) and leaderboard.json (" +
               std::to_string(outputs[0].second.size()) + " B) identical, " + fmt(t, 3) + " s";
  }
  return o;
}

Outcome c7() {
  Outcome o;
  auto make = [](std::size_t dim) {
    synth::SynthSpec spec;
    spec.n_samples = 4000;
    spec.dim = dim;
    spec.signal_dims = 8;
    spec.noise_sigma = 0.1;
    spec.seed = 77;
    return synth::gen_linear_task(spec);
  };
  auto measure = [](const std::pair<EmbeddingSet, TaskDataset>& data, std::size_t epochs, std::size_t k) {
    EvalConfig config;
    config.embedding_dim = data.first.dim();
    config.epochs = epochs;
    config.k_folds = k;
    RunOptions run;
    run.workers = 1;
    const auto start = std::chrono::steady_clock::now();
    score_submission(data.first, {data.second}, config, run);
    return seconds_since(start);
  };
  const auto full = make(1024);
  const double base = measure(full, 20, 40);
  const double e40 = measure(full, 40, 40);
  const double k80 = measure(full, 20, 80);
  const double d512 = measure(make(512), 20, 40);

  const double e_ratio = e40 / base;
  const double k_ratio = k80 / base;
  const double dim_increase = base / d512 - 1.0;
  o.require(std::abs(e_ratio - 2.0) <= 0.6, "E ratio " + fmt(e_ratio, 3));
  o.require(std::abs(k_ratio - 2.0) <= 0.6, "K ratio " + fmt(k_ratio, 3));
  o.require(dim_increase <= 0.25, "dim 512->1024 increase " + fmt(100.0 * dim_increase, 3) + "%");
  const std::string numbers = "E ratio " + fmt(e_ratio, 3) + ", K ratio " + fmt(k_ratio, 3) +
                              ", dim 512->1024 +" + fmt(100.0 * dim_increase, 3) + "% (base " + fmt(base, 3) +
                              " s, E40 " + fmt(e40, 3) + " s, K80 " + fmt(k80, 3) + " s, dim512 " + fmt(d512, 3) +
                              " s)";
  o.detail = o.pass ? numbers : o.detail + "; " + numbers;
  return o;
}

Outcome c9() {
  Outcome o;
  TempDir dir("probebench-c9");
  const auto f = make_fixture(dir.path());
  std::vector<std::vector<TrajectoryStep>> trajectories;
  for (int round = 0; round < 2; ++round) {
    const auto root = dir / ("round" + std::to_string(round));
    const auto watch = root / "queue";
    fs::create_directories(watch);
    fs::copy_file(f.submission, watch / "alpha.csv");
    fs::copy_file(f.random_submission, watch / "beta.csv");
    write_file(watch / "gamma.csv", "id,e0\nbroken");

    ServeOptions options;
    options.watch_dir = watch;
    options.interval = std::chrono::milliseconds(20);
    options.annotations = f.annotations;
    options.config = f.config;
    options.output_dir = root / "out";
    options.phase = "test";
    options.run.workers = 1;
    options.run.clock = stepping_clock();
    options.max_polls = 3;
    std::atomic<bool> stop{false};
    const auto stats = serve(options, stop);

    o.require(stats.polls <= 3, "more than 3 polls");
    o.require(stats.done == 2 && stats.failed == 1, "expected 2 done, 1 failed");
    o.require(fs::exists(watch / "failed" / "gamma.csv"), "malformed file not in failed/");
    o.require(fs::exists(watch / "done" / "alpha.csv") && fs::exists(watch / "done" / "beta.csv"),
              "processed files not in done/");
    const auto board = nlohmann::json::parse(read_file(options.output_dir / "test" / kLeaderboardFile));
    validate_leaderboard_json(board);
    o.require(board["entries"].size() == 2, "leaderboard has " + std::to_string(board["entries"].size()) + " entries");

    const auto db = ScoringDatabase::open(options.output_dir / kDatabaseFile);
    const auto replay = replay_rank_trajectory(db, "test", ranking_options(f.config));
    o.require(replay == replay_rank_trajectory(db, "test", ranking_options(f.config)), "replay not stable");
    trajectories.push_back(replay);
  }
  o.require(trajectories[0] == trajectories[1], "trajectory differs on re-run");
  if (o.pass) {
    std::string steps;
    for (const auto& s : trajectories[0]) {
      steps += (steps.empty() ? "" : " | ") + s.submitted + ":";
      for (const auto& [m, r] : s.ranks) steps += " " + m + "=" + std::to_string(r);
    }
    o.detail = "2 entries, gamma.csv in failed/, trajectory " + steps;
  }
  return o;
}

Outcome c8() {
  Outcome o;
  const std::vector<double> y{0, 1, 2};
  const std::vector<double> zero{0, 0, 0};
  const double r2 = r_squared(y, zero);
  o.require(r2 == -1.5, "R2 = " + fmt(r2, 17));
  const ConfusionMatrix cm{2, 1, 0, 1};
  o.require(f1(cm) == 2.0 / 3.0, "F1 = " + fmt(f1(cm), 17));
  const std::vector<double> labels{0, 0, 1, 1};
  const std::vector<double> scores{0.1, 0.4, 0.35, 0.8};
  const auto auc = roc_auc(labels, scores);
  o.require(auc && *auc == 0.75, "ROC-AUC wrong");
  if (o.pass) o.detail = "R2 -1.5, F1 2/3, ROC-AUC 0.75 (exact)";
  return o;
}

Outcome c10() {
  Outcome o;
  Rng rng(1010);
  const double eps = 0.02;
  int checked = 0;
  while (checked < 500) {
    const auto table = random_table(rng, 2 + rng.below(6), 1 + rng.below(5), 100.0, false);
    const auto w = task_weights(transpose(table), false, eps);
    double total = 0.0;
    for (const auto& [t, d] : w.stds) total += d;
    if (total < 100.0 * eps) continue;
    ++checked;
    RankingOptions ghost;
    ghost.ghost = true;
    const auto off = final_ranking(table);
    const auto on = final_ranking(table, ghost);
    o.require(pairwise(scores_of(off)) == pairwise(scores_of(on)), "ordering differs on matrix " + std::to_string(checked));
    o.require(ranks_of(off) == ranks_of(on), "final ranks differ on matrix " + std::to_string(checked));
  }

  // Sum of deltas exactly eps: one task whose two experiments are 2·eps apart.
  const QMatrix exact{{"t", {{"a", 0.0}, {"b", 2.0 * eps}}}};
  const auto w = task_weights(exact, true, eps);
  o.require(w.stds.at("t") == eps, "delta is not eps");
  o.require(w.ghost_weight && std::abs(*w.ghost_weight - 0.5) <= 1e-12, "w0 = " + fmt(w.ghost_weight.value_or(-1), 17));
  o.require(std::abs(w.weights.at("t") - 0.5) <= 1e-12, "real weight not halved");
  if (o.pass) o.detail = "500 matrices agree; w0 = " + fmt(*w.ghost_weight, 17) + " at sum(delta) = eps";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"c1", c1}, {"c2", c2}, {"c3", c3}, {"c4", c4}, {"c5", c5},
      {"c6", c6}, {"c7", c7}, {"c8", c8}, {"c9", c9}, {"c10", c10}};
  std::set<std::string> selected(argv + 1, argv + argc);
  bool all_pass = true;
  for (const auto& [id, run] : criteria) {
    if (!selected.empty() && !selected.contains(id)) continue;
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    all_pass = all_pass && outcome.pass;
    std::cout << (outcome.pass ? "PASS " : "FAIL ") << id << ": " << outcome.detail << std::endl;
  }
  return all_pass ? 0 : 1;
}
