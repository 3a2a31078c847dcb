#include "probebench/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "probebench/error.hpp"

namespace probebench {

namespace {

bool all_equal(std::span<const double> values) {
  return std::adjacent_find(values.begin(), values.end(), std::not_equal_to<>()) == values.end();
}

}  // namespace

double mean_of(std::span<const double> values) {
  if (!values.empty() && all_equal(values)) return values.front();
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double population_std(std::span<const double> values) {
  if (all_equal(values)) return 0.0;
  const double m = mean_of(values);
  double sum = 0.0;
  for (double v : values) sum += (v - m) * (v - m);
  return std::sqrt(sum / static_cast<double>(values.size()));
}

double quality_from_moments(double mean_s, double std_s, double epsilon) {
  return mean_s * (100.0 / (1.0 + std_s / epsilon));
}

TaskQuality quality_score(std::span<const double> fold_primaries, double epsilon, std::string task) {
  if (fold_primaries.empty()) throw Error(ErrorCode::EmptyFolds, task);
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidValue, "epsilon must be positive");
  TaskQuality result;
  result.task = std::move(task);
  result.mean_s = mean_of(fold_primaries);
  result.std_s = population_std(fold_primaries);
  result.q = quality_from_moments(result.mean_s, result.std_s, epsilon);
  result.k_used = fold_primaries.size();
  result.unreliable = result.q < 0.0;
  return result;
}

double mean_q(std::span<const TaskQuality> qualities) {
  if (qualities.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& quality : qualities) sum += quality.q;
  return sum / static_cast<double>(qualities.size());
}

std::map<std::string, int> rank_values(const std::map<std::string, double>& values, bool descending) {
  std::vector<double> sorted;
  sorted.reserve(values.size());
  for (const auto& [name, value] : values) {
    if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteValue, name);
    sorted.push_back(value);
  }
  std::sort(sorted.begin(), sorted.end());
  std::map<std::string, int> ranks;
  for (const auto& [name, value] : values) {
    // Count of values strictly better than this one.
    const auto better = descending
                            ? sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), value)
                            : std::lower_bound(sorted.begin(), sorted.end(), value) - sorted.begin();
    ranks[name] = 1 + static_cast<int>(better);
  }
  return ranks;
}

TaskWeights task_weights(const QMatrix& q_matrix, bool ghost, double epsilon) {
  if (q_matrix.empty()) throw Error(ErrorCode::InvalidValue, "no tasks to weight");
  TaskWeights result;
  double total = 0.0;
  std::vector<double> column;
  for (const auto& [task, per_experiment] : q_matrix) {
    if (per_experiment.empty()) throw Error(ErrorCode::InvalidValue, "task '" + task + "' has no experiments");
    column.clear();
    for (const auto& [experiment, q] : per_experiment) column.push_back(q);
    const double delta = population_std(column);
    result.stds[task] = delta;
    total += delta;
  }
  if (ghost) {
    const double denom = total + epsilon;
    for (const auto& [task, delta] : result.stds) result.weights[task] = delta / denom;
    result.ghost_weight = epsilon / denom;
    return result;
  }
  if (total > 0.0) {
    for (const auto& [task, delta] : result.stds) result.weights[task] = delta / total;
  } else {
    const double uniform = 1.0 / static_cast<double>(q_matrix.size());
    for (const auto& [task, delta] : result.stds) result.weights[task] = uniform;
    result.uniform_fallback = true;
  }
  return result;
}

double weighted_rank_score(const std::map<std::string, int>& per_task_ranks, const TaskWeights& weights) {
  double score = 0.0;
  for (const auto& [task, weight] : weights.weights) {
    const auto it = per_task_ranks.find(task);
    if (it == per_task_ranks.end()) throw Error(ErrorCode::MissingTaskRank, task);
    score += weight * static_cast<double>(it->second);
  }
  return score;
}

Ranking final_ranking(const std::map<std::string, std::map<std::string, double>>& experiments,
                      const RankingOptions& options) {
  if (experiments.empty()) throw Error(ErrorCode::InvalidValue, "no experiments to rank");
  const auto& reference = experiments.begin()->second;
  if (reference.empty()) throw Error(ErrorCode::InvalidValue, "experiments have no tasks");

  QMatrix q_matrix;
  for (const auto& [experiment, per_task] : experiments) {
    if (per_task.size() != reference.size() ||
        !std::equal(per_task.begin(), per_task.end(), reference.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw Error(ErrorCode::MissingTaskRank, "experiment '" + experiment + "' has a different task set");
    }
    for (const auto& [task, q] : per_task) q_matrix[task][experiment] = q;
  }

  Ranking ranking;
  if (options.weighted) {
    ranking.weights = task_weights(q_matrix, options.ghost, options.epsilon);
  } else {
    ranking.weights = task_weights(q_matrix, false, options.epsilon);
    const double uniform = 1.0 / static_cast<double>(q_matrix.size());
    for (auto& [task, weight] : ranking.weights.weights) weight = uniform;
    ranking.weights.uniform_fallback = false;
  }

  std::map<std::string, std::map<std::string, int>> ranks_by_task;
  for (const auto& [task, column] : q_matrix) ranks_by_task[task] = rank_values(column, true);

  std::map<std::string, double> scores;
  std::map<std::string, double> means;
  for (const auto& [experiment, per_task] : experiments) {
    RankedExperiment entry;
    entry.experiment = experiment;
    entry.q_per_task = per_task;
    double sum = 0.0;
    for (const auto& [task, q] : per_task) {
      entry.task_ranks[task] = ranks_by_task[task][experiment];
      sum += q;
    }
    entry.mean_q = sum / static_cast<double>(per_task.size());
    entry.weighted_score = weighted_rank_score(entry.task_ranks, ranking.weights);
    scores[experiment] = entry.weighted_score;
    means[experiment] = entry.mean_q;
    ranking.entries.push_back(std::move(entry));
  }

  const auto final_ranks = options.weighted ? rank_values(scores, false) : rank_values(means, true);
  for (auto& entry : ranking.entries) entry.final_rank = final_ranks.at(entry.experiment);
  std::sort(ranking.entries.begin(), ranking.entries.end(), [](const auto& a, const auto& b) {
    if (a.final_rank != b.final_rank) return a.final_rank < b.final_rank;
    if (a.mean_q != b.mean_q) return a.mean_q > b.mean_q;
    return a.experiment < b.experiment;
  });
  return ranking;
}

}  // namespace probebench
