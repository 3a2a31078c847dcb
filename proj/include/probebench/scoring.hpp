#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace probebench {

inline constexpr double kDefaultEpsilon = 0.02;

struct TaskQuality {
  std::string task;
  double mean_s = 0.0;
  double std_s = 0.0;  // population std over folds
  double q = 0.0;
  std::size_t k_used = 0;
  bool unreliable = false;  // q < 0

  bool operator==(const TaskQuality&) const = default;
};

// Population mean and standard deviation; identical values give exactly that
// value and 0.
double mean_of(std::span<const double> values);
double population_std(std::span<const double> values);

// 100·eps·mean/(std+eps), evaluated as mean·(100/(1 + std/eps)) so that
// std = 0, eps and 9·eps give exactly 100·mean, 50·mean and 10·mean.
double quality_from_moments(double mean_s, double std_s, double epsilon);

// Throws EmptyFolds or InvalidValue (epsilon <= 0).
TaskQuality quality_score(std::span<const double> fold_primaries, double epsilon,
                          std::string task = {});

double mean_q(std::span<const TaskQuality> qualities);

// rank(p) = 1 + #{values strictly better than p}; ties share the better rank.
// Throws NonFiniteValue.
std::map<std::string, int> rank_values(const std::map<std::string, double>& values, bool descending);

// task -> (experiment -> q)
using QMatrix = std::map<std::string, std::map<std::string, double>>;

struct TaskWeights {
  std::map<std::string, double> weights;
  std::map<std::string, double> stds;  // delta_t
  std::optional<double> ghost_weight;
  bool uniform_fallback = false;  // no ghost and every delta_t == 0
};

TaskWeights task_weights(const QMatrix& q_matrix, bool ghost, double epsilon);

// sum_t w_t R_t; the ghost task contributes w_0 · 0. Throws MissingTaskRank.
double weighted_rank_score(const std::map<std::string, int>& per_task_ranks, const TaskWeights& weights);

struct RankingOptions {
  bool weighted = true;
  bool ghost = false;
  double epsilon = kDefaultEpsilon;
};

struct RankedExperiment {
  std::string experiment;
  std::map<std::string, double> q_per_task;
  std::map<std::string, int> task_ranks;
  double mean_q = 0.0;
  double weighted_score = 0.0;
  int final_rank = 0;
};

struct Ranking {
  TaskWeights weights;
  std::vector<RankedExperiment> entries;  // sorted: final_rank, mean_q desc, name
};

// Weighted mode: final rank orders weighted rank scores ascending.
// Unweighted mode: uniform weights, final rank orders mean Q descending.
Ranking final_ranking(const std::map<std::string, std::map<std::string, double>>& experiments,
                      const RankingOptions& options = {});

}  // namespace probebench
