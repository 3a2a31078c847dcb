#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "probebench/ingest.hpp"
#include "probebench/matrix.hpp"

namespace probebench::synth {

struct SynthSpec {
  std::size_t n_samples = 500;
  std::size_t dim = 32;
  std::size_t signal_dims = 8;
  double noise_sigma = 0.0;
  TaskKind kind = TaskKind::Regression;
  double zero_fraction = 0.0;
  std::uint64_t seed = 0;
  std::string task_name = "linear";
};

// Sample ids "s000000", "s000001", ...
std::string sample_id(std::size_t index);

EmbeddingSet gen_random_embeddings(std::size_t n, std::size_t dim, std::uint64_t seed);

// Standard-normal embeddings; labels = w·x over the first signal_dims
// coordinates (w unit-norm, drawn from the seed) plus N(0, noise_sigma²),
// min-max scaled into [0,1]. Throws InvalidSpec.
std::pair<EmbeddingSet, TaskDataset> gen_linear_task(const SynthSpec& spec);

// round(zero_fraction·n) zero labels; the rest uniform on (0,1] (regression)
// or 1 (classification), positions shuffled by the seed.
TaskDataset gen_majority_zero_task(std::size_t n, double zero_fraction, TaskKind kind, std::uint64_t seed,
                                   std::string name = "random");

struct OlsFit {
  double intercept = 0.0;
  std::vector<double> coefficients;
  double r_squared = 0.0;  // on the training data
  bool minimum_norm = false;

  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& features) const;
};

// Least squares with intercept via the normal equations; rank-deficient
// systems fall back to the minimum-norm solution.
OlsFit ols_oracle(const Matrix& features, std::span<const double> labels);

}  // namespace probebench::synth
