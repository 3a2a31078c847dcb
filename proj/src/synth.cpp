#include "probebench/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "probebench/error.hpp"
#include "probebench/metrics.hpp"
#include "probebench/rng.hpp"

namespace probebench::synth {

std::string sample_id(std::size_t index) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "s%06zu", index);
  return buffer;
}

EmbeddingSet gen_random_embeddings(std::size_t n, std::size_t dim, std::uint64_t seed) {
  if (n == 0 || dim == 0) throw Error(ErrorCode::InvalidSpec, "n and dim must be positive");
  EmbeddingSet set(dim);
  Rng rng(derive_seed(seed, "embeddings", 0));
  std::vector<double> row(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : row) v = rng.normal();
    set.add(sample_id(i), row);
  }
  return set;
}

std::pair<EmbeddingSet, TaskDataset> gen_linear_task(const SynthSpec& spec) {
  if (spec.kind != TaskKind::Regression) throw Error(ErrorCode::InvalidSpec, "linear tasks are regression");
  if (spec.signal_dims > spec.dim) throw Error(ErrorCode::InvalidSpec, "signal_dims exceeds dim");
  if (!(spec.noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidSpec, "noise_sigma must be non-negative");
  auto embeddings = gen_random_embeddings(spec.n_samples, spec.dim, spec.seed);

  Rng rng(derive_seed(spec.seed, "linear-task", 0));
  std::vector<double> w(spec.signal_dims);
  double norm = 0.0;
  for (double& v : w) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : w) v /= norm;

  std::vector<double> y(spec.n_samples);
  Rng noise(derive_seed(spec.seed, "linear-noise", 0));
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const auto x = embeddings.row(i);
    double value = 0.0;
    for (std::size_t j = 0; j < spec.signal_dims; ++j) value += w[j] * x[j];
    y[i] = value + spec.noise_sigma * noise.normal();
  }
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double min = *lo;
  const double range = *hi - *lo;

  TaskDataset task(spec.task_name, TaskKind::Regression);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    task.add(embeddings.ids()[i], range > 0.0 ? (y[i] - min) / range : 0.0);
  }
  return {std::move(embeddings), std::move(task)};
}

TaskDataset gen_majority_zero_task(std::size_t n, double zero_fraction, TaskKind kind, std::uint64_t seed,
                                   std::string name) {
  if (!(zero_fraction >= 0.0 && zero_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidSpec, "zero_fraction must lie in [0,1]");
  }
  const auto zeros = static_cast<std::size_t>(std::llround(zero_fraction * static_cast<double>(n)));
  Rng rng(derive_seed(seed, "majority-zero", 0));
  std::vector<double> labels(n, 0.0);
  for (std::size_t i = zeros; i < n; ++i) {
    labels[i] = kind == TaskKind::Regression ? rng.uniform_open_closed() : 1.0;
  }
  rng.shuffle(std::span<double>(labels));
  TaskDataset task(std::move(name), kind);
  for (std::size_t i = 0; i < n; ++i) task.add(sample_id(i), labels[i]);
  return task;
}

double OlsFit::predict(std::span<const double> x) const {
  double value = intercept;
  for (std::size_t j = 0; j < coefficients.size(); ++j) value += coefficients[j] * x[j];
  return value;
}

std::vector<double> OlsFit::predict(const Matrix& features) const {
  std::vector<double> out(features.rows());
  for (std::size_t r = 0; r < features.rows(); ++r) out[r] = predict(features.row(r));
  return out;
}

OlsFit ols_oracle(const Matrix& features, std::span<const double> labels) {
  if (features.rows() != labels.size() || labels.empty()) {
    throw Error(ErrorCode::LengthMismatch, "feature rows vs labels");
  }
  const auto n = static_cast<Eigen::Index>(features.rows());
  const auto p = static_cast<Eigen::Index>(features.cols()) + 1;
  Eigen::MatrixXd design(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    const auto row = features.row(static_cast<std::size_t>(i));
    for (Eigen::Index j = 1; j < p; ++j) design(i, j) = row[static_cast<std::size_t>(j - 1)];
    y(i) = labels[static_cast<std::size_t>(i)];
  }

  OlsFit fit;
  Eigen::VectorXd beta;
  const Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-12) {
    beta = ldlt.solve(design.transpose() * y);
  } else {
    beta = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(design).solve(y);
    fit.minimum_norm = true;
  }
  fit.intercept = beta(0);
  fit.coefficients.assign(beta.data() + 1, beta.data() + p);
  fit.r_squared = probebench::r_squared(labels, fit.predict(features));
  return fit;
}

}  // namespace probebench::synth
