#pragma once

// Descriptor-based ridge regression standing in for the potency predictor:
// 80/10/10 splitting, standardized ridge fit, prediction clamped to [0, 10],
// and the R^2 / MAE / RMSE report.

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lso/rng.hpp"
#include "lso/toyspace.hpp"

namespace lso {

struct LabeledSet {
  std::vector<Molecule> molecules;
  std::vector<double> labels;

  std::size_t size() const noexcept { return molecules.size(); }
  /// Throws GuardError if lengths differ or a label is not finite.
  void check() const;
};

/// Draws `n` random molecules and labels them with oracle_pic50.
LabeledSet make_oracle_set(Rng& rng, std::size_t n);

struct Split {
  LabeledSet train;
  LabeledSet validation;
  LabeledSet test;
};

/// Random 80/10/10 partition. Validation and test each get floor(n/10)
/// items, the remainder goes to train. Throws GuardError for n < 10.
Split split(const LabeledSet& data, Rng& rng);

/// Solves (X^T X + lambda I) beta = X^T y. Throws NumericError if the
/// system stays singular after jitter.
Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

struct RidgeModel {
  double lambda = 1e-3;
  std::array<double, kNumFeatures> means{};
  std::array<double, kNumFeatures> scales{};  // all > 0
  std::array<double, kNumFeatures> coefficients{};
  double intercept = 0.0;

  /// Raw (unclamped) linear response.
  double response(const FeatureVector& f) const;
};

/// Standardizes each descriptor (constant columns get scale 1), fits the
/// centred ridge problem, and sets the intercept to the label mean.
/// Requires more rows than descriptors.
RidgeModel fit_ridge(const LabeledSet& train, double lambda);

/// Model response clamped to [0, 10].
double predict(const RidgeModel& model, const Molecule& m);

void save_model(const RidgeModel& model, const std::filesystem::path& path);
RidgeModel load_model(const std::filesystem::path& path);

struct Metrics {
  double r_squared = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
};

/// MAE, RMSE and R^2 = 1 - SSE/SST. Throws GuardError for empty or
/// mismatched inputs and NumericError when the actuals have zero variance.
Metrics compute_metrics(std::span<const double> pred, std::span<const double> actual);

Metrics evaluate(const RidgeModel& model, const LabeledSet& data);

struct MetricsRow {
  std::string set;
  Metrics metrics;
};

/// Header `set,r_squared,mae,rmse`, three decimals.
std::string metrics_csv(const std::vector<MetricsRow>& rows);

}  // namespace lso
