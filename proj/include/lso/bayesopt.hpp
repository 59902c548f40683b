#pragma once

// Gaussian-process surrogate over latent points and expected-improvement
// batch acquisition from a candidate pool.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lso/errors.hpp"
#include "lso/rng.hpp"
#include "lso/vae.hpp"

namespace lso {

struct GpModel {
  Eigen::MatrixXd inputs;       // n x d
  Eigen::VectorXd alpha;        // K^-1 y_std
  Eigen::MatrixXd chol;         // lower Cholesky factor of K
  double signal_variance = 1.0; // sigma^2, standardized units
  double length_scale = 1.0;
  double jitter = 1e-6;         // noise variance = jitter * sigma^2
  double target_mean = 0.0;
  double target_scale = 1.0;
  double best_target = 0.0;     // max training target, original units
  double log_marginal_likelihood = 0.0;
};

struct GpGrid {
  std::vector<double> signal_variances;
  std::vector<double> length_scales;

  /// 8 x 8 log-spaced grid: sigma^2 in [1e-2, 1e1], length scale in [1e-1, 1e1].
  static GpGrid standard();
};

/// Squared-exponential kernel sigma^2 exp(-|a - b|^2 / (2 l^2)).
double se_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double signal_variance,
                 double length_scale);

/// log p(y | X) for standardized targets under the kernel plus
/// jitter * sigma^2 on the diagonal. Throws NumericError if the kernel
/// matrix is not positive definite.
double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               double signal_variance, double length_scale, double jitter);

/// Standardizes the targets, picks the grid point with the largest marginal
/// likelihood and factors the kernel matrix. The jitter grows tenfold from
/// 1e-6 up to 1e-2 until the factorization succeeds. Inputs closer than
/// `min_separation` to each other are rejected with GuardError.
GpModel fit_gp(std::span<const LatentPoint> X, std::span<const double> y,
               const GpGrid& grid = GpGrid::standard(), double min_separation = 1e-3);

struct Posterior {
  double mean;
  double variance;
};

/// Predictive mean and latent-function variance in original target units.
Posterior posterior(const GpModel& gp, const LatentPoint& z);

/// Closed-form expected improvement over `best` for a Gaussian with the
/// given mean and standard deviation.
double expected_improvement(double mean, double stddev, double best);
double expected_improvement(const GpModel& gp, const LatentPoint& z, double best);

struct AcquisitionConfig {
  std::size_t batch_size = 50;
  std::size_t pool_size = 4096;
  double perturbation = 0.1;
  double min_separation = 1e-3;
};

/// Half prior draws, half Gaussian perturbations of the `top` latents
/// (cycled in order).
std::vector<LatentPoint> candidate_pool(const AcquisitionConfig& cfg,
                                        std::span<const LatentPoint> top, int latent, Rng& rng);

class AcquisitionShortfall : public std::runtime_error {
 public:
  AcquisitionShortfall(const std::string& what, std::vector<LatentPoint> partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const std::vector<LatentPoint>& partial() const noexcept { return partial_; }

 private:
  std::vector<LatentPoint> partial_;
};

/// Ranks the pool by EI (ties by pool index) and greedily keeps candidates
/// at least `min_separation` from every point kept so far. Throws
/// AcquisitionShortfall if fewer than `batch_size` survive.
std::vector<LatentPoint> select_from_pool(const GpModel& gp, std::span<const LatentPoint> pool,
                                          const AcquisitionConfig& cfg);

/// candidate_pool followed by select_from_pool, with best = gp.best_target.
std::vector<LatentPoint> acquire_batch(const GpModel& gp, const AcquisitionConfig& cfg,
                                       std::span<const LatentPoint> top, Rng& rng);

}  // namespace lso
