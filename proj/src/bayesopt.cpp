#include "lso/bayesopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace lso {

namespace {

constexpr double kMaxJitter = 1e-2;
constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

Eigen::MatrixXd to_matrix(std::span<const LatentPoint> pts) {
  if (pts.empty()) return {};
  const Eigen::Index d = pts.front().z.size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(pts.size()), d);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].z.size() != d) throw GuardError("latent points differ in dimension");
    X.row(static_cast<Eigen::Index>(i)) = pts[i].z.transpose();
  }
  return X;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd D(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    D.col(j) = (A.rowwise() - B.row(j)).rowwise().squaredNorm();
  }
  return D;
}

std::vector<double> log_space(double lo, double hi, int n) {
  std::vector<double> out;
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i) out.push_back(std::pow(10.0, a + (b - a) * i / (n - 1)));
  return out;
}

double normal_cdf(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }
double normal_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

GpGrid GpGrid::standard() { return {log_space(1e-2, 1e1, 8), log_space(1e-1, 1e1, 8)}; }

double se_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double signal_variance,
                 double length_scale) {
  return signal_variance * std::exp(-(a - b).squaredNorm() / (2.0 * length_scale * length_scale));
}

double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               double signal_variance, double length_scale, double jitter) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K = (-squared_distances(X, X).array() / (2.0 * length_scale * length_scale)).exp();
  K.diagonal().array() += jitter;
  K *= signal_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) throw NumericError("kernel matrix is not positive definite");
  const Eigen::VectorXd alpha = llt.solve(y);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * static_cast<double>(n) * kLog2Pi;
}

GpModel fit_gp(std::span<const LatentPoint> X, std::span<const double> y, const GpGrid& grid,
               double min_separation) {
  if (X.size() != y.size()) throw GuardError("fit_gp: inputs and targets differ in length");
  if (X.size() < 2) throw GuardError("fit_gp: need at least two points");
  if (grid.signal_variances.empty() || grid.length_scales.empty()) {
    throw GuardError("fit_gp: empty hyperparameter grid");
  }
  GpModel gp;
  gp.inputs = to_matrix(X);
  const Eigen::Index n = gp.inputs.rows();
  const Eigen::MatrixXd D = squared_distances(gp.inputs, gp.inputs);
  const double sep2 = min_separation * min_separation;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      if (D(i, j) < sep2) throw GuardError("fit_gp: duplicate inputs closer than the separation");
    }
  }

  Eigen::VectorXd ys(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = y[static_cast<std::size_t>(i)];
    if (!std::isfinite(v)) throw GuardError("fit_gp: non-finite target");
    ys(i) = v;
  }
  gp.best_target = ys.maxCoeff();
  gp.target_mean = ys.mean();
  const double sd = std::sqrt((ys.array() - gp.target_mean).square().mean());
  gp.target_scale = sd > 0.0 ? sd : 1.0;
  ys = (ys.array() - gp.target_mean) / gp.target_scale;

  // With noise proportional to sigma^2, K = sigma^2 (R + jitter I): one
  // factorization per length scale covers the whole sigma^2 column.
  double best_lml = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd best_chol;
  Eigen::VectorXd best_unit_alpha;
  for (double ell : grid.length_scales) {
    Eigen::MatrixXd R = (-D.array() / (2.0 * ell * ell)).exp();
    double jitter = 1e-6;
    Eigen::LLT<Eigen::MatrixXd> llt;
    for (;;) {
      Eigen::MatrixXd A = R;
      A.diagonal().array() += jitter;
      llt.compute(A);
      if (llt.info() == Eigen::Success) break;
      jitter *= 10.0;
      if (jitter > kMaxJitter * (1.0 + 1e-12)) {
        throw NumericError("fit_gp: Cholesky failed at maximum jitter");
      }
    }
    const Eigen::VectorXd unit_alpha = llt.solve(ys);  // (R + jitter I)^-1 y
    const double quad = ys.dot(unit_alpha);
    const Eigen::MatrixXd L = llt.matrixL();
    const double logdet_unit = 2.0 * L.diagonal().array().log().sum();
    for (double s2 : grid.signal_variances) {
      const double lml = -0.5 * quad / s2 - 0.5 * (static_cast<double>(n) * std::log(s2) + logdet_unit) -
                         0.5 * static_cast<double>(n) * kLog2Pi;
      if (lml > best_lml) {
        best_lml = lml;
        gp.signal_variance = s2;
        gp.length_scale = ell;
        gp.jitter = jitter;
        best_chol = L;
        best_unit_alpha = unit_alpha;
      }
    }
  }
  gp.log_marginal_likelihood = best_lml;
  gp.chol = std::sqrt(gp.signal_variance) * best_chol;
  gp.alpha = best_unit_alpha / gp.signal_variance;
  return gp;
}

namespace {

// Posterior for the rows of Z in standardized units.
void posterior_std(const GpModel& gp, const Eigen::MatrixXd& Z, Eigen::VectorXd& mean,
                   Eigen::VectorXd& var) {
  const double ell2 = 2.0 * gp.length_scale * gp.length_scale;
  const Eigen::MatrixXd Ks =
      gp.signal_variance * (-squared_distances(gp.inputs, Z).array() / ell2).exp();
  mean = Ks.transpose() * gp.alpha;
  const Eigen::MatrixXd V = gp.chol.triangularView<Eigen::Lower>().solve(Ks);
  var = (gp.signal_variance - V.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
}

}  // namespace

Posterior posterior(const GpModel& gp, const LatentPoint& z) {
  if (z.z.size() != gp.inputs.cols()) throw GuardError("posterior: latent dimension mismatch");
  Eigen::VectorXd m, v;
  posterior_std(gp, z.z.transpose(), m, v);
  return {gp.target_mean + gp.target_scale * m(0), gp.target_scale * gp.target_scale * v(0)};
}

double expected_improvement(double mean, double stddev, double best) {
  const double gain = mean - best;
  if (!(stddev > 0.0)) return std::max(0.0, gain);
  const double u = gain / stddev;
  return std::max(0.0, gain * normal_cdf(u) + stddev * normal_pdf(u));
}

double expected_improvement(const GpModel& gp, const LatentPoint& z, double best) {
  const Posterior p = posterior(gp, z);
  return expected_improvement(p.mean, std::sqrt(p.variance), best);
}

std::vector<LatentPoint> candidate_pool(const AcquisitionConfig& cfg,
                                        std::span<const LatentPoint> top, int latent, Rng& rng) {
  if (cfg.batch_size == 0 || cfg.pool_size < cfg.batch_size) {
    throw GuardError("acquisition: need 1 <= batch size <= pool size");
  }
  const std::size_t n_perturbed = top.empty() ? 0 : cfg.pool_size / 2;
  const std::size_t n_prior = cfg.pool_size - n_perturbed;
  std::vector<LatentPoint> pool = sample_prior(rng, n_prior, latent);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n_perturbed; ++i) {
    const LatentPoint& base = top[i % top.size()];
    if (base.z.size() != latent) throw GuardError("acquisition: latent dimension mismatch");
    LatentPoint pt{base.z};
    for (int j = 0; j < latent; ++j) pt.z(j) += cfg.perturbation * normal(rng);
    pool.push_back(std::move(pt));
  }
  return pool;
}

std::vector<LatentPoint> select_from_pool(const GpModel& gp, std::span<const LatentPoint> pool,
                                          const AcquisitionConfig& cfg) {
  const Eigen::MatrixXd Z = to_matrix(pool);
  std::vector<double> ei(pool.size());
  constexpr Eigen::Index kChunk = 512;
  for (Eigen::Index start = 0; start < Z.rows(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, Z.rows() - start);
    Eigen::VectorXd m, v;
    posterior_std(gp, Z.middleRows(start, len), m, v);
    for (Eigen::Index i = 0; i < len; ++i) {
      const double mean = gp.target_mean + gp.target_scale * m(i);
      const double sd = gp.target_scale * std::sqrt(v(i));
      ei[static_cast<std::size_t>(start + i)] = expected_improvement(mean, sd, gp.best_target);
    }
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ei[a] > ei[b]; });

  std::vector<LatentPoint> chosen;
  const double sep2 = cfg.min_separation * cfg.min_separation;
  for (std::size_t idx : order) {
    if (chosen.size() == cfg.batch_size) break;
    const auto& cand = pool[idx];
    const bool far = std::all_of(chosen.begin(), chosen.end(), [&](const LatentPoint& c) {
      return (c.z - cand.z).squaredNorm() >= sep2;
    });
    if (far) chosen.push_back(cand);
  }
  if (chosen.size() < cfg.batch_size) {
    throw AcquisitionShortfall("acquisition pool exhausted after " + std::to_string(chosen.size()) +
                                   " of " + std::to_string(cfg.batch_size) + " points",
                               std::move(chosen));
  }
  return chosen;
}

std::vector<LatentPoint> acquire_batch(const GpModel& gp, const AcquisitionConfig& cfg,
                                       std::span<const LatentPoint> top, Rng& rng) {
  const auto pool = candidate_pool(cfg, top, static_cast<int>(gp.inputs.cols()), rng);
  return select_from_pool(gp, pool, cfg);
}

}  // namespace lso
