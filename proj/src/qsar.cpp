#include "lso/qsar.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "lso/errors.hpp"

namespace lso {

void LabeledSet::check() const {
  if (molecules.size() != labels.size()) throw GuardError("labeled set: length mismatch");
  for (double y : labels) {
    if (!std::isfinite(y)) throw GuardError("labeled set: non-finite label");
  }
}

LabeledSet make_oracle_set(Rng& rng, std::size_t n) {
  LabeledSet out;
  out.molecules.reserve(n);
  out.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.molecules.push_back(random_molecule(rng));
    out.labels.push_back(oracle_pic50(out.molecules.back()));
  }
  return out;
}

Split split(const LabeledSet& data, Rng& rng) {
  data.check();
  const std::size_t n = data.size();
  if (n < 10) throw GuardError("split: need at least 10 items");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n_val = n / 10;
  const std::size_t n_test = n / 10;
  const std::size_t n_train = n - n_val - n_test;
  Split s;
  auto take = [&](LabeledSet& dst, std::size_t from, std::size_t count) {
    for (std::size_t i = from; i < from + count; ++i) {
      dst.molecules.push_back(data.molecules[order[i]]);
      dst.labels.push_back(data.labels[order[i]]);
    }
  };
  take(s.train, 0, n_train);
  take(s.validation, n_train, n_val);
  take(s.test, n_train + n_val, n_test);
  return s;
}

Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  if (!(lambda >= 0.0)) throw GuardError("ridge_solve: lambda must be >= 0");
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd A = X.transpose() * X;
  A.diagonal().array() += lambda;
  const Eigen::VectorXd b = X.transpose() * y;
  const double base = std::max(A.diagonal().cwiseAbs().maxCoeff(), 1.0);
  double jitter = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::MatrixXd Aj = A;
    Aj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(Aj);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd beta = llt.solve(b);
      if (beta.allFinite()) return beta;
    }
    jitter = jitter == 0.0 ? 1e-12 * base : jitter * 100.0;
  }
  throw NumericError("ridge_solve: singular normal equations (" + std::to_string(p) +
                     " unknowns)");
}

double RidgeModel::response(const FeatureVector& f) const {
  double v = intercept;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    v += coefficients[j] * (f[j] - means[j]) / scales[j];
  }
  return v;
}

RidgeModel fit_ridge(const LabeledSet& train, double lambda) {
  train.check();
  if (!(lambda > 0.0)) throw GuardError("fit_ridge: lambda must be > 0");
  const std::size_t n = train.size();
  if (n <= kNumFeatures) throw GuardError("fit_ridge: need more rows than descriptors");

  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kNumFeatures));
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureVector f = featurize(train.molecules[i]);
    for (std::size_t j = 0; j < kNumFeatures; ++j) X(i, j) = f[j];
  }
  const Eigen::Map<const Eigen::VectorXd> y(train.labels.data(), static_cast<Eigen::Index>(n));

  RidgeModel model;
  model.lambda = lambda;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double mean = X.col(jj).mean();
    const double var = (X.col(jj).array() - mean).square().mean();
    model.means[j] = mean;
    model.scales[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    X.col(jj) = (X.col(jj).array() - mean) / model.scales[j];
  }
  const double y_mean = y.mean();
  const Eigen::VectorXd beta = ridge_solve(X, (y.array() - y_mean).matrix(), lambda);
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    model.coefficients[j] = beta(static_cast<Eigen::Index>(j));
  }
  model.intercept = y_mean;
  return model;
}

double predict(const RidgeModel& model, const Molecule& m) {
  const double v = model.response(featurize(m));
  if (!std::isfinite(v)) throw NumericError("predict: non-finite response");
  return std::clamp(v, 0.0, 10.0);
}

void save_model(const RidgeModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["lambda"] = model.lambda;
  j["means"] = model.means;
  j["scales"] = model.scales;
  j["coefficients"] = model.coefficients;
  j["intercept"] = model.intercept;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model " + path.string());
  out << j.dump(2) << '\n';
}

RidgeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model " + path.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  RidgeModel m;
  auto read7 = [&](const char* key, std::array<double, kNumFeatures>& dst) {
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != kNumFeatures) {
      throw ConfigError(std::string("model file: \"") + key + "\" must have 7 entries");
    }
    for (std::size_t i = 0; i < kNumFeatures; ++i) dst[i] = arr[i].get<double>();
  };
  m.lambda = j.at("lambda").get<double>();
  read7("means", m.means);
  read7("scales", m.scales);
  read7("coefficients", m.coefficients);
  m.intercept = j.at("intercept").get<double>();
  for (double s : m.scales) {
    if (!(s > 0.0)) throw ConfigError("model file: scales must be > 0");
  }
  return m;
}

Metrics compute_metrics(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size() || pred.empty()) {
    throw GuardError("compute_metrics: need equal, non-zero lengths");
  }
  const double n = static_cast<double>(pred.size());
  const double mean = std::accumulate(actual.begin(), actual.end(), 0.0) / n;
  double abs_sum = 0.0, sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - actual[i];
    abs_sum += std::abs(e);
    sse += e * e;
    sst += (actual[i] - mean) * (actual[i] - mean);
  }
  if (sst == 0.0) throw NumericError("compute_metrics: R^2 undefined for zero-variance actuals");
  return Metrics{1.0 - sse / sst, abs_sum / n, std::sqrt(sse / n)};
}

Metrics evaluate(const RidgeModel& model, const LabeledSet& data) {
  std::vector<double> pred;
  pred.reserve(data.size());
  for (const auto& m : data.molecules) pred.push_back(predict(model, m));
  return compute_metrics(pred, data.labels);
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "set,r_squared,mae,rmse\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.3f,%.3f,%.3f\n", r.set.c_str(), r.metrics.r_squared,
                  r.metrics.mae, r.metrics.rmse);
    out += buf;
  }
  return out;
}

}  // namespace lso
