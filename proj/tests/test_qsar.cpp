#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <set>

#include "lso/errors.hpp"
#include "lso/qsar.hpp"

using namespace lso;

namespace {

LabeledSet numbered(std::size_t n) {
  LabeledSet s;
  Rng rng(1);
  for (std::size_t i = 0; i < n; ++i) {
    s.molecules.push_back(random_molecule(rng));
    s.labels.push_back(static_cast<double>(i));
  }
  return s;
}

}  // namespace

TEST_CASE("split sizes and disjointness") {
  Rng rng(0);
  auto sizes = [&](std::size_t n) {
    const Split p = split(numbered(n), rng);
    return std::array<std::size_t, 3>{p.train.size(), p.validation.size(), p.test.size()};
  };
  CHECK(sizes(10) == std::array<std::size_t, 3>{8, 1, 1});
  CHECK(sizes(9411) == std::array<std::size_t, 3>{7529, 941, 941});
  CHECK_THROWS_AS(sizes(9), GuardError);

  const LabeledSet data = numbered(250);
  Rng a(5), b(5);
  const Split x = split(data, a), y = split(data, b);
  CHECK(x.train.labels == y.train.labels);
  CHECK(x.test.labels == y.test.labels);
  std::multiset<double> all;
  for (const auto* part : {&x.train, &x.validation, &x.test}) all.insert(part->labels.begin(), part->labels.end());
  CHECK(all.size() == 250);
  CHECK(std::set<double>(all.begin(), all.end()).size() == 250);
}

TEST_CASE("ridge_solve matches a hand-solved 3-point system") {
  Eigen::MatrixXd X(3, 2);
  X << 1, 0, 0, 1, 1, 1;
  Eigen::VectorXd y(3);
  y << 1, 2, 4;
  // (X^T X + 0.5 I) = [[2.5, 1], [1, 2.5]], X^T y = [5, 6], det 5.25.
  const Eigen::VectorXd beta = ridge_solve(X, y, 0.5);
  CHECK(std::abs(beta(0) - 6.5 / 5.25) < 1e-9);
  CHECK(std::abs(beta(1) - 10.0 / 5.25) < 1e-9);
}

TEST_CASE("fit_ridge on realizable and heavily regularized targets") {
  Rng rng(17);
  LabeledSet s;
  for (int i = 0; i < 300; ++i) {
    const Molecule m = random_molecule(rng);
    const auto f = featurize(m);
    s.molecules.push_back(m);
    s.labels.push_back(0.5 + 0.1 * f[0] + 0.05 * f[1] - 0.07 * f[4] + 0.02 * f[5] + 0.3 * f[6]);
  }
  const RidgeModel exact = fit_ridge(s, 1e-8);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(std::abs(exact.response(featurize(s.molecules[i])) - s.labels[i]) < 1e-6);
  }

  const RidgeModel flat = fit_ridge(s, 1e12);
  const double mean = std::accumulate(s.labels.begin(), s.labels.end(), 0.0) / s.size();
  for (double c : flat.coefficients) CHECK(std::abs(c) < 1e-8);
  CHECK(predict(flat, s.molecules[0]) == doctest::Approx(mean).epsilon(1e-8));

  // Training loss falls as lambda falls.
  double prev = 1e300;
  for (double lambda : {1e4, 1e2, 1.0, 1e-2, 1e-4}) {
    const RidgeModel m = fit_ridge(s, lambda);
    double sse = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double e = m.response(featurize(s.molecules[i])) - s.labels[i];
      sse += e * e;
    }
    CHECK(sse < prev);
    prev = sse;
  }
  CHECK_THROWS_AS(fit_ridge(numbered(7), 1.0), GuardError);
}

TEST_CASE("predict clamps and handles constant models") {
  RidgeModel m;
  m.scales.fill(1.0);
  m.intercept = 4.2;
  CHECK(predict(m, Molecule("CCCC")) == 4.2);
  CHECK(predict(m, Molecule("N(O)F")) == 4.2);
  m.intercept = 1e6;
  CHECK(predict(m, Molecule("CCCC")) == 10.0);
  m.intercept = -1e6;
  CHECK(predict(m, Molecule("CCCC")) == 0.0);
}

TEST_CASE("oracle-trained model predicts training members closely") {
  Rng rng(2);
  const LabeledSet s = make_oracle_set(rng, 400);
  const RidgeModel m = fit_ridge(s, 1e-3);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(std::abs(predict(m, s.molecules[i]) - s.labels[i]) < 0.05);
  }
}

TEST_CASE("metrics") {
  const std::vector<double> actual{1, 2, 3}, pred{1, 2, 4};
  const Metrics m = compute_metrics(pred, actual);
  CHECK(m.mae == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(m.rmse == doctest::Approx(0.5773502691896257).epsilon(1e-12));
  CHECK(m.r_squared == doctest::Approx(0.5).epsilon(1e-12));

  const Metrics same = compute_metrics(actual, actual);
  CHECK(same.r_squared == 1.0);
  CHECK(same.mae == 0.0);
  CHECK(same.rmse == 0.0);

  CHECK_THROWS_AS(compute_metrics(std::vector<double>{1, 2}, std::vector<double>{3, 3}), NumericError);
  CHECK_THROWS(compute_metrics(std::vector<double>{}, std::vector<double>{}));
  CHECK_THROWS(compute_metrics(std::vector<double>{1}, std::vector<double>{1, 2}));

  Rng rng(8);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> p(12), a(12);
    for (int i = 0; i < 12; ++i) p[i] = g(rng), a[i] = g(rng);
    const Metrics x = compute_metrics(p, a);
    CHECK(x.rmse >= x.mae);
    CHECK(x.r_squared <= 1.0);
    std::vector<std::size_t> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pp(12), aa(12);
    for (int i = 0; i < 12; ++i) pp[i] = p[perm[i]], aa[i] = a[perm[i]];
    const Metrics y = compute_metrics(pp, aa);
    CHECK(y.mae == doctest::Approx(x.mae).epsilon(1e-12));
    CHECK(y.rmse == doctest::Approx(x.rmse).epsilon(1e-12));
    CHECK(y.r_squared == doctest::Approx(x.r_squared).epsilon(1e-12));
  }
}

TEST_CASE("metrics CSV and model persistence") {
  const std::string csv = metrics_csv({{"test", {0.158, 1.045, 1.298}}});
  CHECK(csv == "set,r_squared,mae,rmse\ntest,0.158,1.045,1.298\n");

  Rng rng(4);
  const RidgeModel m = fit_ridge(make_oracle_set(rng, 100), 0.1);
  const auto path = std::filesystem::temp_directory_path() / "lso_test_model.json";
  save_model(m, path);
  const RidgeModel back = load_model(path);
  CHECK(back.lambda == m.lambda);
  CHECK(back.coefficients == m.coefficients);
  CHECK(back.means == m.means);
  CHECK(back.scales == m.scales);
  CHECK(back.intercept == m.intercept);
  std::filesystem::remove(path);
}
