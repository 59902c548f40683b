#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "lso/errors.hpp"
#include "lso/vae.hpp"

using namespace lso;

namespace {

const VaeShape kTiny{6, kVocabSize, 5, 3};

VaeParams noisy_params(const VaeShape& shape, std::uint64_t seed, double scale = 0.5) {
  VaeParams p(shape);
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  for (double& v : p.flat()) v = g(rng);
  return p;
}

std::vector<Molecule> molecules(Rng& rng, std::size_t n, std::size_t max_len) {
  std::vector<Molecule> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_molecule(rng, kMinLength, max_len));
  return out;
}

}  // namespace

TEST_CASE("parameter layout") {
  const VaeShape s;
  const VaeParams p(s);
  CHECK(p.flat().size() == s.param_count());
  CHECK(s.param_count() == 112 * 64 + 64 + 64 * 16 + 16 + 8 * 64 + 64 + 64 * 112 + 112);
  CHECK(p.blocks().size() == 8);
  CHECK(p.enc_w1().rows() == 64);
  CHECK(p.enc_w1().cols() == 112);
  CHECK(p.dec_w2().rows() == 112);
}

TEST_CASE("encode") {
  Rng rng(1);
  const VaeParams p = VaeParams::random(VaeShape{}, rng);
  const Encoding e = encode(p, Molecule("CN(CO)"));
  CHECK(e.mean.size() == 8);
  CHECK((e.stddev.array() > 0.0).all());

  VaeParams zero(VaeShape{});
  auto b2 = zero.enc_b2();
  for (int i = 0; i < b2.size(); ++i) b2(i) = 0.1 * i - 0.3;
  const Encoding a = encode(zero, Molecule("CCCC"));
  const Encoding c = encode(zero, Molecule("N(O)FF"));
  for (int i = 0; i < 8; ++i) {
    CHECK(a.mean(i) == doctest::Approx(0.1 * i - 0.3));
    CHECK(c.mean(i) == a.mean(i));
    CHECK(a.stddev(i) == doctest::Approx(std::exp(0.5 * (0.1 * (i + 8) - 0.3))));
  }

  // A perturbation of size eps moves the outputs by O(eps).
  VaeParams q = p;
  const Encoding base = encode(q, Molecule("CN(CO)"));
  for (double eps : {1e-3, 1e-4, 1e-5}) {
    q = p;
    q.enc_w1()(3, 8) += eps;  // column 8 is position 1, token N
    const Encoding moved = encode(q, Molecule("CN(CO)"));
    const double d = (moved.mean - base.mean).norm() + (moved.stddev - base.stddev).norm();
    CHECK(d > 0.0);
    CHECK(d < 10.0 * eps);
  }
}

TEST_CASE("analytic gradients match central differences") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    CAPTURE(seed);
    VaeParams p = noisy_params(kTiny, seed);
    Rng rng(100 + seed);
    const auto mols = molecules(rng, 5, 6);
    std::vector<double> w(5);
    for (auto& x : w) x = std::uniform_real_distribution<double>(0.01, 0.2)(rng);
    const WeightedBatch batch{mols, w, 10};
    const Eigen::MatrixXd noise = draw_noise(rng, kTiny.latent, mols.size());
    const double beta = 0.7;
    const LossAndGradient lg = loss_and_gradient(p, batch, beta, noise);

    std::vector<std::size_t> idx(p.flat().size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(50);
    const double h = 1e-4;
    double worst = 0.0;
    for (std::size_t i : idx) {
      const double orig = p.flat()[i];
      p.flat()[i] = orig + h;
      const double up = loss_and_gradient(p, batch, beta, noise).loss;
      p.flat()[i] = orig - h;
      const double down = loss_and_gradient(p, batch, beta, noise).loss;
      p.flat()[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = lg.gradient[i];
      const double rel = std::abs(numeric - analytic) /
                         std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      worst = std::max(worst, rel);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("weighted loss reductions") {
  Rng rng(9);
  const VaeParams p = VaeParams::random(kTiny, rng);
  const auto mols = molecules(rng, 12, 6);
  const Eigen::MatrixXd noise = draw_noise(rng, kTiny.latent, mols.size());
  const double beta = 0.2;

  // Uniform weights reproduce the plain mean.
  const std::vector<double> uniform(mols.size(), 1.0 / mols.size());
  const double weighted = loss_and_gradient(p, {mols, uniform, mols.size()}, beta, noise).loss;
  const auto terms = example_losses(p, mols, noise);
  double plain = 0.0;
  for (const auto& t : terms) plain += t.reconstruction + beta * t.kl;
  plain /= static_cast<double>(mols.size());
  CHECK(std::abs(weighted - plain) <= 1e-10);

  // Zero weights give a zero gradient.
  const std::vector<double> zeros(mols.size(), 0.0);
  const auto g0 = loss_and_gradient(p, {mols, zeros, mols.size()}, beta, noise).gradient;
  CHECK(std::all_of(g0.begin(), g0.end(), [](double v) { return v == 0.0; }));

  // Gradient scales linearly with an example's weight.
  const std::span<const Molecule> one(mols.data(), 1);
  const Eigen::MatrixXd n1 = noise.leftCols(1);
  const std::vector<double> w1{0.1}, w2{0.2};
  const auto ga = loss_and_gradient(p, {one, w1, 10}, beta, n1).gradient;
  const auto gb = loss_and_gradient(p, {one, w2, 10}, beta, n1).gradient;
  for (std::size_t i = 0; i < ga.size(); ++i) CHECK(gb[i] == doctest::Approx(2.0 * ga[i]).epsilon(1e-12));

  // The rng-driven entry points agree with the fixed-noise form.
  Rng r1(77), r2(77), r3(77);
  const WeightedBatch batch{mols, uniform, mols.size()};
  const double via_rng = weighted_elbo(p, batch, beta, r1);
  const auto grad_rng = gradients(p, batch, beta, r2);
  const auto fixed = loss_and_gradient(p, batch, beta, draw_noise(r3, kTiny.latent, mols.size()));
  CHECK(via_rng == fixed.loss);
  CHECK(grad_rng == fixed.gradient);
}

TEST_CASE("KL gradient vanishes at the standard normal") {
  VaeParams p = noisy_params(kTiny, 5);
  p.enc_w2().setZero();
  p.enc_b2().setZero();  // mean 0, log-variance 0 for every input
  Rng rng(6);
  const auto mols = molecules(rng, 4, 6);
  const std::vector<double> w(4, 0.25);
  const Eigen::MatrixXd noise = draw_noise(rng, kTiny.latent, 4);
  const auto with_kl = loss_and_gradient(p, {mols, w, 4}, 1.0, noise);
  const auto without = loss_and_gradient(p, {mols, w, 4}, 0.0, noise);
  for (std::size_t i = 0; i < with_kl.gradient.size(); ++i) {
    CHECK(std::abs(with_kl.gradient[i] - without.gradient[i]) < 1e-14);
  }
  CHECK(with_kl.loss == doctest::Approx(without.loss).epsilon(1e-14));
}

TEST_CASE("constrained decoding is always valid") {
  Rng init(21);
  const VaeParams p = VaeParams::random(VaeShape{}, init);
  Rng rng(22);
  const auto zs = sample_prior(rng, 10000, 8);
  std::size_t valid_sampled = 0, valid_unconstrained = 0;
  for (const auto& z : zs) {
    valid_sampled += validate(decode(p, z, DecodeMode::Sample, &rng).str());
    valid_unconstrained += validate(decode_tokens(p, z, false, DecodeMode::Sample, &rng));
  }
  CHECK(valid_sampled == 10000);
  CHECK(valid_unconstrained < 1000);

  // Scaled-up logits to push greedy choices to the extremes.
  VaeParams big = noisy_params(VaeShape{}, 23, 3.0);
  for (std::size_t i = 0; i < 2000; ++i) CHECK(validate(decode(big, zs[i]).str()));
  CHECK(decode(big, zs[0]) == decode(big, zs[0]));
}

TEST_CASE("training") {
  Rng rng(31);
  const auto data = molecules(rng, 200, kMaxLength);
  const std::vector<double> w(200, 1.0 / 200);
  Rng init(32);
  const VaeParams p0 = VaeParams::random(VaeShape{}, init);
  TrainConfig cfg;
  cfg.seed = 5;

  cfg.epochs = 0;
  const TrainResult none = train(p0, data, w, cfg);
  CHECK(none.params == p0);
  CHECK(none.probe_loss.size() == 1);

  cfg.epochs = 50;
  const TrainResult a = train(p0, data, w, cfg);
  const TrainResult b = train(p0, data, w, cfg);
  CHECK(a.params == b.params);
  CHECK(a.probe_loss.size() == 51);
  CHECK(a.probe_loss.back() < a.probe_loss.front());
  CHECK(reconstruction_accuracy(a.params, data) > reconstruction_accuracy(p0, data));

  std::vector<double> bad = w;
  bad[0] += 0.5;
  CHECK_THROWS(train(p0, data, bad, cfg));
}

TEST_CASE("weighted training overfits a single molecule") {
  const std::vector<Molecule> one{Molecule("CN(CO)C")};
  const std::vector<double> w{1.0};
  Rng init(41);
  TrainConfig cfg;
  cfg.epochs = 1500;
  cfg.beta = 0.0;
  cfg.learning_rate = 1e-2;
  const TrainResult r = train(VaeParams::random(VaeShape{}, init), one, w, cfg);
  CHECK(r.probe_loss.back() < 1e-2);
  CHECK(decode(r.params, LatentPoint{encode(r.params, one[0]).mean}) == one[0]);
}

TEST_CASE("sample_prior") {
  Rng a(3), b(3);
  const auto x = sample_prior(a, 5000, 8), y = sample_prior(b, 5000, 8);
  for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(x[i].z == y[i].z);
  Rng c(4);
  CHECK(sample_prior(c, 1, 8).size() == 1);

  Rng big(5);
  const std::size_t n = 100000;
  const auto pts = sample_prior(big, n, 8);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(8);
  for (const auto& p : pts) mean += p.z;
  mean /= static_cast<double>(n);
  CHECK(std::abs(mean.mean()) <= 4.0 / std::sqrt(n * 8.0));
  for (int j = 0; j < 8; ++j) CHECK(std::abs(mean(j)) <= 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("checkpoint round trip and shape validation") {
  Rng rng(51);
  const VaeParams p = VaeParams::random(kTiny, rng);
  const auto path = std::filesystem::temp_directory_path() / "lso_test_vae.json";
  save_checkpoint(p, path);
  CHECK(load_checkpoint(path) == p);

  {
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto pos = text.find("\"hidden\":5");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 10, "\"hidden\":6");
    std::ofstream(path) << text;
  }
  CHECK_THROWS_AS(load_checkpoint(path), ConfigError);
  std::filesystem::remove(path);
}
