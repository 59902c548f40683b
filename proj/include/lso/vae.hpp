#pragma once

// Sequence VAE over padded one-hot token strings.
//
//   encoder: one-hot (L*V) -> tanh(H) -> [mean (d), log-variance (d)]
//   decoder: z (d) -> tanh(H) -> per-position logits (L*V)
//
// Training minimizes a per-example weighted ELBO with one reparameterized
// draw per example. Decoding can mask, position by position, every token that
// cannot lead to a valid molecule, which makes decoded output valid by
// construction.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lso/rng.hpp"
#include "lso/toyspace.hpp"

namespace lso {

struct VaeShape {
  int max_len = static_cast<int>(kMaxLength);
  int vocab = kVocabSize;
  int hidden = 64;
  int latent = 8;

  int input_size() const { return max_len * vocab; }
  std::size_t param_count() const;
  friend bool operator==(const VaeShape&, const VaeShape&) = default;
};

class VaeParams {
 public:
  using Matrix = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatrix = Eigen::Map<const Eigen::MatrixXd>;
  using Vector = Eigen::Map<Eigen::VectorXd>;
  using ConstVector = Eigen::Map<const Eigen::VectorXd>;

  VaeParams() = default;
  explicit VaeParams(const VaeShape& shape);  // all zeros

  /// Glorot-uniform weights, zero biases.
  static VaeParams random(const VaeShape& shape, Rng& rng);

  const VaeShape& shape() const noexcept { return shape_; }
  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  Matrix enc_w1() { return mat(0); }
  Vector enc_b1() { return vec(1); }
  Matrix enc_w2() { return mat(2); }
  Vector enc_b2() { return vec(3); }
  Matrix dec_w1() { return mat(4); }
  Vector dec_b1() { return vec(5); }
  Matrix dec_w2() { return mat(6); }
  Vector dec_b2() { return vec(7); }
  ConstMatrix enc_w1() const { return mat(0); }
  ConstVector enc_b1() const { return vec(1); }
  ConstMatrix enc_w2() const { return mat(2); }
  ConstVector enc_b2() const { return vec(3); }
  ConstMatrix dec_w1() const { return mat(4); }
  ConstVector dec_b1() const { return vec(5); }
  ConstMatrix dec_w2() const { return mat(6); }
  ConstVector dec_b2() const { return vec(7); }

  struct Block {
    const char* name;
    int rows;
    int cols;
    std::size_t offset;
  };
  /// The eight parameter tensors in storage order.
  std::vector<Block> blocks() const;

  bool all_finite() const;
  friend bool operator==(const VaeParams&, const VaeParams&) = default;

 private:
  Matrix mat(int i);
  Vector vec(int i);
  ConstMatrix mat(int i) const;
  ConstVector vec(int i) const;

  VaeShape shape_{};
  std::vector<double> data_;
};

struct LatentPoint {
  Eigen::VectorXd z;
};

struct Encoding {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // exp(0.5 * logvar), componentwise > 0
};

Encoding encode(const VaeParams& p, const Molecule& m);

enum class DecodeMode { Greedy, Sample };

/// Raw decoder output: the tokens before the first pad. With
/// `constrained` false the result may be an invalid string. Sample mode
/// needs `rng`.
std::string decode_tokens(const VaeParams& p, const LatentPoint& z, bool constrained,
                          DecodeMode mode, Rng* rng = nullptr);

/// Constrained decode; the result is always a valid molecule.
Molecule decode(const VaeParams& p, const LatentPoint& z, DecodeMode mode = DecodeMode::Greedy,
                Rng* rng = nullptr);

/// Minibatch with the global normalized weights of its members. Each
/// example's loss is scaled by dataset_size * weight, so uniform weights
/// 1/N reproduce the plain mean loss.
struct WeightedBatch {
  std::span<const Molecule> molecules;
  std::span<const double> weights;
  std::size_t dataset_size = 0;
};

/// Standard normal reparameterization noise, one column per example.
Eigen::MatrixXd draw_noise(Rng& rng, int latent, std::size_t batch);

struct ExampleLoss {
  double reconstruction;  // cross-entropy summed over positions
  double kl;              // KL(q || N(0, I))
};

/// Unweighted per-example terms for a fixed noise matrix.
std::vector<ExampleLoss> example_losses(const VaeParams& p, std::span<const Molecule> molecules,
                                        const Eigen::MatrixXd& noise);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // same layout as VaeParams::flat()
};

/// Weighted ELBO loss and its exact gradient for a fixed noise matrix.
LossAndGradient loss_and_gradient(const VaeParams& p, const WeightedBatch& batch, double beta,
                                  const Eigen::MatrixXd& noise);

/// Draws the noise from `rng` and returns the weighted loss.
double weighted_elbo(const VaeParams& p, const WeightedBatch& batch, double beta, Rng& rng);

/// Draws the noise from `rng` (so a copy of the same stream reproduces the
/// loss evaluation) and returns the gradient.
std::vector<double> gradients(const VaeParams& p, const WeightedBatch& batch, double beta, Rng& rng);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  double beta = 0.2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::size_t probe_size = 256;
};

struct TrainResult {
  VaeParams params;
  /// Loss on a fixed probe batch (first probe_size examples, fixed noise)
  /// before training and after each epoch.
  std::vector<double> probe_loss;
};

/// Minibatched Adam on the weighted ELBO. `weights` must sum to one over
/// `data`. Throws TrainingError if the loss becomes non-finite.
TrainResult train(VaeParams params, std::span<const Molecule> data, std::span<const double> weights,
                  const TrainConfig& cfg);

std::vector<LatentPoint> sample_prior(Rng& rng, std::size_t n, int latent);

/// Fraction of molecules reproduced exactly by greedy constrained decoding
/// of the posterior mean.
double reconstruction_accuracy(const VaeParams& p, std::span<const Molecule> molecules);

void save_checkpoint(const VaeParams& p, const std::filesystem::path& path);
/// Throws ConfigError when the stored arrays do not match the stored shape.
VaeParams load_checkpoint(const std::filesystem::path& path);

}  // namespace lso
