#include "lso/vae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "lso/errors.hpp"

namespace lso {

// ---------------------------------------------------------------------------
// Parameter storage

namespace {

struct Dims {
  int rows;
  int cols;
};

std::array<Dims, 8> block_dims(const VaeShape& s) {
  const int in = s.input_size();
  return {{{s.hidden, in},
           {s.hidden, 1},
           {2 * s.latent, s.hidden},
           {2 * s.latent, 1},
           {s.hidden, s.latent},
           {s.hidden, 1},
           {in, s.hidden},
           {in, 1}}};
}

constexpr std::array<const char*, 8> kBlockNames = {"enc_w1", "enc_b1", "enc_w2", "enc_b2",
                                                    "dec_w1", "dec_b1", "dec_w2", "dec_b2"};

std::size_t block_offset(const VaeShape& s, int index) {
  const auto dims = block_dims(s);
  std::size_t off = 0;
  for (int i = 0; i < index; ++i) {
    off += static_cast<std::size_t>(dims[i].rows) * static_cast<std::size_t>(dims[i].cols);
  }
  return off;
}

void check_shape(const VaeShape& s) {
  if (s.max_len <= 0 || s.vocab != kVocabSize || s.hidden <= 0 || s.latent <= 0) {
    throw GuardError("vae shape: sizes must be positive and vocab must be 7");
  }
}

}  // namespace

std::size_t VaeShape::param_count() const { return block_offset(*this, 8); }

VaeParams::VaeParams(const VaeShape& shape) : shape_(shape) {
  check_shape(shape);
  data_.assign(shape.param_count(), 0.0);
}

VaeParams VaeParams::random(const VaeShape& shape, Rng& rng) {
  VaeParams p(shape);
  const auto dims = block_dims(shape);
  for (int b = 0; b < 8; b += 2) {  // weight blocks; biases stay zero
    const double limit = std::sqrt(6.0 / (dims[b].rows + dims[b].cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    auto m = p.mat(b);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
    }
  }
  return p;
}

std::vector<VaeParams::Block> VaeParams::blocks() const {
  const auto dims = block_dims(shape_);
  std::vector<Block> out;
  for (int i = 0; i < 8; ++i) {
    out.push_back({kBlockNames[i], dims[i].rows, dims[i].cols, block_offset(shape_, i)});
  }
  return out;
}

bool VaeParams::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

VaeParams::Matrix VaeParams::mat(int i) {
  const auto d = block_dims(shape_)[i];
  return Matrix(data_.data() + block_offset(shape_, i), d.rows, d.cols);
}
VaeParams::Vector VaeParams::vec(int i) {
  const auto d = block_dims(shape_)[i];
  return Vector(data_.data() + block_offset(shape_, i), d.rows);
}
VaeParams::ConstMatrix VaeParams::mat(int i) const {
  const auto d = block_dims(shape_)[i];
  return ConstMatrix(data_.data() + block_offset(shape_, i), d.rows, d.cols);
}
VaeParams::ConstVector VaeParams::vec(int i) const {
  const auto d = block_dims(shape_)[i];
  return ConstVector(data_.data() + block_offset(shape_, i), d.rows);
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

std::vector<int> token_ids(const Molecule& m, const VaeShape& s) {
  if (m.length() > static_cast<std::size_t>(s.max_len)) {
    throw GuardError("molecule longer than the model's padded length");
  }
  std::vector<int> ids(static_cast<std::size_t>(s.max_len), static_cast<int>(Token::Pad));
  for (std::size_t i = 0; i < m.length(); ++i) {
    ids[i] = static_cast<int>(*token_from_char(m.str()[i]));
  }
  return ids;
}

struct Forward {
  Eigen::MatrixXd x;       // one-hot input, (L*V) x B
  Eigen::MatrixXd h1;      // encoder hidden, H x B
  Eigen::MatrixXd mean;    // d x B
  Eigen::MatrixXd logvar;  // d x B
  Eigen::MatrixXd sd;      // d x B
  Eigen::MatrixXd z;       // d x B
  Eigen::MatrixXd h2;      // decoder hidden, H x B
  Eigen::MatrixXd logp;    // log-softmax per position, (L*V) x B
  std::vector<double> reconstruction;
  std::vector<double> kl;
};

Forward forward(const VaeParams& p, std::span<const Molecule> molecules,
                const Eigen::MatrixXd& noise) {
  const VaeShape& s = p.shape();
  const auto B = static_cast<Eigen::Index>(molecules.size());
  const int L = s.max_len, V = s.vocab, d = s.latent;
  if (noise.rows() != d || noise.cols() != B) throw GuardError("noise matrix shape mismatch");

  Forward f;
  f.x = Eigen::MatrixXd::Zero(s.input_size(), B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto ids = token_ids(molecules[static_cast<std::size_t>(b)], s);
    for (int pos = 0; pos < L; ++pos) f.x(pos * V + ids[static_cast<std::size_t>(pos)], b) = 1.0;
  }

  f.h1 = ((p.enc_w1() * f.x).colwise() + p.enc_b1()).array().tanh();
  const Eigen::MatrixXd enc = (p.enc_w2() * f.h1).colwise() + p.enc_b2();
  f.mean = enc.topRows(d);
  f.logvar = enc.bottomRows(d);
  f.sd = (0.5 * f.logvar.array()).exp();
  f.z = f.mean.array() + f.sd.array() * noise.array();
  f.h2 = ((p.dec_w1() * f.z).colwise() + p.dec_b1()).array().tanh();
  f.logp = (p.dec_w2() * f.h2).colwise() + p.dec_b2();

  f.reconstruction.assign(static_cast<std::size_t>(B), 0.0);
  f.kl.assign(static_cast<std::size_t>(B), 0.0);
  for (Eigen::Index b = 0; b < B; ++b) {
    double ce = 0.0;
    for (int pos = 0; pos < L; ++pos) {
      auto block = f.logp.block(pos * V, b, V, 1);
      const double mx = block.maxCoeff();
      const double lse = mx + std::log((block.array() - mx).exp().sum());
      block.array() -= lse;
      ce -= (block.array() * f.x.block(pos * V, b, V, 1).array()).sum();
    }
    f.reconstruction[static_cast<std::size_t>(b)] = ce;
    f.kl[static_cast<std::size_t>(b)] =
        0.5 * (f.mean.col(b).array().square() + f.logvar.col(b).array().exp() - 1.0 -
               f.logvar.col(b).array())
                  .sum();
  }
  return f;
}

void check_batch(const WeightedBatch& batch) {
  if (batch.molecules.size() != batch.weights.size()) {
    throw GuardError("weighted batch: molecules and weights differ in length");
  }
  if (batch.dataset_size == 0) throw GuardError("weighted batch: dataset_size must be > 0");
}

}  // namespace

Eigen::MatrixXd draw_noise(Rng& rng, int latent, std::size_t batch) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd eps(latent, static_cast<Eigen::Index>(batch));
  for (Eigen::Index b = 0; b < eps.cols(); ++b) {
    for (Eigen::Index i = 0; i < eps.rows(); ++i) eps(i, b) = normal(rng);
  }
  return eps;
}

std::vector<ExampleLoss> example_losses(const VaeParams& p, std::span<const Molecule> molecules,
                                        const Eigen::MatrixXd& noise) {
  const Forward f = forward(p, molecules, noise);
  std::vector<ExampleLoss> out;
  for (std::size_t i = 0; i < molecules.size(); ++i) out.push_back({f.reconstruction[i], f.kl[i]});
  return out;
}

LossAndGradient loss_and_gradient(const VaeParams& p, const WeightedBatch& batch, double beta,
                                  const Eigen::MatrixXd& noise) {
  check_batch(batch);
  const VaeShape& s = p.shape();
  const auto B = static_cast<Eigen::Index>(batch.molecules.size());
  LossAndGradient out;
  out.gradient.assign(p.flat().size(), 0.0);
  if (B == 0) return out;

  const Forward f = forward(p, batch.molecules, noise);

  // Per-example loss multipliers c_b = N * w_b / |B|.
  Eigen::RowVectorXd c(B);
  const double n = static_cast<double>(batch.dataset_size);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto i = static_cast<std::size_t>(b);
    c(b) = n * batch.weights[i] / static_cast<double>(B);
    out.loss += c(b) * (f.reconstruction[i] + beta * f.kl[i]);
  }
  if (!std::isfinite(out.loss)) throw NumericError("weighted ELBO is not finite");

  VaeParams g(s);
  // Decoder output: d loss / d logits = c * (softmax - onehot), per position.
  Eigen::MatrixXd dlogits = f.logp.array().exp() - f.x.array();
  dlogits.array().rowwise() *= c.array();
  g.dec_w2() = dlogits * f.h2.transpose();
  g.dec_b2() = dlogits.rowwise().sum();
  const Eigen::MatrixXd dpre2 =
      (p.dec_w2().transpose() * dlogits).array() * (1.0 - f.h2.array().square());
  g.dec_w1() = dpre2 * f.z.transpose();
  g.dec_b1() = dpre2.rowwise().sum();
  const Eigen::MatrixXd dz = p.dec_w1().transpose() * dpre2;

  // Reparameterization z = mean + exp(logvar / 2) * eps, plus the KL term.
  Eigen::MatrixXd kl_mean = beta * f.mean;
  kl_mean.array().rowwise() *= c.array();
  const Eigen::MatrixXd dmean = dz + kl_mean;
  Eigen::MatrixXd kl_logvar = 0.5 * (f.logvar.array().exp() - 1.0);
  kl_logvar.array().rowwise() *= beta * c.array();
  const Eigen::MatrixXd dlogvar =
      dz.array() * noise.array() * 0.5 * f.sd.array() + kl_logvar.array();

  Eigen::MatrixXd denc(2 * s.latent, B);
  denc.topRows(s.latent) = dmean;
  denc.bottomRows(s.latent) = dlogvar;
  g.enc_w2() = denc * f.h1.transpose();
  g.enc_b2() = denc.rowwise().sum();
  const Eigen::MatrixXd dpre1 =
      (p.enc_w2().transpose() * denc).array() * (1.0 - f.h1.array().square());
  g.enc_w1() = dpre1 * f.x.transpose();
  g.enc_b1() = dpre1.rowwise().sum();

  std::copy(g.flat().begin(), g.flat().end(), out.gradient.begin());
  return out;
}

double weighted_elbo(const VaeParams& p, const WeightedBatch& batch, double beta, Rng& rng) {
  check_batch(batch);
  const Eigen::MatrixXd noise = draw_noise(rng, p.shape().latent, batch.molecules.size());
  const Forward f = forward(p, batch.molecules, noise);
  const double n = static_cast<double>(batch.dataset_size);
  const double size = static_cast<double>(batch.molecules.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.molecules.size(); ++i) {
    loss += n * batch.weights[i] / size * (f.reconstruction[i] + beta * f.kl[i]);
  }
  if (!std::isfinite(loss)) throw NumericError("weighted ELBO is not finite");
  return loss;
}

std::vector<double> gradients(const VaeParams& p, const WeightedBatch& batch, double beta,
                              Rng& rng) {
  const Eigen::MatrixXd noise = draw_noise(rng, p.shape().latent, batch.molecules.size());
  return loss_and_gradient(p, batch, beta, noise).gradient;
}

// ---------------------------------------------------------------------------
// Encode / decode

Encoding encode(const VaeParams& p, const Molecule& m) {
  const VaeShape& s = p.shape();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(s.input_size());
  const auto ids = token_ids(m, s);
  for (int pos = 0; pos < s.max_len; ++pos) x(pos * s.vocab + ids[static_cast<std::size_t>(pos)]) = 1.0;
  const Eigen::VectorXd h1 = (p.enc_w1() * x + p.enc_b1()).array().tanh();
  const Eigen::VectorXd enc = p.enc_w2() * h1 + p.enc_b2();
  Encoding e;
  e.mean = enc.head(s.latent);
  e.stddev = (0.5 * enc.tail(s.latent).array()).exp();
  return e;
}

namespace {

Eigen::VectorXd decoder_logits(const VaeParams& p, const LatentPoint& z) {
  if (z.z.size() != p.shape().latent) throw GuardError("latent point has wrong dimension");
  const Eigen::VectorXd h2 = (p.dec_w1() * z.z + p.dec_b1()).array().tanh();
  return p.dec_w2() * h2 + p.dec_b2();
}

}  // namespace

std::string decode_tokens(const VaeParams& p, const LatentPoint& z, bool constrained,
                          DecodeMode mode, Rng* rng) {
  if (mode == DecodeMode::Sample && rng == nullptr) throw GuardError("sample decoding needs an rng");
  const VaeShape& s = p.shape();
  const std::size_t max_len = std::min<std::size_t>(static_cast<std::size_t>(s.max_len), kMaxLength);
  const Eigen::VectorXd logits = decoder_logits(p, z);

  PrefixTracker state;
  std::string out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::array<double, kVocabSize> prob{};
  for (int pos = 0; pos < s.max_len; ++pos) {
    if (state.finished()) break;
    std::array<bool, kVocabSize> ok{};
    double mx = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < kVocabSize; ++t) {
      ok[static_cast<std::size_t>(t)] = !constrained || state.allowed(static_cast<Token>(t), max_len);
      if (ok[static_cast<std::size_t>(t)]) mx = std::max(mx, logits(pos * s.vocab + t));
    }
    int chosen = -1;
    if (mode == DecodeMode::Greedy) {
      for (int t = 0; t < kVocabSize; ++t) {
        if (ok[static_cast<std::size_t>(t)] && logits(pos * s.vocab + t) == mx) {
          chosen = t;
          break;
        }
      }
    } else {
      double total = 0.0;
      for (int t = 0; t < kVocabSize; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        prob[ti] = ok[ti] ? std::exp(logits(pos * s.vocab + t) - mx) : 0.0;
        total += prob[ti];
      }
      double u = unit(*rng) * total;
      for (int t = 0; t < kVocabSize; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        if (!ok[ti]) continue;
        chosen = t;
        u -= prob[ti];
        if (u < 0.0) break;
      }
    }
    const auto tok = static_cast<Token>(chosen);
    if (tok == Token::Pad) break;
    if (constrained) state.push(tok);
    out.push_back(token_char(tok));
  }
  return out;
}

Molecule decode(const VaeParams& p, const LatentPoint& z, DecodeMode mode, Rng* rng) {
  return Molecule(decode_tokens(p, z, true, mode, rng));
}

std::vector<LatentPoint> sample_prior(Rng& rng, std::size_t n, int latent) {
  if (n == 0) throw GuardError("sample_prior: n must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<LatentPoint> out(n);
  for (auto& pt : out) {
    pt.z.resize(latent);
    for (int i = 0; i < latent; ++i) pt.z(i) = normal(rng);
  }
  return out;
}

double reconstruction_accuracy(const VaeParams& p, std::span<const Molecule> molecules) {
  if (molecules.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& m : molecules) {
    if (decode(p, LatentPoint{encode(p, m).mean}) == m) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(molecules.size());
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(VaeParams params, std::span<const Molecule> data, std::span<const double> weights,
                  const TrainConfig& cfg) {
  if (data.size() != weights.size()) throw GuardError("train: data and weights differ in length");
  if (data.empty()) throw GuardError("train: empty dataset");
  if (cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) || cfg.beta < 0.0) {
    throw GuardError("train: invalid configuration");
  }
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(wsum - 1.0) > 1e-9) throw GuardError("train: weights must sum to one");

  const std::size_t n = data.size();
  const std::size_t probe_n = std::min(n, cfg.probe_size);
  Rng probe_rng = substream(cfg.seed, "vae-probe-noise");
  const Eigen::MatrixXd probe_noise = draw_noise(probe_rng, params.shape().latent, probe_n);
  const WeightedBatch probe{data.first(probe_n), weights.first(probe_n), n};
  auto probe_loss = [&](const VaeParams& p) {
    return loss_and_gradient(p, probe, cfg.beta, probe_noise).loss;
  };

  TrainResult result;
  result.probe_loss.push_back(probe_loss(params));
  if (cfg.epochs == 0) {
    result.params = std::move(params);
    return result;
  }

  Rng rng = substream(cfg.seed, "vae-train");
  const std::size_t np = params.flat().size();
  std::vector<double> m1(np, 0.0), m2(np, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Molecule> mols;
  std::vector<double> ws;
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      mols.clear();
      ws.clear();
      for (std::size_t i = start; i < end; ++i) {
        mols.push_back(data[order[i]]);
        ws.push_back(weights[order[i]]);
      }
      const Eigen::MatrixXd noise = draw_noise(rng, params.shape().latent, mols.size());
      LossAndGradient lg;
      try {
        lg = loss_and_gradient(params, WeightedBatch{mols, ws, n}, cfg.beta, noise);
      } catch (const NumericError& e) {
        throw TrainingError(std::string("training diverged: ") + e.what());
      }
      ++step;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      auto flat = params.flat();
      for (std::size_t j = 0; j < np; ++j) {
        const double gj = lg.gradient[j];
        m1[j] = cfg.adam_beta1 * m1[j] + (1.0 - cfg.adam_beta1) * gj;
        m2[j] = cfg.adam_beta2 * m2[j] + (1.0 - cfg.adam_beta2) * gj * gj;
        flat[j] -= cfg.learning_rate * (m1[j] / bc1) / (std::sqrt(m2[j] / bc2) + cfg.adam_epsilon);
      }
    }
    double pl = 0.0;
    try {
      pl = probe_loss(params);
    } catch (const NumericError& e) {
      throw TrainingError(std::string("training diverged: ") + e.what());
    }
    if (!std::isfinite(pl) || !params.all_finite()) throw TrainingError("training diverged");
    result.probe_loss.push_back(pl);
  }
  result.params = std::move(params);
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const VaeParams& p, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "lso-vae-1";
  j["shape"] = {{"max_len", p.shape().max_len},
                {"vocab", p.shape().vocab},
                {"hidden", p.shape().hidden},
                {"latent", p.shape().latent}};
  nlohmann::json tensors = nlohmann::json::object();
  const auto flat = p.flat();
  for (const auto& b : p.blocks()) {
    const std::size_t count = static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.cols);
    tensors[b.name] = {{"rows", b.rows},
                       {"cols", b.cols},
                       {"values", std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                                      flat.begin() + static_cast<std::ptrdiff_t>(b.offset + count))}};
  }
  j["tensors"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

VaeParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format") != "lso-vae-1") throw ConfigError("checkpoint: unknown format");
    VaeShape s;
    s.max_len = j.at("shape").at("max_len").get<int>();
    s.vocab = j.at("shape").at("vocab").get<int>();
    s.hidden = j.at("shape").at("hidden").get<int>();
    s.latent = j.at("shape").at("latent").get<int>();
    VaeParams p(s);
    auto flat = p.flat();
    for (const auto& b : p.blocks()) {
      const auto& t = j.at("tensors").at(b.name);
      const auto& values = t.at("values");
      if (t.at("rows").get<int>() != b.rows || t.at("cols").get<int>() != b.cols ||
          values.size() != static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.cols)) {
        throw ConfigError(std::string("checkpoint: tensor ") + b.name + " does not match shape");
      }
      for (std::size_t i = 0; i < values.size(); ++i) flat[b.offset + i] = values[i].get<double>();
    }
    if (!p.all_finite()) throw ConfigError("checkpoint: non-finite weights");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint " + path.string() + ": " + e.what());
  } catch (const GuardError& e) {
    throw ConfigError("checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace lso
