#include "lso/looper.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "lso/errors.hpp"
#include "lso/weighting.hpp"

namespace lso {

// ---------------------------------------------------------------------------
// Objective

Objective::Objective(ObjectiveSource source, PathwayVariant variant, PathwayParams params,
                     std::optional<RidgeModel> model)
    : source_(source), variant_(variant), params_(params), model_(std::move(model)) {
  if (source_ == ObjectiveSource::Qsar && !model_) {
    throw GuardError("objective: qsar source needs a fitted model");
  }
}

ScoredMolecule Objective::evaluate(const Molecule& m) {
  if (auto it = memo_.find(m.str()); it != memo_.end()) {
    ++hits_;
    return it->second;
  }
  const double pic50 = source_ == ObjectiveSource::Qsar ? predict(*model_, m) : oracle_pic50(m);
  auto [sit, inserted] = by_pic50_.try_emplace(pic50, 0.0);
  if (inserted) sit->second = therapeutic_score(pic50, variant_, params_);
  ScoredMolecule s{m, pic50, sit->second};
  memo_.emplace(m.str(), s);
  return s;
}

// ---------------------------------------------------------------------------
// Fit-set selection and statistics

std::vector<std::size_t> select_bo_fit_set(std::span<const ScoredMolecule> data, std::size_t n_top,
                                           std::size_t n_random, Rng& rng) {
  if (n_top + n_random > data.size()) {
    throw GuardError("select_bo_fit_set: n_top + n_random exceeds the data size");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (data[a].score != data[b].score) return data[a].score > data[b].score;
    return data[a].molecule.str() < data[b].molecule.str();
  });
  std::vector<std::size_t> out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_top));
  std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(n_top), order.end());
  std::sort(rest.begin(), rest.end());
  // Partial Fisher-Yates: the first n_random slots become a uniform sample.
  for (std::size_t i = 0; i < n_random; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, rest.size() - 1);
    std::swap(rest[i], rest[pick(rng)]);
    out.push_back(rest[i]);
  }
  return out;
}

ScoreSummary summarize(std::span<const double> values) {
  if (values.empty()) throw GuardError("summarize: no values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  ScoreSummary s;
  s.min = v.front();
  s.max = v.back();
  s.median = quantile(0.5);
  s.p90 = quantile(0.9);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  return s;
}

ProbeResult probe_latent(const VaeParams& params, std::span<const LatentPoint> probes,
                         Objective& objective) {
  ProbeResult r;
  r.decoded.reserve(probes.size());
  std::unordered_set<std::string> unique;
  std::vector<double> scores;
  scores.reserve(probes.size());
  for (const auto& z : probes) {
    r.decoded.push_back(objective.evaluate(decode(params, z, DecodeMode::Greedy)));
    unique.insert(r.decoded.back().molecule.str());
    scores.push_back(r.decoded.back().score);
  }
  r.summary = summarize(scores);
  r.unique_count = unique.size();
  return r;
}

// ---------------------------------------------------------------------------
// Output helpers

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<double> scores_of(std::span<const ScoredMolecule> xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const auto& s : xs) out.push_back(s.score);
  return out;
}

std::vector<Molecule> molecules_of(std::span<const ScoredMolecule> xs) {
  std::vector<Molecule> out;
  out.reserve(xs.size());
  for (const auto& s : xs) out.push_back(s.molecule);
  return out;
}

}  // namespace

std::string iteration_row(const IterationRecord& r, double k, const std::string& variant) {
  return std::to_string(r.iteration) + "," + shortest(k) + "," + variant + "," + fmt(r.summary.min) +
         "," + fmt(r.summary.median) + "," + fmt(r.summary.mean) + "," + fmt(r.summary.p90) + "," +
         fmt(r.summary.max) + "," + std::to_string(r.unique_count) + "," +
         std::to_string(r.train_size);
}

// ---------------------------------------------------------------------------
// Experiment

namespace {

class RunWriter {
 public:
  explicit RunWriter(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
    if (dir_) std::filesystem::create_directories(*dir_);
  }

  bool enabled() const { return dir_.has_value(); }
  std::filesystem::path path(const std::string& name) const { return *dir_ / name; }
  void write(const std::string& name, const std::string& text) const {
    if (dir_) write_file(path(name), text);
  }

 private:
  std::optional<std::filesystem::path> dir_;
};

TrainConfig stage_train_config(const ExperimentConfig& cfg, std::size_t epochs,
                               std::uint64_t stage) {
  TrainConfig tc = cfg.train;
  tc.epochs = epochs;
  Rng r = substream(cfg.seed, "train", stage);
  tc.seed = r();
  return tc;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& out_dir) {
  cfg.validate();
  const RunWriter out(out_dir);
  const PathwayVariant variant = cfg.pathway_variant();
  std::string stage = "setup";
  ExperimentResult result;

  std::string iterations_csv = std::string(kIterationsHeader) + "\n";
  std::string acquired_csv = "iter,molecule,pic50,score\n";

  try {
    out.write("config.snapshot", config_snapshot(cfg));

    // Predictor.
    std::optional<RidgeModel> model;
    if (cfg.objective_source == ObjectiveSource::Qsar) {
      stage = "qsar";
      Rng data_rng = substream(cfg.seed, "qsar-data");
      Rng split_rng = substream(cfg.seed, "qsar-split");
      const LabeledSet labeled = make_oracle_set(data_rng, cfg.qsar_size);
      const Split parts = split(labeled, split_rng);
      model = fit_ridge(parts.train, cfg.qsar_lambda);
      std::vector<MetricsRow> rows = {{"train", evaluate(*model, parts.train)}};
      if (parts.validation.size() > 1) rows.push_back({"validation", evaluate(*model, parts.validation)});
      if (parts.test.size() > 1) rows.push_back({"test", evaluate(*model, parts.test)});
      result.qsar_metrics = rows;
      if (out.enabled()) save_model(*model, out.path("qsar_model.json"));
      out.write("qsar_metrics.csv", metrics_csv(rows));
    }
    Objective objective(cfg.objective_source, variant, cfg.pathway, model);

    // Initial dataset.
    stage = "dataset";
    Rng dataset_rng = substream(cfg.seed, "dataset");
    std::vector<ScoredMolecule> original;
    original.reserve(cfg.initial_size);
    for (std::size_t i = 0; i < cfg.initial_size; ++i) {
      original.push_back(
          objective.evaluate(random_molecule(dataset_rng, cfg.min_length, cfg.max_length)));
    }
    std::vector<ScoredMolecule> dataset = original;
    std::vector<ScoredMolecule> acquired_pool;

    // Iteration 0: full-dataset training.
    stage = "train-0";
    Rng init_rng = substream(cfg.seed, "vae-init");
    VaeParams params = VaeParams::random(cfg.vae, init_rng);
    {
      const auto mols = molecules_of(original);
      std::vector<double> w;
      if (cfg.weight_initial) {
        w = rank_weights(scores_of(original), cfg.k);
      } else {
        w.assign(original.size(), 1.0 / static_cast<double>(original.size()));
      }
      params = train(std::move(params), mols, w, stage_train_config(cfg, cfg.initial_epochs, 0)).params;
    }

    Rng probe_rng = substream(cfg.seed, "probes");
    const std::vector<LatentPoint> probes = sample_prior(probe_rng, cfg.probe_count, cfg.vae.latent);

    auto finish_iteration = [&](IterationRecord rec) {
      stage = "probe-" + std::to_string(rec.iteration);
      ProbeResult pr = probe_latent(params, probes, objective);
      rec.summary = pr.summary;
      rec.unique_count = pr.unique_count;
      rec.probes = std::move(pr.decoded);
      iterations_csv += iteration_row(rec, cfg.k, variant.name()) + "\n";
      out.write("iterations.csv", iterations_csv);
      out.write("probes_iter" + std::to_string(rec.iteration) + ".csv",
                "probe_id,molecule,pic50,score\n" + [&] {
                  std::string body;
                  for (std::size_t i = 0; i < rec.probes.size(); ++i) {
                    const auto& s = rec.probes[i];
                    body += std::to_string(i) + "," + s.molecule.str() + "," + fmt(s.pic50) + "," +
                            fmt(s.score) + "\n";
                  }
                  return body;
                }());
      if (cfg.save_checkpoints && out.enabled()) {
        save_checkpoint(params, out.path("vae_iter" + std::to_string(rec.iteration) + ".json"));
      }
      result.records.push_back(std::move(rec));
    };

    {
      IterationRecord rec;
      rec.iteration = 0;
      rec.train_size = original.size();
      finish_iteration(std::move(rec));
    }

    const auto subset_size = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(cfg.retrain_fraction * static_cast<double>(original.size()))));
    AcquisitionConfig acq = cfg.bo;
    acq.batch_size = cfg.acquisitions;

    for (std::size_t t = 1; t <= cfg.iterations; ++t) {
      IterationRecord rec;
      rec.iteration = t;

      // (a) weighted retraining on a fresh subset plus everything acquired.
      stage = "train-" + std::to_string(t);
      Rng subset_rng = substream(cfg.seed, "subset", t);
      std::vector<std::size_t> idx(original.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::vector<ScoredMolecule> train_set;
      train_set.reserve(subset_size + acquired_pool.size());
      for (std::size_t i = 0; i < subset_size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(subset_rng)]);
        train_set.push_back(original[idx[i]]);
      }
      train_set.insert(train_set.end(), acquired_pool.begin(), acquired_pool.end());
      rec.train_size = train_set.size();
      {
        const auto mols = molecules_of(train_set);
        const auto w = rank_weights(scores_of(train_set), cfg.k);
        params = train(std::move(params), mols, w, stage_train_config(cfg, cfg.retrain_epochs, t)).params;
      }

      // (b) GP on encodings of the fit set.
      stage = "bo-" + std::to_string(t);
      Rng bo_rng = substream(cfg.seed, "bo", t);
      const auto fit_idx = select_bo_fit_set(dataset, cfg.n_top, cfg.n_random, bo_rng);
      std::vector<LatentPoint> X;
      std::vector<double> y;
      std::vector<LatentPoint> top;
      const double sep2 = cfg.bo.min_separation * cfg.bo.min_separation;
      for (std::size_t j = 0; j < fit_idx.size(); ++j) {
        const auto& s = dataset[fit_idx[j]];
        LatentPoint z{encode(params, s.molecule).mean};
        const bool dup = std::any_of(X.begin(), X.end(), [&](const LatentPoint& o) {
          return (o.z - z.z).squaredNorm() < sep2;
        });
        if (dup) continue;
        if (j < cfg.n_top) top.push_back(z);
        X.push_back(std::move(z));
        y.push_back(s.score);
      }
      const GpModel gp = fit_gp(X, y, GpGrid::standard(), cfg.bo.min_separation);

      // (c) acquire, decode, score.
      const auto batch = acquire_batch(gp, acq, top, bo_rng);
      for (const auto& z : batch) {
        ScoredMolecule s = objective.evaluate(decode(params, z, DecodeMode::Greedy));
        acquired_csv += std::to_string(t) + "," + s.molecule.str() + "," + fmt(s.pic50) + "," +
                        fmt(s.score) + "\n";
        rec.acquired.push_back(s);
        acquired_pool.push_back(s);
        dataset.push_back(std::move(s));
      }
      out.write("acquired.csv", acquired_csv);

      // (d) probe.
      finish_iteration(std::move(rec));
    }
    out.write("acquired.csv", acquired_csv);
    result.dataset_size = dataset.size();
    out.write("manifest.txt", "status=complete\niterations=" +
                                  std::to_string(result.records.size()) + "\n");
  } catch (const std::exception& e) {
    if (out.enabled()) {
      try {
        out.write("manifest.txt", "status=failed\nstage=" + stage + "\nerror=" + e.what() +
                                      "\ncompleted_iterations=" +
                                      std::to_string(result.records.size()) + "\n");
      } catch (...) {
      }
    }
    throw;
  }
  return result;
}

}  // namespace lso
