#pragma once

// Periodic weighted retraining with latent-space Bayesian optimization.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lso/config.hpp"
#include "lso/qsar.hpp"

namespace lso {

struct ScoredMolecule {
  Molecule molecule;
  double pic50 = 0.0;
  double score = 0.0;
};

/// Two-stage objective: pIC50 from the ridge predictor (or the oracle), then
/// the pathway simulation. Results are memoized per molecule, and
/// simulations per distinct pIC50 value.
class Objective {
 public:
  Objective(ObjectiveSource source, PathwayVariant variant, PathwayParams params,
            std::optional<RidgeModel> model = std::nullopt);

  ScoredMolecule evaluate(const Molecule& m);
  double operator()(const Molecule& m) { return evaluate(m).score; }

  std::size_t memo_hits() const noexcept { return hits_; }
  std::size_t memo_size() const noexcept { return memo_.size(); }

 private:
  ObjectiveSource source_;
  PathwayVariant variant_;
  PathwayParams params_;
  std::optional<RidgeModel> model_;
  std::unordered_map<std::string, ScoredMolecule> memo_;
  std::map<double, double> by_pic50_;
  std::size_t hits_ = 0;
};

/// Indices of the n_top best entries (ties broken by token string) followed
/// by n_random uniform draws without replacement from the rest.
std::vector<std::size_t> select_bo_fit_set(std::span<const ScoredMolecule> data, std::size_t n_top,
                                           std::size_t n_random, Rng& rng);

struct ScoreSummary {
  double min = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double p90 = 0.0;  // linear interpolation between order statistics
  double max = 0.0;
};

ScoreSummary summarize(std::span<const double> values);

struct ProbeResult {
  std::vector<ScoredMolecule> decoded;  // in probe order
  ScoreSummary summary;
  std::size_t unique_count = 0;
};

/// Greedy constrained decode of every probe point, scored by `objective`.
ProbeResult probe_latent(const VaeParams& params, std::span<const LatentPoint> probes,
                         Objective& objective);

struct IterationRecord {
  std::size_t iteration = 0;
  ScoreSummary summary;
  std::size_t unique_count = 0;
  std::size_t train_size = 0;
  std::vector<ScoredMolecule> acquired;
  std::vector<ScoredMolecule> probes;
};

struct ExperimentResult {
  std::vector<IterationRecord> records;
  std::optional<std::vector<MetricsRow>> qsar_metrics;
  std::size_t dataset_size = 0;  // initial + all acquisitions
};

/// Runs the full loop. With `out_dir` set, writes config.snapshot,
/// iterations.csv, probes_iter{t}.csv, acquired.csv, the predictor files and
/// per-iteration checkpoints; a failed run leaves manifest.txt describing
/// the failing stage before the exception propagates.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt);

inline constexpr const char* kIterationsHeader =
    "iter,k,variant,min,median,mean,p90,max,unique_count,train_size";

std::string iteration_row(const IterationRecord& r, double k, const std::string& variant);

}  // namespace lso
