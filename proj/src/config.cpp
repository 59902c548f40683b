#include "lso/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "lso/errors.hpp"

namespace lso {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw ConfigError("config key \"" + std::string(key) + "\": cannot parse \"" +
                      std::string(text) + "\"");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config key \"" + std::string(key) + "\": expected true or false, got \"" +
                    std::string(text) + "\"");
}

struct Entry {
  std::string key;
  std::string description;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

template <class Field>
Entry number(std::string key, std::string description, Field ExperimentConfig::*field) {
  return {key, std::move(description),
          [field](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<Field>) {
              return format_double(c.*field);
            } else {
              return std::to_string(c.*field);
            }
          },
          [field, key](ExperimentConfig& c, std::string_view v) {
            c.*field = parse_number<Field>(key, v);
          }};
}

template <class Getter>
Entry nested_double(std::string key, std::string description, Getter access) {
  return {key, std::move(description),
          [access](const ExperimentConfig& c) {
            return format_double(access(c));
          },
          [access, key](ExperimentConfig& c, std::string_view v) {
            access(c) = parse_number<double>(key, v);
          }};
}

template <class Getter>
Entry nested_size(std::string key, std::string description, Getter access) {
  return {key, std::move(description),
          [access](const ExperimentConfig& c) {
            return std::to_string(access(c));
          },
          [access, key](ExperimentConfig& c, std::string_view v) {
            using T = std::remove_reference_t<decltype(access(c))>;
            access(c) = parse_number<T>(key, v);
          }};
}

Entry flag(std::string key, std::string description, bool ExperimentConfig::*field) {
  return {key, std::move(description),
          [field](const ExperimentConfig& c) { return std::string(c.*field ? "true" : "false"); },
          [field, key](ExperimentConfig& c, std::string_view v) { c.*field = parse_bool(key, v); }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      number("seed", "master seed; every random stream derives from it", &ExperimentConfig::seed),
      {"variant", "pathway variant: viable, modified or impractical",
       [](const ExperimentConfig& c) { return c.variant; },
       [](ExperimentConfig& c, std::string_view v) {
         PathwayVariant::from_name(v);
         c.variant = std::string(v);
       }},
      number("k", "rank-weighting exponent", &ExperimentConfig::k),
      number("iterations", "retraining iterations after the initial training",
             &ExperimentConfig::iterations),
      number("acquisitions", "molecules acquired per iteration", &ExperimentConfig::acquisitions),
      number("initial_size", "size of the generated initial dataset",
             &ExperimentConfig::initial_size),
      number("min_length", "shortest generated molecule", &ExperimentConfig::min_length),
      number("max_length", "longest generated molecule", &ExperimentConfig::max_length),
      number("retrain_fraction", "fraction of the original dataset resampled for each retrain",
             &ExperimentConfig::retrain_fraction),
      number("n_top", "highest-scoring molecules in the GP fit set", &ExperimentConfig::n_top),
      number("n_random", "uniformly drawn molecules in the GP fit set",
             &ExperimentConfig::n_random),
      number("probe_count", "fixed prior probe points decoded each iteration",
             &ExperimentConfig::probe_count),
      {"objective_source", "pIC50 source for the objective: qsar or oracle",
       [](const ExperimentConfig& c) { return to_string(c.objective_source); },
       [](ExperimentConfig& c, std::string_view v) {
         if (v == "qsar") {
           c.objective_source = ObjectiveSource::Qsar;
         } else if (v == "oracle") {
           c.objective_source = ObjectiveSource::Oracle;
         } else {
           throw ConfigError("config key \"objective_source\": expected qsar or oracle, got \"" +
                             std::string(v) + "\"");
         }
       }},
      flag("weight_initial", "use rank weights (not uniform) for the initial training",
           &ExperimentConfig::weight_initial),
      flag("save_checkpoints", "write a VAE checkpoint per iteration",
           &ExperimentConfig::save_checkpoints),
      number("qsar.size", "oracle-labelled molecules generated for the predictor (80/10/10 split)",
             &ExperimentConfig::qsar_size),
      number("qsar.lambda", "ridge regularization", &ExperimentConfig::qsar_lambda),
      nested_double("pathway.dsb0", "initial DNA double-strand breaks",
                    [](auto& c) -> auto& { return c.pathway.dsb0; }),
      nested_double("pathway.parp_total", "total PARP1 copies",
                    [](auto& c) -> auto& { return c.pathway.parp_total; }),
      nested_double("pathway.p53_total", "total p53 copies",
                    [](auto& c) -> auto& { return c.pathway.p53_total; }),
      nested_double("pathway.procaspase_total", "total procaspase copies",
                    [](auto& c) -> auto& { return c.pathway.procaspase_total; }),
      nested_double("pathway.k_bind_parp", "PARP1 + DSB binding rate",
                    [](auto& c) -> auto& { return c.pathway.k_bind_parp; }),
      nested_double("pathway.k_unbind_parp", "PARP1-DSB dissociation rate",
                    [](auto& c) -> auto& { return c.pathway.k_unbind_parp; }),
      nested_double("pathway.k_repair", "repair rate of PARP1-bound breaks",
                    [](auto& c) -> auto& { return c.pathway.k_repair; }),
      nested_double("pathway.k_bind_p53", "p53 + DSB binding rate",
                    [](auto& c) -> auto& { return c.pathway.k_bind_p53; }),
      nested_double("pathway.k_unbind_p53", "p53-DSB dissociation rate",
                    [](auto& c) -> auto& { return c.pathway.k_unbind_p53; }),
      nested_double("pathway.k_activate", "caspase activation rate by DSB-bound p53",
                    [](auto& c) -> auto& { return c.pathway.k_activate; }),
      nested_double("pathway.t_end", "simulation horizon",
                    [](auto& c) -> auto& { return c.pathway.t_end; }),
      nested_double("pathway.rel_tol", "ODE relative tolerance",
                    [](auto& c) -> auto& { return c.pathway.tolerances.rel; }),
      nested_double("pathway.abs_tol", "ODE absolute tolerance",
                    [](auto& c) -> auto& { return c.pathway.tolerances.abs; }),
      number("pathway.dose_viable", "inhibitor dose (molar) of the viable variant",
             &ExperimentConfig::dose_viable),
      number("pathway.dose_modified", "inhibitor dose (molar) of the modified variant",
             &ExperimentConfig::dose_modified),
      number("pathway.dose_impractical", "inhibitor dose (molar) of the impractical variant",
             &ExperimentConfig::dose_impractical),
      nested_size("vae.hidden", "hidden units in encoder and decoder",
                  [](auto& c) -> auto& { return c.vae.hidden; }),
      nested_size("vae.latent", "latent dimension",
                  [](auto& c) -> auto& { return c.vae.latent; }),
      nested_double("train.learning_rate", "Adam step size",
                    [](auto& c) -> auto& { return c.train.learning_rate; }),
      nested_size("train.batch_size", "minibatch size",
                  [](auto& c) -> auto& { return c.train.batch_size; }),
      number("train.initial_epochs", "epochs of the initial full-dataset training",
             &ExperimentConfig::initial_epochs),
      number("train.retrain_epochs", "epochs of each retraining", &ExperimentConfig::retrain_epochs),
      nested_double("train.beta", "KL weight",
                    [](auto& c) -> auto& { return c.train.beta; }),
      nested_double("train.adam_beta1", "Adam first-moment decay",
                    [](auto& c) -> auto& { return c.train.adam_beta1; }),
      nested_double("train.adam_beta2", "Adam second-moment decay",
                    [](auto& c) -> auto& { return c.train.adam_beta2; }),
      nested_double("train.adam_epsilon", "Adam denominator epsilon",
                    [](auto& c) -> auto& { return c.train.adam_epsilon; }),
      nested_size("bo.pool_size", "EI candidate pool size",
                  [](auto& c) -> auto& { return c.bo.pool_size; }),
      nested_double("bo.perturbation", "stddev of perturbations around top latents",
                    [](auto& c) -> auto& { return c.bo.perturbation; }),
      nested_double("bo.min_separation", "minimum distance between acquired / GP input points",
                    [](auto& c) -> auto& { return c.bo.min_separation; }),
  };
  return table;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string to_string(ObjectiveSource s) { return s == ObjectiveSource::Qsar ? "qsar" : "oracle"; }

PathwayVariant ExperimentConfig::pathway_variant() const {
  PathwayVariant v = PathwayVariant::from_name(variant);
  switch (v.kind) {
    case VariantKind::Viable: v.dose = dose_viable; break;
    case VariantKind::Modified: v.dose = dose_modified; break;
    case VariantKind::Impractical: v.dose = dose_impractical; break;
  }
  return v;
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(std::isfinite(k) && k >= 0.0, "k must be finite and >= 0");
  require(acquisitions >= 1, "acquisitions must be >= 1");
  require(initial_size >= 1, "initial_size must be >= 1");
  require(min_length >= kMinLength && max_length <= kMaxLength && min_length <= max_length,
          "min_length/max_length must lie within [4, 16]");
  require(retrain_fraction > 0.0 && retrain_fraction <= 1.0, "retrain_fraction must lie in (0, 1]");
  require(n_top + n_random >= 2, "n_top + n_random must be >= 2");
  require(n_top + n_random <= initial_size, "n_top + n_random must not exceed initial_size");
  require(probe_count >= 1, "probe_count must be >= 1");
  require(qsar_size >= 10, "qsar.size must be >= 10");
  require(qsar_lambda > 0.0, "qsar.lambda must be > 0");
  require(dose_viable > 0.0 && dose_modified > 0.0 && dose_impractical > 0.0,
          "pathway doses must be > 0");
  try {
    pathway.check();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  require(vae.hidden > 0 && vae.latent > 0, "vae sizes must be positive");
  require(train.learning_rate > 0.0 && train.batch_size > 0 && train.beta >= 0.0,
          "train.learning_rate, train.batch_size must be positive and train.beta >= 0");
  require(train.adam_beta1 >= 0.0 && train.adam_beta1 < 1.0 && train.adam_beta2 >= 0.0 &&
              train.adam_beta2 < 1.0 && train.adam_epsilon > 0.0,
          "Adam coefficients out of range");
  require(bo.pool_size >= acquisitions, "bo.pool_size must be >= acquisitions");
  require(bo.perturbation > 0.0 && bo.min_separation > 0.0,
          "bo.perturbation and bo.min_separation must be > 0");
}

std::vector<ConfigKey> config_reference() {
  const ExperimentConfig defaults;
  std::vector<ConfigKey> out;
  for (const auto& e : entries()) out.push_back({e.key, e.get(defaults), e.description});
  return out;
}

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& e : entries()) {
    if (e.key == key) {
      e.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key \"" + std::string(key) + "\"");
}

void apply_config_text(ExperimentConfig& cfg, std::string_view text, std::string_view origin) {
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key=value");
    try {
      apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg;
  apply_config_text(cfg, ss.str(), path.string());
  return cfg;
}

std::string config_snapshot(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& e : entries()) out += e.key + "=" + e.get(cfg) + "\n";
  return out;
}

}  // namespace lso
