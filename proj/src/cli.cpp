#include "lso/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lso/config.hpp"
#include "lso/errors.hpp"
#include "lso/looper.hpp"
#include "lso/pathway.hpp"
#include "lso/qsar.hpp"
#include "lso/report.hpp"

namespace lso {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config_path, "flat key=value configuration file");
  sub->add_option("--seed", o.seed, "override the configured master seed");
  sub->add_option("--out-dir", o.out_dir, "directory for output files");
  sub->add_option("--set", o.sets, "override one configuration key (key=value), repeatable");
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got \"" + kv + "\"");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

std::string default_path(const CommonOptions& o, const std::string& name) {
  return o.out_dir.empty() ? std::string() : (fs::path(o.out_dir) / name).string();
}

std::string g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

RidgeModel fit_default_model(const ExperimentConfig& cfg, std::vector<MetricsRow>* metrics) {
  Rng data_rng = substream(cfg.seed, "qsar-data");
  Rng split_rng = substream(cfg.seed, "qsar-split");
  const LabeledSet labeled = make_oracle_set(data_rng, cfg.qsar_size);
  const Split parts = split(labeled, split_rng);
  RidgeModel model = fit_ridge(parts.train, cfg.qsar_lambda);
  if (metrics) {
    *metrics = {{"train", evaluate(model, parts.train)},
                {"validation", evaluate(model, parts.validation)},
                {"test", evaluate(model, parts.test)}};
  }
  return model;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pathway-guided latent space optimization on a toy molecule language", "lso"};
  app.require_subcommand(1);

  CommonOptions gen_common, dr_common, qsar_common, score_common, run_common, report_common;

  auto* gen = app.add_subcommand("gen-data", "generate a random molecule dataset");
  add_common(gen, gen_common);
  std::optional<std::size_t> gen_count;
  bool gen_pic50 = false;
  std::string gen_out;
  gen->add_option("--count", gen_count, "number of molecules (default: initial_size)");
  gen->add_flag("--with-pic50", gen_pic50, "append the oracle pIC50 as a tab-separated column");
  gen->add_option("--out", gen_out, "output file (default: OUT_DIR/dataset.txt or stdout)");

  auto* dr = app.add_subcommand("dose-response", "therapeutic score across a pIC50 grid");
  add_common(dr, dr_common);
  std::string dr_variant, dr_out;
  double dr_min = 0.0, dr_max = 12.0, dr_step = 0.25;
  dr->add_option("--variant", dr_variant, "viable, modified or impractical (default: config)");
  dr->add_option("--min", dr_min, "first grid point");
  dr->add_option("--max", dr_max, "last grid point");
  dr->add_option("--step", dr_step, "grid spacing");
  dr->add_option("--out", dr_out, "output CSV (default: OUT_DIR/dose_response_<variant>.csv or stdout)");

  auto* fq = app.add_subcommand("fit-qsar", "fit and persist the ridge potency model");
  add_common(fq, qsar_common);
  std::string fq_data;
  fq->add_option("--data", fq_data, "dataset file; unlabelled lines get oracle labels");

  auto* sc = app.add_subcommand("score", "pIC50, therapeutic score and apoptosis flag of a molecule");
  add_common(sc, score_common);
  std::string sc_molecule, sc_source, sc_model, sc_variant;
  sc->add_option("--molecule", sc_molecule, "token string")->required();
  sc->add_option("--source", sc_source, "qsar or oracle (default: config)");
  sc->add_option("--model", sc_model, "ridge model JSON (default: fit from the config)");
  sc->add_option("--variant", sc_variant, "pathway variant (default: config)");

  auto* run = app.add_subcommand("run", "run the weighted-retraining experiment");
  add_common(run, run_common);

  auto* rep = app.add_subcommand("report", "aggregate iteration CSVs into per-k tables");
  add_common(rep, report_common);
  std::string rep_run, rep_out;
  rep->add_option("--run", rep_run, "run directory, or a directory of run directories")->required();
  rep->add_option("--out", rep_out, "output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "lso: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      const ExperimentConfig cfg = resolve_config(gen_common);
      Rng rng = substream(cfg.seed, "dataset");
      std::vector<DatasetEntry> entries;
      const std::size_t n = gen_count.value_or(cfg.initial_size);
      for (std::size_t i = 0; i < n; ++i) {
        Molecule m = random_molecule(rng, cfg.min_length, cfg.max_length);
        std::optional<double> label;
        if (gen_pic50) label = oracle_pic50(m);
        entries.push_back({std::move(m), label});
      }
      std::string path = gen_out.empty() ? default_path(gen_common, "dataset.txt") : gen_out;
      if (path.empty()) {
        for (const auto& e : entries) {
          out << e.molecule.str();
          if (e.score) out << '\t' << g6(*e.score);
          out << '\n';
        }
      } else {
        if (const auto parent = fs::path(path).parent_path(); !parent.empty()) {
          fs::create_directories(parent);
        }
        write_dataset(path, entries);
      }
    } else if (dr->parsed()) {
      ExperimentConfig cfg = resolve_config(dr_common);
      if (!dr_variant.empty()) apply_setting(cfg, "variant", dr_variant);
      const PathwayVariant variant = cfg.pathway_variant();
      const auto points = dose_response(variant, pic50_grid(dr_min, dr_max, dr_step), cfg.pathway);
      const std::string path =
          dr_out.empty() ? default_path(dr_common, "dose_response_" + variant.name() + ".csv") : dr_out;
      emit(dose_response_csv(points), path, out);
    } else if (fq->parsed()) {
      const ExperimentConfig cfg = resolve_config(qsar_common);
      std::vector<MetricsRow> metrics;
      RidgeModel model;
      if (fq_data.empty()) {
        model = fit_default_model(cfg, &metrics);
      } else {
        LabeledSet data;
        for (auto& e : read_dataset(fq_data)) {
          data.labels.push_back(e.score.value_or(oracle_pic50(e.molecule)));
          data.molecules.push_back(std::move(e.molecule));
        }
        Rng split_rng = substream(cfg.seed, "qsar-split");
        const Split parts = split(data, split_rng);
        model = fit_ridge(parts.train, cfg.qsar_lambda);
        metrics = {{"train", evaluate(model, parts.train)},
                   {"validation", evaluate(model, parts.validation)},
                   {"test", evaluate(model, parts.test)}};
      }
      const fs::path dir = qsar_common.out_dir.empty() ? fs::path(".") : fs::path(qsar_common.out_dir);
      fs::create_directories(dir);
      save_model(model, dir / "qsar_model.json");
      const std::string csv = metrics_csv(metrics);
      emit(csv, (dir / "qsar_metrics.csv").string(), out);
      out << csv;
    } else if (sc->parsed()) {
      ExperimentConfig cfg = resolve_config(score_common);
      if (!sc_source.empty()) apply_setting(cfg, "objective_source", sc_source);
      if (!sc_variant.empty()) apply_setting(cfg, "variant", sc_variant);
      if (!validate(sc_molecule)) {
        err << "lso: invalid molecule \"" << sc_molecule << "\"\n";
        return kExitUsage;
      }
      std::optional<RidgeModel> model;
      if (cfg.objective_source == ObjectiveSource::Qsar) {
        model = sc_model.empty() ? fit_default_model(cfg, nullptr) : load_model(sc_model);
      }
      Objective objective(cfg.objective_source, cfg.pathway_variant(), cfg.pathway, model);
      const ScoredMolecule s = objective.evaluate(Molecule(sc_molecule));
      out << "molecule=" << s.molecule.str() << '\n'
          << "source=" << to_string(cfg.objective_source) << '\n'
          << "variant=" << cfg.variant << '\n'
          << "pic50=" << g6(s.pic50) << '\n'
          << "score=" << g6(s.score) << '\n'
          << "apoptosis=" << (apoptosis_triggered(s.score) ? "true" : "false") << '\n';
    } else if (run->parsed()) {
      const ExperimentConfig cfg = resolve_config(run_common);
      if (run_common.out_dir.empty()) throw ConfigError("run: --out-dir is required");
      const auto result = run_experiment(cfg, fs::path(run_common.out_dir));
      const auto& last = result.records.back();
      out << "iterations=" << result.records.size() << " final_median=" << g6(last.summary.median)
          << " final_unique=" << last.unique_count << '\n';
    } else if (rep->parsed()) {
      emit(comparison_table(collect_iteration_rows(rep_run)), rep_out, out);
    }
  } catch (const ConfigError& e) {
    err << "lso: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "lso: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace lso
