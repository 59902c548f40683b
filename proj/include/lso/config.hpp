#pragma once

// Experiment configuration and its flat `key=value` file format.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lso/bayesopt.hpp"
#include "lso/pathway.hpp"
#include "lso/vae.hpp"

namespace lso {

enum class ObjectiveSource { Qsar, Oracle };

struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::string variant = "viable";
  double k = 6.0;
  std::size_t iterations = 10;
  std::size_t acquisitions = 50;
  std::size_t initial_size = 5000;
  std::size_t min_length = kMinLength;
  std::size_t max_length = kMaxLength;
  double retrain_fraction = 0.10;
  std::size_t n_top = 200;
  std::size_t n_random = 800;
  std::size_t probe_count = 5000;
  ObjectiveSource objective_source = ObjectiveSource::Qsar;
  bool weight_initial = true;
  bool save_checkpoints = true;

  std::size_t qsar_size = 2000;
  double qsar_lambda = 1e-3;

  PathwayParams pathway{};
  double dose_viable = 1e-6;
  double dose_modified = 1e-4;
  double dose_impractical = 1e-1;

  VaeShape vae{};
  TrainConfig train{};  // train.epochs is ignored; see the two fields below
  std::size_t initial_epochs = 50;
  std::size_t retrain_epochs = 10;

  AcquisitionConfig bo{};  // bo.batch_size mirrors `acquisitions`

  /// The named variant with its configured dose.
  PathwayVariant pathway_variant() const;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

struct ConfigKey {
  std::string key;
  std::string default_value;
  std::string description;
};

/// Every recognised key with its default, in snapshot order.
std::vector<ConfigKey> config_reference();

/// Sets one key from its textual value. Unknown keys and unparsable values
/// raise ConfigError naming the key.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Applies `key=value` lines to `cfg`. Blank lines and `#` comments are
/// ignored; errors name the line.
void apply_config_text(ExperimentConfig& cfg, std::string_view text, std::string_view origin);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration as `key=value` lines.
std::string config_snapshot(const ExperimentConfig& cfg);

std::string to_string(ObjectiveSource s);

}  // namespace lso
