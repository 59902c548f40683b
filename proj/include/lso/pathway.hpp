#pragma once

// Rule-based PARP1/p53 competition model. Six mass-action reactions over
// seven species:
//
//   (r1) P_f + D  -> PD          k_bind_parp
//   (r2) PD       -> P_f + D     k_unbind_parp
//   (r3) PD       -> P_f         k_repair       (break repaired and removed)
//   (r4) G + D    -> GD          k_bind_p53
//   (r5) GD       -> G + D       k_unbind_p53
//   (r6) GD + C   -> GD + C*     k_activate     (p53 at damage activates caspase)
//
// An inhibitor removes a fraction phi of PARP1 from the active pool before
// the simulation starts. The therapeutic score is activated caspase C* at
// t_end.

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "lso/ode.hpp"

namespace lso {

struct PathwayParams {
  double dsb0 = 500.0;              // initial DNA double-strand breaks
  double parp_total = 1000.0;
  double p53_total = 1000.0;
  double procaspase_total = 15000.0;
  double k_bind_parp = 1e-3;        // k1, per copy per time
  double k_unbind_parp = 1e-2;      // k2
  double k_repair = 5e-2;           // k3
  double k_bind_p53 = 1e-4;         // k4, per copy per time
  double k_unbind_p53 = 1e-2;       // k5
  double k_activate = 2e-5;         // k6, per copy per time
  double t_end = 600.0;
  ode::Tolerances tolerances{};

  /// Throws GuardError unless every field is strictly positive.
  void check() const;
};

enum class VariantKind { Viable, Modified, Impractical };

struct PathwayVariant {
  VariantKind kind = VariantKind::Viable;
  double dose = 1e-6;  // molar

  static PathwayVariant viable() { return {VariantKind::Viable, 1e-6}; }
  static PathwayVariant modified() { return {VariantKind::Modified, 1e-4}; }
  static PathwayVariant impractical() { return {VariantKind::Impractical, 1e-1}; }
  /// "viable" | "modified" | "impractical"; throws ConfigError otherwise.
  static PathwayVariant from_name(std::string_view name);

  std::string name() const;
};

struct SimState {
  double t = 0.0;
  double dsb = 0.0;            // D, free breaks
  double parp_free = 0.0;      // P_f
  double parp_bound = 0.0;     // PD
  double p53_free = 0.0;       // G
  double p53_bound = 0.0;      // GD
  double procaspase = 0.0;     // C
  double caspase_active = 0.0; // C*
};

struct SimResult {
  SimState final_state;
  std::vector<SimState> trajectory;  // t = 0 followed by the requested samples
  ode::Stats stats;
};

/// Equilibrium fraction of PARP1 occupied by an inhibitor of the given
/// potency: dose / (dose + 10^-pIC50). Computed in a form that stays
/// accurate for extreme pIC50.
double occupancy(double pic50, double dose);

/// Integrates the network with the inactive fraction `phi` of PARP1 removed.
/// `samples` > 0 additionally records the state at that many evenly spaced
/// times in (0, t_end]. Throws IntegrationError on solver failure.
SimResult simulate(const PathwayParams& params, double phi, int samples = 0);

/// C*(t_end) for a compound of potency `pic50` under `variant`.
double therapeutic_score(double pic50, const PathwayVariant& variant,
                         const PathwayParams& params = {});

inline constexpr double kApoptosisThreshold = 5000.0;

/// Activated caspase strictly above 5000 copies triggers apoptosis.
inline bool apoptosis_triggered(double score) { return score > kApoptosisThreshold; }

struct DosePoint {
  double pic50;
  double score;
};

/// Scores on an ascending, non-empty pIC50 grid, in grid order.
std::vector<DosePoint> dose_response(const PathwayVariant& variant, const std::vector<double>& grid,
                                     const PathwayParams& params = {});

/// Inclusive grid lo, lo+step, ..., hi computed as lo + i*step.
std::vector<double> pic50_grid(double lo, double hi, double step);

/// Header `pic50,score`, six significant digits.
std::string dose_response_csv(const std::vector<DosePoint>& points);

}  // namespace lso
