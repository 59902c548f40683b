#include "lso/pathway.hpp"

#include <cmath>
#include <cstdio>

#include "lso/errors.hpp"

namespace lso {

namespace {

enum Species { kD, kPf, kPD, kG, kGD, kC, kCs, kNumSpecies };
using State = std::array<double, kNumSpecies>;

SimState to_sim_state(double t, const State& y) {
  return SimState{t, y[kD], y[kPf], y[kPD], y[kG], y[kGD], y[kC], y[kCs]};
}

}  // namespace

void PathwayParams::check() const {
  const double fields[] = {dsb0,        parp_total,     p53_total,   procaspase_total,
                           k_bind_parp, k_unbind_parp,  k_repair,    k_bind_p53,
                           k_unbind_p53, k_activate,    t_end,       tolerances.rel,
                           tolerances.abs};
  for (double v : fields) {
    if (!(v > 0.0) || !std::isfinite(v)) throw GuardError("pathway parameters must all be > 0");
  }
}

PathwayVariant PathwayVariant::from_name(std::string_view name) {
  if (name == "viable") return viable();
  if (name == "modified") return modified();
  if (name == "impractical") return impractical();
  throw ConfigError("unknown pathway variant \"" + std::string(name) +
                    "\" (expected viable, modified or impractical)");
}

std::string PathwayVariant::name() const {
  switch (kind) {
    case VariantKind::Viable: return "viable";
    case VariantKind::Modified: return "modified";
    case VariantKind::Impractical: return "impractical";
  }
  return "unknown";
}

double occupancy(double pic50, double dose) {
  if (!(dose > 0.0)) throw GuardError("occupancy: dose must be > 0");
  // dose / (dose + 10^-p) = 1 / (1 + 10^(-p - log10 dose)), a logistic in p.
  const double x = -pic50 - std::log10(dose);
  if (x > 300.0) return 0.0;
  return 1.0 / (1.0 + std::pow(10.0, x));
}

SimResult simulate(const PathwayParams& p, double phi, int samples) {
  p.check();
  if (!(phi >= 0.0 && phi <= 1.0)) throw GuardError("simulate: phi must lie in [0, 1]");

  auto rhs = [&p](double, const State& y, State& dy) {
    const double r1 = p.k_bind_parp * y[kPf] * y[kD];
    const double r2 = p.k_unbind_parp * y[kPD];
    const double r3 = p.k_repair * y[kPD];
    const double r4 = p.k_bind_p53 * y[kG] * y[kD];
    const double r5 = p.k_unbind_p53 * y[kGD];
    const double r6 = p.k_activate * y[kGD] * y[kC];
    dy[kD] = -r1 + r2 - r4 + r5;
    dy[kPf] = -r1 + r2 + r3;
    dy[kPD] = r1 - r2 - r3;
    dy[kG] = -r4 + r5;
    dy[kGD] = r4 - r5;
    dy[kC] = -r6;
    dy[kCs] = r6;
  };

  State y{};
  y[kD] = p.dsb0;
  y[kPf] = p.parp_total * (1.0 - phi);
  y[kG] = p.p53_total;
  y[kC] = p.procaspase_total;

  SimResult result;
  std::vector<double> stops;
  if (samples > 0) {
    result.trajectory.reserve(static_cast<std::size_t>(samples) + 1);
    result.trajectory.push_back(to_sim_state(0.0, y));
    for (int i = 1; i <= samples; ++i) stops.push_back(p.t_end * i / samples);
    stops.back() = p.t_end;
  }
  const State yend = ode::integrate_dopri5(
      rhs, y, 0.0, p.t_end, p.tolerances, stops,
      [&](double t, const State& s) { result.trajectory.push_back(to_sim_state(t, s)); },
      &result.stats);
  result.final_state = to_sim_state(p.t_end, yend);
  return result;
}

double therapeutic_score(double pic50, const PathwayVariant& variant, const PathwayParams& params) {
  return simulate(params, occupancy(pic50, variant.dose)).final_state.caspase_active;
}

std::vector<DosePoint> dose_response(const PathwayVariant& variant, const std::vector<double>& grid,
                                     const PathwayParams& params) {
  if (grid.empty()) throw GuardError("dose_response: grid must be non-empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] < grid[i - 1]) throw GuardError("dose_response: grid must be sorted ascending");
  }
  std::vector<DosePoint> out;
  out.reserve(grid.size());
  for (double x : grid) out.push_back({x, therapeutic_score(x, variant, params)});
  return out;
}

std::vector<double> pic50_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw GuardError("pic50_grid: need step > 0 and hi >= lo");
  std::vector<double> g;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) g.push_back(lo + static_cast<double>(i) * step);
  return g;
}

std::string dose_response_csv(const std::vector<DosePoint>& points) {
  std::string out = "pic50,score\n";
  char buf[96];
  for (const auto& pt : points) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g\n", pt.pic50, pt.score);
    out += buf;
  }
  return out;
}

}  // namespace lso
