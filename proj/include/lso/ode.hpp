#pragma once

// Adaptive Dormand-Prince 5(4) integrator for small fixed-size systems.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "lso/errors.hpp"

namespace lso::ode {

struct Tolerances {
  double rel = 1e-8;
  double abs = 1e-10;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

namespace detail {

// Butcher tableau of DOPRI5 (Hairer, Norsett & Wanner).
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                        b6 = 11.0 / 84;
// b - b_hat (difference between the 5th and embedded 4th order weights)
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

template <std::size_t N>
std::vector<double> to_vector(const std::array<double, N>& y) {
  return std::vector<double>(y.begin(), y.end());
}

}  // namespace detail

/// Integrates dy/dt = rhs(t, y) from t0 to t1 (t1 > t0), landing exactly on
/// each of `stops` (sorted, inside (t0, t1]) and calling observe(t, y) there.
///
/// After every accepted step, components that dipped below zero by no more
/// than tol.abs are clipped to zero; larger excursions raise IntegrationError,
/// as do step-size underflow and exceeding `max_steps`.
template <std::size_t N, class Rhs, class Observer>
std::array<double, N> integrate_dopri5(Rhs&& rhs, std::array<double, N> y, double t0, double t1,
                                       const Tolerances& tol, const std::vector<double>& stops,
                                       Observer&& observe, Stats* stats = nullptr,
                                       std::size_t max_steps = 5'000'000) {
  using namespace detail;
  using State = std::array<double, N>;

  auto fail = [&](const std::string& why, double t, const State& s) {
    throw IntegrationError(why + " at t=" + std::to_string(t), t, to_vector(s));
  };
  auto scaled_norm = [&](const State& err, const State& ya, const State& yb) {
    double acc = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = tol.abs + tol.rel * std::max(std::abs(ya[i]), std::abs(yb[i]));
      const double r = err[i] / sc;
      acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(N));
  };

  double t = t0;
  State k1, k2, k3, k4, k5, k6, k7, tmp, ynew, err;
  rhs(t, y, k1);

  // Initial step guess from the local scale of y and y'.
  double h;
  {
    const double d0 = scaled_norm(y, y, y);
    const double d1 = scaled_norm(k1, y, y);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, t1 - t0);
  }

  std::size_t stop_idx = 0;
  std::size_t steps = 0;
  bool last_rejected = false;
  const double eps = std::numeric_limits<double>::epsilon();

  while (t < t1) {
    if (++steps > max_steps) fail("maximum step count exceeded", t, y);
    const double target = stop_idx < stops.size() ? stops[stop_idx] : t1;
    bool hits_target = false;
    double step = h;
    if (t + step >= target) {
      step = target - t;
      hits_target = true;
    }
    if (step < 16.0 * eps * std::max(1.0, std::abs(t))) fail("step size underflow", t, y);

    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + step * a21 * k1[i];
    rhs(t + c2 * step, tmp, k2);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + step * (a31 * k1[i] + a32 * k2[i]);
    rhs(t + c3 * step, tmp, k3);
    for (std::size_t i = 0; i < N; ++i)
      tmp[i] = y[i] + step * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(t + c4 * step, tmp, k4);
    for (std::size_t i = 0; i < N; ++i)
      tmp[i] = y[i] + step * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs(t + c5 * step, tmp, k5);
    for (std::size_t i = 0; i < N; ++i)
      tmp[i] = y[i] + step * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    rhs(t + step, tmp, k6);
    for (std::size_t i = 0; i < N; ++i)
      ynew[i] = y[i] + step * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    rhs(t + step, ynew, k7);
    for (std::size_t i = 0; i < N; ++i)
      err[i] = step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);

    const double en = scaled_norm(err, y, ynew);
    if (!std::isfinite(en)) fail("non-finite error estimate", t, y);

    if (en <= 1.0) {
      t = hits_target ? target : t + step;
      y = ynew;
      for (std::size_t i = 0; i < N; ++i) {
        if (y[i] < 0.0) {
          if (y[i] < -tol.abs) fail("negative excursion beyond absolute tolerance", t, y);
          y[i] = 0.0;
        }
      }
      rhs(t, y, k1);  // FSAL would reuse k7, but clipping may have moved y
      if (stats) ++stats->accepted;
      if (hits_target && stop_idx < stops.size()) {
        observe(t, static_cast<const State&>(y));
        ++stop_idx;
      }
      double factor = en == 0.0 ? 5.0 : 0.9 * std::pow(en, -0.2);
      factor = std::clamp(factor, 0.2, 5.0);
      if (last_rejected) factor = std::min(factor, 1.0);
      // A step truncated to hit a stop does not say much about the next one.
      if (!hits_target || step >= h) h = step * factor;
      last_rejected = false;
    } else {
      if (stats) ++stats->rejected;
      h = step * std::max(0.2, 0.9 * std::pow(en, -0.2));
      last_rejected = true;
    }
  }
  return y;
}

template <std::size_t N, class Rhs>
std::array<double, N> integrate_dopri5(Rhs&& rhs, std::array<double, N> y, double t0, double t1,
                                       const Tolerances& tol, Stats* stats = nullptr) {
  return integrate_dopri5(std::forward<Rhs>(rhs), y, t0, t1, tol, {},
                          [](double, const std::array<double, N>&) {}, stats);
}

}  // namespace lso::ode
