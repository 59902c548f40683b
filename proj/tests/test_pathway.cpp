#include "doctest.h"

#include <cmath>

#include "lso/errors.hpp"
#include "lso/pathway.hpp"

using namespace lso;

TEST_CASE("occupancy") {
  CHECK(occupancy(6.0, 1e-6) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(occupancy(8.0, 1e-6) == doctest::Approx(1e-6 / (1e-6 + 1e-8)).epsilon(1e-12));
  CHECK(occupancy(0.0, 1e-6) == doctest::Approx(1e-6).epsilon(1e-6));
  double prev = 0.0;
  for (double p = -20.0; p <= 20.0; p += 0.5) {
    const double phi = occupancy(p, 1e-4);
    CHECK(phi >= 0.0);
    CHECK(phi <= 1.0);
    CHECK(phi >= prev);
    prev = phi;
  }
  CHECK(occupancy(-40.0, 1e-4) < 1e-30);
  CHECK(occupancy(40.0, 1e-4) == 1.0);
}

TEST_CASE("baseline matches a fixed-step RK4 integration") {
  // Classical RK4 at dt = 1e-3 over [0, 600] with phi = 0 gives
  // C*(600) = 2032.9705882281787.
  const SimResult r = simulate(PathwayParams{}, 0.0);
  CHECK(r.final_state.caspase_active == doctest::Approx(2032.9705882281787).epsilon(1e-6));
  CHECK(r.final_state.dsb == doctest::Approx(0.0036514761917065906).epsilon(1e-4));
}

TEST_CASE("full inhibition keeps PARP1 unbound") {
  const SimResult r = simulate(PathwayParams{}, 1.0, 50);
  for (const auto& s : r.trajectory) {
    CHECK(s.parp_bound == 0.0);
    CHECK(s.parp_free == 0.0);
  }
  CHECK(r.final_state.caspase_active > 12000.0);
}

TEST_CASE("conservation, nonnegativity and monotone caspase along trajectories") {
  const PathwayParams p;
  for (double phi : {0.0, 0.3, 0.9, 0.99, 1.0}) {
    const SimResult r = simulate(p, phi, 200);
    CHECK(r.trajectory.size() == 201);
    double prev_cs = -1.0;
    for (const auto& s : r.trajectory) {
      const double parp = p.parp_total * (1.0 - phi);
      CHECK(std::abs(s.parp_free + s.parp_bound - parp) <= 1e-6 * p.parp_total);
      CHECK(std::abs(s.p53_free + s.p53_bound - p.p53_total) <= 1e-6 * p.p53_total);
      CHECK(std::abs(s.procaspase + s.caspase_active - p.procaspase_total) <=
            1e-6 * p.procaspase_total);
      CHECK(s.dsb + s.parp_bound + s.p53_bound <= p.dsb0 * (1 + 1e-9));
      for (double v : {s.dsb, s.parp_free, s.parp_bound, s.p53_free, s.p53_bound, s.procaspase,
                       s.caspase_active}) {
        CHECK(v >= 0.0);
      }
      CHECK(s.caspase_active >= prev_cs);
      prev_cs = s.caspase_active;
    }
  }
}

TEST_CASE("therapeutic score examples") {
  CHECK(therapeutic_score(12.0, PathwayVariant::viable()) >= 12000.0);
  const double low = therapeutic_score(0.0, PathwayVariant::viable());
  CHECK(low < 5000.0);
  CHECK(low == doctest::Approx(simulate(PathwayParams{}, occupancy(0.0, 1e-6)).final_state.caspase_active));
  const double plateau = therapeutic_score(14.0, PathwayVariant::viable());
  for (auto [v, peak] : {std::pair{PathwayVariant::viable(), 8.0}, {PathwayVariant::modified(), 6.0},
                         {PathwayVariant::impractical(), 3.0}}) {
    const double a = therapeutic_score(peak + 2, v);
    const double b = therapeutic_score(peak + 4, v);
    CHECK(b - a <= 0.01 * plateau);
  }
}

TEST_CASE("apoptosis threshold") {
  CHECK(apoptosis_triggered(5001.0));
  CHECK_FALSE(apoptosis_triggered(5000.0));
  CHECK_FALSE(apoptosis_triggered(0.0));
  CHECK(apoptosis_triggered(std::nextafter(5000.0, 1e9)));
  CHECK_FALSE(apoptosis_triggered(std::nextafter(5000.0, 0.0)));
}

TEST_CASE("dose_response") {
  const auto single = dose_response(PathwayVariant::modified(), {4.5});
  REQUIRE(single.size() == 1);
  CHECK(single[0].score == therapeutic_score(4.5, PathwayVariant::modified()));
  CHECK_THROWS(dose_response(PathwayVariant::modified(), {}));
  CHECK_THROWS(dose_response(PathwayVariant::modified(), {2.0, 1.0}));

  const auto grid = pic50_grid(0.0, 12.0, 0.25);
  CHECK(grid.size() == 49);
  CHECK(grid.back() == 12.0);

  const auto csv = dose_response_csv({{0.0, 2032.97}, {8.25, 14833.123456}});
  CHECK(csv == "pic50,score\n0,2032.97\n8.25,14833.1\n");
}

TEST_CASE("variant names and parameter checks") {
  CHECK(PathwayVariant::from_name("impractical").dose == 1e-1);
  CHECK(PathwayVariant::from_name("modified").name() == "modified");
  CHECK_THROWS_AS(PathwayVariant::from_name("bogus"), ConfigError);
  PathwayParams p;
  p.k_repair = 0.0;
  CHECK_THROWS(p.check());
  CHECK_THROWS(simulate(PathwayParams{}, 1.5));
}
