#include "catch_amalgamated.hpp"

#include <cmath>

#include "gcckit/collar.hpp"
#include "gcckit/gcc.hpp"
#include "gcckit/geometry.hpp"

using namespace gcckit;
using Catch::Matchers::WithinAbs;

namespace {

struct IntervalSetup {
  Domain d = make_interval();
  MetricField m = make_flat_metric(1);
  CollarChart chart{d, m, 0.25};
};

ObservationRegion mid_interval() {
  return interior_region([](const Vec& x) { return x[0] > 0.3 && x[0] < 0.6; });
}

}  // namespace

TEST_CASE("phase-space sampling stays inside and on the shell") {
  auto d = make_unit_disc();
  auto m = make_conformal_metric(2, [](const Vec& x) { return 1.0 + 0.2 * x[0]; });
  SamplingSpec spec;
  spec.nx = 8;
  spec.ntheta = 8;
  const auto samples = sample_phase_space(d, m, spec);
  REQUIRE_FALSE(samples.empty());
  for (const auto& r : samples) {
    CHECK(d.phi(r.x) >= spec.margin - 1e-12);
    CHECK(r.tau == 1.0);
    CHECK_THAT(wave_symbol(m, r), WithinAbs(0.0, 1e-12));
  }
}

TEST_CASE("interval control region: holds above the control time, fails below") {
  IntervalSetup s;
  auto omega = mid_interval();
  // every unit-speed ray meets (0.3, 0.6) within time ~0.8
  auto rep = check_interior_gcc(s.m, s.d, s.chart, omega, 1.0);
  CHECK(rep.holds());
  CHECK(rep.coverage == 1.0);
  CHECK(rep.n_indeterminate == 0);

  rep = check_interior_gcc(s.m, s.d, s.chart, omega, 0.3);
  CHECK(rep.verdict == Verdict::Fails);
  REQUIRE_FALSE(rep.witnesses.empty());
  // witnesses carry a trajectory that avoids the region within (0, T)
  const auto& w = rep.witnesses.front();
  CHECK_FALSE(detail::meets_interior(w.trajectory, omega, 0.0, 0.3));
}

TEST_CASE("verdict is monotone in T") {
  IntervalSetup s;
  auto omega = mid_interval();
  bool prev = false;
  for (double T : {0.4, 0.7, 1.0, 1.3}) {
    const bool h = check_interior_gcc(s.m, s.d, s.chart, omega, T).holds();
    if (prev) CHECK(h);  // once it holds it keeps holding
    prev = h;
  }
  CHECK(prev);
}

TEST_CASE("control time estimate for the interval region") {
  IntervalSetup s;
  SamplingSpec spec;
  spec.nx = 40;
  spec.margin = 0.02;
  const double T = estimate_T_gcc(s.m, s.d, s.chart, mid_interval(), 2.0, 0.025, spec);
  // worst ray starts at x ~ 1 moving right: 0.4 out + 0.4 back to omega
  CHECK_THAT(T, WithinAbs(0.8, 0.05));
}

TEST_CASE("boundary control from one endpoint") {
  IntervalSetup s;
  auto gamma = boundary_region([](double sigma) { return sigma < 0.5; });  // {x = 0}
  auto rep = check_boundary_gcc(s.m, s.d, s.chart, gamma, 2.5);
  CHECK(rep.holds());
  rep = check_boundary_gcc(s.m, s.d, s.chart, gamma, 1.5);
  CHECK(rep.verdict == Verdict::Fails);

  SamplingSpec spec;
  spec.nx = 40;
  spec.margin = 0.02;
  const double T = estimate_T_gcc(s.m, s.d, s.chart, gamma, 3.0, 0.025, spec);
  // worst ray leaves x ~ 0 moving right: out to x = 1 and back
  CHECK_THAT(T, WithinAbs(2.0, 0.05));
}

TEST_CASE("vertical strip on the square fails with a bouncing-ball witness") {
  auto d = make_unit_square();
  auto m = make_flat_metric(2);
  CollarChart chart(d, m, 0.2);
  auto omega = interior_region([](const Vec& x) { return x[0] < 0.3; });
  SamplingSpec spec;
  spec.nx = 6;
  spec.ntheta = 8;
  auto rep = check_interior_gcc(m, d, chart, omega, 5.0, spec);
  CHECK(rep.verdict == Verdict::Fails);
  REQUIRE_FALSE(rep.witnesses.empty());
  // a vertical bouncing-ball ray trapped in {x1 > 0.3} never reports in
  bool found_trapped = false;
  for (const auto& w : rep.witnesses) {
    bool trapped = true;
    for (const auto& sm : w.trajectory.flatten())
      if (sm.rho.x[0] < 0.3) trapped = false;
    if (trapped) found_trapped = true;
  }
  CHECK(found_trapped);
}

TEST_CASE("half annulus controls the disc") {
  auto d = make_unit_disc();
  auto m = make_flat_metric(2);
  CollarChart chart(d, m, 0.15);
  auto omega = interior_region([](const Vec& x) { return x.norm() > 0.5; }, 0.2);
  SamplingSpec spec;
  spec.nx = 6;
  spec.ntheta = 8;
  auto rep = check_interior_gcc(m, d, chart, omega, 2.5, spec);
  CHECK(rep.holds());
}

TEST_CASE("weak variant accepts if some branch reports") {
  IntervalSetup s;
  auto omega = mid_interval();
  omega.dilation = 0.02;
  BranchPolicy pol;
  pol.n_branches = 2;
  pol.jitter = 1e-4;
  auto rep = check_weak_gcc(s.m, s.d, s.chart, omega, 1.0, {}, pol);
  CHECK(rep.holds());
}

TEST_CASE("estimate returns infinity for uncontrolled regions") {
  auto d = make_unit_square();
  auto m = make_flat_metric(2);
  CollarChart chart(d, m, 0.2);
  auto omega = interior_region([](const Vec& x) { return x[0] < 0.3; });
  SamplingSpec spec;
  spec.nx = 4;
  spec.ntheta = 4;
  const double T = estimate_T_gcc(m, d, chart, omega, 4.0, 0.5, spec);
  CHECK(T == T_GCC_INFINITE);
}

TEST_CASE("perturbation sweep at eps = 0 reproduces the unperturbed verdict") {
  IntervalSetup s;
  auto rows = perturbation_sweep(s.m, s.d, mid_interval(), 1.0, {0.0, 0.01}, 3, 5);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].eps == 0.0);
  CHECK(rows[0].pass_rate() == 1.0);
  CHECK(rows[1].trials == 3);
  CHECK(rows[1].pass_rate() == 1.0);  // interval verdict is robust at 1%
}
