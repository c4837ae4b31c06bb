#include "catch_amalgamated.hpp"

#include <cmath>

#include "gcckit/boundary.hpp"
#include "gcckit/collar.hpp"
#include "gcckit/geometry.hpp"

using namespace gcckit;
using Catch::Matchers::WithinAbs;

namespace {

CollarChart disc_chart() {
  return build_collar_chart(make_unit_disc(), make_flat_metric(2), 0.15);
}

PhasePoint disc_point(double tau, double xi1, double xi2) {
  return PhasePoint(0.0, Vec(2, 1.0, 0.0), tau, Vec(2, xi1, xi2));
}

}  // namespace

TEST_CASE("classification at a disc boundary point, flat metric") {
  auto chart = disc_chart();

  // inward normal at (1,0) is (-1,0): zeta = -xi_1
  auto bc = classify(chart, disc_point(1.0, -0.5, 0.5));
  CHECK(bc.tag == BoundaryTag::HyperbolicPlus);
  CHECK_THAT(bc.p_parallel, WithinAbs(-0.75, 1e-6));
  CHECK_THAT(bc.hpz, WithinAbs(1.0, 1e-6));  // 2 zeta

  bc = classify(chart, disc_point(1.0, 0.5, 0.5));
  CHECK(bc.tag == BoundaryTag::HyperbolicMinus);

  bc = classify(chart, disc_point(1.0, 0.0, 1.5));
  CHECK(bc.tag == BoundaryTag::Elliptic);

  // whispering gallery: tangential contact inside a convex domain glides
  bc = classify(chart, disc_point(1.0, 0.0, 1.0));
  CHECK(bc.tag == BoundaryTag::GlancingGliding);
  CHECK(bc.hp2z < 0.0);
}

TEST_CASE("classify rejects points off the boundary") {
  auto chart = disc_chart();
  PhasePoint rho(0.0, Vec(2, 0.5, 0.0), 1.0, Vec(2, 1.0, 0.0));
  CHECK_THROWS_AS(classify(chart, rho), ClassificationError);
}

TEST_CASE("flat edge of the square gives an order-3 contact") {
  auto chart = build_collar_chart(make_unit_square(), make_flat_metric(2), 0.1);
  PhasePoint rho(0.0, Vec(2, 0.5, 0.0), 1.0, Vec(2, 1.0, 0.0));
  auto bc = classify(chart, rho);
  CHECK(bc.tag == BoundaryTag::GlancingOrder3);
  CHECK(is_escape_indeterminate(bc));
  CHECK_THAT(bc.hp2z, WithinAbs(0.0, tol::d_abs));
}

TEST_CASE("gliding contact under a sheared sound speed") {
  // c = 1 + x2 bends tangential rays back toward {x2 = 0}
  auto d = make_half_plane();
  auto m = make_conformal_metric(2, [](const Vec& x) { return 1.0 + x[1]; },
                                 [](const Vec&) { return Vec(2, 0.0, 1.0); });
  auto chart = build_collar_chart(d, m, 0.3);
  PhasePoint rho(0.0, Vec(2, 0.0, 0.0), 1.0, Vec(2, 1.0, 0.0));
  auto bc = classify(chart, rho);
  CHECK(bc.tag == BoundaryTag::GlancingGliding);
  CHECK_THAT(bc.hp2z, WithinAbs(-4.0, 1e-3));

  // the gliding correction cancels the normal drift of xi
  const PhaseTangent v = gliding_field(chart, rho);
  CHECK_THAT(v.dxi[1], WithinAbs(0.0, 1e-3));
  CHECK_THAT(v.dx[1], WithinAbs(0.0, 1e-9));  // motion stays tangential
}

TEST_CASE("hyperbolic lift and reflection") {
  auto chart = disc_chart();
  // tangential data: xi purely along the boundary, below the light cone
  PhasePoint par = disc_point(1.0, 0.0, 0.5);
  auto [lo, hi] = hyperbolic_lift(chart, par);

  auto m = make_flat_metric(2);
  CHECK_THAT(wave_symbol(m, lo), WithinAbs(0.0, 1e-9));
  CHECK_THAT(wave_symbol(m, hi), WithinAbs(0.0, 1e-9));
  CHECK(lo.tau == par.tau);
  CHECK(hi.tau == par.tau);

  // the two lifts are exchanged by the reflection involution
  const PhasePoint r = reflect(chart, hi);
  CHECK_THAT(r.xi[0], WithinAbs(lo.xi[0], 1e-9));
  CHECK_THAT(r.xi[1], WithinAbs(lo.xi[1], 1e-9));
  CHECK(r.tau == hi.tau);  // tau untouched exactly
  CHECK(r.t == hi.t);

  // involution property
  const PhasePoint rr = reflect(chart, r);
  CHECK_THAT(rr.xi[0], WithinAbs(hi.xi[0], 1e-10));
  CHECK_THAT(rr.xi[1], WithinAbs(hi.xi[1], 1e-10));
}

TEST_CASE("hyperbolic_lift rejects elliptic data") {
  auto chart = disc_chart();
  CHECK_THROWS_AS(hyperbolic_lift(chart, disc_point(1.0, 0.0, 2.0)), ClassificationError);
}

TEST_CASE("reflection preserves the symbol on a curved metric") {
  auto d = make_unit_disc();
  auto m = make_conformal_metric(2, [](const Vec& x) { return 1.0 + 0.2 * x[1]; });
  auto chart = build_collar_chart(d, m, 0.12);
  PhasePoint rho(0.3, Vec(2, std::cos(0.7), std::sin(0.7)), 0.9, Vec(2, -0.4, 0.35));
  const double p0 = wave_symbol(m, rho);
  const PhasePoint r = reflect(chart, rho);
  CHECK_THAT(wave_symbol(m, r), WithinAbs(p0, 1e-9));
  CHECK(r.tau == rho.tau);
}

TEST_CASE("escape-set membership table") {
  BoundaryClass bc;
  bc.tag = BoundaryTag::HyperbolicMinus;
  CHECK(is_escape_point(bc, TimeDirection::Future));
  CHECK_FALSE(is_escape_point(bc, TimeDirection::Past));

  bc.tag = BoundaryTag::HyperbolicPlus;
  CHECK_FALSE(is_escape_point(bc, TimeDirection::Future));
  CHECK(is_escape_point(bc, TimeDirection::Past));

  bc.tag = BoundaryTag::GlancingGliding;
  CHECK(is_escape_point(bc, TimeDirection::Future));
  CHECK(is_escape_point(bc, TimeDirection::Past));

  bc.tag = BoundaryTag::GlancingDiffractive;
  CHECK_FALSE(is_escape_point(bc, TimeDirection::Future));
  CHECK_FALSE(is_escape_point(bc, TimeDirection::Past));

  bc.tag = BoundaryTag::GlancingOrder3;
  CHECK_FALSE(is_escape_point(bc, TimeDirection::Future));
  CHECK(is_escape_indeterminate(bc));
  bc.tag = BoundaryTag::HyperbolicMinus;
  CHECK_FALSE(is_escape_indeterminate(bc));
}
