#pragma once

// Pointwise boundary laws: classification of boundary phase points,
// hyperbolic lifts, the reflection involution, the gliding vector field,
// and escape-set membership.

#include <cmath>
#include <stdexcept>

#include "gcckit/collar.hpp"
#include "gcckit/geometry.hpp"

namespace gcckit {

enum class BoundaryTag {
  Elliptic,
  HyperbolicPlus,   // zeta > 0 branch (H_p z > 0)
  HyperbolicMinus,  // zeta < 0 branch
  GlancingDiffractive,
  GlancingGliding,
  GlancingOrder3,
};

struct BoundaryClass {
  BoundaryTag tag = BoundaryTag::Elliptic;
  double p_parallel = 0.0;  // p(pi_par rho)
  double hpz = 0.0;         // H_p z = 2 zeta at z = 0
  double hp2z = 0.0;        // H_p^2 z
};

struct ClassificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace tol {
inline constexpr double cls_rel = 1e-6;   // band on p(pi_par rho), relative
inline constexpr double d_abs = 1e-6;     // band on H_p^2 z
inline constexpr double fd_step = 1e-5;   // flow step for H_p^2 z
}  // namespace tol

// H_p z evaluated in Cartesian coordinates: 2 g^{ij} xi_i d_j z.
inline double hp_z(const CollarChart& chart, const Vec& x, const Vec& xi) {
  const Vec gz = chart.grad_z(x);
  return 2.0 * chart.metric().g_inv(x).apply(xi).dot(gz);
}

// H_p^2 z by one finite-difference step of H_p z along the flow.
inline double hp2_z(const CollarChart& chart, const PhasePoint& rho) {
  const PhaseTangent v = hamiltonian_field(chart.metric(), rho);
  const double eps = tol::fd_step;
  PhasePoint rp = rho, rm = rho;
  rp.x = rho.x + v.dx * eps;
  rp.xi = rho.xi + v.dxi * eps;
  rm.x = rho.x - v.dx * eps;
  rm.xi = rho.xi - v.dxi * eps;
  return (hp_z(chart, rp.x, rp.xi) - hp_z(chart, rm.x, rm.xi)) / (2.0 * eps);
}

// H_z^2 p = 2 (grad z)^T g^{-1} (grad z); equals 2 at z = 0 in the chart.
inline double hz2_p(const CollarChart& chart, const Vec& x) {
  const Vec gz = chart.grad_z(x);
  return 2.0 * chart.metric().g_inv(x).quad(gz);
}

inline BoundaryClass classify(const CollarChart& chart, const PhasePoint& rho,
                              double z_tol = 1e-7) {
  const ChartPoint c = chart.to_chart(rho);
  if (std::abs(c.z) > z_tol)
    throw ClassificationError("classify: phase point does not lie over z = 0");

  BoundaryClass bc;
  bc.p_parallel = chart.p_parallel(c);
  bc.hpz = 2.0 * c.zeta;

  const double scale = rho.tau * rho.tau + rho.xi.dot(rho.xi);
  const double eps_cls = tol::cls_rel * std::max(scale, 1e-30);

  if (bc.p_parallel > eps_cls) {
    bc.tag = BoundaryTag::Elliptic;
    return bc;
  }
  if (bc.p_parallel < -eps_cls) {
    bc.tag = c.zeta >= 0.0 ? BoundaryTag::HyperbolicPlus : BoundaryTag::HyperbolicMinus;
    return bc;
  }
  // glancing: subdivide by the sign of H_p^2 z at the glancing lift
  ChartPoint g = c;
  g.zeta = 0.0;
  bc.hp2z = hp2_z(chart, chart.from_chart(g));
  if (bc.hp2z > tol::d_abs)
    bc.tag = BoundaryTag::GlancingDiffractive;
  else if (bc.hp2z < -tol::d_abs)
    bc.tag = BoundaryTag::GlancingGliding;
  else
    bc.tag = BoundaryTag::GlancingOrder3;
  return bc;
}

// The two characteristic lifts of a hyperbolic boundary point,
// zeta^{+-} = +- sqrt(-p(pi_par rho)).
inline std::pair<PhasePoint, PhasePoint> hyperbolic_lift(const CollarChart& chart,
                                                         const PhasePoint& rho_par) {
  const ChartPoint c = chart.to_chart(rho_par);
  const double pp = chart.p_parallel(c);
  if (pp >= 0.0)
    throw ClassificationError("hyperbolic_lift: point is not in the hyperbolic region");
  const double zr = std::sqrt(-pp);
  ChartPoint cm = c, cp = c;
  cm.z = 0.0;
  cp.z = 0.0;
  cm.zeta = -zr;
  cp.zeta = +zr;
  return {chart.from_chart(cm), chart.from_chart(cp)};
}

// Reflection involution Sigma: zeta -> -zeta, all other chart coordinates
// bit-identical.  Implemented as a rank-one Cartesian update so that t, tau
// and xi' are untouched exactly.
inline PhasePoint reflect(const CollarChart& chart, const PhasePoint& rho) {
  const ChartPoint c = chart.to_chart(rho);
  const Mat J = chart.jacobian(c.sigma, c.z);
  PhasePoint out = rho;
  if (chart.domain().dim == 1) {
    out.xi = Vec(1, -rho.xi[0]);
    return out;
  }
  // xi_cart = J^{-T} xi_chart; flipping zeta subtracts 2 zeta J^{-T} e_z
  const Mat Ji = J.inverse();
  const Vec col(2, Ji(1, 0), Ji(1, 1));  // row z of J^{-1} = column z of J^{-T}
  out.xi = rho.xi - col * (2.0 * c.zeta);
  return out;
}

// Gliding vector field H_p^G = H_p + (H_p^2 z / H_z^2 p) H_z at a gliding
// glancing point.  H_z = -grad z . d_xi only contributes to d xi.
inline PhaseTangent gliding_field(const CollarChart& chart, const PhasePoint& rho) {
  const ChartPoint c = chart.to_chart(rho);
  const double scale = rho.tau * rho.tau + rho.xi.dot(rho.xi);
  if (std::abs(chart.p_parallel(c)) > 1e-4 * std::max(scale, 1e-30) ||
      std::abs(c.zeta) > 1e-4 * std::sqrt(std::max(scale, 1e-30)))
    throw ClassificationError("gliding_field: point is not glancing");
  PhaseTangent v = hamiltonian_field(chart.metric(), rho);
  const double ratio = hp2_z(chart, rho) / hz2_p(chart, rho.x);
  const Vec gz = chart.grad_z(rho.x);
  v.dxi = v.dxi - gz * ratio;
  return v;
}

enum class TimeDirection { Future, Past };

// Sufficient escape-set membership from the pointwise classification.
// Order-3 contacts are indeterminate at this level and reported as
// non-escape; branching resolves them at the trajectory level.
inline bool is_escape_point(const BoundaryClass& bc, TimeDirection dir) {
  switch (bc.tag) {
    case BoundaryTag::HyperbolicMinus: return dir == TimeDirection::Future;
    case BoundaryTag::HyperbolicPlus: return dir == TimeDirection::Past;
    case BoundaryTag::GlancingGliding: return true;
    case BoundaryTag::GlancingDiffractive: return false;
    case BoundaryTag::GlancingOrder3: return false;  // indeterminate
    case BoundaryTag::Elliptic: return false;
  }
  return false;
}

inline bool is_escape_indeterminate(const BoundaryClass& bc) {
  return bc.tag == BoundaryTag::GlancingOrder3;
}

}  // namespace gcckit
