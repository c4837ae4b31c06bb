#pragma once

// Semiclassical (Wigner-type) measure estimation along an h-ladder, wave
// packets, dyadic projections through the eigenbasis functional calculus,
// and the three transport checks: interior, boundary jump, isochrone.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcckit/fft.hpp"
#include "gcckit/geometry.hpp"
#include "gcckit/semiclassical.hpp"
#include "gcckit/spectral.hpp"

namespace gcckit {

struct MeasureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Wave packets w_h = h^{-d/4} e^{i x.xi0 / h} psi(h^{-1/2}(x - x0)).

struct WavePacket {
  Vec x0, xi0;
  double h = 0.01;
  // default profile: normalized Gaussian, ||psi||_{L2} = 1
  std::function<cd(const Vec&)> profile;

  cd value(const Vec& x) const {
    const int d = x.dim;
    const double hs = std::sqrt(h);
    Vec y = (x - x0) * (1.0 / hs);
    cd prof;
    if (profile) {
      prof = profile(y);
    } else {
      const double pi = 3.14159265358979323846;
      prof = std::pow(pi, -0.25 * d) * std::exp(-0.5 * y.dot(y));
    }
    const double phase = x.dot(xi0) / h;
    return std::pow(h, -0.25 * d) * prof * cd(std::cos(phase), std::sin(phase));
  }

  std::vector<cd> realize(const Grid& grid) const {
    std::vector<cd> w(grid.total());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = value(grid.x(i));
    return w;
  }
};

// ---------------------------------------------------------------------------
// Pairings and ladder estimates.

struct LadderPoint {
  double h = 0.0;
  cd value;
};

struct SymbolLadder {
  std::string id;
  std::vector<LadderPoint> points;
  cd limit;        // extrapolated
  double spread = 0.0;  // last-two-rung spread, the reported error bar
};

struct MeasureEstimate {
  std::vector<SymbolLadder> per_symbol;
  std::vector<double> mass;  // ||u_h||^2 along the ladder
  bool leak = false;
  double leak_fraction = 0.0;
};

struct HSeq {
  Grid grid;
  std::vector<double> h;
  std::vector<std::vector<cd>> u;  // one grid function per rung
};

inline cd pair_symbol(const Symbol& a, double h, const Grid& grid, const std::vector<cd>& u) {
  const GridOperator op = quantize(a, h, grid);
  return grid.inner(op.apply(u), u);
}

// Richardson-flavoured limit: assume value(h) = L + c h and eliminate the
// linear term from the last two rungs.
inline void extrapolate(SymbolLadder& lad) {
  const std::size_t n = lad.points.size();
  if (n == 0) return;
  if (n == 1) {
    lad.limit = lad.points[0].value;
    return;
  }
  const auto& p1 = lad.points[n - 2];
  const auto& p2 = lad.points[n - 1];
  const double r = p2.h / p1.h;
  lad.limit = (p2.value - r * p1.value) / (1.0 - r);
  lad.spread = std::abs(p2.value - p1.value);
}

// Fraction of L2 mass outside the band c_lo <= |h xi| <= c_hi.
inline double frequency_leak(const Grid& grid, const std::vector<cd>& u, double h,
                             double c_lo = 1e-3, double c_hi = 1e3) {
  std::vector<cd> F = u;
  std::vector<std::size_t> dims;
  if (grid.dim == 1) {
    fft::forward(F);
    dims = {grid.n[0]};
  } else {
    dims = {grid.n[0], grid.n[1]};
    fft::forward_nd(F, dims);
  }
  double total = 0.0, outside = 0.0;
  for (std::size_t i = 0; i < F.size(); ++i) {
    double xi2 = 0.0;
    if (grid.dim == 1) {
      const double f = grid.freq(0, i);
      xi2 = f * f;
    } else {
      const double f0 = grid.freq(0, i / grid.n[1]);
      const double f1 = grid.freq(1, i % grid.n[1]);
      xi2 = f0 * f0 + f1 * f1;
    }
    const double s = h * std::sqrt(xi2);
    const double m = std::norm(F[i]);
    total += m;
    if (s < c_lo || s > c_hi) outside += m;
  }
  return total > 0.0 ? outside / total : 0.0;
}

inline MeasureEstimate estimate_measure(const HSeq& seq, const std::vector<Symbol>& bank) {
  MeasureEstimate est;
  est.mass.resize(seq.h.size());
  for (std::size_t r = 0; r < seq.h.size(); ++r) {
    const double m = seq.grid.norm(seq.u[r]);
    est.mass[r] = m * m;
    const double leak = frequency_leak(seq.grid, seq.u[r], seq.h[r]);
    est.leak_fraction = std::max(est.leak_fraction, leak);
  }
  est.leak = est.leak_fraction > 0.01;

  for (const auto& a : bank) {
    SymbolLadder lad;
    lad.id = a.id;
    for (std::size_t r = 0; r < seq.h.size(); ++r)
      lad.points.push_back({seq.h[r], pair_symbol(a, seq.h[r], seq.grid, seq.u[r])});
    extrapolate(lad);
    est.per_symbol.push_back(std::move(lad));
  }
  return est;
}

// 2x2 Hermitian block of pairings for a pair of sequences.
struct HermitianMeasureEstimate {
  cd entry[2][2];
  double hermiticity_defect = 0.0;
};

inline HermitianMeasureEstimate hermitian_pairing(const Symbol& a, double h, const Grid& grid,
                                                  const std::vector<cd>& y0,
                                                  const std::vector<cd>& y1) {
  const GridOperator op = quantize(a, h, grid);
  const std::vector<cd> a0 = op.apply(y0);
  const std::vector<cd> a1 = op.apply(y1);
  HermitianMeasureEstimate out;
  out.entry[0][0] = grid.inner(a0, y0);
  out.entry[0][1] = grid.inner(a0, y1);
  out.entry[1][0] = grid.inner(a1, y0);
  out.entry[1][1] = grid.inner(a1, y1);
  out.hermiticity_defect =
      std::abs(out.entry[0][1] - std::conj(out.entry[1][0])) /
      std::max({std::abs(out.entry[0][0]), std::abs(out.entry[1][1]), 1e-12});
  return out;
}

// True (non-semiclassical) homogeneous Sobolev seminorm ||(-Lap)^{s/2} u||.
inline double sobolev_norm(const Grid& grid, const std::vector<cd>& u, double s) {
  std::vector<cd> F = u;
  std::vector<std::size_t> dims;
  if (grid.dim == 1) {
    fft::forward(F);
  } else {
    dims = {grid.n[0], grid.n[1]};
    fft::forward_nd(F, dims);
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < F.size(); ++i) {
    double xi2 = 0.0;
    if (grid.dim == 1) {
      const double f = grid.freq(0, i);
      xi2 = f * f;
    } else {
      const double f0 = grid.freq(0, i / grid.n[1]);
      const double f1 = grid.freq(1, i % grid.n[1]);
      xi2 = f0 * f0 + f1 * f1;
    }
    acc += std::pow(xi2, s) * std::norm(F[i]);
  }
  // Parseval with the unnormalized DFT: ||F||^2 = N ||u||^2 / cell-free
  return std::sqrt(acc * grid.cell() / static_cast<double>(F.size()));
}

// ---------------------------------------------------------------------------
// Dyadic projection through the exact eigenbasis functional calculus:
// chi(-h^2 A) v = sum_nu chi(h^2 lambda_nu) v^_nu e_nu.

struct DyadicProjection {
  Eigen::VectorXcd out;      // nodal values
  double coverage = 0.0;     // ||P_band v||^2 / ||v||^2 of the spectral expansion
  bool truncation_warning = false;
};

inline DyadicProjection dyadic_project(const EigenBasis& basis,
                                       const std::function<double(double)>& chi, double h,
                                       const Eigen::VectorXcd& v) {
  Eigen::VectorXcd c = basis.expand(v);
  const double vnorm2 = std::real(basis.inner(v, v));
  double cnorm2 = 0.0;
  for (int nu = 0; nu < c.size(); ++nu) cnorm2 += std::norm(c[nu]);
  DyadicProjection pr;
  pr.coverage = vnorm2 > 0.0 ? cnorm2 / vnorm2 : 1.0;
  pr.truncation_warning = pr.coverage < 0.999;
  for (int nu = 0; nu < c.size(); ++nu) c[nu] *= chi(h * h * basis.lambda[nu]);
  pr.out = basis.synthesize(c);
  return pr;
}

// ---------------------------------------------------------------------------
// Interior transport: for solutions of the homogeneous wave equation and a
// test symbol supported away from the boundary, <mu, H_p a> should vanish.
// The pairing acts on the space-time grid with the space-time symbol H_p a.

inline SymbolLadder interior_transport_residual(const HSeq& seq, const Symbol& hpa) {
  SymbolLadder lad;
  lad.id = hpa.id;
  for (std::size_t r = 0; r < seq.h.size(); ++r) {
    const double m = seq.grid.norm(seq.u[r]);
    const cd v = pair_symbol(hpa, seq.h[r], seq.grid, seq.u[r]);
    lad.points.push_back({seq.h[r], v / std::max(m * m, 1e-300)});
  }
  extrapolate(lad);
  return lad;
}

// ---------------------------------------------------------------------------
// Boundary jump identity on the 1-d half-line (boundary at x = 0, normal
// coordinate z = x, tangential variables (t, tau)):
//   -<mu, H_p a> = <nu, b1>,  b1(t, tau) = (a(rho+) - a(rho-)) / (zeta+ - zeta-)
// with nu estimated from the rescaled Neumann trace v_h = h d_n u(t, 0).

struct BoundaryJumpReport {
  SymbolLadder lhs;  // -<mu_h, H_p a>, normalized by the packet mass
  SymbolLadder rhs;  // <nu_h, b1>
  double mismatch = 0.0;
  bool glancing_flag = false;
};

// seq: space-time grid functions over (t, x) with x > 0 the interior;
// traces: per rung the trace samples v_h(t_j) on tgrid.
inline BoundaryJumpReport boundary_jump_residual(
    const HSeq& seq, const Grid& tgrid, const std::vector<std::vector<cd>>& traces,
    const Symbol& hpa, const std::function<cd(const Vec& base, cd zeta)>& a_in_zeta,
    double glancing_band = 0.1) {
  BoundaryJumpReport rep;

  // lhs along the ladder (sign: <H_p mu, a> = -<mu, H_p a>)
  rep.lhs.id = "-<mu,H_p a>";
  for (std::size_t r = 0; r < seq.h.size(); ++r)
    rep.lhs.points.push_back({seq.h[r], -pair_symbol(hpa, seq.h[r], seq.grid, seq.u[r])});
  extrapolate(rep.lhs);

  // tangential divisor symbol b1(t, tau) from the Euclidean division of a
  // against p = zeta^2 - tau^2 (flat half-line, z = x)
  auto p_quad = [](const Vec& base, cd zeta) { return zeta * zeta - cd(base[1] * base[1]); };
  auto chi = [](const Vec&) { return 1.0; };
  const DivisionParts parts = euclidean_divide(a_in_zeta, p_quad, chi);

  Symbol b1;
  b1.dim = 1;
  b1.id = "b1";
  b1.eval = [parts, glancing_band](const Vec& t, const Vec& tau) -> cd {
    if (std::abs(tau[0]) < glancing_band) return cd(0.0);  // glancing band excluded
    return parts.b1(Vec(2, t[0], tau[0]));
  };

  rep.rhs.id = "<nu,b1>";
  double glancing_mass = 0.0, trace_mass = 0.0;
  for (std::size_t r = 0; r < seq.h.size(); ++r) {
    rep.rhs.points.push_back({seq.h[r], pair_symbol(b1, seq.h[r], tgrid, traces[r])});
    // glancing diagnostic on the finest rung: trace mass below the band
    if (r + 1 == seq.h.size()) {
      std::vector<cd> F = traces[r];
      fft::forward(F);
      for (std::size_t k = 0; k < F.size(); ++k) {
        const double s = seq.h[r] * std::abs(tgrid.freq(0, k));
        trace_mass += std::norm(F[k]);
        if (s < glancing_band) glancing_mass += std::norm(F[k]);
      }
    }
  }
  extrapolate(rep.rhs);
  rep.glancing_flag = trace_mass > 0.0 && glancing_mass / trace_mass > 0.5;

  const double l = std::abs(rep.lhs.limit), q = std::abs(rep.rhs.limit);
  rep.mismatch = std::abs(rep.lhs.limit - rep.rhs.limit) / std::max({l, q, 1e-12});
  return rep;
}

// ---------------------------------------------------------------------------
// Isochrone construction: data (u0, u1) with u1 = i h^{-1} tau0 u0 built
// from a packet, the initial Hermitian block, and forward concentration of
// the truncated-in-time evolution.

struct IsochroneReport {
  cd nu0[2][2];
  cd expected[2][2];
  double nu0_max_rel_error = 0.0;
  double forward_mass = 0.0;  // fraction within the tube around the forward ray
  double tube_radius = 0.0;
};

namespace detail {

// linear interpolation of basis nodal values onto a periodic sampling grid
inline std::vector<cd> basis_to_grid(const EigenBasis& basis, const Eigen::VectorXcd& nodal,
                                     const Grid& grid) {
  if (basis.dim != 1 || grid.dim != 1)
    throw MeasureError("basis_to_grid: 1-d only");
  const double a = basis.nodes.front()[0] - basis.dx;  // wall
  const std::size_t n = basis.nodes.size();
  std::vector<cd> out(grid.total());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = grid.x(i)[0];
    const double pos = (x - a) / basis.dx - 1.0;  // index into nodal values
    if (pos <= -1.0 || pos >= static_cast<double>(n)) {
      out[i] = cd(0.0);
      continue;
    }
    const auto i0 = static_cast<long>(std::floor(pos));
    const double fr = pos - std::floor(pos);
    const cd v0 = i0 >= 0 && i0 < static_cast<long>(n) ? nodal[i0] : cd(0.0);
    const cd v1 = i0 + 1 >= 0 && i0 + 1 < static_cast<long>(n) ? nodal[i0 + 1] : cd(0.0);
    out[i] = (1.0 - fr) * v0 + fr * v1;
  }
  return out;
}

}  // namespace detail

inline IsochroneReport isochrone_check(const EigenBasis& basis, const MetricField& metric,
                                       const Vec& x0, const Vec& xi0, double tau0, double h,
                                       const Symbol& a, double T, double tube_radius) {
  // precondition: tau0^2 = |xi0|_g^2 at x0
  const double sq = metric.g_inv(x0).quad(xi0);
  if (std::abs(tau0 * tau0 - sq) > 1e-8 * std::max(1.0, sq))
    throw MeasureError("isochrone_check: tau0 inconsistent with (x0, xi0)");

  WavePacket pk;
  pk.x0 = x0;
  pk.xi0 = xi0;
  pk.h = h;

  // packet through the spectral band: nodal data, expanded exactly
  const std::size_t nn = basis.nodes.size();
  Eigen::VectorXcd w(nn);
  for (std::size_t i = 0; i < nn; ++i) w[static_cast<Eigen::Index>(i)] = pk.value(basis.nodes[i]);
  Eigen::VectorXcd c0 = basis.expand(w);
  const Eigen::VectorXcd u0 = basis.synthesize(c0);

  // initial Hermitian block with y1 = h u1 = i tau0 u0 (exact)
  std::size_t ng = 1;
  while (ng < 2 * nn) ng <<= 1;
  const Grid grid = Grid::line(ng, basis.nodes.front()[0] - basis.dx,
                               basis.nodes.back()[0] + basis.dx);
  const std::vector<cd> y0 = detail::basis_to_grid(basis, u0, grid);
  std::vector<cd> y1 = y0;
  for (auto& v : y1) v *= cd(0.0, tau0);
  const HermitianMeasureEstimate blk = hermitian_pairing(a, h, grid, y0, y1);

  IsochroneReport rep;
  const cd aval = a.eval(x0, xi0);
  rep.expected[0][0] = aval;
  rep.expected[0][1] = cd(0.0, -tau0) * aval;
  rep.expected[1][0] = cd(0.0, tau0) * aval;
  rep.expected[1][1] = tau0 * tau0 * aval;
  double maxrel = 0.0;
  const double scale = std::max(std::abs(aval) * std::max(1.0, tau0 * tau0), 1e-12);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      rep.nu0[i][j] = blk.entry[i][j];
      maxrel = std::max(maxrel, std::abs(blk.entry[i][j] - rep.expected[i][j]) / scale);
    }
  rep.nu0_max_rel_error = maxrel;

  // forward concentration: evolve, track position mass inside the tube
  // around x0 + t * (-xi0 / tau0)
  WaveState st = make_state(basis, c0, c0 * cd(0.0, tau0 / h), h);
  rep.tube_radius = tube_radius;
  const int nt = 16;
  double acc = 0.0;
  int used = 0;
  for (int it = 1; it <= nt; ++it) {
    const double t = T * it / nt;
    WaveState s2 = evolve(st, t);
    const Eigen::VectorXcd ug = basis.synthesize(s2.u_coeff());
    const Vec xr = x0 + xi0 * (-t / tau0);
    // tube mass only meaningful while the ray is inside the domain
    if (xr[0] <= basis.nodes.front()[0] || xr[0] >= basis.nodes.back()[0]) continue;
    double tube = 0.0, total = 0.0;
    for (std::size_t i = 0; i < nn; ++i) {
      const double m = std::norm(ug[static_cast<Eigen::Index>(i)]) * basis.weight[static_cast<Eigen::Index>(i)];
      total += m;
      if (std::abs(basis.nodes[i][0] - xr[0]) <= tube_radius) tube += m;
    }
    if (total > 0.0) {
      acc += tube / total;
      ++used;
    }
  }
  rep.forward_mass = used > 0 ? acc / used : 0.0;
  return rep;
}

}  // namespace gcckit
