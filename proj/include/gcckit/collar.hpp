#pragma once

// Quasi-normal boundary collar chart.  The chart maps (sigma, z) to
// q(sigma) + z * n_g(sigma) where n_g is the g-unit, g-orthogonal inward
// normal.  With this choice the pulled-back metric is block diagonal with
// g_{dd} = 1 exactly on {z = 0}.

#include <cmath>
#include <optional>
#include <stdexcept>

#include "gcckit/geometry.hpp"

namespace gcckit {

struct CollarError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ChartPoint {
  double t = 0.0;
  double sigma = 0.0;  // arc-length along the boundary (or endpoint in 1D)
  double z = 0.0;      // normal coordinate, > 0 inside
  double tau = 0.0;
  double xi_t = 0.0;   // tangential frequency xi'
  double zeta = 0.0;   // normal frequency
};

class CollarChart {
 public:
  CollarChart(Domain d, MetricField m, double delta0)
      : dom_(std::move(d)), met_(std::move(m)), delta0_(delta0) {
    if (dom_.dim == 2 && !dom_.boundary_param)
      throw CollarError("collar chart requires a boundary parameterization");
    check_jacobian();
  }

  const Domain& domain() const { return dom_; }
  const MetricField& metric() const { return met_; }
  double width() const { return delta0_; }

  // g-unit inward normal at boundary parameter sigma
  Vec normal(double sigma) const {
    if (dom_.dim == 1) {
      // sigma in {0,1} selects the endpoint
      const Vec e = endpoint(sigma);
      const double n = std::sqrt(met_.g_inv(e)(0, 0));
      return Vec(1, sigma < 0.5 ? n : -n);
    }
    const Vec q = dom_.boundary_param(sigma);
    const Vec tg = tangent(sigma);
    const Vec nu(2, -tg[1], tg[0]);  // Euclidean normal candidate
    const Mat gi = met_.g_inv(q);
    Vec n = gi.apply(nu);
    n = n * (1.0 / std::sqrt(std::max(nu.dot(gi.apply(nu)), 1e-300)));
    // orient inward
    const double step = 1e-6;
    if (dom_.phi(q + n * step) < dom_.phi(q)) n = n * -1.0;
    return n;
  }

  Vec map(double sigma, double z) const {
    if (dom_.dim == 1) return endpoint(sigma) + normal(sigma) * z;
    return dom_.boundary_param(sigma) + normal(sigma) * z;
  }

  // Inverse of the collar map by Newton iteration; valid for |z| <~ delta0.
  std::optional<std::pair<double, double>> invert(const Vec& x) const {
    if (dom_.dim == 1) {
      const Vec a = dom_.bounding_box[0], b = dom_.bounding_box[1];
      const double da = x[0] - a[0], db = b[0] - x[0];
      const double sigma = (da <= db) ? 0.0 : 1.0;
      const double n = normal(sigma)[0];
      return std::make_pair(sigma, (x[0] - endpoint(sigma)[0]) / n);
    }
    double sigma = seed_sigma(x);
    double z = dom_.phi(x);
    for (int it = 0; it < 60; ++it) {
      const Vec r = map(sigma, z) - x;
      if (r.norm() < 1e-13) return std::make_pair(sigma, z);
      // Jacobian [d map/d sigma, d map/d z] by finite differences in sigma
      const double hs = 1e-7;
      const Vec ds = (map(sigma + hs, z) - map(sigma - hs, z)) * (1.0 / (2.0 * hs));
      const Vec dz = normal(sigma);
      const double det = ds[0] * dz[1] - ds[1] * dz[0];
      if (std::abs(det) < 1e-14) return std::nullopt;
      sigma -= (r[0] * dz[1] - r[1] * dz[0]) / det;
      z -= (ds[0] * r[1] - ds[1] * r[0]) / det;
    }
    return std::nullopt;
  }

  // Normal coordinate z(x); the g-distance coordinate of the chart.
  double z_of(const Vec& x) const {
    auto sz = invert(x);
    if (!sz) throw CollarError("collar inversion failed");
    return sz->second;
  }

  Vec grad_z(const Vec& x) const {
    if (dom_.dim == 1) {
      auto sz = invert(x);
      return Vec(1, 1.0 / normal(sz->first)[0]);
    }
    const double h = 1e-6;
    Vec g(2, 0.0, 0.0);
    for (int k = 0; k < 2; ++k) {
      Vec xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      g[k] = (z_of(xp) - z_of(xm)) / (2.0 * h);
    }
    return g;
  }

  // Chart Jacobian J = [dmap/dsigma, dmap/dz] at (sigma, z); columns in
  // Cartesian coordinates.  In 1D J is the scalar n.
  Mat jacobian(double sigma, double z) const {
    Mat J;
    J.dim = dom_.dim;
    if (dom_.dim == 1) {
      J(0, 0) = normal(sigma)[0];
      return J;
    }
    const double hs = 1e-7;
    const Vec ds = (map(sigma + hs, z) - map(sigma - hs, z)) * (1.0 / (2.0 * hs));
    const Vec dz = normal(sigma);
    J(0, 0) = ds[0];
    J(1, 0) = ds[1];
    J(0, 1) = dz[0];
    J(1, 1) = dz[1];
    return J;
  }

  // Pulled-back metric G = J^T g J in chart coordinates.
  Mat metric_in_chart(double sigma, double z) const {
    const Mat J = jacobian(sigma, z);
    const Mat g = met_.g(map(sigma, z));
    Mat G;
    G.dim = dom_.dim;
    if (dom_.dim == 1) {
      G(0, 0) = J(0, 0) * g(0, 0) * J(0, 0);
      return G;
    }
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double s = 0.0;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) s += J(a, i) * g(a, b) * J(b, j);
        G(i, j) = s;
      }
    return G;
  }

  ChartPoint to_chart(const PhasePoint& rho) const {
    auto sz = invert(rho.x);
    if (!sz) throw CollarError("point is outside the collar");
    ChartPoint c;
    c.t = rho.t;
    c.tau = rho.tau;
    c.sigma = sz->first;
    c.z = sz->second;
    const Mat J = jacobian(c.sigma, c.z);
    if (dom_.dim == 1) {
      c.xi_t = 0.0;
      c.zeta = J(0, 0) * rho.xi[0];
    } else {
      // covector transform: xi_chart = J^T xi_cart
      c.xi_t = J(0, 0) * rho.xi[0] + J(1, 0) * rho.xi[1];
      c.zeta = J(0, 1) * rho.xi[0] + J(1, 1) * rho.xi[1];
    }
    return c;
  }

  PhasePoint from_chart(const ChartPoint& c) const {
    PhasePoint rho;
    rho.t = c.t;
    rho.tau = c.tau;
    rho.x = map(c.sigma, c.z);
    const Mat J = jacobian(c.sigma, c.z);
    if (dom_.dim == 1) {
      rho.xi = Vec(1, c.zeta / J(0, 0));
    } else {
      const Mat Jit = J.inverse();  // then transpose application
      rho.xi = Vec(2, Jit(0, 0) * c.xi_t + Jit(1, 0) * c.zeta,
                   Jit(0, 1) * c.xi_t + Jit(1, 1) * c.zeta);
    }
    return rho;
  }

  // Tangential wave symbol p(pi_par rho) at z = 0: -tau^2 + |xi'|^2 in the
  // induced boundary metric.
  double p_parallel(const ChartPoint& c) const {
    if (dom_.dim == 1) return -c.tau * c.tau;
    const Mat G = metric_in_chart(c.sigma, 0.0);
    return -c.tau * c.tau + c.xi_t * c.xi_t / G(0, 0);
  }

 private:
  Vec endpoint(double sigma) const {
    return sigma < 0.5 ? dom_.bounding_box[0] : dom_.bounding_box[1];
  }

  Vec tangent(double sigma) const {
    const double h = 1e-6;
    Vec tg = (dom_.boundary_param(sigma + h) - dom_.boundary_param(sigma - h)) * (1.0 / (2.0 * h));
    return tg * (1.0 / std::max(tg.norm(), 1e-300));
  }

  double seed_sigma(const Vec& x) const {
    double best = 0.0, bestd = 1e300;
    const double len = dom_.boundary_length > 0.0 ? dom_.boundary_length
                                                  : 2.0 * (dom_.bounding_box[1][0] - dom_.bounding_box[0][0]);
    const double s0 = dom_.boundary_length > 0.0 ? 0.0 : dom_.bounding_box[0][0];
    const int ns = 256;
    for (int i = 0; i < ns; ++i) {
      const double s = s0 + len * i / ns;
      const double dd = (dom_.boundary_param(s) - x).norm();
      if (dd < bestd) {
        bestd = dd;
        best = s;
      }
    }
    return best;
  }

  void check_jacobian() const {
    if (dom_.dim == 1) return;
    const double len = dom_.boundary_length > 0.0 ? dom_.boundary_length : 4.0;
    const int ns = 64;
    for (int i = 0; i < ns; ++i) {
      const double s = len * (i + 0.37) / ns;
      for (double z : {0.0, 0.5 * delta0_, delta0_}) {
        const Mat J = jacobian(s, z);
        if (J.det() <= 0.0)
          throw CollarError("collar too wide: chart Jacobian degenerates inside collar");
      }
    }
  }

  Domain dom_;
  MetricField met_;
  double delta0_;
};

inline CollarChart build_collar_chart(const Domain& d, const MetricField& m, double delta0) {
  return CollarChart(d, m, delta0);
}

}  // namespace gcckit
