#pragma once

// Domains, rough metrics, the wave symbol and its Hamiltonian vector field.
//
// All types are immutable after construction and safe to share across
// concurrent ray workers.  Coefficient oracles must be pure functions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcckit {

// ---------------------------------------------------------------------------
// Small fixed-capacity vector/matrix for spatial dimension 1 or 2.

struct Vec {
  int dim = 2;
  std::array<double, 2> v{0.0, 0.0};

  Vec() = default;
  Vec(int d, double a, double b = 0.0) : dim(d), v{a, b} {}
  static Vec zero(int d) { return Vec(d, 0.0, 0.0); }

  double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }

  Vec operator+(const Vec& o) const { return Vec(dim, v[0] + o.v[0], v[1] + o.v[1]); }
  Vec operator-(const Vec& o) const { return Vec(dim, v[0] - o.v[0], v[1] - o.v[1]); }
  Vec operator*(double s) const { return Vec(dim, v[0] * s, v[1] * s); }
  double dot(const Vec& o) const { return v[0] * o.v[0] + v[1] * o.v[1]; }
  double norm() const { return std::sqrt(dot(*this)); }
};

inline Vec operator*(double s, const Vec& a) { return a * s; }

struct Mat {
  int dim = 2;
  // row-major, entries beyond dim are zero
  std::array<double, 4> m{0.0, 0.0, 0.0, 0.0};

  Mat() = default;
  static Mat identity(int d) {
    Mat a;
    a.dim = d;
    a.m = {1.0, 0.0, 0.0, 1.0};
    return a;
  }
  static Mat diag(int d, double a, double b = 1.0) {
    Mat g;
    g.dim = d;
    g.m = {a, 0.0, 0.0, b};
    return g;
  }

  double& operator()(int i, int j) { return m[static_cast<std::size_t>(2 * i + j)]; }
  double operator()(int i, int j) const { return m[static_cast<std::size_t>(2 * i + j)]; }

  Vec apply(const Vec& x) const {
    if (dim == 1) return Vec(1, m[0] * x[0]);
    return Vec(2, m[0] * x[0] + m[1] * x[1], m[2] * x[0] + m[3] * x[1]);
  }

  double quad(const Vec& x) const { return x.dot(apply(x)); }

  Mat inverse() const {
    Mat r;
    r.dim = dim;
    if (dim == 1) {
      r.m[0] = 1.0 / m[0];
      return r;
    }
    const double det = m[0] * m[3] - m[1] * m[2];
    r.m = {m[3] / det, -m[1] / det, -m[2] / det, m[0] / det};
    return r;
  }

  double det() const { return dim == 1 ? m[0] : m[0] * m[3] - m[1] * m[2]; }

  Mat operator+(const Mat& o) const {
    Mat r = *this;
    for (int i = 0; i < 4; ++i) r.m[static_cast<std::size_t>(i)] += o.m[static_cast<std::size_t>(i)];
    return r;
  }
  Mat operator*(double s) const {
    Mat r = *this;
    for (auto& e : r.m) e *= s;
    return r;
  }

  // eigenvalues of a symmetric matrix
  std::array<double, 2> sym_eigenvalues() const {
    if (dim == 1) return {m[0], m[0]};
    const double tr = m[0] + m[3];
    const double dd = det();
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - dd));
    return {tr / 2.0 - disc, tr / 2.0 + disc};
  }
};

// ---------------------------------------------------------------------------
// Phase-space point rho = (t, x, tau, xi) in T*(R_t x M).

struct PhasePoint {
  double t = 0.0;
  Vec x;
  double tau = 0.0;
  Vec xi;

  PhasePoint() = default;
  PhasePoint(double t_, Vec x_, double tau_, Vec xi_) : t(t_), x(x_), tau(tau_), xi(xi_) {}
};

// ---------------------------------------------------------------------------
// Domain: a planar (or interval) domain described by a level set phi with
// phi > 0 inside, together with an arc-length boundary parameterization.

enum class DomainKind { Interval, Square, Disc, HalfPlane, LevelSet };

struct Domain {
  DomainKind kind = DomainKind::Square;
  int dim = 2;
  std::function<double(const Vec&)> phi;       // > 0 inside
  std::function<Vec(const Vec&)> grad_phi;
  std::array<Vec, 2> bounding_box;             // lo, hi corners
  // arc-length parameterization of the boundary (2D); q(sigma), |q'| = 1
  std::function<Vec(double)> boundary_param;
  double boundary_length = 0.0;                 // period of sigma (0 for half-plane)
  double collar_width = 0.2;                    // declared collar {|phi| <= delta0}

  bool inside(const Vec& x) const { return phi(x) > 0.0; }
  bool inside_closed(const Vec& x, double tol = 1e-12) const { return phi(x) >= -tol; }
};

inline Domain make_interval(double a = 0.0, double b = 1.0) {
  Domain d;
  d.kind = DomainKind::Interval;
  d.dim = 1;
  d.phi = [a, b](const Vec& x) { return std::min(x[0] - a, b - x[0]); };
  d.grad_phi = [a, b](const Vec& x) {
    return Vec(1, (x[0] - a < b - x[0]) ? 1.0 : -1.0);
  };
  d.bounding_box = {Vec(1, a), Vec(1, b)};
  d.boundary_length = 0.0;
  d.collar_width = 0.25 * (b - a);
  return d;
}

inline Domain make_unit_square() {
  Domain d;
  d.kind = DomainKind::Square;
  d.dim = 2;
  d.phi = [](const Vec& x) {
    return std::min(std::min(x[0], 1.0 - x[0]), std::min(x[1], 1.0 - x[1]));
  };
  d.grad_phi = [](const Vec& x) {
    // gradient of the distance-to-nearest-edge level set
    const double c[4] = {x[0], 1.0 - x[0], x[1], 1.0 - x[1]};
    int k = 0;
    for (int i = 1; i < 4; ++i)
      if (c[i] < c[k]) k = i;
    switch (k) {
      case 0: return Vec(2, 1.0, 0.0);
      case 1: return Vec(2, -1.0, 0.0);
      case 2: return Vec(2, 0.0, 1.0);
      default: return Vec(2, 0.0, -1.0);
    }
  };
  d.bounding_box = {Vec(2, 0.0, 0.0), Vec(2, 1.0, 1.0)};
  d.boundary_param = [](double s) {
    s = std::fmod(std::fmod(s, 4.0) + 4.0, 4.0);
    if (s < 1.0) return Vec(2, s, 0.0);
    if (s < 2.0) return Vec(2, 1.0, s - 1.0);
    if (s < 3.0) return Vec(2, 3.0 - s, 1.0);
    return Vec(2, 0.0, 4.0 - s);
  };
  d.boundary_length = 4.0;
  d.collar_width = 0.2;
  return d;
}

inline Domain make_unit_disc() {
  Domain d;
  d.kind = DomainKind::Disc;
  d.dim = 2;
  d.phi = [](const Vec& x) { return 1.0 - x.norm(); };
  d.grad_phi = [](const Vec& x) {
    const double r = std::max(x.norm(), 1e-300);
    return Vec(2, -x[0] / r, -x[1] / r);
  };
  d.bounding_box = {Vec(2, -1.0, -1.0), Vec(2, 1.0, 1.0)};
  d.boundary_param = [](double s) { return Vec(2, std::cos(s), std::sin(s)); };
  d.boundary_length = 2.0 * 3.14159265358979323846;
  d.collar_width = 0.2;
  return d;
}

// Half-plane collar {x2 > 0}, truncated laterally by the bounding box.
inline Domain make_half_plane(double half_width = 4.0, double height = 4.0) {
  Domain d;
  d.kind = DomainKind::HalfPlane;
  d.dim = 2;
  d.phi = [](const Vec& x) { return x[1]; };
  d.grad_phi = [](const Vec&) { return Vec(2, 0.0, 1.0); };
  d.bounding_box = {Vec(2, -half_width, 0.0), Vec(2, half_width, height)};
  d.boundary_param = [](double s) { return Vec(2, s, 0.0); };
  d.boundary_length = 0.0;  // non-compact boundary
  d.collar_width = 0.5;
  return d;
}

// User level-set domain.  grad phi by centered differences; the boundary
// parameterization is traced numerically from a seed point on {phi = 0}.
Domain make_level_set_domain(std::function<double(const Vec&)> phi,
                             const Vec& box_lo, const Vec& box_hi);

// ---------------------------------------------------------------------------
// Metric field (kappa, g).

enum class Regularity { C1, Lipschitz };

struct MetricField {
  int dim = 2;
  std::function<Mat(const Vec&)> g;       // SPD metric
  std::function<Mat(const Vec&)> g_inv;   // (g^{ij})
  // dg(x, k) = d/dx_k of g_inv; defaults to centered finite differences
  std::function<Mat(const Vec&, int)> dg;
  std::function<double(const Vec&)> kappa;
  std::function<Vec(const Vec&)> dkappa;
  Regularity regularity_tag = Regularity::C1;
  double lip_modulus = 1.0;
  double h_fd = 1e-5;
  bool analytic_dg = false;

  Mat dg_inv(const Vec& x, int k) const {
    if (dg) return dg(x, k);
    Vec xp = x, xm = x;
    xp[k] += h_fd;
    xm[k] -= h_fd;
    const Mat a = g_inv(xp), b = g_inv(xm);
    return (a + b * -1.0) * (1.0 / (2.0 * h_fd));
  }
};

inline MetricField make_flat_metric(int dim) {
  MetricField m;
  m.dim = dim;
  m.g = [dim](const Vec&) { return Mat::identity(dim); };
  m.g_inv = m.g;
  m.dg = [dim](const Vec&, int) { return Mat::diag(dim, 0.0, 0.0); };
  m.kappa = [](const Vec&) { return 1.0; };
  m.dkappa = [dim](const Vec&) { return Vec::zero(dim); };
  m.analytic_dg = true;
  return m;
}

// Conformal metric with g^{ij} = c(x)^2 delta^{ij}.
inline MetricField make_conformal_metric(int dim, std::function<double(const Vec&)> c,
                                         std::function<Vec(const Vec&)> grad_c = nullptr) {
  MetricField m;
  m.dim = dim;
  m.g_inv = [dim, c](const Vec& x) {
    const double s = c(x) * c(x);
    return Mat::diag(dim, s, s);
  };
  m.g = [dim, c](const Vec& x) {
    const double s = 1.0 / (c(x) * c(x));
    return Mat::diag(dim, s, s);
  };
  if (grad_c) {
    m.dg = [dim, c, grad_c](const Vec& x, int k) {
      const double d = 2.0 * c(x) * grad_c(x)[k];
      return Mat::diag(dim, d, d);
    };
    m.analytic_dg = true;
  }
  m.kappa = [](const Vec&) { return 1.0; };
  m.dkappa = [dim](const Vec&) { return Vec::zero(dim); };
  return m;
}

inline MetricField make_matrix_metric(int dim, std::function<Mat(const Vec&)> g) {
  MetricField m;
  m.dim = dim;
  m.g = g;
  m.g_inv = [g](const Vec& x) { return g(x).inverse(); };
  m.kappa = [](const Vec&) { return 1.0; };
  m.dkappa = [dim](const Vec&) { return Vec::zero(dim); };
  return m;
}

// ---------------------------------------------------------------------------
// Wave symbol p(rho) = -tau^2 + |xi|_x^2 and its Hamiltonian field.

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double wave_symbol(const MetricField& m, const PhasePoint& rho) {
  return -rho.tau * rho.tau + m.g_inv(rho.x).quad(rho.xi);
}

inline double wave_symbol_checked(const Domain& d, const MetricField& m, const PhasePoint& rho) {
  if (!d.inside_closed(rho.x, 1e-9))
    throw DomainError("wave_symbol: x outside closure of the domain");
  return wave_symbol(m, rho);
}

struct PhaseTangent {
  double dt = 0.0;
  Vec dx;
  double dtau = 0.0;
  Vec dxi;
};

// H_p = -2 tau d_t + 2 g^{ij} xi_i d_{x_j} - d_{x_k} g^{ij} xi_i xi_j d_{xi_k}
inline PhaseTangent hamiltonian_field(const MetricField& m, const PhasePoint& rho) {
  PhaseTangent v;
  v.dt = -2.0 * rho.tau;
  v.dx = m.g_inv(rho.x).apply(rho.xi) * 2.0;
  v.dtau = 0.0;  // time-independent coefficients
  v.dxi = Vec::zero(m.dim);
  for (int k = 0; k < m.dim; ++k) v.dxi[k] = -m.dg_inv(rho.x, k).quad(rho.xi);
  return v;
}

// ---------------------------------------------------------------------------
// Lipschitz perturbation g~ = g + eps * B(x), B a hat-bump combination with
// W^{1,inf} norm <= 1.  Deterministic per seed; SPD is preserved by rejection.

struct PerturbError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline MetricField lipschitz_perturb(const MetricField& m, const Domain& d, double eps,
                                     std::uint64_t seed, int n_bumps = 6) {
  if (eps == 0.0) return m;

  struct Bump {
    Vec center;
    double radius;
    std::array<double, 3> amp;  // symmetric 2x2 coefficients (a11, a12, a22)
  };

  const Vec lo = d.bounding_box[0], hi = d.bounding_box[1];
  const int dim = m.dim;

  for (int attempt = 0; attempt < 8; ++attempt) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(attempt) * 7919u);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto bumps = std::make_shared<std::vector<Bump>>();
    for (int i = 0; i < n_bumps; ++i) {
      Bump b;
      b.center = Vec(dim, lo[0] + unif(rng) * (hi[0] - lo[0]),
                     dim > 1 ? lo[1] + unif(rng) * (hi[1] - lo[1]) : 0.0);
      const double span = dim > 1 ? std::max(hi[0] - lo[0], hi[1] - lo[1]) : hi[0] - lo[0];
      b.radius = span * (0.15 + 0.35 * unif(rng));
      b.amp = {2.0 * unif(rng) - 1.0, dim > 1 ? 2.0 * unif(rng) - 1.0 : 0.0,
               dim > 1 ? 2.0 * unif(rng) - 1.0 : 0.0};
      bumps->push_back(b);
    }

    // normalize: hat(r) = max(0, 1 - |x-c|/R) has Lipschitz constant 1/R,
    // sup 1; divide each bump so that the W^{1,inf} norm of the sum is <= 1.
    double wnorm = 0.0;
    for (const auto& b : *bumps) {
      const double a =
          std::max({std::abs(b.amp[0]), std::abs(b.amp[1]), std::abs(b.amp[2])});
      wnorm += a * std::max(1.0, 1.0 / b.radius);
    }
    const double scale = wnorm > 0.0 ? 1.0 / wnorm : 0.0;

    auto field = [bumps, scale, dim](const Vec& x) {
      Mat B = Mat::diag(dim, 0.0, 0.0);
      for (const auto& b : *bumps) {
        const double r = (x - b.center).norm();
        const double hat = std::max(0.0, 1.0 - r / b.radius);
        B(0, 0) += scale * b.amp[0] * hat;
        if (dim > 1) {
          B(0, 1) += scale * b.amp[1] * hat;
          B(1, 0) += scale * b.amp[1] * hat;
          B(1, 1) += scale * b.amp[2] * hat;
        }
      }
      return B;
    };

    const auto base_g = m.g;
    MetricField out = m;
    out.regularity_tag = Regularity::Lipschitz;
    out.analytic_dg = false;
    out.dg = nullptr;  // finite differences on the perturbed field
    out.g = [base_g, field, eps](const Vec& x) { return base_g(x) + field(x) * eps; };
    out.g_inv = [out_g = out.g](const Vec& x) { return out_g(x).inverse(); };

    // SPD sampling check over the bounding box
    bool spd = true;
    const int ns = 17;
    for (int i = 0; i <= ns && spd; ++i)
      for (int j = 0; j <= (dim > 1 ? ns : 0) && spd; ++j) {
        Vec x(dim, lo[0] + (hi[0] - lo[0]) * i / ns,
              dim > 1 ? lo[1] + (hi[1] - lo[1]) * j / ns : 0.0);
        if (out.g(x).sym_eigenvalues()[0] <= 1e-8) spd = false;
      }
    if (spd) return out;
  }
  throw PerturbError("lipschitz_perturb: SPD violated after bounded retries");
}

// ---------------------------------------------------------------------------

inline Domain make_level_set_domain_impl(std::function<double(const Vec&)> phi,
                                         const Vec& box_lo, const Vec& box_hi) {
  Domain d;
  d.kind = DomainKind::LevelSet;
  d.dim = 2;
  d.phi = phi;
  d.grad_phi = [phi](const Vec& x) {
    const double h = 1e-6;
    Vec g(2, 0.0, 0.0);
    for (int k = 0; k < 2; ++k) {
      Vec xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      g[k] = (phi(xp) - phi(xm)) / (2.0 * h);
    }
    return g;
  };
  d.bounding_box = {box_lo, box_hi};
  d.collar_width = 0.1;
  return d;
}

inline Domain make_level_set_domain(std::function<double(const Vec&)> phi, const Vec& box_lo,
                                    const Vec& box_hi) {
  return make_level_set_domain_impl(std::move(phi), box_lo, box_hi);
}

}  // namespace gcckit
