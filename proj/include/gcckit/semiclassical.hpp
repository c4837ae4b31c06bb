#pragma once

// Semiclassical quantization on periodic grids (left quantization
// u -> (2pi)^{-d} int e^{ix xi} a(x, h xi) u^(xi) d xi), kernels with Schur
// norm bounds, commutator-decay experiments, tangential operators, Fourier
// multipliers, and Euclidean symbol division against a quadratic p.

#include <Eigen/Dense>

#include <array>
#include <atomic>
#include <cmath>
#include <random>
#include <complex>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "gcckit/expr.hpp"
#include "gcckit/fft.hpp"
#include "gcckit/geometry.hpp"

namespace gcckit {

using cd = std::complex<double>;

struct QuantizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Symbols.

struct Symbol {
  int dim = 1;
  std::string id = "anonymous";
  std::function<cd(const Vec& x, const Vec& xi)> eval;
  // analytic xi-derivative; when absent a centered difference is used
  std::function<cd(const Vec& x, const Vec& xi, int j)> d_xi_analytic;

  // exact product form a = part_x(x) * part_xi(xi); enables the fast path
  bool separable = false;
  std::function<cd(const Vec&)> part_x;
  std::function<cd(const Vec&)> part_xi;

  // claimed decay band |xi| <= xi_support (1e300 when unbounded)
  double xi_support = 1e300;

  cd operator()(const Vec& x, const Vec& xi) const { return eval(x, xi); }

  cd d_xi(const Vec& x, const Vec& xi, int j) const {
    if (d_xi_analytic) return d_xi_analytic(x, xi, j);
    const double step = 1e-5 * std::max(1.0, std::abs(xi[j]));
    Vec xp = xi, xm = xi;
    xp[j] += step;
    xm[j] -= step;
    return (eval(x, xp) - eval(x, xm)) / (2.0 * step);
  }
};

inline Symbol separable_symbol(int dim, std::function<cd(const Vec&)> fx,
                               std::function<cd(const Vec&)> gxi, std::string id = "separable") {
  Symbol a;
  a.dim = dim;
  a.id = std::move(id);
  a.separable = true;
  a.part_x = std::move(fx);
  a.part_xi = std::move(gxi);
  a.eval = [px = a.part_x, pg = a.part_xi](const Vec& x, const Vec& xi) {
    return px(x) * pg(xi);
  };
  return a;
}

inline Symbol multiplier_symbol(int dim, std::function<cd(const Vec&)> gxi,
                                std::string id = "multiplier") {
  return separable_symbol(dim, [](const Vec&) { return cd(1.0); }, std::move(gxi),
                          std::move(id));
}

// Symbol from an arithmetic expression in x1[, x2], xi1[, xi2].
inline Symbol symbol_from_expr(int dim, std::string_view src, std::string id = "") {
  auto ast = expr::parse(src);
  Symbol a;
  a.dim = dim;
  a.id = id.empty() ? std::string(src) : std::move(id);
  a.eval = [ast, dim](const Vec& x, const Vec& xi) -> cd {
    std::map<std::string, double> env{{"x1", x[0]}, {"xi1", xi[0]}};
    if (dim > 1) {
      env["x2"] = x[1];
      env["xi2"] = xi[1];
    }
    return cd(ast->eval(env));
  };
  return a;
}

// ---------------------------------------------------------------------------
// Grids: uniform periodic boxes, power-of-two points per axis.

struct Grid {
  int dim = 1;
  std::array<std::size_t, 2> n{64, 1};
  Vec lo, hi;

  static Grid line(std::size_t n1, double a, double b) {
    Grid g;
    g.dim = 1;
    g.n = {n1, 1};
    g.lo = Vec(1, a);
    g.hi = Vec(1, b);
    return g;
  }

  static Grid box(std::size_t n1, std::size_t n2, const Vec& lo, const Vec& hi) {
    Grid g;
    g.dim = 2;
    g.n = {n1, n2};
    g.lo = lo;
    g.hi = hi;
    return g;
  }

  std::size_t total() const { return dim == 1 ? n[0] : n[0] * n[1]; }

  double length(int axis) const { return hi[axis] - lo[axis]; }
  double spacing(int axis) const { return length(axis) / static_cast<double>(n[axis]); }

  Vec x(std::size_t flat) const {
    if (dim == 1) return Vec(1, lo[0] + static_cast<double>(flat) * spacing(0));
    const std::size_t i = flat / n[1], j = flat % n[1];
    return Vec(2, lo[0] + static_cast<double>(i) * spacing(0),
               lo[1] + static_cast<double>(j) * spacing(1));
  }

  // signed frequency for FFT bin k on the given axis
  double freq(int axis, std::size_t k) const {
    const auto half = n[static_cast<std::size_t>(axis)] / 2;
    const double ks = k < half ? static_cast<double>(k)
                               : static_cast<double>(k) -
                                     static_cast<double>(n[static_cast<std::size_t>(axis)]);
    return 2.0 * 3.14159265358979323846 * ks / length(axis);
  }

  double max_freq(int axis) const {
    return 3.14159265358979323846 * static_cast<double>(n[static_cast<std::size_t>(axis)]) /
           length(axis);
  }

  // L2 inner product / norm with the cell-volume weight
  double cell() const { return dim == 1 ? spacing(0) : spacing(0) * spacing(1); }

  double norm(const std::vector<cd>& u) const {
    double s = 0.0;
    for (const auto& v : u) s += std::norm(v);
    return std::sqrt(s * cell());
  }

  cd inner(const std::vector<cd>& u, const std::vector<cd>& v) const {
    cd s(0.0);
    for (std::size_t i = 0; i < u.size(); ++i) s += std::conj(v[i]) * u[i];
    return s * cell();
  }
};

// ---------------------------------------------------------------------------
// Grid operators.

enum class QuantType { Full, Tangential, Multiplier };

struct GridOperator {
  std::function<std::vector<cd>(const std::vector<cd>&)> apply;
  double h = 1.0;
  std::string symbol_id;
  QuantType type = QuantType::Full;

  std::vector<cd> operator()(const std::vector<cd>& u) const { return apply(u); }
};

namespace detail {

inline void sc_parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (hw == 1 || count < 8) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (unsigned t = 0; t < std::min<std::size_t>(hw, count); ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

inline void check_band(const Symbol& a, double h, const Grid& grid) {
  if (a.xi_support >= 1e299) return;
  for (int ax = 0; ax < grid.dim; ++ax) {
    const double covered = h * grid.max_freq(ax);
    if (a.xi_support > covered) {
      const auto needed = static_cast<std::size_t>(
          std::ceil(a.xi_support / h * grid.length(ax) / 3.14159265358979323846));
      throw QuantizeError("symbol band exceeds the grid at this scale; need >= " +
                          std::to_string(needed) + " points on axis " + std::to_string(ax));
    }
  }
}

inline GridOperator quantize(const Symbol& a, double h, const Grid& grid) {
  check_band(a, h, grid);
  GridOperator op;
  op.h = h;
  op.symbol_id = a.id;
  op.type = a.separable && !a.part_x ? QuantType::Multiplier : QuantType::Full;

  if (a.separable) {
    // exact factorization: f(x) g(hD)
    auto fx = a.part_x;
    auto gxi = a.part_xi;
    op.apply = [fx, gxi, h, grid](const std::vector<cd>& u) {
      std::vector<cd> w = u;
      if (grid.dim == 1) {
        fft::forward(w);
        for (std::size_t k = 0; k < grid.n[0]; ++k) w[k] *= gxi(Vec(1, h * grid.freq(0, k)));
        fft::inverse(w);
      } else {
        const std::vector<std::size_t> dims{grid.n[0], grid.n[1]};
        fft::forward_nd(w, dims);
        for (std::size_t i = 0; i < grid.n[0]; ++i)
          for (std::size_t j = 0; j < grid.n[1]; ++j)
            w[i * grid.n[1] + j] *= gxi(Vec(2, h * grid.freq(0, i), h * grid.freq(1, j)));
        fft::inverse_nd(w, dims);
      }
      for (std::size_t i = 0; i < w.size(); ++i) w[i] *= fx(grid.x(i));
      return w;
    };
    return op;
  }

  // general left quantization: per-x row over the full frequency sum
  op.apply = [a, h, grid](const std::vector<cd>& u) {
    const std::size_t N = grid.total();
    std::vector<cd> F = u;
    std::vector<std::size_t> dims;
    if (grid.dim == 1) {
      fft::forward(F);
      dims = {grid.n[0]};
    } else {
      dims = {grid.n[0], grid.n[1]};
      fft::forward_nd(F, dims);
    }
    std::vector<cd> out(N);
    const double two_pi = 2.0 * 3.14159265358979323846;
    detail::sc_parallel_for(grid.dim == 1 ? grid.n[0] : grid.n[0] * grid.n[1],
                            [&](std::size_t m) {
      const Vec xm = grid.x(m);
      cd acc(0.0);
      if (grid.dim == 1) {
        const std::size_t n = grid.n[0];
        const double ph0 = two_pi * static_cast<double>(m) / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
          const cd e(std::cos(ph0 * static_cast<double>(k)),
                     std::sin(ph0 * static_cast<double>(k)));
          acc += a(xm, Vec(1, h * grid.freq(0, k))) * F[k] * e;
        }
        acc /= static_cast<double>(n);
      } else {
        const std::size_t mi = m / grid.n[1], mj = m % grid.n[1];
        const double p0 = two_pi * static_cast<double>(mi) / static_cast<double>(grid.n[0]);
        const double p1 = two_pi * static_cast<double>(mj) / static_cast<double>(grid.n[1]);
        for (std::size_t ki = 0; ki < grid.n[0]; ++ki)
          for (std::size_t kj = 0; kj < grid.n[1]; ++kj) {
            const double ph = p0 * static_cast<double>(ki) + p1 * static_cast<double>(kj);
            acc += a(xm, Vec(2, h * grid.freq(0, ki), h * grid.freq(1, kj))) *
                   F[ki * grid.n[1] + kj] * cd(std::cos(ph), std::sin(ph));
          }
        acc /= static_cast<double>(grid.n[0] * grid.n[1]);
      }
      out[m] = acc;
    });
    return out;
  };
  return op;
}

// Fourier multiplier f(hD).
inline GridOperator multiplier(const std::function<cd(const Vec&)>& f, double h,
                               const Grid& grid) {
  GridOperator op = quantize(multiplier_symbol(grid.dim, f), h, grid);
  op.type = QuantType::Multiplier;
  return op;
}

// Tangential quantization: acts along axis 0 with axis 1 (z) a parameter;
// the symbol sees the full base point (y', z) but only the tangential xi.
inline GridOperator tangential_quantize(const Symbol& a, double h, const Grid& grid) {
  if (grid.dim != 2) throw QuantizeError("tangential_quantize needs a 2-d grid");
  GridOperator op;
  op.h = h;
  op.symbol_id = a.id;
  op.type = QuantType::Tangential;
  op.apply = [a, h, grid](const std::vector<cd>& u) {
    const std::size_t n1 = grid.n[0], n2 = grid.n[1];
    std::vector<cd> out(n1 * n2);
    const double two_pi = 2.0 * 3.14159265358979323846;
    detail::sc_parallel_for(n2, [&](std::size_t j) {
      // z-slice: gather, 1-d quantize along axis 0, scatter
      std::vector<cd> line(n1);
      for (std::size_t i = 0; i < n1; ++i) line[i] = u[i * n2 + j];
      fft::forward(line);
      const double z = grid.lo[1] + static_cast<double>(j) * grid.spacing(1);
      for (std::size_t m = 0; m < n1; ++m) {
        const double y = grid.lo[0] + static_cast<double>(m) * grid.spacing(0);
        cd acc(0.0);
        const double ph0 = two_pi * static_cast<double>(m) / static_cast<double>(n1);
        for (std::size_t k = 0; k < n1; ++k) {
          const cd e(std::cos(ph0 * static_cast<double>(k)),
                     std::sin(ph0 * static_cast<double>(k)));
          acc += a(Vec(2, y, z), Vec(1, h * grid.freq(0, k))) * line[k] * e;
        }
        out[m * n2 + j] = acc / static_cast<double>(n1);
      }
    });
    return out;
  };
  return op;
}

// ---------------------------------------------------------------------------
// Operator-norm probe: materialize the matrix (grid sizes used for probing
// are small) and run power iteration on A^H A, 30 steps, 5 restarts.

inline double probe_norm(const GridOperator& op, const Grid& grid, unsigned seed = 7) {
  const std::size_t N = grid.total();
  if (N > 4096) throw QuantizeError("probe_norm: grid too large to materialize");
  Eigen::MatrixXcd A(N, N);
  std::vector<cd> e(N, cd(0.0));
  for (std::size_t j = 0; j < N; ++j) {
    e[j] = cd(1.0);
    const std::vector<cd> col = op.apply(e);
    for (std::size_t i = 0; i < N; ++i) A(static_cast<Eigen::Index>(i),
                                          static_cast<Eigen::Index>(j)) = col[i];
    e[j] = cd(0.0);
  }
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double best = 0.0;
  for (int restart = 0; restart < 5; ++restart) {
    Eigen::VectorXcd v(N);
    for (std::size_t i = 0; i < N; ++i) v[static_cast<Eigen::Index>(i)] = cd(gauss(rng), gauss(rng));
    v.normalize();
    for (int it = 0; it < 30; ++it) {
      Eigen::VectorXcd w = A.adjoint() * (A * v);
      const double nn = w.norm();
      if (nn < 1e-300) break;
      v = w / nn;
    }
    best = std::max(best, (A * v).norm());
  }
  return best;
}

// ---------------------------------------------------------------------------
// Kernel k_a(x, v) = (2pi)^{-d} int e^{i v xi} a(x, xi) d xi and the Schur
// norm bound sup_x int |k_a(x, v)| dv (h-independent).

struct KernelInfo {
  // k(x_index, v_index) on the sampling grids below
  std::vector<Vec> x_samples;
  std::vector<double> v_samples;  // d = 1 only
  std::vector<std::vector<cd>> k;
  double schur_bound = 0.0;
  double m_norm = 0.0;  // sampled sup <xi>^{d+1} |d_xi^beta a|, |beta| <= d+1
  bool decay_warning = false;
};

inline KernelInfo kernel_and_schur(const Symbol& a, const Grid& grid, double xi_max = 0.0,
                                   std::size_t n_xi = 1024, int n_x = 33) {
  if (a.dim != 1) throw QuantizeError("kernel_and_schur implemented for d = 1");
  if (xi_max <= 0.0) xi_max = a.xi_support < 1e299 ? 1.25 * a.xi_support : 64.0;

  KernelInfo info;
  const double dxi = 2.0 * xi_max / static_cast<double>(n_xi);
  const double two_pi = 2.0 * 3.14159265358979323846;
  info.v_samples.resize(n_xi);
  const double v_spacing = two_pi / (2.0 * xi_max);
  for (std::size_t j = 0; j < n_xi; ++j) {
    const double js = j < n_xi / 2 ? static_cast<double>(j)
                                   : static_cast<double>(j) - static_cast<double>(n_xi);
    info.v_samples[j] = js * v_spacing;
  }

  std::vector<double> row_integral;
  for (int ix = 0; ix < n_x; ++ix) {
    const double x = grid.lo[0] + grid.length(0) * ix / (n_x - 1);
    info.x_samples.push_back(Vec(1, x));
    std::vector<cd> row(n_xi);
    for (std::size_t k = 0; k < n_xi; ++k) {
      // xi ordered to match the signed v bins: bin k holds xi_k signed
      const double ks = k < n_xi / 2 ? static_cast<double>(k)
                                     : static_cast<double>(k) - static_cast<double>(n_xi);
      row[k] = a(Vec(1, x), Vec(1, ks * dxi));
    }
    // int e^{i v xi} a d xi = inverse-sign transform * dxi
    fft::transform(row.data(), n_xi, +1);
    for (auto& val : row) val *= dxi / two_pi;
    double integ = 0.0;
    for (const auto& val : row) integ += std::abs(val) * v_spacing;
    row_integral.push_back(integ);
    info.k.push_back(std::move(row));
  }

  // dominating envelope over x: valid for both Schur factors
  double env_int = 0.0;
  for (std::size_t j = 0; j < n_xi; ++j) {
    double env = 0.0;
    for (const auto& row : info.k) env = std::max(env, std::abs(row[j]));
    env_int += env * v_spacing;
  }
  info.schur_bound = env_int;

  // sampled M norm and decay sanity: <xi>^2 |a|, |d_xi a|, |d_xi^2 a|
  double M = 0.0;
  for (int ix = 0; ix < 9; ++ix) {
    const double x = grid.lo[0] + grid.length(0) * ix / 8.0;
    for (int ik = 0; ik <= 64; ++ik) {
      const double xi = -xi_max + 2.0 * xi_max * ik / 64.0;
      const Vec xv(1, x), kv(1, xi);
      const double w = 1.0 + xi * xi;
      const double step = 1e-3 * std::max(1.0, std::abs(xi));
      const cd am = a(xv, Vec(1, xi - step)), a0 = a(xv, kv), ap = a(xv, Vec(1, xi + step));
      const cd d1 = (ap - am) / (2.0 * step);
      const cd d2 = (ap - 2.0 * a0 + am) / (step * step);
      M = std::max({M, w * std::abs(a0), w * std::abs(d1), w * std::abs(d2)});
    }
  }
  info.m_norm = M;
  if (!std::isfinite(M) || M > 1e12) info.decay_warning = true;
  return info;
}

// ---------------------------------------------------------------------------
// Commutator decay experiment.

struct DecayRow {
  double h = 0.0;
  double norm = 0.0;
  double corrected_norm = 0.0;
};

struct DecayTable {
  std::vector<DecayRow> rows;
  double slope = 0.0;            // log-log fit of norm vs h
  double corrected_slope = 0.0;  // same for the corrected operator
};

inline double loglog_slope(const std::vector<double>& h, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (y[i] <= 0.0) continue;
    const double lx = std::log(h[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return 0.0;
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// theta acts by multiplication; grad_theta feeds the corrected operator of
// the o(h) refinement: [Op^h(a), theta] + i h sum_j d_j theta Op^h(d_xi_j a).
inline DecayTable commutator_decay(const Symbol& a,
                                   const std::function<double(const Vec&)>& theta,
                                   const std::function<Vec(const Vec&)>& grad_theta,
                                   const std::vector<double>& h_list, const Grid& grid) {
  DecayTable table;
  const std::size_t N = grid.total();

  Symbol da[2];
  for (int j = 0; j < grid.dim; ++j) {
    da[j] = a;
    da[j].id = a.id + "_dxi" + std::to_string(j + 1);
    da[j].eval = [a, j](const Vec& x, const Vec& xi) { return a.d_xi(x, xi, j); };
    da[j].d_xi_analytic = nullptr;
    da[j].separable = false;
  }

  for (double h : h_list) {
    GridOperator A = quantize(a, h, grid);
    GridOperator D[2];
    for (int j = 0; j < grid.dim; ++j) D[j] = quantize(da[j], h, grid);

    auto comm = [&](const std::vector<cd>& u) {
      std::vector<cd> tu(N);
      for (std::size_t i = 0; i < N; ++i) tu[i] = theta(grid.x(i)) * u[i];
      std::vector<cd> l = A.apply(tu);
      std::vector<cd> r = A.apply(u);
      for (std::size_t i = 0; i < N; ++i) l[i] -= theta(grid.x(i)) * r[i];
      return l;
    };
    GridOperator C;
    C.h = h;
    C.symbol_id = "[" + a.id + ",theta]";
    C.apply = comm;

    GridOperator W;
    W.h = h;
    W.symbol_id = C.symbol_id + "+corr";
    W.apply = [&, h](const std::vector<cd>& u) {
      std::vector<cd> out = comm(u);
      for (int j = 0; j < grid.dim; ++j) {
        const std::vector<cd> dju = D[j].apply(u);
        for (std::size_t i = 0; i < N; ++i) {
          const Vec gth = grad_theta(grid.x(i));
          out[i] += cd(0.0, h) * gth[j] * dju[i];
        }
      }
      return out;
    };

    DecayRow row;
    row.h = h;
    row.norm = probe_norm(C, grid);
    row.corrected_norm = probe_norm(W, grid);
    table.rows.push_back(row);
  }

  std::vector<double> hs, ns, cs;
  for (const auto& r : table.rows) {
    hs.push_back(r.h);
    ns.push_back(r.norm);
    cs.push_back(r.corrected_norm);
  }
  table.slope = loglog_slope(hs, ns);
  table.corrected_slope = loglog_slope(hs, cs);
  return table;
}

// ---------------------------------------------------------------------------
// Euclidean symbol division against p quadratic in zeta:
//   chi * b = b0 + b1 zeta + q * p.
// b must accept complex zeta (the roots may be complex off the hyperbolic
// region); p is probed at three points to extract its coefficients.

struct DivisionParts {
  std::function<cd(const Vec& base)> b0;
  std::function<cd(const Vec& base)> b1;
  std::function<cd(const Vec& base, double zeta)> q;
  std::function<double(const Vec& base, double zeta)> residual;
};

namespace detail {

struct QuadCoeffs {
  cd A, B, C;  // p = A z^2 + B z + C
  std::pair<cd, cd> roots() const {
    const cd disc = std::sqrt(B * B - 4.0 * A * C);
    return {(-B - disc) / (2.0 * A), (-B + disc) / (2.0 * A)};
  }
};

inline QuadCoeffs probe_quadratic(const std::function<cd(const Vec&, cd)>& p, const Vec& base) {
  const cd pm = p(base, cd(-1.0)), p0 = p(base, cd(0.0)), pp = p(base, cd(1.0));
  QuadCoeffs qc;
  qc.C = p0;
  qc.A = (pp + pm) / 2.0 - p0;
  qc.B = (pp - pm) / 2.0;
  // quadratic-in-zeta check at a fourth point
  const cd p2 = p(base, cd(2.0));
  const cd model = qc.A * 4.0 + qc.B * 2.0 + qc.C;
  const double scale = std::max({std::abs(pm), std::abs(pp), std::abs(p2), 1.0});
  if (std::abs(p2 - model) > 1e-9 * scale)
    throw QuantizeError("euclidean_divide: p is not quadratic in zeta");
  if (std::abs(qc.A) < 1e-14 * scale)
    throw QuantizeError("euclidean_divide: leading coefficient vanishes");
  return qc;
}

}  // namespace detail

inline DivisionParts euclidean_divide(const std::function<cd(const Vec&, cd)>& b,
                                      const std::function<cd(const Vec&, cd)>& p,
                                      const std::function<double(const Vec&)>& chi,
                                      double confluence_tol = 1e-7) {
  auto coeffs_at = [b, p, chi, confluence_tol](const Vec& base) {
    const detail::QuadCoeffs qc = detail::probe_quadratic(p, base);
    const auto [zm, zp] = qc.roots();
    const double c = chi(base);
    cd b0, b1;
    const double scale = std::max(1.0, std::max(std::abs(zm), std::abs(zp)));
    if (std::abs(zp - zm) > confluence_tol * scale) {
      // two-point Lagrange interpolation at the roots
      b1 = c * (b(base, zp) - b(base, zm)) / (zp - zm);
      b0 = c * b(base, zp) - b1 * zp;
    } else {
      // confluent limit: derivative rule at the double root
      const cd z0 = (zm + zp) / 2.0;
      const double step = 1e-6 * scale;
      b1 = c * (b(base, z0 + step) - b(base, z0 - step)) / (2.0 * step);
      b0 = c * b(base, z0) - b1 * z0;
    }
    struct Out {
      cd b0, b1;
      detail::QuadCoeffs qc;
    };
    return Out{b0, b1, qc};
  };

  DivisionParts parts;
  parts.b0 = [coeffs_at](const Vec& base) { return coeffs_at(base).b0; };
  parts.b1 = [coeffs_at](const Vec& base) { return coeffs_at(base).b1; };
  parts.q = [coeffs_at, b, p, chi](const Vec& base, double zeta) -> cd {
    const auto co = coeffs_at(base);
    const auto [zm, zp] = co.qc.roots();
    const cd z(zeta);
    const double root_dist = std::min(std::abs(z - zm), std::abs(z - zp));
    const double scale = std::max(1.0, std::abs(z));
    if (root_dist > 1e-5 * scale) {
      const cd num = chi(base) * b(base, z) - co.b0 - co.b1 * z;
      return num / p(base, z);
    }
    // at a root: q = (chi b' - b1) / p' by the limit rule
    const double step = 1e-6 * scale;
    const cd bprime = (b(base, z + step) - b(base, z - step)) / (2.0 * step);
    const cd pprime = 2.0 * co.qc.A * z + co.qc.B;
    if (std::abs(pprime) < 1e-12) {
      // double root: q = (chi b'' ) / p'' / ... second-order limit
      const cd bsec = (b(base, z + step) - 2.0 * b(base, z) + b(base, z - step)) / (step * step);
      return chi(base) * bsec / (2.0 * co.qc.A);
    }
    return (chi(base) * bprime - co.b1) / pprime;
  };
  parts.residual = [coeffs_at, b, p, chi, parts](const Vec& base, double zeta) {
    const auto co = coeffs_at(base);
    const cd z(zeta);
    const cd lhs = chi(base) * b(base, z);
    const cd rhs = co.b0 + co.b1 * z + parts.q(base, zeta) * p(base, z);
    return std::abs(lhs - rhs);
  };
  return parts;
}

}  // namespace gcckit
