#pragma once

// Discrete Dirichlet spectral machinery: eigenbasis of -A_{kappa,g},
// dyadic decomposition, spectral wave evolution, energies, Neumann traces,
// and per-block observability constants.
//
// A f = kappa^{-1} (det g)^{-1/2} d_i ( kappa (det g)^{1/2} g^{ij} d_j f ).
//
// Interval and square use conservative tensor finite differences; the unit
// disc uses boundary-fitted P1 finite elements on a structured polar mesh.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include "gcckit/geometry.hpp"

namespace gcckit {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EigenBasis {
  int dim = 1;
  std::vector<Vec> nodes;        // free (non-Dirichlet) nodes
  Eigen::VectorXd weight;        // quadrature weight per node: kappa sqrt(det g) * cellvol
  Eigen::VectorXd lambda;        // ascending eigenvalues of -A
  Eigen::MatrixXd modes;         // nodes x count, orthonormal in the weighted product
  double dx = 0.0;               // grid spacing (FD paths)
  int n_per_axis = 0;            // FD paths

  // boundary trace machinery: for each boundary sample, d_n e_nu
  std::vector<double> trace_sigma;   // boundary parameter of each trace sample
  std::vector<double> trace_weight;  // arc-length quadrature weight
  Eigen::MatrixXd trace_dn;          // trace samples x count

  int count() const { return static_cast<int>(lambda.size()); }

  double inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    return u.cwiseProduct(weight).dot(v);
  }

  std::complex<double> inner(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) const {
    return (u.conjugate().cwiseProduct(weight.cast<std::complex<double>>())).dot(v);
  }

  Eigen::VectorXcd expand(const Eigen::VectorXcd& f) const {
    return modes.transpose().cast<std::complex<double>>() *
           weight.cast<std::complex<double>>().cwiseProduct(f);
  }

  Eigen::VectorXcd synthesize(const Eigen::VectorXcd& coeff) const {
    return modes.cast<std::complex<double>>() * coeff;
  }
};

namespace detail {

// 1D conservative second-order operator on (a, b) with Dirichlet ends.
// Returns the symmetrized matrix S = W^{1/2} (-A) W^{-1/2} and the node data.
inline void interval_fd(const Domain& d, const MetricField& m, int n_cells, EigenBasis& basis,
                        Eigen::MatrixXd& S) {
  const double a = d.bounding_box[0][0], b = d.bounding_box[1][0];
  const double dx = (b - a) / n_cells;
  const int n = n_cells - 1;  // interior nodes
  basis.dim = 1;
  basis.dx = dx;
  basis.n_per_axis = n_cells;
  basis.nodes.resize(static_cast<std::size_t>(n));
  basis.weight.resize(n);

  auto wfun = [&](double x) {
    const Vec p(1, x);
    return m.kappa(p) * std::sqrt(m.g(p)(0, 0));
  };
  auto cfun = [&](double x) {
    const Vec p(1, x);
    return m.kappa(p) * std::sqrt(m.g(p)(0, 0)) * m.g_inv(p)(0, 0);
  };

  Eigen::VectorXd w(n), c_half(n + 1);
  for (int i = 0; i < n; ++i) {
    const double x = a + (i + 1) * dx;
    basis.nodes[static_cast<std::size_t>(i)] = Vec(1, x);
    w[i] = wfun(x);
    basis.weight[i] = w[i] * dx;
  }
  for (int i = 0; i <= n; ++i) c_half[i] = cfun(a + (i + 0.5) * dx);

  S = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    S(i, i) = (c_half[i] + c_half[i + 1]) / (w[i] * dx * dx);
    if (i + 1 < n) {
      const double off = -c_half[i + 1] / (dx * dx * std::sqrt(w[i] * w[i + 1]));
      S(i, i + 1) = off;
      S(i + 1, i) = off;
    }
  }
}

// Shift-invert Lanczos with full reorthogonalization for the generalized
// problem K u = lambda M u, smallest eigenvalues first.
inline void lanczos_smallest(const Eigen::SparseMatrix<double>& K,
                             const Eigen::SparseMatrix<double>& M, int count,
                             Eigen::VectorXd& lambda_out, Eigen::MatrixXd& vec_out) {
  const int n = static_cast<int>(K.rows());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(K);
  if (solver.info() != Eigen::Success) throw SolverError("stiffness factorization failed");

  const int mlan = std::min(n, std::max(2 * count + 30, 60));
  Eigen::MatrixXd Q(n, mlan + 1);
  Eigen::VectorXd alpha(mlan), beta(mlan);

  Eigen::VectorXd q = Eigen::VectorXd::Random(n);
  double nrm = std::sqrt(q.dot(M * q));
  q /= nrm;
  Q.col(0) = q;
  Eigen::VectorXd q_prev = Eigen::VectorXd::Zero(n);
  double beta_prev = 0.0;

  for (int j = 0; j < mlan; ++j) {
    // operator: x -> K^{-1} M x, symmetric in the M-inner product
    Eigen::VectorXd v = solver.solve(M * Q.col(j));
    alpha[j] = v.dot(M * Q.col(j));
    v -= alpha[j] * Q.col(j) + beta_prev * q_prev;
    // full reorthogonalization in the M-inner product
    for (int i = 0; i <= j; ++i) v -= (v.dot(M * Q.col(i))) * Q.col(i);
    beta[j] = std::sqrt(std::max(v.dot(M * v), 0.0));
    if (beta[j] < 1e-14) {
      for (int jj = j + 1; jj < mlan; ++jj) {
        alpha[jj] = alpha[j];
        beta[jj] = 0.0;
      }
      break;
    }
    q_prev = Q.col(j);
    beta_prev = beta[j];
    Q.col(j + 1) = v / beta[j];
  }

  Eigen::MatrixXd Tm = Eigen::MatrixXd::Zero(mlan, mlan);
  for (int j = 0; j < mlan; ++j) {
    Tm(j, j) = alpha[j];
    if (j + 1 < mlan) {
      Tm(j, j + 1) = beta[j];
      Tm(j + 1, j) = beta[j];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Tm);
  // theta = 1/lambda, largest theta <-> smallest lambda
  lambda_out.resize(count);
  vec_out.resize(n, count);
  for (int k = 0; k < count; ++k) {
    const int idx = mlan - 1 - k;
    lambda_out[k] = 1.0 / es.eigenvalues()[idx];
    vec_out.col(k) = Q.leftCols(mlan) * es.eigenvectors().col(idx);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Assembly + eigensolve.

inline EigenBasis assemble_and_eig(const Domain& d, const MetricField& m, int resolution,
                                   int count);

namespace detail {

inline EigenBasis eig_interval(const Domain& d, const MetricField& m, int n_cells, int count) {
  EigenBasis basis;
  Eigen::MatrixXd S;
  interval_fd(d, m, n_cells, basis, S);
  const int n = static_cast<int>(S.rows());
  if (count > n) throw SolverError("requested mode count exceeds grid size");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  // admissible band: lambda <= safety * (pi/dx)^2
  const double lam_max_ok = 0.25 * std::pow(3.14159265358979323846 / basis.dx, 2);
  if (es.eigenvalues()[count - 1] > lam_max_ok) {
    int ok = 0;
    while (ok < n && es.eigenvalues()[ok] <= lam_max_ok) ++ok;
    throw SolverError("mode count exceeds the trustworthy band; admissible count = " +
                      std::to_string(ok));
  }

  basis.lambda = es.eigenvalues().head(count);
  basis.modes.resize(n, count);
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd e = es.eigenvectors().col(k);
    for (int i = 0; i < n; ++i) e[i] /= std::sqrt(basis.weight[i]);  // W^{-1/2}, incl. dx
    const double nn = std::sqrt(e.cwiseProduct(basis.weight).dot(e));
    basis.modes.col(k) = e / nn;
  }

  // Neumann traces at both endpoints: one-sided second-order stencil with
  // the Dirichlet zero at the wall.
  basis.trace_sigma = {0.0, 1.0};
  basis.trace_weight = {1.0, 1.0};
  basis.trace_dn.resize(2, count);
  for (int k = 0; k < count; ++k) {
    const auto& e = basis.modes.col(k);
    basis.trace_dn(0, k) = (4.0 * e[0] - e[1]) / (2.0 * basis.dx);
    basis.trace_dn(1, k) = -(4.0 * e[n - 1] - e[n - 2]) / (2.0 * basis.dx);
  }
  // normal derivative d_n = inward: at the right end d_n = -d_x
  basis.trace_dn.row(1) *= -1.0;
  return basis;
}

// Flat unit square: tensor product of two 1D Dirichlet bases.
inline EigenBasis eig_square_flat(const Domain& d, const MetricField& m, int n_cells,
                                  int count) {
  Domain seg = make_interval(0.0, 1.0);
  MetricField m1 = make_flat_metric(1);
  EigenBasis b1 = eig_interval(seg, m1, n_cells, std::min(n_cells - 1, 3 * (int)std::sqrt((double)count) + 20));
  (void)d;
  (void)m;

  struct Pair {
    double lam;
    int i, j;
  };
  std::vector<Pair> pairs;
  for (int i = 0; i < b1.count(); ++i)
    for (int j = 0; j < b1.count(); ++j)
      pairs.push_back({b1.lambda[i] + b1.lambda[j], i, j});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.lam < b.lam; });
  if (static_cast<int>(pairs.size()) < count)
    throw SolverError("mode count exceeds tensor basis range");

  const int n1 = n_cells - 1;
  EigenBasis basis;
  basis.dim = 2;
  basis.dx = b1.dx;
  basis.n_per_axis = n_cells;
  basis.nodes.resize(static_cast<std::size_t>(n1) * n1);
  basis.weight.resize(n1 * n1);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n1; ++j) {
      basis.nodes[static_cast<std::size_t>(i * n1 + j)] =
          Vec(2, b1.nodes[static_cast<std::size_t>(i)][0], b1.nodes[static_cast<std::size_t>(j)][0]);
      basis.weight[i * n1 + j] = basis.dx * basis.dx;
    }

  basis.lambda.resize(count);
  basis.modes.resize(n1 * n1, count);
  for (int k = 0; k < count; ++k) {
    basis.lambda[k] = pairs[static_cast<std::size_t>(k)].lam;
    const auto& ei = b1.modes.col(pairs[static_cast<std::size_t>(k)].i);
    const auto& ej = b1.modes.col(pairs[static_cast<std::size_t>(k)].j);
    for (int i = 0; i < n1; ++i)
      for (int j = 0; j < n1; ++j) basis.modes(i * n1 + j, k) = ei[i] * ej[j];
  }

  // boundary traces on the four edges, arc-length parameterized as the
  // domain's boundary_param; corner regions excluded by construction
  const int nt = n1;
  basis.trace_sigma.clear();
  basis.trace_weight.clear();
  std::vector<std::function<double(int, int)>> edge;  // (edge sample, mode)
  basis.trace_dn.resize(4 * nt, count);
  int row = 0;
  for (int e = 0; e < 4; ++e) {
    for (int s = 0; s < nt; ++s) {
      const double along = b1.nodes[static_cast<std::size_t>(s)][0];
      basis.trace_sigma.push_back(e + along);
      basis.trace_weight.push_back(basis.dx);
      for (int k = 0; k < count; ++k) {
        const auto& ei = b1.modes.col(pairs[static_cast<std::size_t>(k)].i);
        const auto& ej = b1.modes.col(pairs[static_cast<std::size_t>(k)].j);
        const double dni = b1.trace_dn(0, pairs[static_cast<std::size_t>(k)].i);
        const double dni1 = b1.trace_dn(1, pairs[static_cast<std::size_t>(k)].i);
        const double dnj = b1.trace_dn(0, pairs[static_cast<std::size_t>(k)].j);
        const double dnj1 = b1.trace_dn(1, pairs[static_cast<std::size_t>(k)].j);
        double v = 0.0;
        switch (e) {
          case 0: v = ei[s] * dnj; break;    // bottom edge x2 = 0
          case 1: v = dni1 * ej[s]; break;   // right edge x1 = 1
          case 2: v = ei[nt - 1 - s] * dnj1; break;  // top edge
          case 3: v = dni * ej[nt - 1 - s]; break;   // left edge
        }
        basis.trace_dn(row, k) = v;
      }
      ++row;
    }
  }
  (void)edge;
  return basis;
}

// Variable-coefficient square / rectangle: conservative 5-point scheme for
// diagonal metrics, sparse shift-invert Lanczos.
inline EigenBasis eig_square_fd(const Domain& d, const MetricField& m, int n_cells, int count) {
  const Vec lo = d.bounding_box[0], hi = d.bounding_box[1];
  const double dx = (hi[0] - lo[0]) / n_cells;
  const double dy = (hi[1] - lo[1]) / n_cells;
  const int n1 = n_cells - 1;
  const int n = n1 * n1;

  {
    // diagonal-metric restriction of this path
    const Vec probe(2, 0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]));
    if (std::abs(m.g_inv(probe)(0, 1)) > 1e-12)
      throw SolverError("square FD path supports diagonal metrics only");
  }

  auto wfun = [&](const Vec& p) { return m.kappa(p) * std::sqrt(m.g(p).det()); };
  auto cfun = [&](const Vec& p, int dir) {
    return m.kappa(p) * std::sqrt(m.g(p).det()) * m.g_inv(p)(dir, dir);
  };
  auto node = [&](int i, int j) { return Vec(2, lo[0] + (i + 1) * dx, lo[1] + (j + 1) * dy); };
  auto idx = [&](int i, int j) { return i * n1 + j; };

  EigenBasis basis;
  basis.dim = 2;
  basis.dx = dx;
  basis.n_per_axis = n_cells;
  basis.nodes.resize(static_cast<std::size_t>(n));
  basis.weight.resize(n);

  std::vector<Eigen::Triplet<double>> kt, mt;
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n1; ++j) {
      const Vec p = node(i, j);
      const double w = wfun(p);
      basis.nodes[static_cast<std::size_t>(idx(i, j))] = p;
      basis.weight[idx(i, j)] = w * dx * dy;
      const double ce = cfun(Vec(2, p[0] + dx / 2, p[1]), 0);
      const double cw = cfun(Vec(2, p[0] - dx / 2, p[1]), 0);
      const double cn = cfun(Vec(2, p[0], p[1] + dy / 2), 1);
      const double cs = cfun(Vec(2, p[0], p[1] - dy / 2), 1);
      // K is the weighted stiffness: K = -W A, symmetric positive definite
      double diag = (ce + cw) * dy / dx + (cn + cs) * dx / dy;
      kt.emplace_back(idx(i, j), idx(i, j), diag);
      if (i + 1 < n1) kt.emplace_back(idx(i, j), idx(i + 1, j), -ce * dy / dx);
      if (i > 0) kt.emplace_back(idx(i, j), idx(i - 1, j), -cw * dy / dx);
      if (j + 1 < n1) kt.emplace_back(idx(i, j), idx(i, j + 1), -cn * dx / dy);
      if (j > 0) kt.emplace_back(idx(i, j), idx(i, j - 1), -cs * dx / dy);
      mt.emplace_back(idx(i, j), idx(i, j), w * dx * dy);
    }
  Eigen::SparseMatrix<double> K(n, n), M(n, n);
  K.setFromTriplets(kt.begin(), kt.end());
  M.setFromTriplets(mt.begin(), mt.end());

  Eigen::VectorXd lam;
  Eigen::MatrixXd vec;
  lanczos_smallest(K, M, count, lam, vec);

  basis.lambda = lam;
  basis.modes.resize(n, count);
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd e = vec.col(k);
    const double nn = std::sqrt(e.cwiseProduct(basis.weight).dot(e));
    basis.modes.col(k) = e / nn;
  }
  // trace machinery omitted on this path; boundary observation uses the
  // tensor path or the FEM path
  return basis;
}

// Unit disc: P1 finite elements on a structured polar triangulation.
inline EigenBasis eig_disc_fem(const Domain& d, const MetricField& m, int n_rings, int count) {
  (void)d;
  struct Tri {
    int a, b, c;
  };
  std::vector<Vec> pts;
  std::vector<int> ring_start;
  pts.push_back(Vec(2, 0.0, 0.0));
  const int base_seg = 8;
  for (int r = 1; r <= n_rings; ++r) {
    ring_start.push_back(static_cast<int>(pts.size()));
    const int nseg = base_seg * r;
    for (int s = 0; s < nseg; ++s) {
      const double th = 2.0 * 3.14159265358979323846 * s / nseg;
      const double rad = static_cast<double>(r) / n_rings;
      pts.push_back(Vec(2, rad * std::cos(th), rad * std::sin(th)));
    }
  }
  // triangulate ring bands by walking both circles
  std::vector<Tri> tris;
  {
    const int n1 = base_seg;
    for (int s = 0; s < n1; ++s)
      tris.push_back({0, 1 + s, 1 + (s + 1) % n1});
  }
  for (int r = 1; r < n_rings; ++r) {
    const int in_start = ring_start[static_cast<std::size_t>(r - 1)];
    const int out_start = ring_start[static_cast<std::size_t>(r)];
    const int n_in = base_seg * r, n_out = base_seg * (r + 1);
    int i = 0, o = 0;
    while (i < n_in || o < n_out) {
      const double ang_i_next = (i + 1) * 2.0 * 3.14159265358979323846 / n_in;
      const double ang_o_next = (o + 1) * 2.0 * 3.14159265358979323846 / n_out;
      if (o < n_out && (i == n_in || ang_o_next <= ang_i_next)) {
        tris.push_back({in_start + i % n_in, out_start + o % n_out, out_start + (o + 1) % n_out});
        ++o;
      } else {
        tris.push_back({in_start + i % n_in, out_start + o % n_out, in_start + (i + 1) % n_in});
        ++i;
      }
    }
  }

  // Dirichlet nodes: outer ring
  const int first_bd = ring_start[static_cast<std::size_t>(n_rings - 1)];
  const int n_total = static_cast<int>(pts.size());
  std::vector<int> free_id(static_cast<std::size_t>(n_total), -1);
  int nfree = 0;
  for (int i = 0; i < first_bd; ++i) free_id[static_cast<std::size_t>(i)] = nfree++;

  std::vector<Eigen::Triplet<double>> kt, mt;
  Eigen::VectorXd lumped = Eigen::VectorXd::Zero(nfree);
  for (const auto& T : tris) {
    const Vec& p0 = pts[static_cast<std::size_t>(T.a)];
    const Vec& p1 = pts[static_cast<std::size_t>(T.b)];
    const Vec& p2 = pts[static_cast<std::size_t>(T.c)];
    const double det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    const double area = 0.5 * std::abs(det);
    if (area < 1e-16) continue;
    // P1 gradients
    Vec grad[3];
    grad[0] = Vec(2, (p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det);
    grad[1] = Vec(2, (p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det);
    grad[2] = Vec(2, (p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det);
    const Vec cen = (p0 + p1 + p2) * (1.0 / 3.0);
    const double coef = m.kappa(cen) * std::sqrt(m.g(cen).det());
    const Mat gi = m.g_inv(cen);
    const int ids[3] = {T.a, T.b, T.c};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const int fa = free_id[static_cast<std::size_t>(ids[a])];
        const int fb = free_id[static_cast<std::size_t>(ids[b])];
        if (fa < 0 || fb < 0) continue;
        kt.emplace_back(fa, fb, coef * area * grad[a].dot(gi.apply(grad[b])));
        mt.emplace_back(fa, fb, coef * area * (a == b ? 1.0 / 6.0 : 1.0 / 12.0));
      }
    for (int a = 0; a < 3; ++a) {
      const int fa = free_id[static_cast<std::size_t>(ids[a])];
      if (fa >= 0) lumped[fa] += coef * area / 3.0;
    }
  }
  Eigen::SparseMatrix<double> K(nfree, nfree), M(nfree, nfree);
  K.setFromTriplets(kt.begin(), kt.end());
  M.setFromTriplets(mt.begin(), mt.end());

  Eigen::VectorXd lam;
  Eigen::MatrixXd vec;
  detail::lanczos_smallest(K, M, count, lam, vec);

  EigenBasis basis;
  basis.dim = 2;
  basis.nodes.assign(pts.begin(), pts.begin() + first_bd);
  basis.weight = lumped;
  basis.lambda = lam;
  basis.modes.resize(nfree, count);
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd e = vec.col(k);
    const double nn = std::sqrt(e.cwiseProduct(basis.weight).dot(e));
    basis.modes.col(k) = e / nn;
  }

  // normal-derivative recovery on the boundary ring: one-sided radial
  // stencil through the two interior rings, with the Dirichlet zero at r = 1.
  // d_n is the inward normal derivative, d_n = -d_r.
  if (n_rings < 3) throw SolverError("disc FEM needs at least 3 rings for boundary traces");
  const int n_bd = base_seg * n_rings;
  const int in1_start = ring_start[static_cast<std::size_t>(n_rings - 2)];
  const int n_in1 = base_seg * (n_rings - 1);
  const int in2_start = ring_start[static_cast<std::size_t>(n_rings - 3)];
  const int n_in2 = base_seg * (n_rings - 2);
  basis.trace_sigma.resize(static_cast<std::size_t>(n_bd));
  basis.trace_weight.resize(static_cast<std::size_t>(n_bd));
  basis.trace_dn.resize(n_bd, count);
  const double dr = 1.0 / n_rings;
  for (int s = 0; s < n_bd; ++s) {
    const double th = 2.0 * 3.14159265358979323846 * s / n_bd;
    basis.trace_sigma[static_cast<std::size_t>(s)] = th;
    basis.trace_weight[static_cast<std::size_t>(s)] = 2.0 * 3.14159265358979323846 / n_bd;
    for (int k = 0; k < count; ++k) {
      auto ring_val = [&](int start, int nseg, int kk) {
        const double pos = th / (2.0 * 3.14159265358979323846) * nseg;
        const int i0 = static_cast<int>(pos) % nseg;
        const int i1 = (i0 + 1) % nseg;
        const double fr = pos - std::floor(pos);
        const int f0 = free_id[static_cast<std::size_t>(start + i0)];
        const int f1 = free_id[static_cast<std::size_t>(start + i1)];
        const double v0 = f0 >= 0 ? basis.modes(f0, kk) : 0.0;
        const double v1 = f1 >= 0 ? basis.modes(f1, kk) : 0.0;
        return (1.0 - fr) * v0 + fr * v1;
      };
      const double u1 = ring_val(in1_start, n_in1, k);  // r = 1 - dr
      const double u2 = ring_val(in2_start, n_in2, k);  // r = 1 - 2 dr
      // d_r u(1) ~ (3 u(1) - 4 u1 + u2) / (2 dr) with u(1) = 0
      basis.trace_dn(s, k) = (4.0 * u1 - u2) / (2.0 * dr);
    }
  }
  return basis;
}

}  // namespace detail

inline EigenBasis assemble_and_eig(const Domain& d, const MetricField& m, int resolution,
                                   int count) {
  if (d.dim == 1) return detail::eig_interval(d, m, resolution, count);
  if (d.kind == DomainKind::Square) {
    // flat metric: exact tensor decomposition
    const Vec probe(2, 0.31, 0.57);
    const Mat gi = m.g_inv(probe);
    const bool flat = std::abs(gi(0, 0) - 1.0) < 1e-14 && std::abs(gi(1, 1) - 1.0) < 1e-14 &&
                      std::abs(gi(0, 1)) < 1e-14 && std::abs(m.kappa(probe) - 1.0) < 1e-14;
    return flat ? detail::eig_square_flat(d, m, resolution, count)
                : detail::eig_square_fd(d, m, resolution, count);
  }
  if (d.kind == DomainKind::Disc) return detail::eig_disc_fem(d, m, resolution, count);
  throw SolverError("assemble_and_eig: unsupported domain kind for the spectral solver");
}

// ---------------------------------------------------------------------------
// Dyadic decomposition.

struct DyadicSpec {
  double alpha = 0.5;     // band parameter in (0,1)
  double rho_ratio = 1.5; // in (1, 1/alpha)

  double h_of_k(int k) const { return std::pow(rho_ratio, -std::abs(k)); }
};

// J_k = { nu : alpha <= h_k sqrt(lambda_nu) < 1/alpha }; J_{-k} = J_k.
inline std::vector<int> dyadic_index_set(const DyadicSpec& spec, const EigenBasis& basis,
                                         int k) {
  const double h = spec.h_of_k(k);
  // the top of the band must lie inside the computed spectrum
  const double top = 1.0 / (spec.alpha * h);
  if (top * top > basis.lambda[basis.count() - 1] * 1.0000001 &&
      basis.lambda[basis.count() - 1] < top * top)
    throw SolverError("dyadic band exceeds the computed spectrum");
  std::vector<int> J;
  for (int nu = 0; nu < basis.count(); ++nu) {
    const double s = h * std::sqrt(basis.lambda[nu]);
    if (s >= spec.alpha && s < 1.0 / spec.alpha) J.push_back(nu);
  }
  return J;
}

// ---------------------------------------------------------------------------
// Wave states and spectral evolution.

struct WaveState {
  const EigenBasis* basis = nullptr;
  Eigen::VectorXcd c0;  // coefficients of u(0)
  Eigen::VectorXcd c1;  // coefficients of d_t u(0)
  double t = 0.0;
  double h = 0.0;       // associated semiclassical scale (0 if none)

  Eigen::VectorXcd u_coeff() const {
    Eigen::VectorXcd a(c0.size());
    for (int nu = 0; nu < c0.size(); ++nu) {
      const double sq = std::sqrt(basis->lambda[nu]);
      a[nu] = std::cos(t * sq) * c0[nu] + std::sin(t * sq) / sq * c1[nu];
    }
    return a;
  }

  Eigen::VectorXcd ut_coeff() const {
    Eigen::VectorXcd b(c0.size());
    for (int nu = 0; nu < c0.size(); ++nu) {
      const double sq = std::sqrt(basis->lambda[nu]);
      b[nu] = -sq * std::sin(t * sq) * c0[nu] + std::cos(t * sq) * c1[nu];
    }
    return b;
  }

  Eigen::VectorXcd u_grid() const { return basis->synthesize(u_coeff()); }
};

inline WaveState make_state(const EigenBasis& basis, const Eigen::VectorXcd& c0,
                            const Eigen::VectorXcd& c1, double h = 0.0) {
  WaveState s;
  s.basis = &basis;
  s.c0 = c0;
  s.c1 = c1;
  s.h = h;
  return s;
}

// One-sided dyadic packet u = sum c_nu e^{sgn i t sqrt(lambda_nu)} e_nu.
inline WaveState one_sided_state(const EigenBasis& basis, const std::vector<int>& J,
                                 const Eigen::VectorXcd& c, int sgn, double h) {
  Eigen::VectorXcd c0 = Eigen::VectorXcd::Zero(basis.count());
  Eigen::VectorXcd c1 = Eigen::VectorXcd::Zero(basis.count());
  for (std::size_t i = 0; i < J.size(); ++i) {
    const int nu = J[i];
    c0[nu] = c[static_cast<Eigen::Index>(i)];
    c1[nu] = std::complex<double>(0.0, sgn * std::sqrt(basis.lambda[nu])) *
             c[static_cast<Eigen::Index>(i)];
  }
  return make_state(basis, c0, c1, h);
}

inline WaveState evolve(const WaveState& s, double t) {
  WaveState out = s;
  out.t = t;
  return out;
}

// (E, E^h): energy and semiclassical energy; E^h = h^2 E by definition.
inline std::pair<double, double> energies(const WaveState& s) {
  const Eigen::VectorXcd a = s.u_coeff();
  const Eigen::VectorXcd b = s.ut_coeff();
  double E = 0.0;
  for (int nu = 0; nu < a.size(); ++nu)
    E += 0.5 * (s.basis->lambda[nu] * std::norm(a[nu]) + std::norm(b[nu]));
  return {E, s.h * s.h * E};
}

// ---------------------------------------------------------------------------
// Neumann trace v = h d_n u on the boundary over a time grid, with the
// admissibility ratio ||v||^2_{L2((0,T) x bd)} / int_0^T E dt.

struct NeumannTrace {
  std::vector<double> times;
  Eigen::MatrixXcd values;  // trace samples x times
  double admissibility_ratio = 0.0;
};

inline NeumannTrace neumann_trace(const WaveState& s, double T, int n_times) {
  const EigenBasis& basis = *s.basis;
  if (basis.trace_dn.size() == 0)
    throw SolverError("neumann_trace: basis has no boundary trace machinery");
  NeumannTrace out;
  out.times.resize(static_cast<std::size_t>(n_times));
  const int nb = static_cast<int>(basis.trace_dn.rows());
  out.values.resize(nb, n_times);
  const double dt = T / n_times;
  double trace_sq = 0.0;
  double energy_int = 0.0;
  const double hh = s.h > 0.0 ? s.h : 1.0;
  for (int it = 0; it < n_times; ++it) {
    const double t = (it + 0.5) * dt;
    out.times[static_cast<std::size_t>(it)] = t;
    WaveState st = evolve(s, t);
    const Eigen::VectorXcd a = st.u_coeff();
    Eigen::VectorXcd tr = basis.trace_dn.cast<std::complex<double>>() * a;
    tr *= hh;
    out.values.col(it) = tr;
    for (int b = 0; b < nb; ++b)
      trace_sq += std::norm(tr[b]) * basis.trace_weight[static_cast<std::size_t>(b)] * dt;
    energy_int += energies(st).first * dt;
  }
  out.admissibility_ratio = trace_sq / std::max(energy_int * hh * hh, 1e-300);
  return out;
}

// ---------------------------------------------------------------------------
// Dyadic observability constant C(k) = 1 / lambda_min(G_k) for the
// observation Gram form over unit one-sided packets in E_k.

enum class Observable { TimeDerivative, NormalDerivative };

struct ObsConstant {
  int k = 0;
  double h = 0.0;
  int band_size = 0;
  double c_obs = 0.0;
  double lambda_min = 0.0;
};

inline ObsConstant obs_constant_dyadic(const EigenBasis& basis, const DyadicSpec& spec, int k,
                                       const std::function<bool(const Vec&)>& region,
                                       const std::function<bool(double)>& boundary_region,
                                       double T, Observable obs, double delta_frac = 0.05) {
  const auto J = dyadic_index_set(spec, basis, k);
  if (J.empty()) throw SolverError("obs_constant_dyadic: empty dyadic band");
  const double h = spec.h_of_k(k);
  const int nJ = static_cast<int>(J.size());
  const double t0 = delta_frac * T, t1 = T - delta_frac * T;

  // time factor: int_{t0}^{t1} e^{i (sqrt(l_nu) - sqrt(l_mu)) t} dt
  auto time_overlap = [&](double dmu, double dnu) -> std::complex<double> {
    const double w = dnu - dmu;
    if (std::abs(w) < 1e-12) return {t1 - t0, 0.0};
    const std::complex<double> i(0.0, 1.0);
    return (std::exp(i * w * t1) - std::exp(i * w * t0)) / (i * w);
  };

  Eigen::MatrixXcd G(nJ, nJ);
  if (obs == Observable::TimeDerivative) {
    // spatial overlaps over the region in the weighted product
    Eigen::MatrixXd S(nJ, nJ);
    for (int a = 0; a < nJ; ++a)
      for (int b = a; b < nJ; ++b) {
        double sum = 0.0;
        for (std::size_t i = 0; i < basis.nodes.size(); ++i)
          if (region(basis.nodes[i])) {
            sum += basis.modes(static_cast<Eigen::Index>(i), J[static_cast<std::size_t>(a)]) *
                   basis.modes(static_cast<Eigen::Index>(i), J[static_cast<std::size_t>(b)]) *
                   basis.weight[static_cast<Eigen::Index>(i)];
          }
        S(a, b) = sum;
        S(b, a) = sum;
      }
    for (int a = 0; a < nJ; ++a)
      for (int b = 0; b < nJ; ++b) {
        const double sa = std::sqrt(basis.lambda[J[static_cast<std::size_t>(a)]]);
        const double sb = std::sqrt(basis.lambda[J[static_cast<std::size_t>(b)]]);
        G(a, b) = h * h * sa * sb * S(a, b) * time_overlap(sa, sb);
      }
  } else {
    if (basis.trace_dn.size() == 0)
      throw SolverError("obs_constant_dyadic: no boundary traces available");
    const int nb = static_cast<int>(basis.trace_dn.rows());
    Eigen::MatrixXd S(nJ, nJ);
    for (int a = 0; a < nJ; ++a)
      for (int b = a; b < nJ; ++b) {
        double sum = 0.0;
        for (int i = 0; i < nb; ++i)
          if (boundary_region(basis.trace_sigma[static_cast<std::size_t>(i)]))
            sum += basis.trace_dn(i, J[static_cast<std::size_t>(a)]) *
                   basis.trace_dn(i, J[static_cast<std::size_t>(b)]) *
                   basis.trace_weight[static_cast<std::size_t>(i)];
        S(a, b) = sum;
        S(b, a) = sum;
      }
    for (int a = 0; a < nJ; ++a)
      for (int b = 0; b < nJ; ++b) {
        const double sa = std::sqrt(basis.lambda[J[static_cast<std::size_t>(a)]]);
        const double sb = std::sqrt(basis.lambda[J[static_cast<std::size_t>(b)]]);
        G(a, b) = h * h * S(a, b) * time_overlap(sa, sb);
      }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G);
  ObsConstant out;
  out.k = k;
  out.h = h;
  out.band_size = nJ;
  out.lambda_min = es.eigenvalues()[0];
  out.c_obs = 1.0 / std::max(out.lambda_min, 1e-300);
  return out;
}

}  // namespace gcckit
