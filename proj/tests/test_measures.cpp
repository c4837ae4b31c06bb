#include "catch_amalgamated.hpp"

#include <cmath>
#include <complex>

#include "gcckit/measures.hpp"

using namespace gcckit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
constexpr double kPi = 3.14159265358979323846;

// 1-d Gaussian packet profile f(s) = h^{-1/4} psi((s-c)/sqrt(h)) e^{i s xi0/h}
cd packet1d(double s, double c, double xi0, double h) {
  const double y = (s - c) / std::sqrt(h);
  const double amp = std::pow(h, -0.25) * std::pow(kPi, -0.25) * std::exp(-0.5 * y * y);
  return amp * std::exp(cd(0.0, s * xi0 / h));
}

cd packet1d_deriv(double s, double c, double xi0, double h) {
  return packet1d(s, c, xi0, h) * cd(-(s - c) / h, xi0 / h);
}

}  // namespace

TEST_CASE("wave packets are L2-normalized") {
  auto g = Grid::line(1024, 0.0, 1.0);
  WavePacket pk;
  pk.x0 = Vec(1, 0.5);
  pk.xi0 = Vec(1, 1.0);
  pk.h = 1.0 / 64.0;
  const auto w = pk.realize(g);
  CHECK_THAT(g.norm(w), WithinRel(1.0, 0.01));
}

TEST_CASE("linear-in-h ladders extrapolate exactly") {
  SymbolLadder lad;
  const cd L(0.7, -0.2), c(1.3, 0.4);
  for (double h : {0.2, 0.1, 0.05}) lad.points.push_back({h, L + c * h});
  extrapolate(lad);
  CHECK_THAT(std::abs(lad.limit - L), WithinAbs(0.0, 1e-12));
  CHECK(lad.spread > 0.0);
}

TEST_CASE("frequency leak detector") {
  auto g = Grid::line(256, 0.0, 2.0 * kPi);
  std::vector<cd> u(g.total());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::exp(cd(0.0, 8.0 * g.x(i)[0]));
  // h |xi| = 8 h: inside the band for h = 0.1
  CHECK_THAT(frequency_leak(g, u, 0.1), WithinAbs(0.0, 1e-12));
  // far below the band for h = 1e-5
  CHECK_THAT(frequency_leak(g, u, 1e-5), WithinRel(1.0, 1e-12));
}

TEST_CASE("packet pairings converge to the symbol value at (x0, xi0)") {
  auto g = Grid::line(1024, 0.0, 1.0);
  HSeq seq;
  seq.grid = g;
  for (int k = 5; k <= 8; ++k) {
    WavePacket pk;
    pk.x0 = Vec(1, 0.5);
    pk.xi0 = Vec(1, 1.0);
    pk.h = std::pow(2.0, -k);
    seq.h.push_back(pk.h);
    seq.u.push_back(pk.realize(g));
  }
  auto a = separable_symbol(1, [](const Vec& x) { return cd(1.0 + 0.5 * std::sin(2.0 * kPi * x[0])); },
                            [](const Vec& xi) { return cd(std::exp(-(xi[0] - 1.0) * (xi[0] - 1.0))); },
                            "test-symbol");
  auto est = estimate_measure(seq, {a});
  REQUIRE(est.per_symbol.size() == 1);
  CHECK_FALSE(est.leak);
  for (double m : est.mass) CHECK_THAT(m, WithinRel(1.0, 0.02));
  // a(x0, xi0) = 1
  CHECK_THAT(std::abs(est.per_symbol[0].limit), WithinRel(1.0, 0.05));
}

TEST_CASE("Sobolev seminorm of oscillating states") {
  auto g = Grid::line(256, 0.0, 2.0 * kPi);
  std::vector<cd> u(g.total());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::exp(cd(0.0, 4.0 * g.x(i)[0]));
  // ||e^{i4x}||_{H^1} = 4 sqrt(2 pi)
  CHECK_THAT(sobolev_norm(g, u, 1.0), WithinRel(4.0 * std::sqrt(2.0 * kPi), 1e-10));

  // packet: |xi0| / h dominates
  auto gp = Grid::line(1024, 0.0, 1.0);
  WavePacket pk;
  pk.x0 = Vec(1, 0.5);
  pk.xi0 = Vec(1, 1.0);
  pk.h = 1.0 / 64.0;
  CHECK_THAT(sobolev_norm(gp, pk.realize(gp), 1.0), WithinRel(64.0, 0.1));
}

TEST_CASE("Hermitian pairing block of a packet pair") {
  auto g = Grid::line(512, 0.0, 1.0);
  WavePacket pk;
  pk.x0 = Vec(1, 0.5);
  pk.xi0 = Vec(1, 1.0);
  pk.h = 1.0 / 128.0;
  const auto y0 = pk.realize(g);
  std::vector<cd> y1 = y0;
  for (auto& v : y1) v *= cd(0.0, 1.0);  // y1 = i tau0 y0, tau0 = 1
  auto a = separable_symbol(1, [](const Vec&) { return cd(1.0); },
                            [](const Vec& xi) { return cd(std::exp(-(xi[0] - 1.0) * (xi[0] - 1.0))); });
  auto blk = hermitian_pairing(a, pk.h, g, y0, y1);
  CHECK(blk.hermiticity_defect < 0.05);
  CHECK_THAT(std::abs(blk.entry[0][0]), WithinRel(1.0, 0.05));
  CHECK_THAT(std::abs(blk.entry[1][1]), WithinRel(1.0, 0.05));
  // off-diagonal carries the factor -i tau0
  CHECK_THAT((blk.entry[0][1] / blk.entry[0][0]).imag(), WithinAbs(-1.0, 0.05));
}

TEST_CASE("dyadic projection through the eigenbasis") {
  auto d = make_interval();
  auto m = make_flat_metric(1);
  auto basis = assemble_and_eig(d, m, 200, 30);
  Eigen::VectorXcd v = (basis.modes.col(0) + basis.modes.col(4)).cast<cd>();
  auto chi = [](double s) { return (s >= 0.25 && s <= 4.0) ? 1.0 : 0.0; };
  const double h = 1.0 / std::sqrt(basis.lambda[0]);  // h^2 lambda_1 = 1, h^2 lambda_5 = 25
  auto pr = dyadic_project(basis, chi, h, v);
  CHECK_THAT(pr.coverage, WithinRel(1.0, 1e-9));
  CHECK_FALSE(pr.truncation_warning);
  const Eigen::VectorXcd expect = basis.modes.col(0).cast<cd>();
  CHECK((pr.out - expect).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("interior transport residual of a traveling packet vanishes") {
  auto g = Grid::box(64, 64, Vec(2, 0.0, 0.0), Vec(2, 2.0 * kPi, 2.0 * kPi));
  HSeq seq;
  seq.grid = g;
  // u(t, x) = f(x - t): a right-mover with tau = -1, xi = 1 on the shell
  for (double h : {1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0}) {
    std::vector<cd> u(g.total());
    for (std::size_t i = 0; i < u.size(); ++i) {
      const Vec p = g.x(i);
      double s = std::fmod(p[1] - p[0] + 4.0 * kPi, 2.0 * kPi);
      u[i] = packet1d(s, kPi, 1.0, h);
    }
    seq.h.push_back(h);
    seq.u.push_back(std::move(u));
  }
  // a = sin(x) e^{-tau^2 - xi^2}: H_p a = 2 xi cos(x) e^{-tau^2 - xi^2}
  auto hpa = separable_symbol(2, [](const Vec& p) { return cd(std::cos(p[1])); },
                              [](const Vec& xi) {
                                return cd(2.0 * xi[1] *
                                          std::exp(-xi[0] * xi[0] - xi[1] * xi[1]));
                              },
                              "Hp-a");
  auto lad = interior_transport_residual(seq, hpa);
  // the orbit average of cos along x = x0 + t is zero
  CHECK(std::abs(lad.limit) < 0.02);
}

TEST_CASE("boundary jump identity via the method of images") {
  const double c = 2.0, xi0 = 1.0, sigma = 0.35;
  const int nt = 256, nx = 256;
  auto g2 = Grid::box(nt, nx, Vec(2, 0.0, 0.0), Vec(2, 2.0 * kPi, 2.0 * kPi));
  auto tg = Grid::line(nt, 0.0, 2.0 * kPi);

  HSeq seq;
  seq.grid = g2;
  std::vector<std::vector<cd>> traces;
  for (double h : {1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0}) {
    // u = f(x + t) - f(t - x): Dirichlet reflection at x = 0 at time t = c
    std::vector<cd> u(g2.total());
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double t = g2.x(i)[0], x = g2.x(i)[1];
      u[i] = packet1d(x + t, c, xi0, h) - packet1d(t - x, c, xi0, h);
    }
    seq.h.push_back(h);
    seq.u.push_back(std::move(u));
    // v_h = h d_x u(t, 0) = 2 h f'(t)
    std::vector<cd> tr(tg.total());
    for (std::size_t j = 0; j < tr.size(); ++j)
      tr[j] = 2.0 * h * packet1d_deriv(tg.x(j)[0], c, xi0, h);
    traces.push_back(std::move(tr));
  }

  auto phi = [c, sigma](double t) { return std::exp(-(t - c) * (t - c) / (2.0 * sigma * sigma)); };
  // a = phi(t) zeta e^{-zeta^2}: H_p a = -2 tau phi'(t) zeta e^{-zeta^2}
  auto hpa = separable_symbol(2,
                              [phi, c, sigma](const Vec& p) {
                                return cd(2.0 * (p[0] - c) / (sigma * sigma) * phi(p[0]));
                              },
                              [](const Vec& xi) {
                                return cd(xi[0] * xi[1] * std::exp(-xi[1] * xi[1]));
                              },
                              "Hp-a-bd");
  auto a_in_zeta = [phi](const Vec& base, cd zeta) {
    return phi(base[0]) * zeta * std::exp(-zeta * zeta);
  };

  auto rep = boundary_jump_residual(seq, tg, traces, hpa, a_in_zeta);
  // both sides converge to 2 xi0 (a(zeta+) - a(zeta-)) = 4 / e
  const double expect = 4.0 / std::exp(1.0);
  CHECK_THAT(rep.lhs.limit.real(), WithinRel(expect, 0.2));
  CHECK_THAT(rep.rhs.limit.real(), WithinRel(expect, 0.2));
  CHECK(rep.mismatch < 0.15);
  CHECK_FALSE(rep.glancing_flag);
}

TEST_CASE("isochrone data reproduce the Hermitian block and flow forward") {
  auto d = make_interval();
  auto m = make_flat_metric(1);
  auto basis = assemble_and_eig(d, m, 400, 120);
  const double h = 1.0 / 256.0;
  auto a = separable_symbol(1,
                            [](const Vec& x) {
                              return cd(std::exp(-4.0 * (x[0] - 0.5) * (x[0] - 0.5)));
                            },
                            [](const Vec& xi) {
                              return cd(std::exp(-(xi[0] - 1.0) * (xi[0] - 1.0)));
                            });
  auto rep = isochrone_check(basis, m, Vec(1, 0.5), Vec(1, 1.0), 1.0, h, a, 0.35, 0.1);
  CHECK(rep.nu0_max_rel_error < 0.15);
  // expected block [[1, -i], [i, 1]] * a(x0, xi0) with a(x0, xi0) = 1
  CHECK_THAT(std::abs(rep.expected[0][0]), WithinRel(1.0, 1e-12));
  CHECK_THAT(std::abs(rep.nu0[1][1]), WithinRel(1.0, 0.15));
  CHECK(rep.forward_mass > 0.9);

  // inconsistent (x0, xi0, tau0) data are rejected
  CHECK_THROWS_AS(isochrone_check(basis, m, Vec(1, 0.5), Vec(1, 1.0), 2.0, h, a, 0.3, 0.1),
                  MeasureError);
}
