#include "catch_amalgamated.hpp"

#include <cmath>
#include <complex>

#include "gcckit/spectral.hpp"

using namespace gcckit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("interval Dirichlet eigenvalues match (nu pi)^2") {
  auto d = make_interval();
  auto m = make_flat_metric(1);
  auto basis = assemble_and_eig(d, m, 400, 20);
  REQUIRE(basis.count() == 20);
  for (int nu = 1; nu <= 20; ++nu) {
    const double exact = nu * kPi * nu * kPi;
    CHECK_THAT(basis.lambda[nu - 1], WithinRel(exact, 0.01));
  }
  // modes orthonormal in the weighted product
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const double ip = basis.inner(Eigen::VectorXd(basis.modes.col(i)),
                                    Eigen::VectorXd(basis.modes.col(j)));
      CHECK_THAT(ip, WithinAbs(i == j ? 1.0 : 0.0, 1e-10));
    }
}

TEST_CASE("requests beyond the trustworthy band are refused") {
  auto d = make_interval();
  auto m = make_flat_metric(1);
  CHECK_THROWS_AS(assemble_and_eig(d, m, 16, 15), SolverError);
}

TEST_CASE("boundary traces satisfy the Rellich identity on the interval") {
  auto d = make_interval();
  auto m = make_flat_metric(1);
  auto basis = assemble_and_eig(d, m, 400, 10);
  for (int k = 0; k < 10; ++k) {
    // |d_n e|^2 = 2 lambda at each endpoint for sqrt(2) sin(nu pi x)
    CHECK_THAT(basis.trace_dn(0, k) * basis.trace_dn(0, k),
               WithinRel(2.0 * basis.lambda[k], 0.01));
    CHECK_THAT(basis.trace_dn(1, k) * basis.trace_dn(1, k),
               WithinRel(2.0 * basis.lambda[k], 0.01));
  }
}

TEST_CASE("flat square spectrum is the two-index sum") {
  auto d = make_unit_square();
  auto m = make_flat_metric(2);
  auto basis = assemble_and_eig(d, m, 64, 6);
  const double p2 = kPi * kPi;
  CHECK_THAT(basis.lambda[0], WithinRel(2.0 * p2, 0.01));
  CHECK_THAT(basis.lambda[1], WithinRel(5.0 * p2, 0.01));
  CHECK_THAT(basis.lambda[2], WithinRel(5.0 * p2, 0.01));
  CHECK_THAT(basis.lambda[3], WithinRel(8.0 * p2, 0.01));
  // weighted orthonormality survives the tensor assembly
  const double ip = basis.inner(Eigen::VectorXd(basis.modes.col(0)),
                                Eigen::VectorXd(basis.modes.col(3)));
  CHECK_THAT(ip, WithinAbs(0.0, 1e-9));
}

TEST_CASE("variable-coefficient square solver agrees with the tensor path") {
  auto d = make_unit_square();
  auto flat = make_flat_metric(2);
  auto tensor = assemble_and_eig(d, flat, 48, 4);
  auto fd = detail::eig_square_fd(d, flat, 48, 4);
  for (int k = 0; k < 4; ++k) CHECK_THAT(fd.lambda[k], WithinRel(tensor.lambda[k], 0.01));
}

TEST_CASE("constant sound speed rescales the square spectrum") {
  auto d = make_unit_square();
  auto m = make_conformal_metric(2, [](const Vec&) { return 2.0; });
  auto basis = assemble_and_eig(d, m, 48, 3);
  // -A = -4 Delta: lambda_1 = 4 * 2 pi^2
  CHECK_THAT(basis.lambda[0], WithinRel(8.0 * kPi * kPi, 0.01));
}

TEST_CASE("non-diagonal metrics are rejected on the square FD path") {
  auto d = make_unit_square();
  auto m = make_matrix_metric(2, [](const Vec&) {
    Mat g = Mat::identity(2);
    g(0, 1) = g(1, 0) = 0.2;
    return g;
  });
  CHECK_THROWS_AS(assemble_and_eig(d, m, 24, 3), SolverError);
}

TEST_CASE("disc FEM eigenvalues approach Bessel zeros squared") {
  auto d = make_unit_disc();
  auto m = make_flat_metric(2);
  auto basis = assemble_and_eig(d, m, 40, 4);
  const double j01 = 2.404825557695773;  // first zero of J_0
  const double j11 = 3.831705970207512;  // first zero of J_1
  CHECK_THAT(basis.lambda[0], WithinRel(j01 * j01, 0.01));
  CHECK_THAT(basis.lambda[1], WithinRel(j11 * j11, 0.01));
  CHECK_THAT(basis.lambda[2], WithinRel(j11 * j11, 0.01));

  // Rellich identity on the unit circle: int |d_n e|^2 ds = 2 lambda
  for (int k = 0; k < 2; ++k) {
    double rellich = 0.0;
    for (std::size_t s = 0; s < basis.trace_sigma.size(); ++s)
      rellich += basis.trace_dn(static_cast<Eigen::Index>(s), k) *
                 basis.trace_dn(static_cast<Eigen::Index>(s), k) * basis.trace_weight[s];
    CHECK_THAT(rellich, WithinRel(2.0 * basis.lambda[k], 0.1));
  }
}

TEST_CASE("dyadic index sets") {
  auto d = make_interval();
  auto m = make_flat_metric(1);
  auto basis = assemble_and_eig(d, m, 200, 30);
  DyadicSpec spec;  // alpha = 0.5, ratio 3/2
  // k = 2: h = 4/9, band sqrt(lambda) in [1.125, 4.5): only nu = 1
  auto J = dyadic_index_set(spec, basis, 2);
  REQUIRE(J.size() == 1);
  CHECK(J[0] == 0);
  CHECK_THAT(std::sqrt(basis.lambda[J[0]]), WithinRel(kPi, 0.01));
  // bands are symmetric in k
  CHECK(dyadic_index_set(spec, basis, -2) == J);
  // k = 6: h ~ 0.088, band sqrt(lambda) in [5.7, 22.8): nu = 2..7
  J = dyadic_index_set(spec, basis, 6);
  CHECK(J.size() == 6);
  // bands past the computed spectrum are refused
  CHECK_THROWS_AS(dyadic_index_set(spec, basis, 20), SolverError);
}

TEST_CASE("spectral evolution conserves energy exactly") {
  auto d = make_interval();
  auto m = make_flat_metric(1);
  auto basis = assemble_and_eig(d, m, 200, 10);
  Eigen::VectorXcd c0 = Eigen::VectorXcd::Zero(10), c1 = Eigen::VectorXcd::Zero(10);
  c0[0] = {0.7, 0.1};
  c0[3] = {0.0, 0.4};
  c1[1] = {1.3, 0.0};
  c1[3] = {0.2, -0.2};
  auto s = make_state(basis, c0, c1, 0.1);
  const auto [E0, Eh0] = energies(s);
  CHECK_THAT(Eh0, WithinRel(0.01 * E0, 1e-12));
  for (double t : {0.37, 1.4, 9.2}) {
    const auto [E, Eh] = energies(evolve(s, t));
    CHECK_THAT(E, WithinRel(E0, 1e-12));
  }
}

TEST_CASE("one-sided packets carry d_t u = i sgn sqrt(lambda) u") {
  auto d = make_interval();
  auto m = make_flat_metric(1);
  auto basis = assemble_and_eig(d, m, 200, 10);
  DyadicSpec spec;
  auto J = dyadic_index_set(spec, basis, 4);
  REQUIRE_FALSE(J.empty());
  Eigen::VectorXcd c = Eigen::VectorXcd::Ones(static_cast<Eigen::Index>(J.size()));
  auto s = one_sided_state(basis, J, c, +1, spec.h_of_k(4));
  const auto a = s.u_coeff();
  const auto b = s.ut_coeff();
  for (std::size_t i = 0; i < J.size(); ++i) {
    const int nu = J[i];
    const std::complex<double> expect =
        std::complex<double>(0.0, std::sqrt(basis.lambda[nu])) * a[nu];
    CHECK_THAT(std::abs(b[nu] - expect), WithinAbs(0.0, 1e-12));
  }
  // modulus of each coefficient is invariant in time
  auto at = evolve(s, 0.83).u_coeff();
  for (int nu : J) CHECK_THAT(std::abs(at[nu]), WithinRel(std::abs(a[nu]), 1e-12));
}

TEST_CASE("Neumann trace of a pure interval mode") {
  auto d = make_interval();
  auto m = make_flat_metric(1);
  auto basis = assemble_and_eig(d, m, 400, 5);
  Eigen::VectorXcd c0 = Eigen::VectorXcd::Zero(5), c1 = Eigen::VectorXcd::Zero(5);
  c0[0] = 1.0;
  auto s = make_state(basis, c0, c1, 0.5);
  // u = cos(pi t) e_1: |v|^2 summed over both ends is 4 h^2 lambda cos^2
  auto tr = neumann_trace(s, 2.0, 400);
  REQUIRE(tr.values.rows() == 2);
  REQUIRE(tr.values.cols() == 400);
  const double t = tr.times[10];
  const double expect = 0.5 * std::sqrt(2.0 * basis.lambda[0]) *
                        std::cos(std::sqrt(basis.lambda[0]) * t);
  CHECK_THAT(std::abs(tr.values(0, 10)), WithinRel(std::abs(expect), 0.02));
  // over a full period the trace captures 4x the mean energy
  CHECK_THAT(tr.admissibility_ratio, WithinRel(4.0, 0.03));
}

TEST_CASE("dyadic observability constants") {
  auto d = make_interval();
  auto m = make_flat_metric(1);
  auto basis = assemble_and_eig(d, m, 400, 40);
  DyadicSpec spec;
  auto all = [](const Vec&) { return true; };
  auto none_bd = [](double) { return false; };
  (void)none_bd;

  // full observation region: the Gram form is essentially diagonal with
  // entries h^2 lambda_nu (0.9 T); C(k) = 1 / min entry
  const int k = 4;
  auto oc = obs_constant_dyadic(basis, spec, k, all, nullptr, 1.0, Observable::TimeDerivative);
  REQUIRE(oc.band_size > 0);
  const auto J = dyadic_index_set(spec, basis, k);
  const double h = spec.h_of_k(k);
  const double diag_min = h * h * basis.lambda[J.front()] * 0.9;
  CHECK_THAT(oc.c_obs, WithinRel(1.0 / diag_min, 0.1));

  // a smaller region observes less: C grows
  auto small = [](const Vec& x) { return x[0] > 0.3 && x[0] < 0.6; };
  auto oc_small =
      obs_constant_dyadic(basis, spec, k, small, nullptr, 1.0, Observable::TimeDerivative);
  CHECK(oc_small.c_obs > oc.c_obs);

  // boundary observation from both endpoints is uniformly bounded
  auto bd_all = [](double) { return true; };
  auto oc_bd = obs_constant_dyadic(basis, spec, k, nullptr, bd_all, 1.0,
                                   Observable::NormalDerivative);
  CHECK(oc_bd.c_obs > 0.0);
  CHECK(oc_bd.lambda_min > 0.0);
}
