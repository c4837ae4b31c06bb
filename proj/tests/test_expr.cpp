#include "catch_amalgamated.hpp"

#include "gcckit/expr.hpp"

using namespace gcckit;

static double ev1(const char* src, double x1) {
  auto f = expr::compile_spatial(src);
  return f(&x1, 1);
}

static double ev2(const char* src, double x1, double x2) {
  auto f = expr::compile_spatial(src);
  const double x[2] = {x1, x2};
  return f(x, 2);
}

TEST_CASE("arithmetic basics") {
  CHECK(ev1("1 + 2*3", 0.0) == 7.0);
  CHECK(ev1("(1 + 2)*3", 0.0) == 9.0);
  CHECK(ev1("2^3^2", 0.0) == 512.0);  // right-assoc
  CHECK(ev1("-x1 + 1", 0.25) == 0.75);
  CHECK(ev1("10 / 4", 0.0) == 2.5);
}

TEST_CASE("variables and functions") {
  CHECK_THAT(ev2("x1*x2", 3.0, 4.0), Catch::Matchers::WithinRel(12.0, 1e-15));
  CHECK_THAT(ev1("sin(pi/2)", 0.0), Catch::Matchers::WithinAbs(1.0, 1e-15));
  CHECK_THAT(ev1("cos(0)", 0.0), Catch::Matchers::WithinAbs(1.0, 1e-15));
  CHECK_THAT(ev1("exp(1)", 0.0), Catch::Matchers::WithinRel(2.718281828459045, 1e-14));
  CHECK_THAT(ev1("sqrt(x1)", 9.0), Catch::Matchers::WithinRel(3.0, 1e-15));
  CHECK_THAT(ev1("abs(0 - x1)", 2.0), Catch::Matchers::WithinRel(2.0, 1e-15));
  CHECK_THAT(ev1("tanh(0)", 0.0), Catch::Matchers::WithinAbs(0.0, 1e-15));
}

TEST_CASE("conformal speed expression used in configs") {
  const double v = ev2("1 + 0.5*sin(pi*x1)*sin(pi*x2)", 0.5, 0.5);
  CHECK_THAT(v, Catch::Matchers::WithinRel(1.5, 1e-14));
}

TEST_CASE("parse errors carry a message") {
  CHECK_THROWS_AS(expr::parse("1 +"), expr::ParseError);
  CHECK_THROWS_AS(expr::parse("sin(1"), expr::ParseError);
  CHECK_THROWS_AS(expr::parse("foo(1)"), expr::ParseError);
  CHECK_THROWS_AS(expr::parse(""), expr::ParseError);
}

TEST_CASE("unknown identifiers fail at evaluation") {
  auto f = expr::compile_spatial("x3 + 1");
  double x = 0.0;
  CHECK_THROWS(f(&x, 1));
}
