#include "catch_amalgamated.hpp"

#include <cmath>

#include "gcckit/config.hpp"

using namespace gcckit;
using namespace gcckit::config;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("sections, comments and typed values") {
  const auto tbl = parse_string(R"(
# run setup
title = "sweep A"   # trailing comment
n = 42
ratio = 2.5e-1
flag = true

[domain]
kind = "disc"
box = [ -1.0, -1, 1, 1.0 ]
)");
  CHECK(tbl.get_str("title") == "sweep A");
  CHECK_THAT(tbl.get_num("n", 0.0), WithinAbs(42.0, 0.0));
  CHECK_THAT(tbl.get_num("ratio", 0.0), WithinAbs(0.25, 1e-15));
  CHECK(tbl.get_bool("flag", false));
  CHECK(tbl.get_str("domain.kind") == "disc");
  const auto box = tbl.get_arr("domain.box");
  REQUIRE(box.size() == 4);
  CHECK(box[0] == -1.0);
  CHECK(box[3] == 1.0);
  // defaults for absent keys
  CHECK(tbl.get_num("absent", 7.0) == 7.0);
  CHECK(tbl.get_str("absent", "d") == "d");
}

TEST_CASE("malformed input is rejected with line numbers") {
  CHECK_THROWS_MATCHES(parse_string("a = 1\na = 2\n"), ConfigError,
                       Catch::Matchers::MessageMatches(ContainsSubstring("line 2")));
  CHECK_THROWS_AS(parse_string("just a line\n"), ConfigError);
  CHECK_THROWS_AS(parse_string("[open\n"), ConfigError);
  CHECK_THROWS_AS(parse_string("k = \"unterminated\n"), ConfigError);
  CHECK_THROWS_AS(parse_string("k = [1, 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_string("k = [1, x]\n"), ConfigError);
  CHECK_THROWS_AS(parse_string("k = 12abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_string("k =\n"), ConfigError);
  CHECK_THROWS_AS(parse_string(" = 3\n"), ConfigError);
}

TEST_CASE("type mismatches and missing keys fail loudly") {
  const auto tbl = parse_string("k = 3\ns = \"x\"\n");
  CHECK_THROWS_AS(tbl.get_str("k"), ConfigError);
  CHECK_THROWS_AS(tbl.get_num("s", 0.0), ConfigError);
  CHECK_THROWS_AS(tbl.require("missing"), ConfigError);
  CHECK_THAT(tbl.require_num("k"), WithinAbs(3.0, 0.0));
}

TEST_CASE("schema check flags unknown keys") {
  const auto tbl = parse_string("[run]\nT = 1.0\ntpyo = 2\n");
  CHECK_THROWS_MATCHES(tbl.ensure_known({"run.T"}), ConfigError,
                       Catch::Matchers::MessageMatches(ContainsSubstring("run.tpyo")));
  CHECK_NOTHROW(tbl.ensure_known({"run.T", "run.tpyo"}));
}

TEST_CASE("domains from config blocks") {
  auto d = build_domain(parse_string("[domain]\nkind = \"interval\"\na = -2\nb = 3\n"));
  CHECK(d.dim == 1);
  CHECK(d.inside(Vec(1, 0.0)));
  CHECK_FALSE(d.inside(Vec(1, 3.5)));

  d = build_domain(parse_string("[domain]\nkind = \"disc\"\n"));
  CHECK(d.dim == 2);
  CHECK_THAT(d.phi(Vec(2, 0.0, 0.0)), WithinAbs(1.0, 1e-12));

  d = build_domain(parse_string(
      "[domain]\nkind = \"level_set\"\nphi = \"1 - x1^2 - x2^2\"\nbox = [-1, -1, 1, 1]\n"));
  CHECK(d.inside(Vec(2, 0.5, 0.0)));
  CHECK_FALSE(d.inside(Vec(2, 1.1, 0.0)));

  CHECK_THROWS_AS(build_domain(parse_string("[domain]\nkind = \"torus\"\n")), ConfigError);
}

TEST_CASE("metrics from config blocks") {
  const auto dom = make_unit_square();

  auto m = build_metric(parse_string("[metric]\nkind = \"flat\"\n"), dom);
  CHECK_THAT(m.g_inv(Vec(2, 0.3, 0.3))(0, 0), WithinAbs(1.0, 1e-12));

  m = build_metric(parse_string("[metric]\nkind = \"conformal\"\nc = \"1 + x2\"\n"), dom);
  // g^{ij} = c^2 delta
  CHECK_THAT(m.g_inv(Vec(2, 0.0, 0.5))(1, 1), WithinRel(2.25, 1e-12));

  m = build_metric(
      parse_string("[metric]\nkind = \"matrix\"\ng11 = \"2\"\ng12 = \"0.1\"\ng22 = \"1\"\n"),
      dom);
  // g11/g12/g22 define the metric itself; g_inv is its inverse
  const Mat g = m.g_inv(Vec(2, 0.2, 0.2));
  const double det = 2.0 * 1.0 - 0.1 * 0.1;
  CHECK_THAT(g(0, 0), WithinAbs(1.0 / det, 1e-12));
  CHECK_THAT(g(0, 1), WithinAbs(-0.1 / det, 1e-12));

  m = build_metric(
      parse_string("[metric]\nkind = \"perturbed\"\neps = 0.01\nseed = 9\nbumps = 4\n"), dom);
  CHECK(m.regularity_tag == Regularity::Lipschitz);
  const Mat gp = m.g_inv(Vec(2, 0.4, 0.6));
  CHECK(std::abs(gp(0, 0) - 1.0) <= 0.01 + 1e-12);

  CHECK_THROWS_AS(build_metric(parse_string("[metric]\nkind = \"weird\"\n"), dom), ConfigError);
}
