#include "catch_amalgamated.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gcckit/output.hpp"

using namespace gcckit;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

TEST_CASE("csv tables keep full double precision") {
  const auto text = out::csv({"t", "x"}, {{0.0, 1.0 / 3.0}, {0.5, 2.0 / 3.0}});
  std::istringstream ss(text);
  std::string line;
  REQUIRE(std::getline(ss, line));
  CHECK(line == "t,x");
  REQUIRE(std::getline(ss, line));
  std::istringstream row(line);
  std::string cell;
  REQUIRE(std::getline(row, cell, ','));
  CHECK(std::stod(cell) == 0.0);
  REQUIRE(std::getline(row, cell, ','));
  CHECK(std::stod(cell) == 1.0 / 3.0);  // round-trips exactly at precision 17
  REQUIRE(std::getline(ss, line));
  CHECK_FALSE(std::getline(ss, line));  // exactly header + 2 rows
}

TEST_CASE("text files are written verbatim; bad paths are refused") {
  const std::string path = "/tmp/gcckit_out_test.txt";
  out::write_text(path, "hello\n");
  std::ifstream in(path);
  std::stringstream got;
  got << in.rdbuf();
  CHECK(got.str() == "hello\n");
  std::remove(path.c_str());
  CHECK_THROWS_AS(out::write_text("/nonexistent-dir/x.txt", "y"), out::OutputError);
}

TEST_CASE("svg canvas maps data coordinates onto the viewport") {
  out::SvgCanvas cv;
  cv.x_min = -1.0;
  cv.x_max = 1.0;
  cv.y_min = -1.0;
  cv.y_max = 1.0;
  CHECK_THAT(cv.px(0.0), WithinAbs(320.0, 1e-12));
  CHECK_THAT(cv.py(-1.0), WithinAbs(640.0, 1e-12));  // y axis points up
  CHECK_THAT(cv.py(1.0), WithinAbs(0.0, 1e-12));

  cv.polyline({{-1.0, 0.0}, {1.0, 0.0}}, "red", 2.0);
  cv.circle(0.0, 0.0, 3.0, "blue");
  cv.polyline({{0.0, 0.0}}, "green");  // degenerate: silently skipped
  const auto svg = cv.render();
  CHECK_THAT(svg, ContainsSubstring("<svg xmlns"));
  CHECK_THAT(svg, ContainsSubstring("stroke=\"red\""));
  CHECK_THAT(svg, ContainsSubstring("<circle"));
  CHECK_THAT(svg, ContainsSubstring("points=\"0,320 640,320 \""));
  CHECK(svg.find("green") == std::string::npos);
  CHECK_THAT(svg, ContainsSubstring("</svg>"));
}

TEST_CASE("heatmaps span the full grayscale range") {
  const auto svg = out::heatmap_svg({{0.0, 1.0}, {0.5, 0.25}}, 8);
  // one rect per cell plus no background rect
  std::size_t rects = 0, pos = 0;
  while ((pos = svg.find("<rect", pos)) != std::string::npos) {
    ++rects;
    ++pos;
  }
  CHECK(rects == 4);
  CHECK_THAT(svg, ContainsSubstring("rgb(255,255,255)"));  // min value -> white
  CHECK_THAT(svg, ContainsSubstring("rgb(0,0,0)"));        // max value -> black
  CHECK_THAT(svg, ContainsSubstring("width=\"16\""));
  CHECK_THROWS_AS(out::heatmap_svg({}), out::OutputError);
}
