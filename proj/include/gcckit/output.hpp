#pragma once

// Artifact writers: CSV tables, standalone SVG plots (ray paths over the
// domain outline, simple heatmaps).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcckit::out {

struct OutputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void write_text(const std::string& path, const std::string& body) {
  std::ofstream f(path);
  if (!f) throw OutputError("cannot open output file: " + path);
  f << body;
}

inline std::string csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& rows) {
  std::ostringstream ss;
  ss << std::setprecision(17);
  for (std::size_t i = 0; i < header.size(); ++i)
    ss << header[i] << (i + 1 < header.size() ? "," : "\n");
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i)
      ss << row[i] << (i + 1 < row.size() ? "," : "\n");
  return ss.str();
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  write_text(path, csv(header, rows));
}

// ---------------------------------------------------------------------------
// SVG: polyline paths in data coordinates mapped onto a fixed canvas.

struct SvgCanvas {
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
  int width = 640, height = 640;
  std::ostringstream body;

  double px(double x) const { return (x - x_min) / (x_max - x_min) * width; }
  double py(double y) const { return height - (y - y_min) / (y_max - y_min) * height; }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                double stroke = 1.0) {
    if (pts.size() < 2) return;
    body << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << stroke
         << "\" points=\"";
    for (const auto& [x, y] : pts) body << px(x) << "," << py(y) << " ";
    body << "\"/>\n";
  }

  void circle(double x, double y, double r_px, const std::string& color) {
    body << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"" << r_px
         << "\" fill=\"" << color << "\"/>\n";
  }

  void rect(double x0, double y0, double x1, double y1, const std::string& fill,
            double opacity = 1.0) {
    body << "<rect x=\"" << px(x0) << "\" y=\"" << py(y1) << "\" width=\"" << px(x1) - px(x0)
         << "\" height=\"" << py(y0) - py(y1) << "\" fill=\"" << fill << "\" fill-opacity=\""
         << opacity << "\"/>\n";
  }

  std::string render() const {
    std::ostringstream ss;
    ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << body.str() << "</svg>\n";
    return ss.str();
  }
};

// grayscale heatmap of a row-major matrix (rows plotted bottom-up)
inline std::string heatmap_svg(const std::vector<std::vector<double>>& values, int cell_px = 4) {
  if (values.empty()) throw OutputError("heatmap: empty data");
  double lo = 1e300, hi = -1e300;
  for (const auto& row : values)
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double span = hi - lo > 0.0 ? hi - lo : 1.0;
  const int nr = static_cast<int>(values.size());
  const int nc = static_cast<int>(values[0].size());
  std::ostringstream ss;
  ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << nc * cell_px << "\" height=\""
     << nr * cell_px << "\">\n";
  for (int r = 0; r < nr; ++r)
    for (int c = 0; c < nc; ++c) {
      const int shade =
          static_cast<int>(255.0 * (1.0 - (values[static_cast<std::size_t>(r)]
                                                 [static_cast<std::size_t>(c)] - lo) / span));
      ss << "<rect x=\"" << c * cell_px << "\" y=\"" << (nr - 1 - r) * cell_px << "\" width=\""
         << cell_px << "\" height=\"" << cell_px << "\" fill=\"rgb(" << shade << "," << shade
         << "," << shade << ")\"/>\n";
    }
  ss << "</svg>\n";
  return ss.str();
}

}  // namespace gcckit::out
