#pragma once

// Key-value experiment configuration (TOML-compatible subset): [section]
// headers, `key = value` lines, quoted strings, numbers, booleans and flat
// numeric arrays.  Unknown keys are rejected by the schema check so typos
// fail loudly, with the offending key and line number in the message.

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcckit/expr.hpp"
#include "gcckit/geometry.hpp"

namespace gcckit::config {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Value {
  enum class Kind { Str, Num, Bool, Arr } kind = Kind::Str;
  std::string s;
  double num = 0.0;
  bool b = false;
  std::vector<double> arr;
  int line = 0;
};

struct Table {
  std::map<std::string, Value> kv;

  bool has(const std::string& key) const { return kv.count(key) != 0; }

  const Value& require(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
  }

  std::string get_str(const std::string& key, const std::string& def = "") const {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    if (it->second.kind != Value::Kind::Str)
      throw ConfigError("key '" + key + "' (line " + std::to_string(it->second.line) +
                        ") must be a string");
    return it->second.s;
  }

  double get_num(const std::string& key, double def) const {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    if (it->second.kind != Value::Kind::Num)
      throw ConfigError("key '" + key + "' (line " + std::to_string(it->second.line) +
                        ") must be a number");
    return it->second.num;
  }

  double require_num(const std::string& key) const {
    const Value& v = require(key);
    if (v.kind != Value::Kind::Num)
      throw ConfigError("key '" + key + "' (line " + std::to_string(v.line) +
                        ") must be a number");
    return v.num;
  }

  bool get_bool(const std::string& key, bool def) const {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    if (it->second.kind != Value::Kind::Bool)
      throw ConfigError("key '" + key + "' (line " + std::to_string(it->second.line) +
                        ") must be a boolean");
    return it->second.b;
  }

  std::vector<double> get_arr(const std::string& key, std::vector<double> def = {}) const {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    if (it->second.kind != Value::Kind::Arr)
      throw ConfigError("key '" + key + "' (line " + std::to_string(it->second.line) +
                        ") must be an array");
    return it->second.arr;
  }

  // schema check: every present key must be in the allowed set
  void ensure_known(const std::set<std::string>& allowed) const {
    for (const auto& [key, val] : kv)
      if (allowed.count(key) == 0)
        throw ConfigError("unknown key '" + key + "' at line " + std::to_string(val.line));
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline Value parse_value(const std::string& raw, int line) {
  Value v;
  v.line = line;
  const std::string t = trim(raw);
  if (t.empty()) throw ConfigError("empty value at line " + std::to_string(line));
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"')
      throw ConfigError("unterminated string at line " + std::to_string(line));
    v.kind = Value::Kind::Str;
    v.s = t.substr(1, t.size() - 2);
    return v;
  }
  if (t == "true" || t == "false") {
    v.kind = Value::Kind::Bool;
    v.b = t == "true";
    return v;
  }
  if (t.front() == '[') {
    if (t.back() != ']') throw ConfigError("unterminated array at line " + std::to_string(line));
    v.kind = Value::Kind::Arr;
    std::stringstream ss(t.substr(1, t.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string it = trim(item);
      if (it.empty()) continue;
      try {
        v.arr.push_back(std::stod(it));
      } catch (const std::exception&) {
        throw ConfigError("non-numeric array entry '" + it + "' at line " +
                          std::to_string(line));
      }
    }
    return v;
  }
  try {
    std::size_t used = 0;
    v.num = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument("trailing");
    v.kind = Value::Kind::Num;
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse value '" + t + "' at line " + std::to_string(line));
  }
}

}  // namespace detail

inline Table parse_string(const std::string& text) {
  Table tbl;
  std::stringstream ss(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    std::string line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("malformed section header at line " + std::to_string(line_no));
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected 'key = value' at line " + std::to_string(line_no));
    std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("empty key at line " + std::to_string(line_no));
    if (!section.empty()) key = section + "." + key;
    if (tbl.kv.count(key))
      throw ConfigError("duplicate key '" + key + "' at line " + std::to_string(line_no));
    tbl.kv[key] = detail::parse_value(line.substr(eq + 1), line_no);
  }
  return tbl;
}

inline Table parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

// ---------------------------------------------------------------------------
// Domain / metric construction from the [domain] and [metric] blocks.

inline Domain build_domain(const Table& cfg) {
  const std::string kind = cfg.get_str("domain.kind", "interval");
  if (kind == "interval")
    return make_interval(cfg.get_num("domain.a", 0.0), cfg.get_num("domain.b", 1.0));
  if (kind == "square") return make_unit_square();
  if (kind == "disc") return make_unit_disc();
  if (kind == "half_plane")
    return make_half_plane(cfg.get_num("domain.half_width", 4.0),
                           cfg.get_num("domain.height", 4.0));
  if (kind == "level_set") {
    const std::string phi_src = cfg.require("domain.phi").s;
    auto phi_fn = expr::compile_spatial(phi_src);
    const auto box = cfg.get_arr("domain.box", {-1.0, -1.0, 1.0, 1.0});
    if (box.size() != 4) throw ConfigError("domain.box must have 4 entries");
    return make_level_set_domain(
        [phi_fn](const Vec& x) { return phi_fn(x.v.data(), x.dim); },
        Vec(2, box[0], box[1]), Vec(2, box[2], box[3]));
  }
  throw ConfigError("unknown domain.kind '" + kind + "'");
}

inline MetricField build_metric(const Table& cfg, const Domain& dom) {
  const std::string kind = cfg.get_str("metric.kind", "flat");
  const int dim = dom.dim;
  if (kind == "flat") return make_flat_metric(dim);
  if (kind == "conformal") {
    const std::string c_src = cfg.require("metric.c").s;
    auto c_fn = expr::compile_spatial(c_src);
    return make_conformal_metric(dim,
                                 [c_fn](const Vec& x) { return c_fn(x.v.data(), x.dim); });
  }
  if (kind == "matrix") {
    if (dim != 2) throw ConfigError("metric.kind = matrix needs a 2-d domain");
    auto g11 = expr::compile_spatial(cfg.require("metric.g11").s);
    auto g12 = expr::compile_spatial(cfg.get_str("metric.g12", "0"));
    auto g22 = expr::compile_spatial(cfg.require("metric.g22").s);
    return make_matrix_metric(2, [g11, g12, g22](const Vec& x) {
      Mat g;
      g.dim = 2;
      g(0, 0) = g11(x.v.data(), 2);
      g(0, 1) = g12(x.v.data(), 2);
      g(1, 0) = g(0, 1);
      g(1, 1) = g22(x.v.data(), 2);
      return g;
    });
  }
  if (kind == "perturbed") {
    Table base = cfg;
    base.kv["metric.kind"] = [&] {
      Value v;
      v.kind = Value::Kind::Str;
      v.s = cfg.get_str("metric.base", "flat");
      return v;
    }();
    const MetricField m0 = build_metric(base, dom);
    const double eps = cfg.get_num("metric.eps", 0.02);
    const auto seed = static_cast<unsigned>(cfg.get_num("metric.seed", 1.0));
    return lipschitz_perturb(m0, dom, eps, seed,
                             static_cast<int>(cfg.get_num("metric.bumps", 6.0)));
  }
  throw ConfigError("unknown metric.kind '" + kind + "'");
}

}  // namespace gcckit::config
