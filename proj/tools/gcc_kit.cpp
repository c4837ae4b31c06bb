// gcc-kit: batch front door for the ray/GCC/spectral/measure experiments.
//
// Subcommands: trace, gcc, tgcc, observe, spectrum, measure, divide, perturb.
// Every run embeds its resolved configuration in the JSON report; identical
// config + seed reproduce byte-identical reports modulo the timestamp field.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gcckit/config.hpp"
#include "gcckit/flow.hpp"
#include "gcckit/gcc.hpp"
#include "gcckit/measures.hpp"
#include "gcckit/output.hpp"
#include "gcckit/semiclassical.hpp"
#include "gcckit/spectral.hpp"

using json = nlohmann::ordered_json;
using namespace gcckit;

namespace {

struct Common {
  std::string config_path;
  std::string out_dir = ".";
  int jobs = 0;
  std::string replay_path;
  std::string config_text;  // resolved (from file or replay)
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_schema(const config::Table& cfg, const std::set<std::string>& keys,
                  const std::vector<std::string>& prefixes) {
  for (const auto& [key, val] : cfg.kv) {
    if (keys.count(key)) continue;
    bool ok = false;
    for (const auto& p : prefixes)
      if (key.rfind(p, 0) == 0) {
        ok = true;
        break;
      }
    if (!ok)
      throw config::ConfigError("unknown key '" + key + "' at line " +
                                std::to_string(val.line));
  }
}

const std::set<std::string> kGeomKeys = {
    "domain.kind", "domain.a",      "domain.b",   "domain.half_width",
    "domain.height", "domain.phi",  "domain.box", "metric.kind",
    "metric.c",    "metric.g11",    "metric.g12", "metric.g22",
    "metric.base", "metric.eps",    "metric.seed", "metric.bumps"};

const std::set<std::string> kRegionKeys = {"region.kind", "region.a",      "region.b",
                                           "region.expr", "region.box",    "region.sigma",
                                           "region.points", "region.tol",  "region.dilation"};

ObservationRegion build_region(const config::Table& cfg, const Domain& dom) {
  const std::string kind = cfg.get_str("region.kind", "interior");
  if (kind == "interior") {
    ObservationRegion r;
    if (cfg.has("region.expr")) {
      auto fn = expr::compile_spatial(cfg.require("region.expr").s);
      r = interior_region([fn](const Vec& x) { return fn(x.v.data(), x.dim) > 0.0; });
    } else if (dom.dim == 1) {
      const double a = cfg.get_num("region.a", 0.3), b = cfg.get_num("region.b", 0.6);
      r = interior_region([a, b](const Vec& x) { return x[0] > a && x[0] < b; },
                          0.5 * (b - a));
    } else {
      const auto box = cfg.get_arr("region.box", {0.0, 0.0, 0.3, 1.0});
      if (box.size() != 4) throw config::ConfigError("region.box must have 4 entries");
      r = interior_region([box](const Vec& x) {
        return x[0] > box[0] && x[1] > box[1] && x[0] < box[2] && x[1] < box[3];
      });
    }
    r.dilation = cfg.get_num("region.dilation", 0.0);
    return r;
  }
  if (kind == "boundary") {
    ObservationRegion r;
    if (cfg.has("region.sigma")) {
      const auto rng = cfg.get_arr("region.sigma");
      if (rng.size() != 2) throw config::ConfigError("region.sigma must be [lo, hi]");
      r = boundary_region([rng](double s) { return s >= rng[0] && s <= rng[1]; });
    } else {
      const auto pts = cfg.get_arr("region.points", {0.0});
      const double tol = cfg.get_num("region.tol", 1e-6);
      const double len = dom.boundary_length;
      r = boundary_region([pts, tol, len](double s) {
        for (double p : pts) {
          double d = std::abs(s - p);
          if (len > 0.0) d = std::min(d, len - d);
          if (d <= tol) return true;
        }
        return false;
      });
    }
    r.dilation = cfg.get_num("region.dilation", 0.0);
    return r;
  }
  throw config::ConfigError("unknown region.kind '" + kind + "'");
}

json base_report(const std::string& sub, const Common& common, const json& args) {
  json rep;
  rep["tool"] = "gcc-kit";
  rep["subcommand"] = sub;
  rep["args"] = args;
  rep["config"] = common.config_text;
  return rep;
}

void finish_report(json& rep, const std::string& path) {
  json stamped = rep;
  stamped["timestamp"] = static_cast<long long>(
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
  out::write_text(path, stamped.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

int run_trace(const Common& common, const config::Table& cfg, const std::string& init,
              double time, int branches) {
  std::set<std::string> keys = kGeomKeys;
  keys.insert(kRegionKeys.begin(), kRegionKeys.end());  // shared configs carry a region
  check_schema(cfg, keys, {});
  const Domain dom = config::build_domain(cfg);
  const MetricField metric = config::build_metric(cfg, dom);
  const CollarChart chart(dom, metric, dom.collar_width);

  // init string: "x=0.5,0.2;dir=30;tau=1" (dir in degrees; 1D uses sign)
  PhasePoint rho0;
  rho0.tau = 1.0;
  double dir_deg = 0.0;
  {
    std::stringstream ss(init);
    std::string part;
    while (std::getline(ss, part, ';')) {
      const auto eq = part.find('=');
      if (eq == std::string::npos) throw std::runtime_error("bad --init fragment: " + part);
      const std::string key = part.substr(0, eq), val = part.substr(eq + 1);
      if (key == "x") {
        std::stringstream vs(val);
        std::string c;
        std::vector<double> xs;
        while (std::getline(vs, c, ',')) xs.push_back(std::stod(c));
        rho0.x = dom.dim == 1 ? Vec(1, xs.at(0)) : Vec(2, xs.at(0), xs.at(1));
      } else if (key == "dir") {
        std::string v = val;
        if (v.size() > 3 && v.substr(v.size() - 3) == "deg") v = v.substr(0, v.size() - 3);
        dir_deg = std::stod(v);
      } else if (key == "tau") {
        rho0.tau = std::stod(val);
      } else {
        throw std::runtime_error("unknown --init key: " + key);
      }
    }
  }
  const double rad = dir_deg * 3.14159265358979323846 / 180.0;
  rho0.xi = dom.dim == 1 ? Vec(1, std::cos(rad) >= 0.0 ? 1.0 : -1.0)
                         : Vec(2, std::cos(rad), std::sin(rad));
  detail::project_shell(metric, rho0);

  BranchPolicy policy;
  policy.n_branches = branches;
  const auto trajs = advance_generalized(metric, chart, rho0, time, policy);

  std::vector<std::vector<double>> rows;
  for (std::size_t b = 0; b < trajs.size(); ++b)
    for (const auto& sm : trajs[b].flatten())
      rows.push_back({static_cast<double>(b), sm.s, sm.rho.t, sm.rho.x[0],
                      dom.dim > 1 ? sm.rho.x[1] : 0.0, sm.rho.tau, sm.rho.xi[0],
                      dom.dim > 1 ? sm.rho.xi[1] : 0.0});
  out::write_csv(common.out_dir + "/trace.csv",
                 {"branch", "s", "t", "x1", "x2", "tau", "xi1", "xi2"}, rows);

  // spatial SVG
  out::SvgCanvas svg;
  svg.x_min = dom.bounding_box[0][0] - 0.1;
  svg.x_max = dom.bounding_box[1][0] + 0.1;
  svg.y_min = (dom.dim > 1 ? dom.bounding_box[0][1] : -0.5) - 0.1;
  svg.y_max = (dom.dim > 1 ? dom.bounding_box[1][1] : 0.5) + 0.1;
  if (dom.boundary_param) {
    std::vector<std::pair<double, double>> outline;
    for (int i = 0; i <= 256; ++i) {
      const Vec q = dom.boundary_param(dom.boundary_length * i / 256.0);
      outline.emplace_back(q[0], dom.dim > 1 ? q[1] : 0.0);
    }
    svg.polyline(outline, "black", 1.5);
  }
  const char* colors[] = {"crimson", "steelblue", "seagreen", "darkorange"};
  for (std::size_t b = 0; b < trajs.size(); ++b) {
    std::vector<std::pair<double, double>> path;
    for (const auto& sm : trajs[b].flatten())
      path.emplace_back(sm.rho.x[0], dom.dim > 1 ? sm.rho.x[1] : 0.0);
    svg.polyline(path, colors[b % 4], 1.0);
  }
  out::write_text(common.out_dir + "/trace.svg", svg.render());

  json args{{"init", init}, {"time", time}, {"branches", branches}};
  json rep = base_report("trace", common, args);
  rep["results"]["branches"] = trajs.size();
  rep["results"]["events"] = trajs[0].events.size();
  rep["results"]["jumps"] = trajs[0].jumps.size();
  rep["results"]["truncated"] = trajs[0].truncated;
  double drift = 0.0;
  for (const auto& seg : trajs[0].segments) drift = std::max(drift, seg.p_drift);
  rep["results"]["max_p_drift"] = drift;
  finish_report(rep, common.out_dir + "/trace_report.json");
  return 0;
}

int run_gcc(const Common& common, const config::Table& cfg, double time, int branches,
            const std::string& grid, bool weak) {
  std::set<std::string> keys = kGeomKeys;
  keys.insert(kRegionKeys.begin(), kRegionKeys.end());
  check_schema(cfg, keys, {});
  const Domain dom = config::build_domain(cfg);
  const MetricField metric = config::build_metric(cfg, dom);
  const CollarChart chart(dom, metric, dom.collar_width);
  const ObservationRegion region = build_region(cfg, dom);

  SamplingSpec spec;
  if (!grid.empty()) {
    const auto x = grid.find('x');
    if (x == std::string::npos) throw std::runtime_error("--grid wants NXxNTHETA");
    spec.nx = std::stoi(grid.substr(0, x));
    spec.ntheta = std::stoi(grid.substr(x + 1));
  }
  BranchPolicy policy;
  policy.n_branches = branches;
  GccOptions opt;
  if (common.jobs > 0) opt.jobs = common.jobs;

  const GccReport r =
      weak ? check_weak_gcc(metric, dom, chart, region, time, spec, policy, opt)
           : (region.kind == RegionKind::Interior
                  ? check_interior_gcc(metric, dom, chart, region, time, spec, policy, opt)
                  : check_boundary_gcc(metric, dom, chart, region, time, spec, policy, opt));

  json args{{"time", time}, {"branches", branches}, {"grid", grid}, {"weak", weak}};
  json rep = base_report("gcc", common, args);
  rep["results"]["verdict"] = r.verdict == Verdict::Holds
                                  ? "holds"
                                  : (r.verdict == Verdict::Fails ? "fails" : "indeterminate");
  rep["results"]["coverage"] = r.coverage;
  rep["results"]["samples"] = r.n_samples;
  rep["results"]["indeterminate"] = r.n_indeterminate;

  if (!r.witnesses.empty()) {
    std::vector<std::vector<double>> rows;
    for (const auto& w : r.witnesses)
      rows.push_back({w.initial.x[0], dom.dim > 1 ? w.initial.x[1] : 0.0, w.initial.tau,
                      w.initial.xi[0], dom.dim > 1 ? w.initial.xi[1] : 0.0});
    out::write_csv(common.out_dir + "/gcc_witnesses.csv", {"x1", "x2", "tau", "xi1", "xi2"},
                   rows);
    // witness overlay
    out::SvgCanvas svg;
    svg.x_min = dom.bounding_box[0][0] - 0.1;
    svg.x_max = dom.bounding_box[1][0] + 0.1;
    svg.y_min = (dom.dim > 1 ? dom.bounding_box[0][1] : -0.5) - 0.1;
    svg.y_max = (dom.dim > 1 ? dom.bounding_box[1][1] : 0.5) + 0.1;
    if (dom.boundary_param) {
      std::vector<std::pair<double, double>> outline;
      for (int i = 0; i <= 256; ++i) {
        const Vec q = dom.boundary_param(dom.boundary_length * i / 256.0);
        outline.emplace_back(q[0], dom.dim > 1 ? q[1] : 0.0);
      }
      svg.polyline(outline, "black", 1.5);
    }
    for (const auto& w : r.witnesses) {
      std::vector<std::pair<double, double>> path;
      for (const auto& sm : w.trajectory.flatten())
        path.emplace_back(sm.rho.x[0], dom.dim > 1 ? sm.rho.x[1] : 0.0);
      svg.polyline(path, "crimson", 1.0);
    }
    out::write_text(common.out_dir + "/gcc_witnesses.svg", svg.render());
    rep["results"]["witness_file"] = "gcc_witnesses.csv";
  }
  finish_report(rep, common.out_dir + "/gcc_report.json");
  return r.verdict == Verdict::Fails ? 2 : 0;
}

int run_tgcc(const Common& common, const config::Table& cfg, double t_max, double dt) {
  std::set<std::string> keys = kGeomKeys;
  keys.insert(kRegionKeys.begin(), kRegionKeys.end());
  check_schema(cfg, keys, {});
  const Domain dom = config::build_domain(cfg);
  const MetricField metric = config::build_metric(cfg, dom);
  const CollarChart chart(dom, metric, dom.collar_width);
  const ObservationRegion region = build_region(cfg, dom);
  GccOptions opt;
  if (common.jobs > 0) opt.jobs = common.jobs;

  const double T = estimate_T_gcc(metric, dom, chart, region, t_max, dt, {}, {}, opt);
  json args{{"t_max", t_max}, {"dt", dt}};
  json rep = base_report("tgcc", common, args);
  if (std::isinf(T))
    rep["results"]["t_gcc"] = "infinite";
  else
    rep["results"]["t_gcc"] = T;
  finish_report(rep, common.out_dir + "/tgcc_report.json");
  return 0;
}

int run_spectrum(const Common& common, const config::Table& cfg, int count, int resolution) {
  std::set<std::string> keys = kGeomKeys;
  keys.insert(kRegionKeys.begin(), kRegionKeys.end());
  keys.insert({"solver.resolution", "solver.count"});
  check_schema(cfg, keys, {});
  const Domain dom = config::build_domain(cfg);
  const MetricField metric = config::build_metric(cfg, dom);
  if (resolution <= 0)
    resolution = static_cast<int>(cfg.get_num("solver.resolution", dom.dim == 1 ? 400 : 48));
  if (count <= 0) count = static_cast<int>(cfg.get_num("solver.count", 20));

  const EigenBasis basis = assemble_and_eig(dom, metric, resolution, count);
  std::vector<std::vector<double>> rows;
  for (int nu = 0; nu < basis.count(); ++nu)
    rows.push_back({static_cast<double>(nu + 1), basis.lambda[nu]});
  out::write_csv(common.out_dir + "/spectrum.csv", {"nu", "lambda"}, rows);

  json args{{"count", count}, {"resolution", resolution}};
  json rep = base_report("spectrum", common, args);
  rep["results"]["lambda_1"] = basis.lambda[0];
  rep["results"]["count"] = basis.count();
  finish_report(rep, common.out_dir + "/spectrum_report.json");
  return 0;
}

int run_observe(const Common& common, const config::Table& cfg, double time, int k_min,
                int k_max) {
  std::set<std::string> keys = kGeomKeys;
  keys.insert(kRegionKeys.begin(), kRegionKeys.end());
  keys.insert({"solver.resolution", "solver.count", "dyadic.alpha", "dyadic.rho"});
  check_schema(cfg, keys, {});
  const Domain dom = config::build_domain(cfg);
  const MetricField metric = config::build_metric(cfg, dom);
  const ObservationRegion region = build_region(cfg, dom);

  DyadicSpec dspec;
  dspec.alpha = cfg.get_num("dyadic.alpha", 0.5);
  dspec.rho_ratio = cfg.get_num("dyadic.rho", 1.5);
  const int resolution =
      static_cast<int>(cfg.get_num("solver.resolution", dom.dim == 1 ? 400 : 48));

  // modes needed to cover the top band
  const double top = 1.0 / (dspec.alpha * dspec.h_of_k(k_max));
  int count = static_cast<int>(cfg.get_num("solver.count", 0.0));
  if (count <= 0) {
    // Weyl-flavoured guess, then clip to the solver's trustworthy band
    count = dom.dim == 1 ? static_cast<int>(top / 3.0) + 10
                         : static_cast<int>(top * top / 12.0) + 20;
  }
  const EigenBasis basis = assemble_and_eig(dom, metric, resolution, count);
  const Observable obs = region.kind == RegionKind::Boundary ? Observable::NormalDerivative
                                                             : Observable::TimeDerivative;

  std::function<bool(const Vec&)> in_omega = region.indicator;
  if (!in_omega) in_omega = [](const Vec&) { return false; };
  std::function<bool(double)> on_gamma = region.boundary_indicator;
  if (!on_gamma) on_gamma = [](double) { return false; };

  json rows = json::array();
  std::vector<std::vector<double>> csv_rows;
  for (int k = k_min; k <= k_max; ++k) {
    const ObsConstant c =
        obs_constant_dyadic(basis, dspec, k, in_omega, on_gamma, time, obs);
    rows.push_back(json{{"k", c.k}, {"h", c.h}, {"band_size", c.band_size}, {"c_obs", c.c_obs}});
    csv_rows.push_back({static_cast<double>(c.k), c.h, static_cast<double>(c.band_size),
                        c.c_obs});
  }
  out::write_csv(common.out_dir + "/observe.csv", {"k", "h", "band_size", "c_obs"}, csv_rows);

  json args{{"time", time}, {"k_min", k_min}, {"k_max", k_max}};
  json rep = base_report("observe", common, args);
  rep["results"]["sweep"] = rows;
  finish_report(rep, common.out_dir + "/observe_report.json");
  return 0;
}

int run_measure(const Common& common, const config::Table& cfg, int rungs) {
  std::set<std::string> keys = kGeomKeys;
  keys.insert(kRegionKeys.begin(), kRegionKeys.end());
  keys.insert({"measure.x0", "measure.xi0", "measure.h0", "measure.grid", "dyadic.rho"});
  check_schema(cfg, keys, {"symbols."});
  const Domain dom = config::build_domain(cfg);
  if (dom.dim != 1) throw std::runtime_error("measure: 1-d domains only");

  const auto x0a = cfg.get_arr("measure.x0", {0.5});
  const auto xi0a = cfg.get_arr("measure.xi0", {1.0});
  const double h0 = cfg.get_num("measure.h0", 0.25);
  const double rho = cfg.get_num("dyadic.rho", 2.0);
  auto n_grid = static_cast<std::size_t>(cfg.get_num("measure.grid", 1024));

  HSeq seq;
  seq.grid = Grid::line(n_grid, dom.bounding_box[0][0], dom.bounding_box[1][0]);
  for (int r = 0; r < rungs; ++r) {
    WavePacket pk;
    pk.x0 = Vec(1, x0a.at(0));
    pk.xi0 = Vec(1, xi0a.at(0));
    pk.h = h0 * std::pow(rho, -r);
    seq.h.push_back(pk.h);
    seq.u.push_back(pk.realize(seq.grid));
  }

  std::vector<Symbol> bank;
  for (const auto& [key, val] : cfg.kv)
    if (key.rfind("symbols.", 0) == 0)
      bank.push_back(symbol_from_expr(1, val.s, key.substr(8)));
  if (bank.empty()) bank.push_back(symbol_from_expr(1, "exp(0-((x1-0.5)^2+(xi1-1)^2))", "probe"));

  const MeasureEstimate est = estimate_measure(seq, bank);
  json args{{"rungs", rungs}};
  json rep = base_report("measure", common, args);
  json per = json::array();
  for (const auto& lad : est.per_symbol) {
    json pts = json::array();
    for (const auto& p : lad.points)
      pts.push_back(json{{"h", p.h}, {"re", p.value.real()}, {"im", p.value.imag()}});
    per.push_back(json{{"symbol", lad.id},
                       {"ladder", pts},
                       {"limit_re", lad.limit.real()},
                       {"limit_im", lad.limit.imag()},
                       {"spread", lad.spread}});
  }
  rep["results"]["pairings"] = per;
  rep["results"]["mass"] = est.mass;
  rep["results"]["leak"] = est.leak;
  rep["results"]["leak_fraction"] = est.leak_fraction;

  // |u|^2 heatmap over (x, rung)
  std::vector<std::vector<double>> img;
  for (const auto& u : seq.u) {
    std::vector<double> row;
    for (std::size_t i = 0; i < u.size(); i += 8) row.push_back(std::norm(u[i]));
    img.push_back(std::move(row));
  }
  out::write_text(common.out_dir + "/measure_heatmap.svg", out::heatmap_svg(img, 2));
  finish_report(rep, common.out_dir + "/measure_report.json");
  return 0;
}

int run_divide(const Common& common, int pairs, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  double worst_resid = 0.0, worst_b1 = 0.0;
  for (int trial = 0; trial < pairs; ++trial) {
    // b: random low-order polynomial in zeta with trig base-point coefficients
    std::array<double, 4> cb{};
    for (auto& c : cb) c = unif(rng);
    const double freq = 1.0 + std::abs(unif(rng));
    auto b = [cb, freq](const Vec& base, cd z) {
      const cd mod = std::cos(freq * base[0]) + 0.3 * std::sin(base[1]);
      return (cb[0] + cb[1] * z + cb[2] * z * z + cb[3] * z * z * z) * mod;
    };
    const double r0 = 0.5 + std::abs(unif(rng));
    auto p = [r0](const Vec& base, cd z) { return z * z - cd(r0 * r0 * (1.0 + 0.2 * base[1] * base[1])); };
    auto chi = [](const Vec&) { return 1.0; };
    const DivisionParts parts = euclidean_divide(b, p, chi);

    for (int k = 0; k < 20; ++k) {
      const Vec base(2, unif(rng), unif(rng));
      const double root = r0 * std::sqrt(1.0 + 0.2 * base[1] * base[1]);
      double zeta = 3.0 * unif(rng);
      if (std::abs(std::abs(zeta) - root) < 0.05) zeta += 0.2;  // stay off the root band
      worst_resid = std::max(worst_resid, parts.residual(base, zeta));
      // b1 against the closing difference-quotient formula
      const cd direct = (b(base, cd(root)) - b(base, cd(-root))) / cd(2.0 * root);
      worst_b1 = std::max(worst_b1, std::abs(parts.b1(base) - direct));
    }
  }

  json args{{"pairs", pairs}, {"seed", seed}};
  json rep = base_report("divide", common, args);
  rep["results"]["worst_residual"] = worst_resid;
  rep["results"]["worst_b1_error"] = worst_b1;
  finish_report(rep, common.out_dir + "/divide_report.json");
  return 0;
}

int run_perturb(const Common& common, const config::Table& cfg, double time, double eps,
                int trials, unsigned seed) {
  std::set<std::string> keys = kGeomKeys;
  keys.insert(kRegionKeys.begin(), kRegionKeys.end());
  check_schema(cfg, keys, {});
  const Domain dom = config::build_domain(cfg);
  const MetricField metric = config::build_metric(cfg, dom);
  const ObservationRegion region = build_region(cfg, dom);
  GccOptions opt;
  if (common.jobs > 0) opt.jobs = common.jobs;

  const auto rows = perturbation_sweep(metric, dom, region, time, {eps}, trials, seed, {}, {},
                                       opt);
  json args{{"time", time}, {"eps", eps}, {"trials", trials}, {"seed", seed}};
  json rep = base_report("perturb", common, args);
  json jrows = json::array();
  for (const auto& r : rows)
    jrows.push_back(json{{"eps", r.eps},
                         {"trials", r.trials},
                         {"passes", r.passes},
                         {"pass_rate", r.pass_rate()}});
  rep["results"]["sweep"] = jrows;
  finish_report(rep, common.out_dir + "/perturb_report.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gcc-kit: geometric control toolkit"};
  app.require_subcommand(0, 1);

  Common common;
  app.add_option("--replay", common.replay_path, "re-run a previous JSON report");

  std::string init = "x=0.5,0.2;dir=30";
  double time = 3.0, t_max = 20.0, dt = 0.025, eps = 0.02;
  int branches = 1, count = 0, resolution = 0, k_min = 1, k_max = 6, rungs = 5, pairs = 50,
      trials = 20;
  unsigned seed = 1;
  std::string grid;
  bool weak = false;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* o = sub->add_option("--config", common.config_path, "experiment config file");
    if (needs_config) o->required();
    sub->add_option("--out", common.out_dir, "output directory");
    sub->add_option("--jobs", common.jobs, "worker pool size");
  };

  auto* sc_trace = app.add_subcommand("trace", "trace a generalized bicharacteristic");
  add_common(sc_trace, true);
  sc_trace->add_option("--init", init, "initial data, e.g. x=0.1,0.2;dir=30deg");
  sc_trace->add_option("--time", time, "trace duration");
  sc_trace->add_option("--branches", branches, "branch budget");

  auto* sc_gcc = app.add_subcommand("gcc", "check the geometric control condition");
  add_common(sc_gcc, true);
  sc_gcc->add_option("--time", time, "control time T");
  sc_gcc->add_option("--branches", branches, "branch budget");
  sc_gcc->add_option("--grid", grid, "sampling grid NXxNTHETA");
  sc_gcc->add_flag("--weak", weak, "weak GCC (some branch, dilated region)");

  auto* sc_tgcc = app.add_subcommand("tgcc", "estimate the critical control time");
  add_common(sc_tgcc, true);
  sc_tgcc->add_option("--t-max", t_max, "upper bound for the search");
  sc_tgcc->add_option("--dt", dt, "bisection resolution");

  auto* sc_spec = app.add_subcommand("spectrum", "Dirichlet eigenvalues");
  add_common(sc_spec, true);
  sc_spec->add_option("--count", count, "number of modes");
  sc_spec->add_option("--resolution", resolution, "grid cells per axis");

  auto* sc_obs = app.add_subcommand("observe", "dyadic observability sweep");
  add_common(sc_obs, true);
  sc_obs->add_option("--time", time, "observation time T");
  sc_obs->add_option("--k-min", k_min, "first dyadic index");
  sc_obs->add_option("--k-max", k_max, "last dyadic index");

  auto* sc_meas = app.add_subcommand("measure", "wave-packet measure pairings");
  add_common(sc_meas, true);
  sc_meas->add_option("--rungs", rungs, "h-ladder length");

  auto* sc_div = app.add_subcommand("divide", "Euclidean symbol division audit");
  add_common(sc_div, false);
  sc_div->add_option("--pairs", pairs, "number of random (b, p) pairs");
  sc_div->add_option("--seed", seed, "RNG seed");

  auto* sc_pert = app.add_subcommand("perturb", "GCC stability under metric perturbations");
  add_common(sc_pert, true);
  sc_pert->add_option("--time", time, "control time T");
  sc_pert->add_option("--eps", eps, "perturbation magnitude");
  sc_pert->add_option("--trials", trials, "number of perturbations");
  sc_pert->add_option("--seed", seed, "RNG seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!common.replay_path.empty()) {
      // replay: rebuild the run from the embedded config and args
      const json old = json::parse(slurp(common.replay_path));
      common.config_text = old.at("config").get<std::string>();
      const config::Table cfg = config::parse_string(common.config_text);
      const std::string sub = old.at("subcommand").get<std::string>();
      const json& a = old.at("args");
      int rc = 1;
      if (sub == "trace")
        rc = run_trace(common, cfg, a.at("init"), a.at("time"), a.at("branches"));
      else if (sub == "gcc")
        rc = run_gcc(common, cfg, a.at("time"), a.at("branches"), a.at("grid"), a.at("weak"));
      else if (sub == "tgcc")
        rc = run_tgcc(common, cfg, a.at("t_max"), a.at("dt"));
      else if (sub == "spectrum")
        rc = run_spectrum(common, cfg, a.at("count"), a.at("resolution"));
      else if (sub == "observe")
        rc = run_observe(common, cfg, a.at("time"), a.at("k_min"), a.at("k_max"));
      else if (sub == "measure")
        rc = run_measure(common, cfg, a.at("rungs"));
      else if (sub == "divide")
        rc = run_divide(common, a.at("pairs"), a.at("seed"));
      else if (sub == "perturb")
        rc = run_perturb(common, cfg, a.at("time"), a.at("eps"), a.at("trials"), a.at("seed"));
      else
        throw std::runtime_error("replay: unknown subcommand " + sub);
      const json fresh =
          json::parse(slurp(common.out_dir + "/" + sub + "_report.json"));
      json o2 = old, f2 = fresh;
      o2.erase("timestamp");
      f2.erase("timestamp");
      if (o2.at("results") == f2.at("results")) {
        std::printf("replay: results match\n");
        return rc;
      }
      std::fprintf(stderr, "replay: results differ\n");
      return 1;
    }

    config::Table cfg;
    if (!common.config_path.empty()) {
      common.config_text = slurp(common.config_path);
      cfg = config::parse_string(common.config_text);
    }

    if (sc_trace->parsed()) return run_trace(common, cfg, init, time, branches);
    if (sc_gcc->parsed()) return run_gcc(common, cfg, time, branches, grid, weak);
    if (sc_tgcc->parsed()) return run_tgcc(common, cfg, t_max, dt);
    if (sc_spec->parsed()) return run_spectrum(common, cfg, count, resolution);
    if (sc_obs->parsed()) return run_observe(common, cfg, time, k_min, k_max);
    if (sc_meas->parsed()) return run_measure(common, cfg, rungs);
    if (sc_div->parsed()) return run_divide(common, pairs, seed);
    if (sc_pert->parsed()) return run_perturb(common, cfg, time, eps, trials, seed);
    std::fprintf(stderr, "no subcommand given; see --help\n");
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
