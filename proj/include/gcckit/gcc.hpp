#pragma once

// Geometric control condition checkers (interior, boundary, weak variants),
// T_GCC estimation by bisection, and perturbation-stability sweeps.
//
// The paper-side condition quantifies over all phase points and all
// generalized bicharacteristics; verdicts here are certified on sampled
// grids with a declared branch policy and reported coverage.

#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "gcckit/flow.hpp"
#include "gcckit/geometry.hpp"

namespace gcckit {

enum class RegionKind { Interior, Boundary };

struct ObservationRegion {
  RegionKind kind = RegionKind::Interior;
  std::function<bool(const Vec&)> indicator;          // interior: x inside omega
  std::function<bool(double)> boundary_indicator;     // boundary: sigma on Gamma
  double dilation = 0.0;                              // neighborhood radius for weak GCC
  double feature_size = 0.05;                         // smallest width, for sub-stepping
};

inline ObservationRegion interior_region(std::function<bool(const Vec&)> ind,
                                         double feature_size = 0.05) {
  ObservationRegion r;
  r.kind = RegionKind::Interior;
  r.indicator = std::move(ind);
  r.feature_size = feature_size;
  return r;
}

inline ObservationRegion boundary_region(std::function<bool(double)> ind) {
  ObservationRegion r;
  r.kind = RegionKind::Boundary;
  r.boundary_indicator = std::move(ind);
  return r;
}

enum class Verdict { Holds, Fails, Indeterminate };

struct SamplingSpec {
  int nx = 12;          // spatial samples per axis
  int ntheta = 16;      // xi directions (2D); ignored in 1D
  double margin = 0.05; // distance kept from the boundary
};

struct GccWitness {
  PhasePoint initial;
  GeneralizedTrajectory trajectory;  // first branch, for reporting
};

struct GccReport {
  Verdict verdict = Verdict::Indeterminate;
  std::vector<GccWitness> witnesses;
  double coverage = 0.0;  // fraction of samples with a definite pass
  int n_samples = 0;
  int n_indeterminate = 0;
  double T_used = 0.0;
  SamplingSpec sampling;
  BranchPolicy policy;

  bool holds() const { return verdict == Verdict::Holds; }
};

namespace detail {

// Does the trajectory meet the interior region within (0, T)?  Linear
// interpolation between samples with sub-steps bounded by the region's
// feature size guards against tunneling through thin regions.
inline bool meets_interior(const GeneralizedTrajectory& traj, const ObservationRegion& region,
                           double t0, double T) {
  const double max_sub = 0.1 * region.feature_size;
  for (const auto& seg : traj.segments) {
    for (std::size_t i = 0; i + 1 < seg.samples.size(); ++i) {
      const PhasePoint& a = seg.samples[i].rho;
      const PhasePoint& b = seg.samples[i + 1].rho;
      double len = (b.x - a.x).norm();
      const int nsub = std::max(1, static_cast<int>(std::ceil(len / max_sub)));
      for (int j = 0; j <= nsub; ++j) {
        const double lam = static_cast<double>(j) / nsub;
        const double t = a.t + lam * (b.t - a.t);
        if (t <= t0 || t >= t0 + T) continue;
        if (region.indicator(a.x + (b.x - a.x) * lam)) return true;
      }
    }
  }
  return false;
}

// Does the trajectory log an escape-point boundary event over Gamma in (0,T)?
inline bool meets_boundary(const GeneralizedTrajectory& traj, const CollarChart& chart,
                           const ObservationRegion& region, double t0, double T) {
  for (const auto& ev : traj.events) {
    if (ev.t <= t0 || ev.t >= t0 + T) continue;
    if (!region.boundary_indicator(ev.sigma)) continue;
    if (is_escape_point(ev.cls, TimeDirection::Future) ||
        is_escape_point(ev.cls, TimeDirection::Past))
      return true;
  }
  // gliding arcs sit on the boundary and consist of escape points
  for (const auto& seg : traj.segments) {
    if (seg.kind != SegmentKind::Gliding) continue;
    for (const auto& sm : seg.samples) {
      if (sm.rho.t <= t0 || sm.rho.t >= t0 + T) continue;
      const auto sz = chart.invert(sm.rho.x);
      if (sz && region.boundary_indicator(sz->first)) return true;
    }
  }
  return false;
}

inline void parallel_for(int n, int jobs, const std::function<void(int)>& body) {
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        body(i);
      }
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Sample S*M-normalized data: tau = +1, |xi|_x = 1 on a tensor grid of
// (x, direction).  tau = -1 data are time reversals and covered by symmetry.
inline std::vector<PhasePoint> sample_phase_space(const Domain& d, const MetricField& m,
                                                  const SamplingSpec& spec) {
  std::vector<PhasePoint> out;
  const Vec lo = d.bounding_box[0], hi = d.bounding_box[1];
  if (d.dim == 1) {
    for (int i = 0; i < spec.nx; ++i) {
      const double x = lo[0] + spec.margin +
                       (hi[0] - lo[0] - 2 * spec.margin) * (i + 0.5) / spec.nx;
      for (double sgn : {-1.0, 1.0}) {
        PhasePoint r(0.0, Vec(1, x), 1.0, Vec(1, sgn));
        detail::project_shell(m, r);
        out.push_back(r);
      }
    }
    return out;
  }
  for (int i = 0; i < spec.nx; ++i)
    for (int j = 0; j < spec.nx; ++j) {
      Vec x(2, lo[0] + spec.margin + (hi[0] - lo[0] - 2 * spec.margin) * (i + 0.5) / spec.nx,
            lo[1] + spec.margin + (hi[1] - lo[1] - 2 * spec.margin) * (j + 0.5) / spec.nx);
      if (!d.inside(x) || d.phi(x) < spec.margin) continue;
      for (int k = 0; k < spec.ntheta; ++k) {
        const double th = 2.0 * 3.14159265358979323846 * k / spec.ntheta;
        PhasePoint r(0.0, x, 1.0, Vec(2, std::cos(th), std::sin(th)));
        detail::project_shell(m, r);
        out.push_back(r);
      }
    }
  return out;
}

struct GccOptions {
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  FlowOptions flow;
};

namespace detail {

enum class Quantifier { AllBranches, SomeBranch };

inline GccReport run_gcc_check(const MetricField& m, const Domain& d, const CollarChart& chart,
                               const ObservationRegion& region, double T,
                               const SamplingSpec& spec, const BranchPolicy& policy,
                               Quantifier quant, double dilation, const GccOptions& opt) {
  GccReport rep;
  rep.T_used = T;
  rep.sampling = spec;
  rep.policy = policy;

  ObservationRegion reg = region;
  if (dilation > 0.0 && region.kind == RegionKind::Interior) {
    auto base = region.indicator;
    const Vec lo = d.bounding_box[0], hi = d.bounding_box[1];
    const int dim = d.dim;
    reg.indicator = [base, dilation, dim](const Vec& x) {
      // dilate by sampling a small disc around x
      const int nr = 4;
      for (int i = -nr; i <= nr; ++i)
        for (int j = -(dim > 1 ? nr : 0); j <= (dim > 1 ? nr : 0); ++j) {
          Vec y = x;
          y[0] += dilation * i / nr;
          if (dim > 1) y[1] += dilation * j / nr;
          if (base(y)) return true;
        }
      return false;
    };
    (void)lo;
    (void)hi;
  }

  const auto samples = sample_phase_space(d, m, spec);
  rep.n_samples = static_cast<int>(samples.size());
  std::vector<int> result(samples.size(), 0);  // 1 pass, -1 fail, 0 indeterminate
  std::vector<GeneralizedTrajectory> first_branch(samples.size());

  detail::parallel_for(static_cast<int>(samples.size()), opt.jobs, [&](int i) {
    const auto trajs =
        advance_generalized(m, chart, samples[static_cast<std::size_t>(i)], T, policy, opt.flow);
    bool any_truncated = false;
    int n_meet = 0;
    for (const auto& tr : trajs) {
      if (tr.truncated) any_truncated = true;
      const bool met = reg.kind == RegionKind::Interior
                           ? detail::meets_interior(tr, reg, 0.0, T)
                           : detail::meets_boundary(tr, chart, reg, 0.0, T);
      if (met) ++n_meet;
    }
    const bool pass = quant == Quantifier::AllBranches ? n_meet == static_cast<int>(trajs.size())
                                                       : n_meet > 0;
    if (pass)
      result[static_cast<std::size_t>(i)] = 1;
    else if (any_truncated)
      result[static_cast<std::size_t>(i)] = 0;
    else {
      result[static_cast<std::size_t>(i)] = -1;
      first_branch[static_cast<std::size_t>(i)] = trajs.front();
    }
  });

  int pass = 0, fail = 0, indet = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (result[i] == 1)
      ++pass;
    else if (result[i] == -1) {
      ++fail;
      if (rep.witnesses.size() < 8)
        rep.witnesses.push_back({samples[i], std::move(first_branch[i])});
    } else
      ++indet;
  }
  rep.n_indeterminate = indet;
  rep.coverage = samples.empty() ? 0.0 : static_cast<double>(pass) / samples.size();
  if (fail > 0)
    rep.verdict = Verdict::Fails;
  else if (indet > 0)
    rep.verdict = Verdict::Indeterminate;
  else
    rep.verdict = Verdict::Holds;
  return rep;
}

}  // namespace detail

inline GccReport check_interior_gcc(const MetricField& m, const Domain& d,
                                    const CollarChart& chart, const ObservationRegion& omega,
                                    double T, const SamplingSpec& spec = {},
                                    const BranchPolicy& policy = {}, const GccOptions& opt = {}) {
  return detail::run_gcc_check(m, d, chart, omega, T, spec, policy,
                               detail::Quantifier::AllBranches, 0.0, opt);
}

inline GccReport check_boundary_gcc(const MetricField& m, const Domain& d,
                                    const CollarChart& chart, const ObservationRegion& gamma,
                                    double T, const SamplingSpec& spec = {},
                                    const BranchPolicy& policy = {}, const GccOptions& opt = {}) {
  return detail::run_gcc_check(m, d, chart, gamma, T, spec, policy,
                               detail::Quantifier::AllBranches, 0.0, opt);
}

// Weak GCC: some branch suffices; the region is dilated by region.dilation.
inline GccReport check_weak_gcc(const MetricField& m, const Domain& d, const CollarChart& chart,
                                const ObservationRegion& region, double T,
                                const SamplingSpec& spec = {}, const BranchPolicy& policy = {},
                                const GccOptions& opt = {}) {
  return detail::run_gcc_check(m, d, chart, region, T, spec, policy,
                               detail::Quantifier::SomeBranch, region.dilation, opt);
}

inline constexpr double T_GCC_INFINITE = std::numeric_limits<double>::infinity();

// Bisection for T_GCC(region) = inf { T : GCC holds at T }, to resolution dT.
inline double estimate_T_gcc(const MetricField& m, const Domain& d, const CollarChart& chart,
                             const ObservationRegion& region, double T_max, double dT = 0.025,
                             const SamplingSpec& spec = {}, const BranchPolicy& policy = {},
                             const GccOptions& opt = {}) {
  auto holds_at = [&](double T) {
    const GccReport r = region.kind == RegionKind::Interior
                            ? check_interior_gcc(m, d, chart, region, T, spec, policy, opt)
                            : check_boundary_gcc(m, d, chart, region, T, spec, policy, opt);
    return r.holds();
  };
  if (!holds_at(T_max)) return T_GCC_INFINITE;
  double lo = 0.0, hi = T_max;
  while (hi - lo > dT) {
    const double mid = 0.5 * (lo + hi);
    if (holds_at(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

struct PerturbationRow {
  double eps = 0.0;
  int trials = 0;
  int passes = 0;
  double pass_rate() const { return trials > 0 ? static_cast<double>(passes) / trials : 0.0; }
};

// Re-runs the checker at the same T for random Lipschitz perturbations of
// the metric; reports the pass rate per perturbation magnitude.
inline std::vector<PerturbationRow> perturbation_sweep(
    const MetricField& m, const Domain& d, const ObservationRegion& region, double T,
    const std::vector<double>& eps_list, int trials, std::uint64_t seed,
    const SamplingSpec& spec = {}, const BranchPolicy& policy = {}, const GccOptions& opt = {}) {
  std::vector<PerturbationRow> rows;
  for (double eps : eps_list) {
    PerturbationRow row;
    row.eps = eps;
    row.trials = trials;
    for (int t = 0; t < trials; ++t) {
      const MetricField mp =
          lipschitz_perturb(m, d, eps, seed + static_cast<std::uint64_t>(t) * 1009u);
      const CollarChart chart(d, mp, d.collar_width);
      const GccReport r = region.kind == RegionKind::Interior
                              ? check_interior_gcc(mp, d, chart, region, T, spec, policy, opt)
                              : check_boundary_gcc(mp, d, chart, region, T, spec, policy, opt);
      if (r.holds()) ++row.passes;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gcckit
