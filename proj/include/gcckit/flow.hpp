#pragma once

// Interior Hamiltonian flow, boundary event handling, and assembly of
// (possibly branching) maximal generalized bicharacteristics.
//
// Internal parameterization is the Hamiltonian parameter s, with
// t(s) = t0 - 2 tau s.  The integration direction is chosen so that
// physical time increases; samples carry both s and t.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gcckit/boundary.hpp"
#include "gcckit/collar.hpp"
#include "gcckit/geometry.hpp"

namespace gcckit {

struct TrajectorySample {
  double s = 0.0;
  PhasePoint rho;
};

enum class SegmentKind { Interior, Gliding };

struct TrajectorySegment {
  std::vector<TrajectorySample> samples;
  SegmentKind kind = SegmentKind::Interior;
  double p_drift = 0.0;  // max |p(rho(s)) - p(rho(0))|
};

struct BoundaryEvent {
  double t = 0.0;
  double sigma = 0.0;
  PhasePoint rho;  // arrival point on the boundary
  BoundaryClass cls;
};

struct Jump {
  double t = 0.0;
  PhasePoint incoming;  // zeta of the arrival branch
  PhasePoint outgoing;  // Sigma(incoming)
};

struct GeneralizedTrajectory {
  std::vector<TrajectorySegment> segments;
  std::vector<Jump> jumps;
  std::vector<BoundaryEvent> events;
  bool truncated = false;
  std::string diagnostic;

  // all samples, time ordered
  std::vector<TrajectorySample> flatten() const {
    std::vector<TrajectorySample> out;
    for (const auto& seg : segments)
      out.insert(out.end(), seg.samples.begin(), seg.samples.end());
    return out;
  }
};

enum class GlancingRule { BothContinuations, GlidingFirst, InteriorFirst };

struct BranchPolicy {
  int n_branches = 1;
  double jitter = 0.0;
  GlancingRule glancing_rule = GlancingRule::GlidingFirst;
  std::uint64_t rng_seed = 0;
  int max_events = 4096;
};

struct IntegrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// state layout: (t, x..., tau, xi...)
template <int N>
using State = std::array<double, N>;

inline PhasePoint unpack(const std::array<double, 6>& y, int dim) {
  PhasePoint r;
  r.t = y[0];
  r.x = Vec(dim, y[1], dim > 1 ? y[2] : 0.0);
  r.tau = y[3];
  r.xi = Vec(dim, y[4], dim > 1 ? y[5] : 0.0);
  return r;
}

inline std::array<double, 6> pack(const PhasePoint& rho, int dim) {
  return {rho.t, rho.x[0], dim > 1 ? rho.x[1] : 0.0, rho.tau, rho.xi[0],
          dim > 1 ? rho.xi[1] : 0.0};
}

inline std::array<double, 6> field_eval(const MetricField& m, const std::array<double, 6>& y,
                                        double dir) {
  const PhasePoint rho = unpack(y, m.dim);
  const PhaseTangent v = hamiltonian_field(m, rho);
  return {dir * v.dt, dir * v.dx[0], m.dim > 1 ? dir * v.dx[1] : 0.0, dir * v.dtau,
          dir * v.dxi[0], m.dim > 1 ? dir * v.dxi[1] : 0.0};
}

inline std::array<double, 6> rk4_step(const MetricField& m, const std::array<double, 6>& y,
                                      double h, double dir) {
  auto add = [](const std::array<double, 6>& a, const std::array<double, 6>& b, double c) {
    std::array<double, 6> r;
    for (int i = 0; i < 6; ++i) r[static_cast<std::size_t>(i)] =
        a[static_cast<std::size_t>(i)] + c * b[static_cast<std::size_t>(i)];
    return r;
  };
  const auto k1 = field_eval(m, y, dir);
  const auto k2 = field_eval(m, add(y, k1, h / 2), dir);
  const auto k3 = field_eval(m, add(y, k2, h / 2), dir);
  const auto k4 = field_eval(m, add(y, k3, h), dir);
  std::array<double, 6> out;
  for (int i = 0; i < 6; ++i) {
    const auto u = static_cast<std::size_t>(i);
    out[u] = y[u] + h / 6.0 * (k1[u] + 2 * k2[u] + 2 * k3[u] + k4[u]);
  }
  return out;
}

// project xi so that p = 0, preserving its direction (tau untouched)
inline void project_shell(const MetricField& m, PhasePoint& rho) {
  const double q = m.g_inv(rho.x).quad(rho.xi);
  if (q <= 0.0) return;
  const double scale = std::abs(rho.tau) / std::sqrt(q);
  rho.xi = rho.xi * scale;
}

}  // namespace detail

struct FlowOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  double max_ds = 0.025;
  double tol_event = 1e-11;  // on |phi| at located boundary events
};

struct InteriorFlowResult {
  TrajectorySegment segment;
  bool hit_boundary = false;
  bool step_underflow = false;
};

// Adaptive RK45 (Dormand-Prince) integration of dir * H_p from s = 0 to
// s = s_len (s_len > 0), with per-step projection onto {p = 0} and boundary
// event location by bisection on phi.
inline InteriorFlowResult flow_interior(const MetricField& m, const Domain& dom,
                                        const PhasePoint& rho0, double s_len, double dir = 1.0,
                                        const FlowOptions& opt = {}) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2; (void)c3; (void)c4; (void)c5;

  InteriorFlowResult res;
  TrajectorySegment& seg = res.segment;
  seg.kind = SegmentKind::Interior;

  const double p0 = wave_symbol(m, rho0);
  PhasePoint rho = rho0;
  double s = 0.0;
  double h = std::min(opt.max_ds, s_len);
  seg.samples.push_back({s, rho});

  auto axpy = [](const std::array<double, 6>& y, std::initializer_list<std::pair<double, const std::array<double, 6>*>> terms, double h) {
    std::array<double, 6> r = y;
    for (const auto& [c, k] : terms)
      for (int i = 0; i < 6; ++i)
        r[static_cast<std::size_t>(i)] += h * c * (*k)[static_cast<std::size_t>(i)];
    return r;
  };

  while (s < s_len) {
    h = std::min(h, s_len - s);
    if (h < 1e-14) break;

    const auto y = detail::pack(rho, m.dim);
    const auto k1 = detail::field_eval(m, y, dir);
    const auto k2 = detail::field_eval(m, axpy(y, {{a21, &k1}}, h), dir);
    const auto k3 = detail::field_eval(m, axpy(y, {{a31, &k1}, {a32, &k2}}, h), dir);
    const auto k4 = detail::field_eval(m, axpy(y, {{a41, &k1}, {a42, &k2}, {a43, &k3}}, h), dir);
    const auto k5 =
        detail::field_eval(m, axpy(y, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, h), dir);
    const auto k6 = detail::field_eval(
        m, axpy(y, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, h), dir);
    const auto y5 = axpy(y, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}}, h);
    const auto k7 = detail::field_eval(m, y5, dir);

    double err = 0.0, scale_norm = 0.0;
    for (int i = 0; i < 6; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const double e = h * (e1 * k1[u] + e3 * k3[u] + e4 * k4[u] + e5 * k5[u] + e6 * k6[u] +
                            e7 * k7[u]);
      const double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(y[u]), std::abs(y5[u]));
      err += (e / sc) * (e / sc);
      scale_norm += 1.0;
    }
    err = std::sqrt(err / scale_norm);

    if (err > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      if (h < 1e-14) {
        res.step_underflow = true;
        break;
      }
      continue;
    }

    PhasePoint next = detail::unpack(y5, m.dim);
    detail::project_shell(m, next);

    if (dom.phi(next.x) < 0.0) {
      // boundary crossing inside this step; bisect the step fraction
      double lo = 0.0, hi = 1.0;
      double frac = 0.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        auto ym = detail::rk4_step(m, y, h * mid, dir);
        PhasePoint pm = detail::unpack(ym, m.dim);
        detail::project_shell(m, pm);
        const double ph = dom.phi(pm.x);
        if (std::abs(ph) <= opt.tol_event) {
          frac = mid;
          break;
        }
        if (ph < 0.0)
          hi = mid;
        else
          lo = mid;
        frac = lo;  // land on the inside of the bracket
      }
      auto yl = detail::rk4_step(m, y, h * frac, dir);
      PhasePoint pl = detail::unpack(yl, m.dim);
      detail::project_shell(m, pl);
      s += h * frac;
      seg.samples.push_back({s, pl});
      seg.p_drift = std::max(seg.p_drift, std::abs(wave_symbol(m, pl) - p0));
      res.hit_boundary = true;
      break;
    }

    s += h;
    rho = next;
    seg.samples.push_back({s, rho});
    seg.p_drift = std::max(seg.p_drift, std::abs(wave_symbol(m, rho) - p0));
    h = std::min(opt.max_ds, h * std::min(5.0, 0.9 * std::pow(std::max(err, 1e-10), -0.2)));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Generalized bicharacteristics.

inline PhasePoint nudge_inside(const MetricField& m, const Domain& dom, const PhasePoint& rho,
                               double dir);
inline void constrain_to_glancing(const CollarChart& chart, PhasePoint& rho);

namespace detail {

struct BranchState {
  PhasePoint rho;
  GeneralizedTrajectory traj;
  std::mt19937_64 rng;
  bool gliding = false;
  bool done = false;
};

// snap a near-boundary point exactly onto {z = 0} in the chart
inline PhasePoint snap_to_boundary(const CollarChart& chart, const PhasePoint& rho) {
  ChartPoint c = chart.to_chart(rho);
  c.z = 0.0;
  return chart.from_chart(c);
}

}  // namespace detail

inline void glide(const MetricField& m, const CollarChart& chart, detail::BranchState& br,
                  double t_end, double dir, const FlowOptions& opt);

// Advance a maximal generalized bicharacteristic through [t0, t0 + t_len]
// with physical time increasing.  Branching happens at order-3 glancing
// contacts and, when jitter > 0, at every boundary event for the branches
// beyond the first.
inline std::vector<GeneralizedTrajectory> advance_generalized(
    const MetricField& m, const CollarChart& chart, const PhasePoint& rho0, double t_len,
    const BranchPolicy& policy = {}, const FlowOptions& opt = {}) {
  const Domain& dom = chart.domain();
  const double tau = rho0.tau;
  if (std::abs(tau) < 1e-14)
    throw IntegrationError("advance_generalized: tau = 0 is not characteristic here");
  const double dir = tau > 0.0 ? -1.0 : 1.0;  // choose ds sign so dt > 0
  const double t_end = rho0.t + t_len;

  std::vector<detail::BranchState> branches;
  for (int b = 0; b < std::max(1, policy.n_branches); ++b) {
    detail::BranchState st;
    st.rho = rho0;
    st.rng.seed(policy.rng_seed + static_cast<std::uint64_t>(b) * 0x9E3779B97F4A7C15ull);
    branches.push_back(std::move(st));
  }

  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  for (std::size_t bi = 0; bi < branches.size(); ++bi) {
    auto& br = branches[bi];
    const bool jittered = policy.jitter > 0.0 && bi > 0;
    int events = 0;

    while (!br.done) {
      if (br.rho.t >= t_end - 1e-12) break;
      if (events > policy.max_events) {
        br.traj.truncated = true;
        br.traj.diagnostic = "max_events exceeded";
        break;
      }

      if (!br.gliding) {
        const double s_remaining = (t_end - br.rho.t) / (2.0 * std::abs(tau));
        auto res = flow_interior(m, dom, br.rho, s_remaining, dir, opt);
        // rebase sample parameters onto the trajectory's own clock
        const double s_base =
            br.traj.segments.empty() ? 0.0
                                     : br.traj.segments.back().samples.back().s;
        for (auto& sm : res.segment.samples) sm.s += s_base;
        br.traj.segments.push_back(std::move(res.segment));
        br.rho = br.traj.segments.back().samples.back().rho;

        if (res.step_underflow) {
          br.traj.truncated = true;
          br.traj.diagnostic = "step-size underflow";
          break;
        }
        if (!res.hit_boundary) break;  // reached t_end

        // ------ boundary event ------
        ++events;
        PhasePoint hit = detail::snap_to_boundary(chart, br.rho);
        BoundaryClass cls = classify(chart, hit, 1e30 /* already snapped */);
        BoundaryEvent ev;
        ev.t = hit.t;
        ev.sigma = chart.to_chart(hit).sigma;
        ev.rho = hit;
        ev.cls = cls;
        br.traj.events.push_back(ev);

        switch (cls.tag) {
          case BoundaryTag::HyperbolicPlus:
          case BoundaryTag::HyperbolicMinus: {
            PhasePoint out = reflect(chart, hit);
            // at a corner-degenerate boundary point the chart Jacobian is
            // kinked and the reflected covector can leave the shell; project
            // it back (a no-op, bit for bit, at regular reflections)
            const double scale = hit.tau * hit.tau + hit.xi.dot(hit.xi);
            if (std::abs(wave_symbol(m, out)) > 1e-10 * scale) detail::project_shell(m, out);
            Jump j;
            j.t = hit.t;
            j.incoming = hit;
            j.outgoing = out;
            br.traj.jumps.push_back(j);
            if (jittered) {
              // non-unique continuation probe: tiny rotation of xi
              const double a = policy.jitter * unif(br.rng);
              if (m.dim == 2) {
                const double ca = std::cos(a), sa = std::sin(a);
                out.xi = Vec(2, ca * out.xi[0] - sa * out.xi[1],
                             sa * out.xi[0] + ca * out.xi[1]);
              }
              detail::project_shell(m, out);
            }
            // leave the boundary before resuming interior integration
            br.rho = nudge_inside(m, dom, out, dir);
            break;
          }
          case BoundaryTag::GlancingDiffractive: {
            // order-two contact: the ray continues through the glancing point
            ChartPoint c = chart.to_chart(hit);
            c.zeta = 0.0;
            br.rho = nudge_inside(m, dom, chart.from_chart(c), dir);
            break;
          }
          case BoundaryTag::GlancingGliding: {
            br.gliding = true;
            ChartPoint c = chart.to_chart(hit);
            c.zeta = 0.0;
            br.rho = chart.from_chart(c);
            break;
          }
          case BoundaryTag::GlancingOrder3: {
            const bool glide_first = policy.glancing_rule != GlancingRule::InteriorFirst;
            if (policy.glancing_rule == GlancingRule::BothContinuations &&
                static_cast<int>(branches.size()) < policy.n_branches) {
              detail::BranchState alt;
              ChartPoint c = chart.to_chart(hit);
              c.zeta = 0.0;
              alt.rho = glide_first ? nudge_inside(m, dom, chart.from_chart(c), dir)
                                    : chart.from_chart(c);
              alt.gliding = !glide_first;
              alt.traj = br.traj;
              alt.rng.seed(policy.rng_seed +
                           static_cast<std::uint64_t>(branches.size()) * 0x9E3779B97F4A7C15ull);
              branches.push_back(std::move(alt));
            }
            ChartPoint c = chart.to_chart(hit);
            c.zeta = 0.0;
            if (glide_first) {
              br.gliding = true;
              br.rho = chart.from_chart(c);
            } else {
              br.rho = nudge_inside(m, dom, chart.from_chart(c), dir);
            }
            break;
          }
          case BoundaryTag::Elliptic: {
            br.traj.truncated = true;
            br.traj.diagnostic = "elliptic boundary contact (non-characteristic data?)";
            br.done = true;
            break;
          }
        }
      } else {
        // ------ gliding arc ------
        glide(m, chart, br, t_end, dir, opt);
        br.gliding = false;
      }
    }
  }

  std::vector<GeneralizedTrajectory> out;
  out.reserve(branches.size());
  for (auto& b : branches) out.push_back(std::move(b.traj));
  return out;
}

// Move a boundary point slightly into the interior along its own flow so
// that event detection does not immediately retrigger.
inline PhasePoint nudge_inside(const MetricField& m, const Domain& dom, const PhasePoint& rho,
                               double dir) {
  PhasePoint r = rho;
  double eps = 1e-10;
  for (int it = 0; it < 40 && dom.phi(r.x) <= 0.0; ++it) {
    const PhaseTangent v = hamiltonian_field(m, rho);
    r.x = rho.x + v.dx * (dir * eps);
    r.xi = rho.xi + v.dxi * (dir * eps);
    r.t = rho.t + v.dt * dir * eps;
    eps *= 4.0;
  }
  return r;
}

// Integrate the gliding field constrained to {z = zeta = 0} until the
// diffractive release condition H_p^2 z > eps_d.
inline void glide(const MetricField& m, const CollarChart& chart, detail::BranchState& br,
                  double t_end, double dir, const FlowOptions& opt) {
  TrajectorySegment seg;
  seg.kind = SegmentKind::Gliding;
  const double ds = 0.5 * opt.max_ds;
  const double s_base = br.traj.segments.empty() ? 0.0 : br.traj.segments.back().samples.back().s;
  double s = 0.0;
  PhasePoint rho = br.rho;
  seg.samples.push_back({s_base, rho});

  while (rho.t < t_end - 1e-12) {
    if (hp2_z(chart, rho) > tol::d_abs) break;  // release into the interior
    // midpoint step of the gliding field
    const PhaseTangent v1 = gliding_field(chart, rho);
    PhasePoint half = rho;
    half.t += dir * 0.5 * ds * v1.dt;
    half.x = rho.x + v1.dx * (dir * 0.5 * ds);
    half.xi = rho.xi + v1.dxi * (dir * 0.5 * ds);
    constrain_to_glancing(chart, half);
    const PhaseTangent v2 = gliding_field(chart, half);
    rho.t += dir * ds * v2.dt;
    rho.x = rho.x + v2.dx * (dir * ds);
    rho.xi = rho.xi + v2.dxi * (dir * ds);
    constrain_to_glancing(chart, rho);
    s += ds;
    seg.samples.push_back({s_base + s, rho});
  }
  seg.p_drift = 0.0;
  br.traj.segments.push_back(std::move(seg));
  br.rho = nudge_inside(m, chart.domain(), rho, dir);
}

// Project a phase point onto {z = 0, zeta = 0, p = 0} in the chart.
inline void constrain_to_glancing(const CollarChart& chart, PhasePoint& rho) {
  ChartPoint c = chart.to_chart(rho);
  c.z = 0.0;
  c.zeta = 0.0;
  if (chart.domain().dim == 2) {
    const Mat G = chart.metric_in_chart(c.sigma, 0.0);
    const double target = std::abs(c.tau) * std::sqrt(G(0, 0));
    if (std::abs(c.xi_t) > 1e-300) c.xi_t = (c.xi_t > 0 ? target : -target);
  }
  rho = chart.from_chart(c);
}

// ---------------------------------------------------------------------------
// Reach tube Gamma^T(rho0): union of all sampled branch points within the
// time window, with a nearest-sample distance query.

struct ReachTube {
  std::vector<PhasePoint> points;

  // distance in (t, x, xi/|xi|) with unit weights
  double dist(const PhasePoint& rho) const {
    double best = 1e300;
    const double qn = std::max(rho.xi.norm(), 1e-300);
    for (const auto& p : points) {
      const double pn = std::max(p.xi.norm(), 1e-300);
      double d2 = (rho.t - p.t) * (rho.t - p.t);
      for (int k = 0; k < rho.x.dim; ++k) {
        const double dx = rho.x[k] - p.x[k];
        const double dxi = rho.xi[k] / qn - p.xi[k] / pn;
        d2 += dx * dx + dxi * dxi;
      }
      best = std::min(best, d2);
    }
    return std::sqrt(best);
  }

  // spatial-only distance ignoring frequency
  double dist_txi(double t, const Vec& x) const {
    double best = 1e300;
    for (const auto& p : points) {
      double d2 = (t - p.t) * (t - p.t);
      for (int k = 0; k < x.dim; ++k) d2 += (x[k] - p.x[k]) * (x[k] - p.x[k]);
      best = std::min(best, d2);
    }
    return std::sqrt(best);
  }
};

inline ReachTube reach_tube(const MetricField& m, const CollarChart& chart,
                            const PhasePoint& rho0, double T, const BranchPolicy& policy = {},
                            const FlowOptions& opt = {}) {
  ReachTube tube;
  auto trajs = advance_generalized(m, chart, rho0, T, policy, opt);
  for (const auto& tr : trajs)
    for (const auto& sm : tr.flatten())
      if (std::abs(sm.rho.t - rho0.t) <= T) tube.points.push_back(sm.rho);
  return tube;
}

}  // namespace gcckit
