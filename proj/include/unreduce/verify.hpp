#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "unreduce/analysis.hpp"
#include "unreduce/core.hpp"
#include "unreduce/integrate.hpp"
#include "unreduce/lagrangian.hpp"
#include "unreduce/systems.hpp"

namespace unreduce {

/// Result of one registered property check. `pass` is always equivalent to
/// max_residual <= tolerance.
///
/// Guard checks (ids prefixed "guard-") run the same machinery on a fixture
/// with a deliberately seeded defect and report the shortfall
/// max(0, required_detection - observed), so a passing guard means the
/// defect was detected with the required margin. They keep the suite from
/// passing vacuously.
struct CheckReport {
  std::string check_id;
  std::string system_id;
  int samples_used = 0;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  Vec worst_state;
  unsigned seed = 0;
  double h = 0.0;
  std::string note;
};

struct CheckParams {
  int n_samples = 100;
  int n_trajectories = 20;
  unsigned seed = 2024;
  double h = 1e-3;
  double fd_step = kDefaultFdStep;
};

[[nodiscard]] inline nlohmann::json report_json(const CheckReport& r) {
  nlohmann::json j;
  j["check_id"] = r.check_id;
  j["system_id"] = r.system_id;
  j["pass"] = r.pass;
  j["max_residual"] = r.max_residual;
  j["tolerance"] = r.tolerance;
  j["seed"] = r.seed;
  j["h"] = r.h;
  std::vector<double> ws(r.worst_state.data(), r.worst_state.data() + r.worst_state.size());
  j["worst_state"] = ws;
  return j;
}

namespace checks {

inline void track_worst(CheckReport& rep, double r, const QuasiState& s) {
  if (r >= rep.max_residual) {
    rep.max_residual = r;
    rep.worst_state = s.flatten();
  }
}

/// Field-level projection relation: splitting the coordinate velocity of the
/// field through the frame returns the base quasi-velocities, and the base
/// force equals the declared base field at the projected state.
inline CheckReport projection_commutation(const SystemBundle& sys, const TotalSODE& sode,
                                          const CheckParams& p) {
  CheckReport rep{.check_id = "projection-commutation",
                  .system_id = sys.id,
                  .tolerance = 1e-12,
                  .seed = p.seed};
  Rng rng(p.seed);
  for (int i = 0; i < p.n_samples; ++i) {
    QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
    StateDeriv d = eval_sode(sode, s);
    double r = 0.0;
    if (sys.chart->base_dim > 0) {
      QuasiState split = coords_to_quasi(*sys.chart, s.x, d.xdot);
      r = (split.v_base - s.v_base).cwiseAbs().maxCoeff();
      Vec f = sys.base_sode.force(sys.chart->projection(s.x), s.v_base);
      r = std::max(r, (d.vdot_base - f).cwiseAbs().maxCoeff());
    }
    track_worst(rep, r, s);
  }
  rep.samples_used = p.n_samples;
  return rep;
}

/// Differential of the projection along the field, by central differences,
/// against the base quasi-velocities. Cross-checks that the horizontal frame
/// columns really lift the base coordinate fields.
inline CheckReport projection_differential(const SystemBundle& sys, const CheckParams& p) {
  CheckReport rep{.check_id = "projection-differential",
                  .system_id = sys.id,
                  .tolerance = 1e-6,
                  .seed = p.seed};
  Rng rng(p.seed);
  const double eps = p.fd_step;
  for (int i = 0; i < p.n_samples; ++i) {
    QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
    StateDeriv d = eval_sode(sys.primary, s);
    double r = 0.0;
    if (sys.chart->base_dim > 0) {
      Vec dp = (sys.chart->projection(s.x + eps * d.xdot) -
                sys.chart->projection(s.x - eps * d.xdot)) /
               (2.0 * eps);
      r = (dp - s.v_base).cwiseAbs().maxCoeff();
    }
    track_worst(rep, r, s);
  }
  rep.samples_used = p.n_samples;
  return rep;
}

inline CheckReport sode_condition(const SystemBundle& sys, const TotalSODE& sode,
                                  const std::string& label, const CheckParams& p) {
  CheckReport rep{.check_id = "sode-condition",
                  .system_id = sys.id + (label.empty() ? "" : "/" + label),
                  .tolerance = 1e-12,
                  .seed = p.seed};
  QuasiState worst;
  rep.max_residual =
      sode_condition_check(*sode.chart, as_flow_field(sode), sys.default_box, p.n_samples,
                           p.seed, &worst);
  rep.worst_state = worst.flatten();
  rep.samples_used = p.n_samples;
  return rep;
}

/// Integrates the primary field from connection-horizontal initial data and
/// measures the worst vertical quasi-velocity along the runs (exact zeros are
/// expected; the vertical force of a primary field vanishes identically) plus
/// the vertical part of re-splitting the coordinate velocity.
inline CheckReport horizontal_lift(const SystemBundle& sys, const CheckParams& p) {
  CheckReport rep{.check_id = "horizontal-lift",
                  .system_id = sys.id,
                  .tolerance = 1e-10,
                  .seed = p.seed,
                  .h = p.h};
  Rng rng(p.seed);
  for (int i = 0; i < p.n_trajectories; ++i) {
    QuasiState s0 = sample_state(*sys.chart, sys.default_box, rng);
    s0 = horizontal_lift_ic(*sys.chart, s0.x, s0.v_base);
    Trajectory traj = integrate(sys.primary, s0, sys.check_horizon, p.h);
    double r = 0.0;
    for (const auto& s : traj.states) {
      if (s.v_vert.size() > 0) r = std::max(r, s.v_vert.cwiseAbs().maxCoeff());
    }
    // spot-check the velocity split at a few states
    for (size_t j = 0; j < traj.states.size(); j += std::max<size_t>(1, traj.states.size() / 8)) {
      const auto& s = traj.states[j];
      Vec xdot = quasi_to_coords(*sys.chart, s);
      QuasiState split = coords_to_quasi(*sys.chart, s.x, xdot);
      if (split.v_vert.size() > 0) {
        r = std::max(r, split.v_vert.cwiseAbs().maxCoeff());
      }
    }
    track_worst(rep, r, s0);
  }
  rep.samples_used = p.n_trajectories;
  return rep;
}

/// Drift of the vertical momentum B_{ab} v^b along a field whose vertical
/// force vanishes in this frame (conservation is then exact per step).
inline CheckReport momentum(const SystemBundle& sys, const TotalSODE& sode,
                            const std::string& label, const CheckParams& p) {
  CheckReport rep{.check_id = "momentum-conservation",
                  .system_id = sys.id + (label.empty() ? "" : "/" + label),
                  .tolerance = 1e-10,
                  .seed = p.seed,
                  .h = p.h};
  const int k = sode.chart->fiber_dim();
  Mat B = Mat::Identity(k, k);
  if (sode.chart == sys.chart && sys.lagrangian && sys.lagrangian->vertical_form) {
    B = *sys.lagrangian->vertical_form;
  }
  Rng rng(p.seed);
  for (int i = 0; i < p.n_trajectories; ++i) {
    QuasiState s0 = sample_state(*sode.chart, sys.default_box, rng);
    Trajectory traj = integrate(sode, s0, sys.check_horizon, p.h);
    Vec m0 = B * s0.v_vert;
    double r = 0.0;
    for (const auto& s : traj.states) {
      if (k > 0) r = std::max(r, (Mat(B) * s.v_vert - m0).cwiseAbs().maxCoeff());
    }
    track_worst(rep, r, s0);
  }
  rep.samples_used = p.n_trajectories;
  return rep;
}

/// Projects runs of the given field started with zero vertical momentum and
/// compares them with base runs from the projected data.
inline CheckReport zero_momentum_shooting(const SystemBundle& sys, const TotalSODE& sode,
                                          const CheckParams& p) {
  CheckReport rep{.check_id = "zero-momentum-shooting",
                  .system_id = sys.id,
                  .tolerance = 1e-7,
                  .seed = p.seed,
                  .h = p.h};
  Rng rng(p.seed);
  for (int i = 0; i < p.n_trajectories; ++i) {
    QuasiState s0 = sample_state(*sys.chart, sys.default_box, rng);
    s0 = horizontal_lift_ic(*sys.chart, s0.x, s0.v_base);
    ProjectionCompare cmp = compare_projection(sys, sode, s0, sys.check_horizon, p.h);
    track_worst(rep, cmp.max_err, s0);
  }
  rep.samples_used = p.n_trajectories;
  return rep;
}

/// The gap between the invariant-metric spray and the primary un-reduction
/// must equal the curvature distortion force, state by state.
inline CheckReport field_identity(const SystemBundle& sys, const CheckParams& p) {
  CheckReport rep{.check_id = "field-identity",
                  .system_id = sys.id,
                  .tolerance = 1e-12,
                  .seed = p.seed};
  const TotalSODE& spray = sys.extras.at("wong_spray");
  const auto& lag = *sys.lagrangian;
  Rng rng(p.seed);
  for (int i = 0; i < p.n_samples; ++i) {
    QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
    StateDeriv dg = eval_sode(spray, s);
    StateDeriv d1 = eval_sode(sys.primary, s);
    Vec A = curvature_distortion(*sys.chart, lag.base_metric, *lag.vertical_form, s);
    double r = (dg.vdot_base - d1.vdot_base - A).cwiseAbs().maxCoeff();
    r = std::max(r, (dg.vdot_vert - d1.vdot_vert).cwiseAbs().maxCoeff());
    r = std::max(r, (dg.xdot - d1.xdot).cwiseAbs().maxCoeff());
    track_worst(rep, r, s);
  }
  rep.samples_used = p.n_samples;
  return rep;
}

inline CheckReport curvature_fd(const SystemBundle& sys, const CheckParams& p) {
  CheckReport rep{.check_id = "curvature-fd",
                  .system_id = sys.id,
                  .tolerance = 1e-8,
                  .seed = p.seed};
  Rng rng(p.seed);
  for (int i = 0; i < p.n_samples; ++i) {
    QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
    track_worst(rep, verify_curvature(*sys.chart, s.x, p.fd_step), s);
  }
  rep.samples_used = p.n_samples;
  return rep;
}

inline CheckReport el_residual(const SystemBundle& sys, const CheckParams& p) {
  CheckReport rep{.check_id = "el-residual",
                  .system_id = sys.id,
                  .tolerance = 1e-6,
                  .seed = p.seed};
  Rng rng(p.seed);
  for (int i = 0; i < p.n_samples; ++i) {
    QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
    Vec r = lagrangian_residual(sys.primary, *sys.lagrangian, s);
    track_worst(rep, r.size() > 0 ? r.cwiseAbs().maxCoeff() : 0.0, s);
  }
  rep.samples_used = p.n_samples;
  return rep;
}

/// The variational residual reads only the base force, so adding any
/// vertical force leaves it unchanged; report the worst difference.
inline CheckReport el_residual_vertical_invariance(const SystemBundle& sys,
                                                   const CheckParams& p) {
  CheckReport rep{.check_id = "el-residual-vertical-invariance",
                  .system_id = sys.id,
                  .tolerance = 1e-13,
                  .seed = p.seed};
  const int k = sys.chart->fiber_dim();
  TotalSODE g2 = gamma2(sys.primary, [k](const QuasiState& s) {
    return Vec::Constant(k, 0.4 * std::sin(s.x[0]));
  });
  Rng rng(p.seed);
  for (int i = 0; i < p.n_samples; ++i) {
    QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
    Vec r1 = lagrangian_residual(sys.primary, *sys.lagrangian, s);
    Vec r2 = lagrangian_residual(g2, *sys.lagrangian, s);
    track_worst(rep, r1.size() > 0 ? (r1 - r2).cwiseAbs().maxCoeff() : 0.0, s);
  }
  rep.samples_used = p.n_samples;
  return rep;
}

inline CheckReport submersive(const SystemBundle& sys, const TotalSODE& sode,
                              const std::string& label, bool invariance_only,
                              const CheckParams& p) {
  CheckReport rep{.check_id = invariance_only ? "submersive-invariance" : "submersive",
                  .system_id = sys.id + (label.empty() ? "" : "/" + label),
                  .tolerance = 1e-8,
                  .seed = p.seed};
  SubmersiveReport sub = submersive_check(sode, sys.default_box, p.n_samples, p.seed, p.fd_step);
  rep.max_residual = invariance_only ? sub.invariance_residual : sub.max_residual();
  rep.worst_state = sub.worst_state.flatten();
  rep.samples_used = p.n_samples;
  if (invariance_only) {
    rep.note = "vertical-independence residual " +
               fmt_double(sub.vertical_independence_residual) + " (not gated; see docs)";
  }
  return rep;
}

/// Canonical spray runs must follow one-parameter subgroups: compare the
/// integrated chart curve, mapped to matrices, against g0 exp(t xi).
inline CheckReport canonical_exp(const SystemBundle& sys, const CheckParams& p) {
  CheckReport rep{.check_id = "canonical-exp",
                  .system_id = sys.id,
                  .tolerance = 1e-9,
                  .seed = p.seed,
                  .h = p.h};
  const double pi = std::numbers::pi;
  QuasiState s0;
  s0.x = Vec{{0.4, 1.2, -0.7}};
  s0.v_base = Vec(0);
  s0.v_vert = Vec{{0.25, -0.2, 0.9}};
  Trajectory traj = integrate(sys.primary, s0, pi / 2.0, p.h);
  if (!traj.complete()) {
    throw domain_error("canonical-exp: run left the chart domain: " +
                       traj.domain_exit->message);
  }
  Mat R0 = so3detail::euler_to_matrix(s0.x);
  Mat xi = groups::hat3(s0.v_vert);
  double r = 0.0;
  for (size_t i = 0; i < traj.times.size(); ++i) {
    Mat expected = R0 * expm(traj.times[i] * xi);
    Mat got = so3detail::euler_to_matrix(traj.states[i].x);
    r = std::max(r, (got - expected).cwiseAbs().maxCoeff());
  }
  rep.max_residual = r;
  rep.worst_state = s0.flatten();
  rep.samples_used = static_cast<int>(traj.times.size());
  return rep;
}

/// Horizontal-lift run of the matrix system from the identity: the projected
/// coordinate must follow e^t.
inline CheckReport det_exp(const SystemBundle& sys, const CheckParams& p) {
  CheckReport rep{.check_id = "det-exp",
                  .system_id = sys.id,
                  .tolerance = 1e-8,
                  .seed = p.seed,
                  .h = p.h};
  const int nn = static_cast<int>(std::lround(std::sqrt(double(sys.chart->dim()))));
  QuasiState s0 = horizontal_lift_ic(*sys.chart, detail::flatten_rm(Mat::Identity(nn, nn)),
                                     Vec::Constant(1, 1.0));
  Trajectory traj = integrate(sys.primary, s0, 1.0, p.h);
  double r = 0.0;
  for (size_t i = 0; i < traj.times.size(); ++i) {
    double det = sys.chart->projection(traj.states[i].x)[0];
    r = std::max(r, std::abs(det - std::exp(traj.times[i])));
  }
  rep.max_residual = r;
  rep.worst_state = s0.flatten();
  rep.samples_used = static_cast<int>(traj.times.size());
  return rep;
}

inline double shortfall(double required, double observed) {
  return std::max(0.0, required - observed);
}

/// Nonzero vertical momentum must push the projected invariant-metric spray
/// off the base dynamics; reports the shortfall of the deviation at t = 1.
inline CheckReport shooting_momentum_deviates(const SystemBundle& sys, const CheckParams& p) {
  CheckReport rep{.check_id = "shooting-momentum-deviates",
                  .system_id = sys.id,
                  .tolerance = 0.0,
                  .seed = p.seed,
                  .h = p.h};
  const TotalSODE& spray = sys.extras.at("wong_spray");
  QuasiState s0;
  s0.x = Vec{{0.0, std::numbers::pi / 3.0, 0.0}};
  s0.v_base = Vec{{0.3, 0.9}};
  s0.v_vert = Vec{{1.0}};
  ProjectionCompare cmp = compare_projection(sys, spray, s0, 1.0, p.h);
  rep.max_residual = shortfall(1e-3, cmp.max_err);
  rep.note = "projected deviation at nonzero momentum: " + fmt_double(cmp.max_err);
  rep.worst_state = s0.flatten();
  rep.samples_used = 1;
  return rep;
}

// ---- guard checks: seeded defects that must be detected ----

inline CheckReport guard_projection_commutation(const SystemBundle& sys, const CheckParams& p) {
  TotalSODE broken = sys.primary;
  auto orig = sys.primary.force_base;
  broken.force_base = [orig](const QuasiState& s) {
    return Vec((orig(s).array() + 0.1).matrix());
  };
  CheckReport inner = projection_commutation(sys, broken, p);
  CheckReport rep{.check_id = "guard-projection-commutation",
                  .system_id = sys.id,
                  .samples_used = inner.samples_used,
                  .tolerance = 0.0,
                  .seed = p.seed};
  rep.max_residual = shortfall(1e-3, inner.max_residual);
  rep.worst_state = inner.worst_state;
  rep.note = "perturbed base force detected with residual " + fmt_double(inner.max_residual);
  return rep;
}

/// Horizontal lift of the base field without the vertical correction: its
/// generator-lift coefficients are zero instead of v_vert, so the
/// second-order condition must flag it.
inline CheckReport guard_sode_condition(const SystemBundle& sys, const CheckParams& p) {
  auto chart = sys.chart;
  auto base_force = sys.primary.force_base;
  FlowField lift_only = [chart, base_force](const QuasiState& s) {
    StateDeriv d;
    QuasiState horizontal = s;
    horizontal.v_vert.setZero();
    d.xdot = chart->frame(s.x) * horizontal.quasi_velocity();
    d.vdot_base = base_force(s);
    d.vdot_vert = Vec::Zero(chart->fiber_dim());
    return d;
  };
  QuasiState worst;
  double dev = sode_condition_check(*chart, lift_only, sys.default_box, p.n_samples, p.seed,
                                    &worst);
  CheckReport rep{.check_id = "guard-sode-condition",
                  .system_id = sys.id,
                  .samples_used = p.n_samples,
                  .tolerance = 0.0,
                  .seed = p.seed};
  rep.max_residual = shortfall(1e-3, dev);
  rep.worst_state = worst.flatten();
  rep.note = "dropped vertical correction detected with deviation " + fmt_double(dev);
  return rep;
}

inline CheckReport guard_momentum(const SystemBundle& sys, const CheckParams& p) {
  TotalSODE broken = sys.extras.at("wong_spray");
  const int k = sys.chart->fiber_dim();
  broken.force_vert = [k](const QuasiState&) { return Vec::Constant(k, 0.1); };
  CheckReport inner = momentum(sys, broken, "broken", p);
  CheckReport rep{.check_id = "guard-momentum",
                  .system_id = sys.id,
                  .samples_used = inner.samples_used,
                  .tolerance = 0.0,
                  .seed = p.seed,
                  .h = p.h};
  rep.max_residual = shortfall(1e-3, inner.max_residual);
  rep.worst_state = inner.worst_state;
  rep.note = "vertical force leak detected with drift " + fmt_double(inner.max_residual);
  return rep;
}

inline CheckReport guard_horizontal_lift(const SystemBundle& sys, const CheckParams& p) {
  const int k = sys.chart->fiber_dim();
  TotalSODE g2 = gamma2(sys.primary, [k](const QuasiState&) { return Vec::Constant(k, 0.25); });
  Rng rng(p.seed);
  double worst = 0.0;
  QuasiState worst_ic;
  for (int i = 0; i < p.n_trajectories; ++i) {
    QuasiState s0 = sample_state(*sys.chart, sys.default_box, rng);
    s0 = horizontal_lift_ic(*sys.chart, s0.x, s0.v_base);
    Trajectory traj = integrate(g2, s0, sys.check_horizon, p.h);
    for (const auto& s : traj.states) {
      if (s.v_vert.size() > 0 && s.v_vert.cwiseAbs().maxCoeff() >= worst) {
        worst = s.v_vert.cwiseAbs().maxCoeff();
        worst_ic = s0;
      }
    }
  }
  CheckReport rep{.check_id = "guard-horizontal-lift",
                  .system_id = sys.id,
                  .samples_used = p.n_trajectories,
                  .tolerance = 0.0,
                  .seed = p.seed,
                  .h = p.h};
  rep.max_residual = shortfall(1e-3, worst);
  rep.worst_state = worst_ic.flatten();
  rep.note = "nonzero vertical force detected: vertical velocity grew to " + fmt_double(worst);
  return rep;
}

inline CheckReport guard_field_identity(const SystemBundle& sys, const CheckParams& p) {
  const TotalSODE& spray = sys.extras.at("wong_spray");
  LagrangianData wrong = *sys.lagrangian;
  wrong.vertical_form = *wrong.vertical_form * 2.0;
  Rng rng(p.seed);
  double worst = 0.0;
  QuasiState worst_s;
  for (int i = 0; i < p.n_samples; ++i) {
    QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
    StateDeriv dg = eval_sode(spray, s);
    StateDeriv d1 = eval_sode(sys.primary, s);
    Vec A = curvature_distortion(*sys.chart, wrong.base_metric, *wrong.vertical_form, s);
    double r = (dg.vdot_base - d1.vdot_base - A).cwiseAbs().maxCoeff();
    if (r >= worst) {
      worst = r;
      worst_s = s;
    }
  }
  CheckReport rep{.check_id = "guard-field-identity",
                  .system_id = sys.id,
                  .samples_used = p.n_samples,
                  .tolerance = 0.0,
                  .seed = p.seed};
  rep.max_residual = shortfall(1e-3, worst);
  rep.worst_state = worst_s.flatten();
  rep.note = "doubled coupling detected with mismatch " + fmt_double(worst);
  return rep;
}

inline CheckReport guard_curvature_fd(const SystemBundle& sys, const CheckParams& p) {
  BundleChart flat = *sys.chart;
  flat.curvature = nullptr;  // claim zero curvature against the true frame
  Rng rng(p.seed);
  double worst = 0.0;
  QuasiState worst_s;
  for (int i = 0; i < p.n_samples; ++i) {
    QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
    double r = verify_curvature(flat, s.x, p.fd_step);
    if (r >= worst) {
      worst = r;
      worst_s = s;
    }
  }
  CheckReport rep{.check_id = "guard-curvature-fd",
                  .system_id = sys.id,
                  .samples_used = p.n_samples,
                  .tolerance = 0.0,
                  .seed = p.seed};
  rep.max_residual = shortfall(1e-3, worst);
  rep.worst_state = worst_s.flatten();
  rep.note = "zeroed curvature table detected with bracket residual " + fmt_double(worst);
  return rep;
}

inline CheckReport guard_el_residual(const SystemBundle& sys, const CheckParams& p) {
  TotalSODE broken = sys.primary;
  auto orig = sys.primary.force_base;
  broken.force_base = [orig](const QuasiState& s) {
    Vec f = orig(s);
    f[0] += 1.0;
    return f;
  };
  Rng rng(p.seed);
  double worst = 0.0;
  QuasiState worst_s;
  for (int i = 0; i < p.n_samples; ++i) {
    QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
    Vec r = lagrangian_residual(broken, *sys.lagrangian, s);
    double m = r.cwiseAbs().maxCoeff();
    if (m >= worst) {
      worst = m;
      worst_s = s;
    }
  }
  CheckReport rep{.check_id = "guard-el-residual",
                  .system_id = sys.id,
                  .samples_used = p.n_samples,
                  .tolerance = 0.0,
                  .seed = p.seed};
  rep.max_residual = shortfall(1e-3, worst);
  rep.worst_state = worst_s.flatten();
  rep.note = "unit force perturbation detected with residual " + fmt_double(worst);
  return rep;
}

/// A base force that reads the fiber coordinate breaks invariance along the
/// group direction; the invariance residual must catch it.
inline CheckReport guard_submersive(const SystemBundle& sys, const CheckParams& p) {
  TotalSODE broken = sys.primary;
  auto orig = sys.primary.force_base;
  broken.force_base = [orig](const QuasiState& s) {
    return Vec((orig(s).array() + 0.1 * std::sin(s.x[0])).matrix());
  };
  SubmersiveReport sub =
      submersive_check(broken, sys.default_box, p.n_samples, p.seed, p.fd_step);
  CheckReport rep{.check_id = "guard-submersive",
                  .system_id = sys.id,
                  .samples_used = p.n_samples,
                  .tolerance = 0.0,
                  .seed = p.seed};
  rep.max_residual = shortfall(1e-3, sub.invariance_residual);
  rep.worst_state = sub.worst_state.flatten();
  rep.note = "fiber-coordinate dependence detected with invariance residual " +
             fmt_double(sub.invariance_residual);
  return rep;
}

}  // namespace checks

/// Runs every registered check on every applicable system, deterministically
/// ordered by (check_id, system_id). `tol_overrides` replaces tolerances by
/// check id ("*" applies to all); `filter` keeps checks whose id or system id
/// contains the substring.
[[nodiscard]] inline std::vector<CheckReport> run_all(
    const CheckParams& params = {}, const std::map<std::string, double>& tol_overrides = {},
    const std::string& filter = "") {
  std::vector<CheckReport> reports;
  const auto& reg = registry();
  for (const auto& [id, sys] : reg) {
    const bool has_wong = sys.extras.count("wong_spray") > 0;
    reports.push_back(checks::projection_commutation(sys, sys.primary, params));
    reports.push_back(checks::projection_differential(sys, params));
    reports.push_back(checks::sode_condition(sys, sys.primary, "", params));
    reports.push_back(checks::horizontal_lift(sys, params));
    reports.push_back(checks::momentum(sys, sys.primary, "", params));
    reports.push_back(checks::curvature_fd(sys, params));
    reports.push_back(checks::submersive(sys, sys.primary, "", false, params));
    if (sys.lagrangian) {
      reports.push_back(checks::el_residual(sys, params));
      reports.push_back(checks::el_residual_vertical_invariance(sys, params));
    }
    if (has_wong) {
      const TotalSODE& spray = sys.extras.at("wong_spray");
      reports.push_back(checks::sode_condition(sys, spray, "wong_spray", params));
      reports.push_back(checks::momentum(sys, spray, "wong_spray", params));
      reports.push_back(checks::zero_momentum_shooting(sys, spray, params));
      reports.push_back(checks::field_identity(sys, params));
      reports.push_back(checks::submersive(sys, spray, "wong_spray", true, params));
      reports.push_back(checks::shooting_momentum_deviates(sys, params));
      reports.push_back(checks::guard_momentum(sys, params));
      reports.push_back(checks::guard_field_identity(sys, params));
    }
    if (sys.id == "canonical-so3") {
      reports.push_back(checks::canonical_exp(sys, params));
    }
    if (auto it = sys.extras.find("canonical"); it != sys.extras.end()) {
      reports.push_back(checks::sode_condition(sys, it->second, "canonical", params));
      reports.push_back(checks::momentum(sys, it->second, "canonical", params));
    }
    if (sys.id.rfind("glplus-", 0) == 0) {
      reports.push_back(checks::det_exp(sys, params));
    }
    if (sys.id == "so3-sphere") {
      reports.push_back(checks::guard_projection_commutation(sys, params));
      reports.push_back(checks::guard_sode_condition(sys, params));
      reports.push_back(checks::guard_horizontal_lift(sys, params));
      reports.push_back(checks::guard_curvature_fd(sys, params));
      reports.push_back(checks::guard_el_residual(sys, params));
      reports.push_back(checks::guard_submersive(sys, params));
    }
  }

  for (auto& r : reports) {
    if (auto it = tol_overrides.find(r.check_id); it != tol_overrides.end()) {
      r.tolerance = it->second;
    } else if (auto all = tol_overrides.find("*"); all != tol_overrides.end()) {
      r.tolerance = all->second;
    }
    r.pass = r.max_residual <= r.tolerance;
  }

  if (!filter.empty()) {
    std::erase_if(reports, [&](const CheckReport& r) {
      return r.check_id.find(filter) == std::string::npos &&
             r.system_id.find(filter) == std::string::npos;
    });
  }
  std::sort(reports.begin(), reports.end(), [](const CheckReport& a, const CheckReport& b) {
    return std::tie(a.check_id, a.system_id) < std::tie(b.check_id, b.system_id);
  });
  return reports;
}

}  // namespace unreduce
