#pragma once

#include <functional>
#include <string>
#include <utility>

#include "unreduce/chart.hpp"
#include "unreduce/core.hpp"

namespace unreduce {

/// Second-order field on the base: xbar_ddot^i = f^i(xbar, vbar).
struct BaseSODE {
  int base_dim = 0;
  std::function<Vec(const Vec&, const Vec&)> force;
};

enum class SodeKind { primary, gamma2, gamma3, geodesic_spray, custom };

[[nodiscard]] inline std::string to_string(SodeKind k) {
  switch (k) {
    case SodeKind::primary: return "primary";
    case SodeKind::gamma2: return "gamma2";
    case SodeKind::gamma3: return "gamma3";
    case SodeKind::geodesic_spray: return "geodesic_spray";
    case SodeKind::custom: return "custom";
  }
  return "unknown";
}

/// Second-order field on the total space in quasi-velocity normal form:
///   xdot = Z(x) (v_base, v_vert),
///   v_base_dot = force_base(s),   v_vert_dot = force_vert(s).
/// The first line is fixed by the representation, so every TotalSODE
/// satisfies the second-order condition structurally.
struct TotalSODE {
  ChartPtr chart;
  std::function<Vec(const QuasiState&)> force_base;
  std::function<Vec(const QuasiState&)> force_vert;
  SodeKind kind = SodeKind::custom;
};

struct StateDeriv {
  Vec xdot;
  Vec vdot_base;
  Vec vdot_vert;
};

/// Generic flow on quasi-velocity states. TotalSODE evaluation produces one;
/// test fixtures may supply fields that break the evolution rule on purpose.
using FlowField = std::function<StateDeriv(const QuasiState&)>;

inline void check_state_dims(const BundleChart& chart, const QuasiState& s, const char* who) {
  if (s.x.size() != chart.dim() || s.v_base.size() != chart.base_dim ||
      s.v_vert.size() != chart.fiber_dim()) {
    throw validation_error(std::string(who) + ": state dimensions (" +
                           std::to_string(s.x.size()) + "," + std::to_string(s.v_base.size()) +
                           "," + std::to_string(s.v_vert.size()) + ") do not match chart (" +
                           std::to_string(chart.dim()) + "," + std::to_string(chart.base_dim) +
                           "," + std::to_string(chart.fiber_dim()) + ")");
  }
}

[[nodiscard]] inline StateDeriv eval_sode(const TotalSODE& sode, const QuasiState& s) {
  const BundleChart& chart = *sode.chart;
  check_state_dims(chart, s, "eval_sode");
  chart.require_in_domain(s.x);
  StateDeriv d;
  d.xdot = chart.frame(s.x) * s.quasi_velocity();
  d.vdot_base = sode.force_base(s);
  d.vdot_vert = sode.force_vert(s);
  if (!d.xdot.allFinite() || !d.vdot_base.allFinite() || !d.vdot_vert.allFinite()) {
    throw numeric_error("eval_sode: non-finite coefficient at t-state x = [" +
                        [&] {
                          std::string out;
                          for (Eigen::Index i = 0; i < s.x.size(); ++i) {
                            out += (i ? "," : "") + fmt_double(s.x[i]);
                          }
                          return out;
                        }() +
                        "]");
  }
  return d;
}

[[nodiscard]] inline FlowField as_flow_field(const TotalSODE& sode) {
  return [sode](const QuasiState& s) { return eval_sode(sode, s); };
}

/// Coordinate components of the vertical correction field at s: the
/// combination sum_a v^a (generator column a). This is what any second-order
/// field must add to the horizontal lift of a base field, and it does not
/// depend on which second-order field it is extracted from.
[[nodiscard]] inline Vec x_omega(const BundleChart& chart, const QuasiState& s) {
  check_state_dims(chart, s, "x_omega");
  chart.require_in_domain(s.x);
  Mat Z = chart.frame(s.x);
  Vec out = Vec::Zero(chart.dim());
  for (int a = 0; a < chart.fiber_dim(); ++a) {
    out += s.v_vert[a] * Z.col(chart.base_dim + a);
  }
  return out;
}

/// The canonical un-reduction of a base second-order field: horizontal lift
/// of the base force plus the vertical correction, with zero vertical force.
/// Its base integral curves project onto integral curves of `base`, and
/// vertical quasi-velocities are constants of motion.
[[nodiscard]] inline TotalSODE primary_unreduction(const BaseSODE& base, ChartPtr chart) {
  if (base.base_dim != chart->base_dim) {
    throw validation_error("primary_unreduction: base dimension " +
                           std::to_string(base.base_dim) + " does not match chart base " +
                           std::to_string(chart->base_dim));
  }
  TotalSODE out;
  out.chart = chart;
  const int k = chart->fiber_dim();
  auto proj = chart->projection;
  auto f = base.force;
  out.force_base = [proj, f](const QuasiState& s) { return f(proj(s.x), s.v_base); };
  out.force_vert = [k](const QuasiState&) { return Vec::Zero(k); };
  out.kind = SodeKind::primary;
  return out;
}

/// Adds a vertical force V^a to a primary un-reduction. The base behaviour is
/// untouched: the same force_base object is reused, so projected dynamics
/// agree exactly.
[[nodiscard]] inline TotalSODE gamma2(const TotalSODE& primary,
                                      std::function<Vec(const QuasiState&)> vertical_force) {
  if (primary.kind != SodeKind::primary) {
    throw validation_error("gamma2: input must be a primary un-reduction, got kind " +
                           to_string(primary.kind));
  }
  TotalSODE out = primary;
  out.force_vert = std::move(vertical_force);
  out.kind = SodeKind::gamma2;
  return out;
}

/// Builds a second-order field that agrees with the primary un-reduction of
/// `declared_base` on the horizontal slice v_vert = 0. Construction samples
/// the slice and rejects forces that do not collapse there.
[[nodiscard]] inline TotalSODE gamma3(const BaseSODE& declared_base,
                                      std::function<Vec(const QuasiState&)> force_base,
                                      std::function<Vec(const QuasiState&)> force_vert,
                                      ChartPtr chart, const SampleBox& box, int n_samples,
                                      unsigned seed, double tol = 1e-10) {
  if (declared_base.base_dim != chart->base_dim) {
    throw validation_error("gamma3: base dimension mismatch");
  }
  Rng rng(seed);
  double worst = 0.0;
  QuasiState worst_state;
  for (int i = 0; i < n_samples; ++i) {
    QuasiState s = sample_state(*chart, box, rng);
    s.v_vert.setZero();
    Vec fv = force_vert(s);
    Vec fb = force_base(s) - declared_base.force(chart->projection(s.x), s.v_base);
    double r = 0.0;
    if (fv.size() > 0) r = std::max(r, fv.cwiseAbs().maxCoeff());
    if (fb.size() > 0) r = std::max(r, fb.cwiseAbs().maxCoeff());
    if (r > worst) {
      worst = r;
      worst_state = s;
    }
  }
  if (worst > tol) {
    std::string xs;
    for (Eigen::Index i = 0; i < worst_state.x.size(); ++i) {
      xs += (i ? "," : "") + fmt_double(worst_state.x[i]);
    }
    throw validation_error("gamma3: field does not restrict to the declared base on the "
                           "horizontal slice; worst residual " +
                           fmt_double(worst) + " at x = [" + xs + "]");
  }
  TotalSODE out;
  out.chart = std::move(chart);
  out.force_base = std::move(force_base);
  out.force_vert = std::move(force_vert);
  out.kind = SodeKind::gamma3;
  return out;
}

/// Max deviation of the generator-lift coefficients of a flow from the
/// vertical quasi-velocities, over sampled states. Zero characterizes
/// second-order fields; a horizontal lift without the vertical correction is
/// flagged with deviation |v_vert|.
[[nodiscard]] inline double sode_condition_check(const BundleChart& chart, const FlowField& flow,
                                                 const SampleBox& box, int n_samples,
                                                 unsigned seed, QuasiState* worst_state = nullptr) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    QuasiState s = sample_state(chart, box, rng);
    StateDeriv d = flow(s);
    QuasiState split = coords_to_quasi(chart, s.x, d.xdot);
    double r = 0.0;
    if (chart.fiber_dim() > 0) {
      r = (split.v_vert - s.v_vert).cwiseAbs().maxCoeff();
    }
    if (chart.base_dim > 0) {
      r = std::max(r, (split.v_base - s.v_base).cwiseAbs().maxCoeff());
    }
    if (r >= worst) {
      worst = r;
      if (worst_state) *worst_state = s;
    }
  }
  return worst;
}

[[nodiscard]] inline double sode_condition_check(const TotalSODE& sode, const SampleBox& box,
                                                 int n_samples, unsigned seed) {
  return sode_condition_check(*sode.chart, as_flow_field(sode), box, n_samples, seed);
}

/// Residuals of the two conditions under which a second-order field on the
/// total space induces one on the base:
///  - invariance: the generator lifts annihilate force_base and act on
///    force_vert through the structure constants;
///  - vertical independence: force_base does not depend on v_vert.
/// Both are measured with central differences of step fd_step.
struct SubmersiveReport {
  double invariance_residual = 0.0;
  double vertical_independence_residual = 0.0;
  QuasiState worst_state;

  [[nodiscard]] double max_residual() const {
    return std::max(invariance_residual, vertical_independence_residual);
  }
};

[[nodiscard]] inline SubmersiveReport submersive_check(const TotalSODE& sode,
                                                       const SampleBox& box, int n_samples,
                                                       unsigned seed,
                                                       double fd_step = kDefaultFdStep) {
  const BundleChart& chart = *sode.chart;
  const int n = chart.base_dim;
  const int k = chart.fiber_dim();
  Rng rng(seed);
  SubmersiveReport rep;
  for (int i = 0; i < n_samples; ++i) {
    QuasiState s = sample_state(chart, box, rng);
    Mat Z = chart.frame(s.x);
    double inv = 0.0;
    for (int a = 0; a < k; ++a) {
      // shift along the generator lift of basis element a
      Vec dx = Z.col(n + a);
      Vec dv = Vec::Zero(k);
      for (int b = 0; b < k; ++b) {
        for (int c = 0; c < k; ++c) {
          dv[b] += chart.vertical_table_constant(b, a, c) * s.v_vert[c];
        }
      }
      QuasiState sp = s, sm = s;
      sp.x += fd_step * dx;
      sm.x -= fd_step * dx;
      sp.v_vert += fd_step * dv;
      sm.v_vert -= fd_step * dv;
      chart.require_in_domain(sp.x);
      chart.require_in_domain(sm.x);

      if (n > 0) {
        Vec der = (sode.force_base(sp) - sode.force_base(sm)) / (2.0 * fd_step);
        inv = std::max(inv, der.cwiseAbs().maxCoeff());
      }
      if (k > 0) {
        Vec der = (sode.force_vert(sp) - sode.force_vert(sm)) / (2.0 * fd_step);
        Vec expected = Vec::Zero(k);
        Vec fv = sode.force_vert(s);
        for (int b = 0; b < k; ++b) {
          for (int c = 0; c < k; ++c) {
            expected[b] += chart.vertical_table_constant(b, a, c) * fv[c];
          }
        }
        inv = std::max(inv, (der - expected).cwiseAbs().maxCoeff());
      }
    }

    double vind = 0.0;
    if (n > 0) {
      for (int b = 0; b < k; ++b) {
        QuasiState sp = s, sm = s;
        sp.v_vert[b] += fd_step;
        sm.v_vert[b] -= fd_step;
        Vec der = (sode.force_base(sp) - sode.force_base(sm)) / (2.0 * fd_step);
        vind = std::max(vind, der.cwiseAbs().maxCoeff());
      }
    }

    if (std::max(inv, vind) >= rep.max_residual()) {
      rep.worst_state = s;
    }
    rep.invariance_residual = std::max(rep.invariance_residual, inv);
    rep.vertical_independence_residual = std::max(rep.vertical_independence_residual, vind);
  }
  return rep;
}

}  // namespace unreduce
