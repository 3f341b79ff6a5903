#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "unreduce/chart.hpp"
#include "unreduce/core.hpp"
#include "unreduce/sode.hpp"

namespace unreduce {

/// Where and why an integration stopped before the requested end time.
struct DomainExit {
  double time = 0.0;
  QuasiState state;
  std::string message;
};

/// Fixed-step trajectory. For total-space runs the states carry (x, v_base,
/// v_vert); base runs use x of base dimension and empty v_vert. When a step
/// (including an internal stage) leaves the chart domain, the trajectory ends
/// at the last valid state and `domain_exit` reports the violation.
struct Trajectory {
  std::vector<double> times;
  std::vector<QuasiState> states;
  std::vector<std::string> columns;  // labels matching flatten(), without t
  std::string system_id;
  std::string method = "rk4";
  double step = 0.0;
  unsigned seed = 0;
  std::optional<DomainExit> domain_exit;

  [[nodiscard]] double t_end() const { return times.empty() ? 0.0 : times.back(); }
  [[nodiscard]] bool complete() const { return !domain_exit.has_value(); }
};

namespace detail {

/// One classical Runge-Kutta step of size h on a flat state vector. The
/// arithmetic is componentwise, so a closed subsystem evolves with bit
/// identical values whether or not the remaining components are present.
template <typename Rhs>
Vec rk4_step(const Rhs& rhs, const Vec& y, double h) {
  Vec k1 = rhs(y);
  Vec k2 = rhs(y + (h / 2.0) * k1);
  Vec k3 = rhs(y + (h / 2.0) * k2);
  Vec k4 = rhs(y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline long steps_for(double t_end, double h) {
  if (!(h > 0.0) || !(t_end > 0.0)) {
    throw validation_error("integrate: need h > 0 and t_end > 0, got h = " + fmt_double(h) +
                           ", t_end = " + fmt_double(t_end));
  }
  long n = std::lround(t_end / h);
  return n < 1 ? 1 : n;
}

}  // namespace detail

/// Integrates a total-space second-order field with classical RK4 at fixed
/// step h over [0, t_end] (realized end time is round(t_end/h)*h). An initial
/// state outside the chart domain yields a single-point trajectory with a
/// domain-exit report rather than an exception, so partial output is always
/// available to callers.
[[nodiscard]] inline Trajectory integrate(const TotalSODE& sode, const QuasiState& s0,
                                          double t_end, double h) {
  const BundleChart& chart = *sode.chart;
  check_state_dims(chart, s0, "integrate");
  const long n_steps = detail::steps_for(t_end, h);
  const int N = chart.dim();
  const int n = chart.base_dim;
  const int k = chart.fiber_dim();

  Trajectory traj;
  traj.step = h;
  traj.method = "rk4";
  traj.columns = chart.coord_names;
  traj.columns.insert(traj.columns.end(), chart.velocity_names.begin(),
                      chart.velocity_names.end());

  auto unpack = [&](const Vec& y) {
    QuasiState s;
    s.x = y.head(N);
    s.v_base = y.segment(N, n);
    s.v_vert = y.tail(k);
    return s;
  };
  auto rhs = [&](const Vec& y) -> Vec {
    QuasiState s = unpack(y);
    StateDeriv d = eval_sode(sode, s);
    Vec out(2 * N);
    out << d.xdot, d.vdot_base, d.vdot_vert;
    return out;
  };

  {
    auto why = chart.domain_violation(s0.x);
    traj.times.push_back(0.0);
    traj.states.push_back(s0);
    if (!why.empty()) {
      traj.domain_exit = DomainExit{0.0, s0, "initial state out of chart domain: " + why};
      return traj;
    }
  }

  Vec y = s0.flatten();
  for (long i = 0; i < n_steps; ++i) {
    try {
      y = detail::rk4_step(rhs, y, h);
      QuasiState s = unpack(y);
      if (!s.all_finite()) {
        throw numeric_error("integrate: state became non-finite");
      }
      chart.require_in_domain(s.x);
      traj.times.push_back(static_cast<double>(i + 1) * h);
      traj.states.push_back(std::move(s));
    } catch (const error& e) {
      traj.domain_exit = DomainExit{traj.times.back(), traj.states.back(), e.what()};
      return traj;
    }
  }
  return traj;
}

/// Integrates a base second-order field (xbar_ddot = f) with RK4.
[[nodiscard]] inline Trajectory integrate_base(const BaseSODE& base, const Vec& x0, const Vec& v0,
                                               double t_end, double h,
                                               std::vector<std::string> columns = {}) {
  if (x0.size() != base.base_dim || v0.size() != base.base_dim) {
    throw validation_error("integrate_base: initial data dimension mismatch");
  }
  const long n_steps = detail::steps_for(t_end, h);
  const int n = base.base_dim;

  Trajectory traj;
  traj.step = h;
  traj.method = "rk4";
  traj.columns = std::move(columns);

  auto rhs = [&](const Vec& y) -> Vec {
    Vec out(2 * n);
    out << y.tail(n), base.force(y.head(n), y.tail(n));
    return out;
  };

  QuasiState s0{x0, v0, Vec(0)};
  traj.times.push_back(0.0);
  traj.states.push_back(s0);
  Vec y(2 * n);
  y << x0, v0;
  for (long i = 0; i < n_steps; ++i) {
    try {
      y = detail::rk4_step(rhs, y, h);
      QuasiState s{y.head(n), y.tail(n), Vec(0)};
      if (!s.all_finite()) {
        throw numeric_error("integrate_base: state became non-finite");
      }
      traj.times.push_back(static_cast<double>(i + 1) * h);
      traj.states.push_back(std::move(s));
    } catch (const error& e) {
      traj.domain_exit = DomainExit{traj.times.back(), traj.states.back(), e.what()};
      return traj;
    }
  }
  return traj;
}

/// Initial state over (x0, base velocity) with vanishing vertical
/// quasi-velocity: the connection-horizontal lift of the base initial data.
[[nodiscard]] inline QuasiState horizontal_lift_ic(const BundleChart& chart, const Vec& x0,
                                                   const Vec& v_base0) {
  chart.require_in_domain(x0);
  if (v_base0.size() != chart.base_dim) {
    throw validation_error("horizontal_lift_ic: base velocity has dimension " +
                           std::to_string(v_base0.size()) + ", chart base is " +
                           std::to_string(chart.base_dim));
  }
  return QuasiState{x0, v_base0, Vec::Zero(chart.fiber_dim())};
}

/// Fiber motion recovered from the vertical quasi-velocity history.
/// `elements` are 1 x 1 angle values for the additive one-dimensional case
/// and group matrices otherwise.
struct GroupCurve {
  std::vector<double> times;
  std::vector<Mat> elements;
  bool additive = false;
};

/// Solves the reconstruction equation: the left logarithmic derivative of
/// g(t) equals the vertical quasi-velocity.
///
/// With a matrix realization the update is one exponential per step sampled
/// at the interval midpoint, g_{n+1} = g_n exp(h xi(t_n + h/2)), which is
/// exact for constant xi. For a one-dimensional abelian fiber without a
/// realization the angle is accumulated with per-step Simpson quadrature.
[[nodiscard]] inline GroupCurve reconstruct_fiber(const BundleChart& chart,
                                                  const std::function<Vec(double)>& v_vert,
                                                  const Mat& g0, double t_end, double h) {
  const long n_steps = detail::steps_for(t_end, h);
  const auto& group = chart.group;
  GroupCurve curve;
  curve.times.push_back(0.0);
  curve.elements.push_back(g0);

  if (group.realization.has_value()) {
    const auto& real = *group.realization;
    if (g0.rows() != real.dim || g0.cols() != real.dim) {
      throw validation_error("reconstruct_fiber: g0 must be " + std::to_string(real.dim) + " x " +
                             std::to_string(real.dim));
    }
    Mat g = g0;
    for (long i = 0; i < n_steps; ++i) {
      const double tm = (static_cast<double>(i) + 0.5) * h;
      Mat xi = real.algebra_matrix(v_vert(tm));
      g = g * real.exponential(h * xi);
      curve.times.push_back(static_cast<double>(i + 1) * h);
      curve.elements.push_back(g);
    }
    return curve;
  }

  if (group.fiber_dim == 1 && group.is_abelian()) {
    curve.additive = true;
    if (g0.rows() != 1 || g0.cols() != 1) {
      throw validation_error("reconstruct_fiber: abelian angle g0 must be 1 x 1");
    }
    double g = g0(0, 0);
    for (long i = 0; i < n_steps; ++i) {
      const double t0 = static_cast<double>(i) * h;
      const double t1 = static_cast<double>(i + 1) * h;
      g += (h / 6.0) * (v_vert(t0)[0] + 4.0 * v_vert(0.5 * (t0 + t1))[0] + v_vert(t1)[0]);
      curve.times.push_back(t1);
      curve.elements.push_back((Mat(1, 1) << g).finished());
    }
    return curve;
  }

  throw capability_error("reconstruct_fiber: group has no matrix realization and is not "
                         "one-dimensional abelian");
}

/// Piecewise-linear interpolant of the vertical quasi-velocities of a
/// trajectory, for feeding reconstruct_fiber (which samples midpoints).
[[nodiscard]] inline std::function<Vec(double)> vertical_velocity_interpolant(
    const Trajectory& traj) {
  if (traj.states.size() < 2) {
    throw validation_error("vertical_velocity_interpolant: need at least two states");
  }
  return [times = traj.times, states = traj.states](double t) -> Vec {
    if (t <= times.front()) return states.front().v_vert;
    if (t >= times.back()) return states.back().v_vert;
    auto it = std::upper_bound(times.begin(), times.end(), t);
    size_t i = static_cast<size_t>(it - times.begin()) - 1;
    double w = (t - times[i]) / (times[i + 1] - times[i]);
    return (1.0 - w) * states[i].v_vert + w * states[i + 1].v_vert;
  };
}

/// Pushes a total-space trajectory to the base: projected points plus the
/// base quasi-velocities (which equal the base coordinate velocities).
[[nodiscard]] inline Trajectory project_trajectory(const BundleChart& chart,
                                                   const Trajectory& traj) {
  Trajectory out;
  out.times = traj.times;
  out.system_id = traj.system_id;
  out.method = traj.method;
  out.step = traj.step;
  out.seed = traj.seed;
  out.domain_exit = traj.domain_exit;
  out.columns = chart.base_coord_names;
  for (int i = 0; i < chart.base_dim; ++i) {
    out.columns.push_back(chart.velocity_names[static_cast<size_t>(i)]);
  }
  out.states.reserve(traj.states.size());
  for (const auto& s : traj.states) {
    out.states.push_back(QuasiState{chart.projection(s.x), s.v_base, Vec(0)});
  }
  if (out.domain_exit) {
    out.domain_exit->state =
        QuasiState{chart.projection(traj.domain_exit->state.x), traj.domain_exit->state.v_base,
                   Vec(0)};
  }
  return out;
}

struct TrajectoryError {
  double max_err = 0.0;
  double l2_err = 0.0;
};

/// Pointwise difference of two trajectories on the same grid. Grids must
/// match exactly; no interpolation is performed.
[[nodiscard]] inline TrajectoryError trajectory_error(const Trajectory& a, const Trajectory& b) {
  if (a.times.size() != b.times.size()) {
    throw validation_error("trajectory_error: grids differ in length (" +
                           std::to_string(a.times.size()) + " vs " +
                           std::to_string(b.times.size()) + ")");
  }
  TrajectoryError err;
  double sumsq = 0.0;
  for (size_t i = 0; i < a.times.size(); ++i) {
    if (std::abs(a.times[i] - b.times[i]) > 1e-14 * std::max(1.0, std::abs(a.times[i]))) {
      throw validation_error("trajectory_error: grids mismatch at index " + std::to_string(i));
    }
    Vec da = a.states[i].flatten();
    Vec db = b.states[i].flatten();
    if (da.size() != db.size()) {
      throw validation_error("trajectory_error: state dimensions differ at index " +
                             std::to_string(i));
    }
    Vec d = da - db;
    if (d.size() > 0) {
      err.max_err = std::max(err.max_err, d.cwiseAbs().maxCoeff());
      sumsq += d.squaredNorm();
    }
  }
  err.l2_err = std::sqrt(sumsq);
  return err;
}

/// Keeps every `stride`-th state (index matching, for step-halving
/// comparisons against a finer reference run).
[[nodiscard]] inline Trajectory subsample(const Trajectory& traj, long stride) {
  Trajectory out = traj;
  out.times.clear();
  out.states.clear();
  for (size_t i = 0; i < traj.times.size(); i += static_cast<size_t>(stride)) {
    out.times.push_back(traj.times[i]);
    out.states.push_back(traj.states[i]);
  }
  return out;
}

}  // namespace unreduce
