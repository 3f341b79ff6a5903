#pragma once

#include <cmath>
#include <vector>

#include "unreduce/core.hpp"
#include "unreduce/integrate.hpp"
#include "unreduce/systems.hpp"

namespace unreduce {

/// Total-space run, its projection, and a base run from the projected
/// initial data on the same grid, with the pointwise gap between them.
struct ProjectionCompare {
  Trajectory total;
  Trajectory projected;
  Trajectory base;
  std::vector<double> err;  // per-time max-abs over base coordinates and velocities
  double max_err = 0.0;
  double l2_err = 0.0;
  bool clean = true;  // both runs reached t_end
};

[[nodiscard]] inline ProjectionCompare compare_projection(const SystemBundle& sys,
                                                          const TotalSODE& sode,
                                                          const QuasiState& s0, double t_end,
                                                          double h) {
  ProjectionCompare out;
  out.total = integrate(sode, s0, t_end, h);
  out.total.system_id = sys.id;
  out.projected = project_trajectory(*sode.chart, out.total);

  Vec xb0 = sode.chart->projection(s0.x);
  std::vector<std::string> base_cols = out.projected.columns;
  out.base = integrate_base(sys.base_sode, xb0, s0.v_base, t_end, h, base_cols);
  out.base.system_id = sys.id + "/base";
  out.clean = out.total.complete() && out.base.complete();

  const size_t m = std::min(out.projected.times.size(), out.base.times.size());
  double sumsq = 0.0;
  for (size_t i = 0; i < m; ++i) {
    Vec d = out.projected.states[i].flatten() - out.base.states[i].flatten();
    double e = d.size() > 0 ? d.cwiseAbs().maxCoeff() : 0.0;
    out.err.push_back(e);
    out.max_err = std::max(out.max_err, e);
    sumsq += d.squaredNorm();
  }
  out.l2_err = std::sqrt(sumsq);
  return out;
}

/// One step size of a halving sweep: projection gap plus the error of each
/// run against its own 16x finer reference (classical step-halving order
/// measurement; the reference error is 65536x smaller and ignorable).
struct SweepPoint {
  double h = 0.0;
  double proj_max = 0.0;
  double total_err_vs_ref = 0.0;
  double base_err_vs_ref = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<double> orders;     // between consecutive points, from total errors
  double observed_order = std::numeric_limits<double>::quiet_NaN();
};

[[nodiscard]] inline SweepResult convergence_sweep(const SystemBundle& sys, const TotalSODE& sode,
                                                   const QuasiState& s0, double t_end,
                                                   const std::vector<double>& hs) {
  SweepResult out;
  for (double h : hs) {
    SweepPoint p;
    p.h = h;
    ProjectionCompare cmp = compare_projection(sys, sode, s0, t_end, h);
    if (!cmp.clean) {
      throw domain_error("convergence_sweep: run at h = " + fmt_double(h) +
                         " left the chart domain; choose initial data further from the boundary");
    }
    p.proj_max = cmp.max_err;

    Trajectory ref = integrate(sode, s0, t_end, h / 16.0);
    if (!ref.complete()) {
      throw domain_error("convergence_sweep: reference run left the chart domain");
    }
    p.total_err_vs_ref = trajectory_error(cmp.total, subsample(ref, 16)).max_err;

    if (sys.chart->base_dim > 0) {
      Vec xb0 = sode.chart->projection(s0.x);
      Trajectory bref = integrate_base(sys.base_sode, xb0, s0.v_base, t_end, h / 16.0);
      p.base_err_vs_ref = trajectory_error(cmp.base, subsample(bref, 16)).max_err;
    }
    out.points.push_back(p);
  }
  double acc = 0.0;
  int cnt = 0;
  for (size_t i = 0; i + 1 < out.points.size(); ++i) {
    const auto& a = out.points[i];
    const auto& b = out.points[i + 1];
    if (a.total_err_vs_ref > 0.0 && b.total_err_vs_ref > 0.0) {
      double order = std::log2(a.total_err_vs_ref / b.total_err_vs_ref) / std::log2(a.h / b.h);
      out.orders.push_back(order);
      acc += order;
      ++cnt;
    } else {
      out.orders.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  if (cnt > 0) out.observed_order = acc / cnt;
  return out;
}

}  // namespace unreduce
