#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "unreduce/core.hpp"
#include "unreduce/group.hpp"

namespace unreduce {

/// Chart on the total space of a principal bundle, carrying a moving frame
/// adapted to a principal connection.
///
/// The frame matrix Z(x) is (n+k) x (n+k); its first n columns are the
/// horizontal lifts of the base coordinate fields and the last k columns are
/// the infinitesimal generators of the structure group action. Velocities
/// decompose as xdot = Z(x) (v_base, v_vert); the base quasi-velocities
/// coincide with the base coordinate velocities.
///
/// `curvature(x)` returns k matrices R[a] with R[a](i, j) = R^a_{ij}, the
/// coefficients of [X_i, X_j] in the generator columns.
///
/// `action_is_right` records on which side the structure group acts. The
/// generator columns of a right action bracket with the opposite sign, which
/// matters wherever the derivative table entry for generator lifts of
/// vertical quasi-velocities is used; see vertical_table_constants().
struct BundleChart {
  int base_dim = 0;
  GroupModel group;
  std::vector<std::string> coord_names;
  std::vector<std::string> base_coord_names;
  std::vector<std::string> velocity_names;
  std::function<Mat(const Vec&)> frame;
  std::function<std::vector<Mat>(const Vec&)> curvature;
  std::function<Vec(const Vec&)> projection;
  std::function<Vec(const Vec&, const Vec&)> action;
  // Empty string means x is valid; otherwise names the violated bound.
  std::function<std::string(const Vec&)> domain_check;
  bool action_is_right = false;

  [[nodiscard]] int fiber_dim() const { return group.fiber_dim; }
  [[nodiscard]] int dim() const { return base_dim + group.fiber_dim; }

  [[nodiscard]] std::string domain_violation(const Vec& x) const {
    if (x.size() != dim()) {
      throw validation_error("chart: point has dimension " + std::to_string(x.size()) +
                             ", chart has " + std::to_string(dim()));
    }
    return domain_check ? domain_check(x) : std::string{};
  }

  [[nodiscard]] bool in_domain(const Vec& x) const { return domain_violation(x).empty(); }

  void require_in_domain(const Vec& x) const {
    auto why = domain_violation(x);
    if (!why.empty()) throw domain_error("out of chart domain: " + why);
  }

  [[nodiscard]] std::vector<Mat> curvature_at(const Vec& x) const {
    if (curvature) return curvature(x);
    return std::vector<Mat>(static_cast<size_t>(fiber_dim()),
                            Mat::Zero(base_dim, base_dim));
  }

  /// Constants c^b_{ac} in the derivative table entry
  /// (generator lift of E_a)(v^b) = c^b_{ac} v^c. For a left action these are
  /// the structure constants; for a right action the sign flips because the
  /// generators are then left-invariant along the fibers.
  [[nodiscard]] double vertical_table_constant(int b, int a, int c) const {
    double v = group.C(b, a, c);
    return action_is_right ? -v : v;
  }
};

using ChartPtr = std::shared_ptr<const BundleChart>;

/// Coordinate velocity of the quasi-velocity state: xdot = Z(x) (v_base, v_vert).
[[nodiscard]] inline Vec quasi_to_coords(const BundleChart& chart, const QuasiState& s) {
  chart.require_in_domain(s.x);
  if (s.v_base.size() != chart.base_dim || s.v_vert.size() != chart.fiber_dim()) {
    throw validation_error("quasi_to_coords: velocity split (" + std::to_string(s.v_base.size()) +
                           "," + std::to_string(s.v_vert.size()) + ") does not match chart (" +
                           std::to_string(chart.base_dim) + "," +
                           std::to_string(chart.fiber_dim()) + ")");
  }
  return chart.frame(s.x) * s.quasi_velocity();
}

/// Splits a coordinate velocity into quasi-velocities by solving
/// Z(x) v = xdot. Rejects frames with condition number above 1e12.
[[nodiscard]] inline QuasiState coords_to_quasi(const BundleChart& chart, const Vec& x,
                                                const Vec& xdot) {
  chart.require_in_domain(x);
  if (xdot.size() != chart.dim()) {
    throw validation_error("coords_to_quasi: velocity has dimension " +
                           std::to_string(xdot.size()) + ", chart has " +
                           std::to_string(chart.dim()));
  }
  Mat Z = chart.frame(x);
  Eigen::JacobiSVD<Mat> svd(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(cond < kMaxFrameCondition)) {
    throw numeric_error("coords_to_quasi: frame matrix ill conditioned, cond = " +
                        fmt_double(cond));
  }
  Vec v = svd.solve(xdot);
  QuasiState out;
  out.x = x;
  out.v_base = v.head(chart.base_dim);
  out.v_vert = v.tail(chart.fiber_dim());
  return out;
}

/// Max norm of the difference between the finite-difference bracket
/// [X_i, X_j] of the horizontal frame columns and its declared expansion
/// R^a_{ij} in the generator columns, over all pairs i < j.
///
/// The bracket is formed from central differences of the frame columns, so
/// the residual scales as fd_step^2 for smooth exact data.
[[nodiscard]] inline double verify_curvature(const BundleChart& chart, const Vec& x,
                                             double fd_step = kDefaultFdStep) {
  chart.require_in_domain(x);
  const int n = chart.base_dim;
  const int k = chart.fiber_dim();
  const int N = chart.dim();
  if (n < 2) return 0.0;

  // column derivatives d(col)/dx^B by central differences
  std::vector<Mat> dZ(static_cast<size_t>(N));  // dZ[B] = dZ/dx^B
  for (int B = 0; B < N; ++B) {
    Vec xp = x, xm = x;
    xp[B] += fd_step;
    xm[B] -= fd_step;
    auto why_p = chart.domain_violation(xp);
    auto why_m = chart.domain_violation(xm);
    if (!why_p.empty() || !why_m.empty()) {
      throw domain_error("verify_curvature: x is closer than fd_step to the domain boundary: " +
                         (why_p.empty() ? why_m : why_p));
    }
    dZ[static_cast<size_t>(B)] = (chart.frame(xp) - chart.frame(xm)) / (2.0 * fd_step);
  }

  Mat Z = chart.frame(x);
  auto R = chart.curvature_at(x);
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      Vec bracket = Vec::Zero(N);
      for (int B = 0; B < N; ++B) {
        bracket += Z(B, i) * dZ[static_cast<size_t>(B)].col(j) -
                   Z(B, j) * dZ[static_cast<size_t>(B)].col(i);
      }
      Vec expansion = Vec::Zero(N);
      for (int a = 0; a < k; ++a) {
        expansion += R[static_cast<size_t>(a)](i, j) * Z.col(n + a);
      }
      worst = std::max(worst, (bracket - expansion).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

/// Draws a state uniformly from the box, rejecting points outside the chart
/// domain. Velocities are never the reason for rejection.
[[nodiscard]] inline QuasiState sample_state(const BundleChart& chart, const SampleBox& box,
                                             Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Vec x = sample_uniform(box.x_lo, box.x_hi, rng);
    if (!chart.in_domain(x)) continue;
    Vec v = sample_uniform(box.v_lo, box.v_hi, rng);
    QuasiState s;
    s.x = std::move(x);
    s.v_base = v.head(chart.base_dim);
    s.v_vert = v.tail(chart.fiber_dim());
    return s;
  }
  throw validation_error("sample_state: box does not intersect the chart domain");
}

/// Max violation of projection equivariance |projection(action(g, x)) -
/// projection(x)| over sampled pairs, with group elements produced by
/// `sample_group`.
[[nodiscard]] inline double check_equivariance(const BundleChart& chart, const SampleBox& box,
                                               const std::function<Vec(Rng&)>& sample_group,
                                               int n_samples, Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    QuasiState s = sample_state(chart, box, rng);
    Vec g = sample_group(rng);
    Vec moved = chart.action(g, s.x);
    Vec d = chart.projection(moved) - chart.projection(s.x);
    if (d.size() > 0) worst = std::max(worst, d.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace unreduce
