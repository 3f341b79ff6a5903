#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace unreduce {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error hierarchy. Everything thrown by this library derives from `error`,
// so callers can map failures to exit codes in one place.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A point or velocity left the validity region of a chart.
struct domain_error : error {
  using error::error;
};

/// Conditioning or finiteness problems (singular frame, blown-up coefficients).
struct numeric_error : error {
  using error::error;
};

/// A contract violation: wrong dimensions, asymmetric forms, broken invariants.
struct validation_error : error {
  using error::error;
};

/// An operation needs optional data (e.g. a matrix realization) that is absent.
struct capability_error : error {
  using error::error;
};

/// State of a second-order field in quasi-velocity form: a point `x` on the
/// total space together with the velocity components (v^i, v^a) in the chart
/// frame. Base-only states use an n-dimensional `x` and an empty `v_vert`.
struct QuasiState {
  Vec x;
  Vec v_base;
  Vec v_vert;

  [[nodiscard]] Eigen::Index dim() const { return v_base.size() + v_vert.size(); }

  [[nodiscard]] Vec quasi_velocity() const {
    Vec v(dim());
    v << v_base, v_vert;
    return v;
  }

  [[nodiscard]] Vec flatten() const {
    Vec y(x.size() + dim());
    y << x, v_base, v_vert;
    return y;
  }

  [[nodiscard]] bool all_finite() const {
    return x.allFinite() && v_base.allFinite() && v_vert.allFinite();
  }
};

/// Axis-aligned sampling region in (x, v) used by the property checks.
/// Velocity bounds are ordered base components first, then vertical ones.
struct SampleBox {
  Vec x_lo, x_hi;
  Vec v_lo, v_hi;
};

using Rng = std::mt19937_64;

inline Vec sample_uniform(const Vec& lo, const Vec& hi, Rng& rng) {
  Vec out(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    std::uniform_real_distribution<double> dist(lo[i], hi[i]);
    out[i] = dist(rng);
  }
  return out;
}

/// Shortest decimal that round-trips the value (17 significant digits max).
inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

constexpr double kMaxFrameCondition = 1e12;
constexpr double kDefaultFdStep = 1e-5;
// Second-derivative stencils divide by h^2, so they need a larger step than
// first derivatives to keep round-off noise down; the Richardson step in the
// finite-difference helpers removes the extra truncation this would cost.
constexpr double kDefaultFdStepSecond = 1e-3;

}  // namespace unreduce
