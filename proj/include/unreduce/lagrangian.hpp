#pragma once

#include <functional>
#include <optional>

#include "unreduce/core.hpp"
#include "unreduce/sode.hpp"

namespace unreduce {

/// Lagrangian on the base, optionally extended by a constant symmetric form
/// on the vertical quasi-velocities (a "kinetic" fiber term) and the base
/// metric. For total-space Lagrangians of the form L(x, v) = l(projection(x),
/// v_base) the variational residual reduces to the base Euler-Lagrange
/// expression along the flow, which is what lagrangian_residual computes; the
/// vertical force of the field never enters.
struct LagrangianData {
  int base_dim = 0;
  std::function<double(const Vec&, const Vec&)> lagrangian;
  std::function<Mat(const Vec&)> base_metric;  // optional
  std::optional<Mat> vertical_form;            // optional, constant B_{ab}
};

namespace fd {

// Every stencil below is second-order central, so one Richardson step
// (combining h and h/2) cancels the leading truncation term. This keeps the
// step large enough that subtraction noise in the h^2 denominators stays
// far below the residual tolerances.
template <typename Stencil>
double richardson(Stencil&& stencil, double h) {
  return (4.0 * stencil(0.5 * h) - stencil(h)) / 3.0;
}

inline Vec grad_x(const std::function<double(const Vec&, const Vec&)>& l, const Vec& x,
                  const Vec& v, double h) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    g[i] = richardson(
        [&](double hh) {
          Vec xp = x, xm = x;
          xp[i] += hh;
          xm[i] -= hh;
          return (l(xp, v) - l(xm, v)) / (2.0 * hh);
        },
        h);
  }
  return g;
}

inline Mat hess_vv(const std::function<double(const Vec&, const Vec&)>& l, const Vec& x,
                   const Vec& v, double h) {
  const Eigen::Index n = v.size();
  Mat H(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      double val;
      if (i == j) {
        val = richardson(
            [&](double hh) {
              Vec vp = v, vm = v;
              vp[i] += hh;
              vm[i] -= hh;
              return (l(x, vp) - 2.0 * l(x, v) + l(x, vm)) / (hh * hh);
            },
            h);
      } else {
        val = richardson(
            [&](double hh) {
              Vec vpp = v, vpm = v, vmp = v, vmm = v;
              vpp[i] += hh; vpp[j] += hh;
              vpm[i] += hh; vpm[j] -= hh;
              vmp[i] -= hh; vmp[j] += hh;
              vmm[i] -= hh; vmm[j] -= hh;
              return (l(x, vpp) - l(x, vpm) - l(x, vmp) + l(x, vmm)) / (4.0 * hh * hh);
            },
            h);
      }
      H(i, j) = val;
      H(j, i) = val;
    }
  }
  return H;
}

inline Mat hess_vx(const std::function<double(const Vec&, const Vec&)>& l, const Vec& x,
                   const Vec& v, double h) {
  Mat H(v.size(), x.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      H(i, j) = richardson(
          [&](double hh) {
            Vec vp = v, vm = v;
            vp[i] += hh;
            vm[i] -= hh;
            Vec xp = x, xm = x;
            xp[j] += hh;
            xm[j] -= hh;
            return (l(xp, vp) - l(xm, vp) - l(xp, vm) + l(xm, vm)) / (4.0 * hh * hh);
          },
          h);
    }
  }
  return H;
}

}  // namespace fd

/// Second-order field defined by the Euler-Lagrange equations of `l`:
/// solves H f = b with H the velocity Hessian and
/// b_i = dl/dx^i - (d^2 l / dv^i dx^j) v^j, by finite differences.
/// Throws numeric_error when the Hessian is singular to working precision.
[[nodiscard]] inline BaseSODE base_sode_from_lagrangian(const LagrangianData& data,
                                                        double fd_step = kDefaultFdStepSecond) {
  BaseSODE out;
  out.base_dim = data.base_dim;
  auto l = data.lagrangian;
  out.force = [l, fd_step](const Vec& x, const Vec& v) -> Vec {
    Mat H = fd::hess_vv(l, x, v, fd_step);
    Vec b = fd::grad_x(l, x, v, fd_step) - fd::hess_vx(l, x, v, fd_step) * v;
    Eigen::JacobiSVD<Mat> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    // A Lagrangian linear in v differentiates to pure round-off, which can
    // look well conditioned (any 1 x 1 noise matrix does), so an absolute
    // floor on the largest singular value is needed as well.
    if (smax < 1e-7 || !(cond < kMaxFrameCondition)) {
      throw numeric_error("base_sode_from_lagrangian: velocity Hessian singular or nearly so, "
                          "cond = " + fmt_double(cond) + ", max singular value = " +
                          fmt_double(smax));
    }
    return svd.solve(b);
  };
  return out;
}

/// Euler-Lagrange residual of a total-space field whose Lagrangian only sees
/// the projected state:
///   r_i = (d^2 l / dv^i dx^j) v^j + (d^2 l / dv^i dv^j) F^j - dl/dx^i
/// evaluated at (projection(s.x), s.v_base) with F = force_base(s).
/// Independent of force_vert, so any vertical extension of the same primary
/// field yields the identical residual.
[[nodiscard]] inline Vec lagrangian_residual(const TotalSODE& sode, const LagrangianData& data,
                                             const QuasiState& s,
                                             double fd_step = kDefaultFdStepSecond) {
  check_state_dims(*sode.chart, s, "lagrangian_residual");
  if (data.base_dim != sode.chart->base_dim) {
    throw validation_error("lagrangian_residual: base dimension mismatch");
  }
  Vec xb = sode.chart->projection(s.x);
  Vec vb = s.v_base;
  Vec F = sode.force_base(s);
  Mat Hvx = fd::hess_vx(data.lagrangian, xb, vb, fd_step);
  Mat Hvv = fd::hess_vv(data.lagrangian, xb, vb, fd_step);
  return Hvx * vb + Hvv * F - fd::grad_x(data.lagrangian, xb, vb, fd_step);
}

}  // namespace unreduce
