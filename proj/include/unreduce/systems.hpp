#pragma once

#include <json.hpp>

#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "unreduce/chart.hpp"
#include "unreduce/core.hpp"
#include "unreduce/expm.hpp"
#include "unreduce/group.hpp"
#include "unreduce/lagrangian.hpp"
#include "unreduce/sode.hpp"

namespace unreduce {

/// A registered example: chart, base dynamics, the primary un-reduced field,
/// optional named variants, optional Lagrangian data, and a sampling box that
/// keeps property checks inside the chart domain over `check_horizon`.
struct SystemBundle {
  std::string id;
  ChartPtr chart;
  BaseSODE base_sode;
  TotalSODE primary;
  std::map<std::string, TotalSODE> extras;
  std::map<std::string, std::function<Vec(const QuasiState&)>> gamma2_fields;
  std::optional<LagrangianData> lagrangian;
  SampleBox default_box;
  std::function<Vec(Rng&)> sample_group;
  double check_horizon = 1.0;
  std::vector<std::string> references;
};

/// Vertical correction force induced by a fiber metric against the base one:
///   A^k(s) = -gbar^{ik} B_{ab} R^a_{ij} v^b v^j.
/// This is exactly the gap between the geodesic spray of a bundle metric
/// (base metric plus invariant fiber form under the connection splitting)
/// and the primary un-reduction of the base geodesic field.
[[nodiscard]] inline Vec curvature_distortion(const BundleChart& chart,
                                              const std::function<Mat(const Vec&)>& base_metric,
                                              const Mat& B, const QuasiState& s) {
  check_state_dims(chart, s, "curvature_distortion");
  const int n = chart.base_dim;
  const int k = chart.fiber_dim();
  if (B.rows() != k || B.cols() != k) {
    throw validation_error("curvature_distortion: fiber form must be k x k");
  }
  Vec xb = chart.projection(s.x);
  Mat g = base_metric(xb);
  auto R = chart.curvature_at(s.x);
  Vec rhs = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        for (int j = 0; j < n; ++j) {
          acc += B(a, b) * R[static_cast<size_t>(a)](i, j) * s.v_vert[b] * s.v_base[j];
        }
      }
    }
    rhs[i] = -acc;
  }
  return g.ldlt().solve(rhs);
}

/// Geodesic-type spray over a chart of a bare group (base dimension zero):
/// all quasi-velocities are constants of motion and base integral curves are
/// one-parameter subgroup translates g0 exp(t zeta).
[[nodiscard]] inline TotalSODE make_canonical_spray(ChartPtr chart) {
  if (chart->base_dim != 0) {
    throw validation_error("make_canonical_spray: chart must have base dimension 0, got " +
                           std::to_string(chart->base_dim));
  }
  TotalSODE out;
  out.chart = chart;
  const int k = chart->fiber_dim();
  out.force_base = [](const QuasiState&) { return Vec(0); };
  out.force_vert = [k](const QuasiState&) { return Vec::Zero(k); };
  out.kind = SodeKind::geodesic_spray;
  return out;
}

namespace detail {

inline Vec flatten_rm(const Mat& A) {
  Vec v(A.size());
  Eigen::Index idx = 0;
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    for (Eigen::Index c = 0; c < A.cols(); ++c) v[idx++] = A(r, c);
  }
  return v;
}

inline Mat unflatten_rm(const Vec& v, int n) {
  Mat A(n, n);
  Eigen::Index idx = 0;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) A(r, c) = v[idx++];
  }
  return A;
}

}  // namespace detail

namespace so3detail {

// z-x-z rotation: R = Rz(psi) Rx(theta) Rz(phi)
[[nodiscard]] inline Mat euler_to_matrix(const Vec& x) {
  const double cps = std::cos(x[0]), sps = std::sin(x[0]);
  const double ct = std::cos(x[1]), st = std::sin(x[1]);
  const double cph = std::cos(x[2]), sph = std::sin(x[2]);
  Mat R(3, 3);
  R << cps * cph - sps * ct * sph, -cps * sph - sps * ct * cph, sps * st,
       sps * cph + cps * ct * sph, -sps * sph + cps * ct * cph, -cps * st,
       st * sph, st * cph, ct;
  return R;
}

[[nodiscard]] inline Vec matrix_to_euler(const Mat& R) {
  Vec x(3);
  x[1] = std::acos(std::clamp(R(2, 2), -1.0, 1.0));
  x[0] = std::atan2(R(0, 2), -R(1, 2));
  x[2] = std::atan2(R(2, 0), R(2, 1));
  return x;
}

}  // namespace so3detail

namespace detail {

inline std::function<std::string(const Vec&)> theta_band_check(int theta_index,
                                                               double theta_min) {
  const double pi = std::numbers::pi;
  return [theta_index, theta_min, pi](const Vec& x) -> std::string {
    const double th = x[theta_index];
    if (th < theta_min || th > pi - theta_min) {
      return "theta in [" + fmt_double(theta_min) + ", pi - " + fmt_double(theta_min) +
             "] violated: theta = " + fmt_double(th);
    }
    return {};
  };
}

inline ChartPtr sphere_chart(double theta_min) {
  auto chart = std::make_shared<BundleChart>();
  chart->base_dim = 2;
  chart->group = groups::circle();
  chart->coord_names = {"psi", "theta", "phi"};
  chart->base_coord_names = {"theta", "phi"};
  chart->velocity_names = {"v_theta", "v_phi", "w"};
  chart->frame = [](const Vec& x) {
    Mat Z = Mat::Zero(3, 3);
    // columns: lift of d/dtheta, lift of d/dphi, fiber generator d/dpsi
    Z(1, 0) = 1.0;
    Z(0, 1) = -std::cos(x[1]);
    Z(2, 1) = 1.0;
    Z(0, 2) = 1.0;
    return Z;
  };
  chart->curvature = [](const Vec& x) {
    Mat R0 = Mat::Zero(2, 2);
    R0(0, 1) = std::sin(x[1]);
    R0(1, 0) = -std::sin(x[1]);
    return std::vector<Mat>{R0};
  };
  chart->projection = [](const Vec& x) { return Vec{x.segment(1, 2)}; };
  chart->action = [](const Vec& g, const Vec& x) {
    Vec out = x;
    out[0] += g[0];
    return out;
  };
  chart->domain_check = theta_band_check(1, theta_min);
  return chart;
}

inline BaseSODE sphere_geodesics() {
  BaseSODE base;
  base.base_dim = 2;
  base.force = [](const Vec& xb, const Vec& vb) {
    const double st = std::sin(xb[0]);
    const double ct = std::cos(xb[0]);
    Vec f(2);
    f[0] = st * ct * vb[1] * vb[1];
    f[1] = -2.0 * (ct / st) * vb[0] * vb[1];
    return f;
  };
  return base;
}

inline LagrangianData sphere_lagrangian(double coupling) {
  LagrangianData l;
  l.base_dim = 2;
  l.lagrangian = [](const Vec& xb, const Vec& vb) {
    const double st = std::sin(xb[0]);
    return 0.5 * (vb[0] * vb[0] + st * st * vb[1] * vb[1]);
  };
  l.base_metric = [](const Vec& xb) {
    Mat g = Mat::Zero(2, 2);
    g(0, 0) = 1.0;
    g(1, 1) = std::sin(xb[0]) * std::sin(xb[0]);
    return g;
  };
  l.vertical_form = (Mat(1, 1) << coupling).finished();
  return l;
}

inline void add_common_gamma2_fields(SystemBundle& sys) {
  const int k = sys.chart->fiber_dim();
  sys.gamma2_fields["zero"] = [k](const QuasiState&) { return Vec::Zero(k); };
  sys.gamma2_fields["const"] = [k](const QuasiState&) {
    return Vec::Constant(k, 0.25);
  };
}

}  // namespace detail

/// Round sphere quotient of the rotation group by the axial circle action:
/// Euler angles (psi, theta, phi), mechanical connection of the round metric,
/// base geodesic dynamics.
[[nodiscard]] inline SystemBundle make_so3_sphere(double theta_min = 1e-3) {
  const double pi = std::numbers::pi;
  SystemBundle sys;
  sys.id = "so3-sphere";
  sys.chart = detail::sphere_chart(theta_min);
  sys.base_sode = detail::sphere_geodesics();
  sys.primary = primary_unreduction(sys.base_sode, sys.chart);
  sys.lagrangian = detail::sphere_lagrangian(1.0);
  sys.default_box.x_lo = Vec{{-pi, 0.3, -pi}};
  sys.default_box.x_hi = Vec{{pi, pi - 0.3, pi}};
  sys.default_box.v_lo = Vec::Constant(3, -2.0);
  sys.default_box.v_hi = Vec::Constant(3, 2.0);
  sys.sample_group = [pi](Rng& rng) {
    std::uniform_real_distribution<double> dist(-pi, pi);
    return Vec::Constant(1, dist(rng));
  };
  detail::add_common_gamma2_fields(sys);
  sys.references = {"round-sphere geodesics un-reduced to the rotation group",
                    "axial circle action, mechanical connection"};
  return sys;
}

/// Same bundle as so3-sphere plus the geodesic spray of the full invariant
/// metric (base metric + coupling * connection form squared). Its vertical
/// momentum is conserved and it differs from the primary un-reduction by the
/// curvature distortion force.
[[nodiscard]] inline SystemBundle make_wong_so3(double coupling = 1.0) {
  SystemBundle sys = make_so3_sphere();
  sys.id = "wong-so3";
  sys.lagrangian = detail::sphere_lagrangian(coupling);

  TotalSODE spray;
  spray.chart = sys.chart;
  spray.kind = SodeKind::geodesic_spray;
  spray.force_base = [coupling](const QuasiState& s) {
    const double st = std::sin(s.x[1]);
    const double ct = std::cos(s.x[1]);
    const double v1 = s.v_base[0], v2 = s.v_base[1], w = s.v_vert[0];
    Vec f(2);
    f[0] = st * ct * v2 * v2 - coupling * st * v2 * w;
    f[1] = -2.0 * (ct / st) * v1 * v2 + (coupling / st) * v1 * w;
    return f;
  };
  spray.force_vert = [](const QuasiState&) { return Vec::Zero(1); };
  sys.extras["wong_spray"] = spray;
  sys.references = {"charged particle on the round sphere in a monopole field",
                    "geodesic spray of the full invariant metric vs the un-reduced base spray"};
  return sys;
}

/// Positive determinant matrices over the positive reals by det, with the
/// unimodular subgroup acting on the right. Coordinates are the matrix
/// entries (row major); the horizontal frame field is A / (n det A), the lift
/// of d/dx through the trace/traceless splitting of the algebra.
[[nodiscard]] inline SystemBundle make_glplus(int n, double det_tol = 1e-8) {
  using detail::flatten_rm;
  using detail::unflatten_rm;
  SystemBundle sys;
  sys.id = "glplus-" + std::to_string(n);

  auto chart = std::make_shared<BundleChart>();
  chart->base_dim = 1;
  chart->group = groups::special_linear(n);
  chart->action_is_right = true;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      chart->coord_names.push_back("a" + std::to_string(r + 1) + std::to_string(c + 1));
    }
  }
  chart->base_coord_names = {"det"};
  chart->velocity_names = {"v_det"};
  for (const auto& name : chart->group.basis_names) {
    chart->velocity_names.push_back("xi_" + name);
  }
  auto basis = groups::sl_basis(n);
  chart->frame = [n, basis](const Vec& xv) {
    Mat A = unflatten_rm(xv, n);
    const double det = A.determinant();
    Mat Z(n * n, 1 + static_cast<int>(basis.size()));
    Z.col(0) = flatten_rm(A / (static_cast<double>(n) * det));
    for (size_t a = 0; a < basis.size(); ++a) {
      Z.col(1 + static_cast<Eigen::Index>(a)) = flatten_rm(A * basis[a]);
    }
    return Z;
  };
  chart->projection = [n](const Vec& xv) {
    return Vec::Constant(1, unflatten_rm(xv, n).determinant());
  };
  chart->action = [n](const Vec& g, const Vec& xv) {
    return flatten_rm(unflatten_rm(xv, n) * unflatten_rm(g, n));
  };
  chart->domain_check = [n, det_tol](const Vec& xv) -> std::string {
    const double det = unflatten_rm(xv, n).determinant();
    if (!(det > det_tol)) {
      return "det(A) > " + fmt_double(det_tol) + " violated: det(A) = " + fmt_double(det);
    }
    return {};
  };
  sys.chart = chart;

  sys.base_sode.base_dim = 1;
  sys.base_sode.force = [](const Vec& xb, const Vec& vb) {
    return Vec::Constant(1, vb[0] * vb[0] / xb[0]);
  };
  sys.primary = primary_unreduction(sys.base_sode, sys.chart);

  LagrangianData l;
  l.base_dim = 1;
  l.lagrangian = [](const Vec& xb, const Vec& vb) {
    return 0.5 * vb[0] * vb[0] / (xb[0] * xb[0]);
  };
  l.base_metric = [](const Vec& xb) { return Mat::Constant(1, 1, 1.0 / (xb[0] * xb[0])); };
  sys.lagrangian = l;

  const int k = chart->fiber_dim();
  Vec id_flat = flatten_rm(Mat::Identity(n, n));
  sys.default_box.x_lo = (id_flat.array() - 0.3).matrix();
  sys.default_box.x_hi = (id_flat.array() + 0.3).matrix();
  sys.default_box.v_lo = Vec::Constant(1 + k, -0.5);
  sys.default_box.v_hi = Vec::Constant(1 + k, 0.5);
  sys.default_box.v_lo[0] = -1.5;
  sys.default_box.v_hi[0] = 1.5;
  sys.sample_group = [basis, n](Rng& rng) {
    std::uniform_real_distribution<double> dist(-0.3, 0.3);
    Mat xi = Mat::Zero(n, n);
    for (const auto& e : basis) xi += dist(rng) * e;
    return detail::flatten_rm(expm(xi));
  };
  detail::add_common_gamma2_fields(sys);

  // Left-invariant chart of the full matrix group (bundle over a point);
  // the canonical spray lives here with every quasi-velocity constant.
  {
    auto gchart = std::make_shared<BundleChart>();
    gchart->base_dim = 0;
    gchart->group = groups::general_linear(n);
    gchart->action_is_right = true;
    gchart->coord_names = chart->coord_names;
    for (const auto& name : gchart->group.basis_names) {
      gchart->velocity_names.push_back("v_" + name);
    }
    std::vector<Mat> gl_basis;
    gl_basis.push_back(Mat::Identity(n, n));
    for (auto& m : groups::sl_basis(n)) gl_basis.push_back(std::move(m));
    gchart->frame = [n, gl_basis](const Vec& xv) {
      Mat A = unflatten_rm(xv, n);
      Mat Z(n * n, static_cast<int>(gl_basis.size()));
      for (size_t a = 0; a < gl_basis.size(); ++a) {
        Z.col(static_cast<Eigen::Index>(a)) = flatten_rm(A * gl_basis[a]);
      }
      return Z;
    };
    gchart->projection = [](const Vec&) { return Vec(0); };
    gchart->action = chart->action;
    gchart->domain_check = chart->domain_check;
    sys.extras["canonical"] = make_canonical_spray(gchart);
  }

  sys.references = {"scaling bundle of positive-determinant matrices over the positive reals",
                    "canonical spray restricted along the trace/traceless splitting"};
  return sys;
}

/// Rotation group as a bundle over a point with the right action on itself:
/// the primary un-reduction of the empty base field is the canonical spray,
/// with body-frame quasi-velocities constant along motions.
[[nodiscard]] inline SystemBundle make_canonical_so3(double theta_min = 1e-3) {
  const double pi = std::numbers::pi;
  SystemBundle sys;
  sys.id = "canonical-so3";

  auto chart = std::make_shared<BundleChart>();
  chart->base_dim = 0;
  chart->group = groups::so3();
  chart->action_is_right = true;
  chart->coord_names = {"psi", "theta", "phi"};
  chart->velocity_names = {"om1", "om2", "om3"};
  chart->frame = [](const Vec& x) {
    const double st = std::sin(x[1]), ct = std::cos(x[1]);
    const double sph = std::sin(x[2]), cph = std::cos(x[2]);
    Mat Z(3, 3);
    // columns: left-invariant fields of e1, e2, e3 in (psi, theta, phi)
    Z << sph / st, cph / st, 0.0,
         cph, -sph, 0.0,
         -ct * sph / st, -ct * cph / st, 1.0;
    return Z;
  };
  chart->projection = [](const Vec&) { return Vec(0); };
  chart->action = [](const Vec& g, const Vec& x) {
    return so3detail::matrix_to_euler(so3detail::euler_to_matrix(x) *
                                      so3detail::euler_to_matrix(g));
  };
  chart->domain_check = detail::theta_band_check(1, theta_min);
  sys.chart = chart;

  sys.base_sode.base_dim = 0;
  sys.base_sode.force = [](const Vec&, const Vec&) { return Vec(0); };
  sys.primary = primary_unreduction(sys.base_sode, sys.chart);

  sys.default_box.x_lo = Vec{{-pi, 1.2, -pi}};
  sys.default_box.x_hi = Vec{{pi, pi - 1.2, pi}};
  sys.default_box.v_lo = Vec::Constant(3, -0.8);
  sys.default_box.v_hi = Vec::Constant(3, 0.8);
  sys.check_horizon = 0.5;
  sys.sample_group = [pi](Rng& rng) {
    std::uniform_real_distribution<double> ang(-pi, pi);
    std::uniform_real_distribution<double> th(0.5, pi - 0.5);
    Vec g(3);
    g << ang(rng), th(rng), ang(rng);
    return g;
  };
  sys.references = {"canonical spray of the rotation group in Euler angles",
                    "one-parameter subgroup motions, body angular velocity constant"};
  return sys;
}

/// Flat trivial bundle fixture: identity frame, zero curvature, translation
/// fiber, harmonic base dynamics (so convergence order is measurable).
[[nodiscard]] inline SystemBundle make_flat_product() {
  SystemBundle sys;
  sys.id = "flat-product";

  auto chart = std::make_shared<BundleChart>();
  chart->base_dim = 2;
  chart->group = groups::real_line();
  chart->coord_names = {"x", "y", "z"};
  chart->base_coord_names = {"x", "y"};
  chart->velocity_names = {"v_x", "v_y", "w"};
  chart->frame = [](const Vec&) { return Mat::Identity(3, 3); };
  chart->projection = [](const Vec& x) { return Vec{x.head(2)}; };
  chart->action = [](const Vec& g, const Vec& x) {
    Vec out = x;
    out[2] += g[0];
    return out;
  };
  sys.chart = chart;

  sys.base_sode.base_dim = 2;
  sys.base_sode.force = [](const Vec& xb, const Vec&) { return Vec{-xb}; };
  sys.primary = primary_unreduction(sys.base_sode, sys.chart);

  LagrangianData l;
  l.base_dim = 2;
  l.lagrangian = [](const Vec& xb, const Vec& vb) {
    return 0.5 * vb.squaredNorm() - 0.5 * xb.squaredNorm();
  };
  l.base_metric = [](const Vec&) { return Mat{Mat::Identity(2, 2)}; };
  l.vertical_form = Mat::Identity(1, 1);
  sys.lagrangian = l;

  sys.default_box.x_lo = Vec::Constant(3, -1.0);
  sys.default_box.x_hi = Vec::Constant(3, 1.0);
  sys.default_box.v_lo = Vec::Constant(3, -1.0);
  sys.default_box.v_hi = Vec::Constant(3, 1.0);
  sys.sample_group = [](Rng& rng) {
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    return Vec::Constant(1, dist(rng));
  };
  detail::add_common_gamma2_fields(sys);
  sys.references = {"flat product bundle with zero curvature",
                    "harmonic base dynamics for convergence measurements"};
  return sys;
}

/// Samples the primary field against a fresh primary un-reduction of the
/// declared base data and checks the vertical force vanishes. Guards the
/// registry against hand-edited primaries drifting from their base dynamics.
inline void validate_system(const SystemBundle& sys, int n_samples = 50, unsigned seed = 7,
                            double tol = 1e-12) {
  validate_group(sys.chart->group);
  TotalSODE rebuilt = primary_unreduction(sys.base_sode, sys.chart);
  Rng rng(seed);
  for (int i = 0; i < n_samples; ++i) {
    QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
    StateDeriv a = eval_sode(sys.primary, s);
    StateDeriv b = eval_sode(rebuilt, s);
    double r = 0.0;
    if (a.vdot_base.size() > 0) {
      r = std::max(r, (a.vdot_base - b.vdot_base).cwiseAbs().maxCoeff());
    }
    if (a.vdot_vert.size() > 0) {
      r = std::max(r, a.vdot_vert.cwiseAbs().maxCoeff());
    }
    if (r > tol) {
      throw validation_error("system " + sys.id +
                             ": primary field does not re-derive from its base data, residual " +
                             fmt_double(r));
    }
  }
}

inline const std::map<std::string, SystemBundle>& registry() {
  static const std::map<std::string, SystemBundle> reg = [] {
    std::map<std::string, SystemBundle> r;
    for (SystemBundle sys : {make_so3_sphere(), make_wong_so3(), make_glplus(2), make_glplus(3),
                             make_canonical_so3(), make_flat_product()}) {
      validate_system(sys);
      r.emplace(sys.id, std::move(sys));
    }
    return r;
  }();
  return reg;
}

inline const SystemBundle& get_system(const std::string& id) {
  const auto& reg = registry();
  auto it = reg.find(id);
  if (it == reg.end()) {
    std::string known;
    for (const auto& [k, v] : reg) known += (known.empty() ? "" : ", ") + k;
    throw validation_error("unknown system '" + id + "' (known: " + known + ")");
  }
  return it->second;
}

/// Resolves a run selector to a total-space field. Selectors: "primary", any
/// extras key (e.g. "wong_spray", "canonical"), or "gamma2:<name>" over a
/// registered vertical force.
[[nodiscard]] inline TotalSODE select_sode(const SystemBundle& sys, const std::string& selector) {
  if (selector == "primary") return sys.primary;
  if (auto it = sys.extras.find(selector); it != sys.extras.end()) return it->second;
  if (selector.rfind("gamma2:", 0) == 0) {
    std::string name = selector.substr(7);
    auto it = sys.gamma2_fields.find(name);
    if (it == sys.gamma2_fields.end()) {
      throw validation_error("system " + sys.id + " has no gamma2 field '" + name + "'");
    }
    return gamma2(sys.primary, it->second);
  }
  std::string known = "primary";
  for (const auto& [k, v] : sys.extras) known += ", " + k;
  for (const auto& [k, v] : sys.gamma2_fields) known += ", gamma2:" + k;
  throw validation_error("system " + sys.id + " has no selector '" + selector +
                         "' (known: " + known + ", base)");
}

[[nodiscard]] inline nlohmann::json system_descriptor(const SystemBundle& sys) {
  nlohmann::json j;
  j["id"] = sys.id;
  j["base_dim"] = sys.chart->base_dim;
  j["fiber_dim"] = sys.chart->fiber_dim();
  j["coord_names"] = sys.chart->coord_names;
  j["base_coord_names"] = sys.chart->base_coord_names;
  j["velocity_names"] = sys.chart->velocity_names;
  std::vector<std::string> sodes = {"base", "primary"};
  for (const auto& [k, v] : sys.extras) sodes.push_back(k);
  for (const auto& [k, v] : sys.gamma2_fields) sodes.push_back("gamma2:" + k);
  j["sodes"] = sodes;
  j["references"] = sys.references;
  return j;
}

}  // namespace unreduce
