#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "unreduce/integrate.hpp"
#include "unreduce/sode.hpp"
#include "unreduce/systems.hpp"

using namespace unreduce;

TEST_CASE("lifted field evaluates the base force at the projected state") {
  const auto& sys = get_system("so3-sphere");
  const double pi = std::numbers::pi;
  QuasiState s;
  s.x = Vec{{0.7, pi / 3.0, -0.2}};
  s.v_base = Vec{{0.0, 1.0}};
  s.v_vert = Vec{{0.6}};
  StateDeriv d = eval_sode(sys.primary, s);
  // sin(pi/3) cos(pi/3) = sqrt(3)/4
  REQUIRE(d.vdot_base[0] == Catch::Approx(0.4330127018922193).margin(1e-15));
  REQUIRE(d.vdot_base[1] == 0.0);
  REQUIRE(d.vdot_vert[0] == 0.0);
  // xdot = Z v: psi_dot = -cos(theta) v_phi + w, theta_dot = v_theta, phi_dot = v_phi
  REQUIRE(d.xdot[0] == Catch::Approx(0.6 - 0.5).margin(1e-15));
  REQUIRE(d.xdot[1] == 0.0);
  REQUIRE(d.xdot[2] == 1.0);
}

TEST_CASE("vertical correction field is the generator combination") {
  const auto& sys = get_system("so3-sphere");
  QuasiState s;
  s.x = Vec{{0.7, 1.1, -0.2}};
  s.v_base = Vec{{0.4, -0.9}};
  s.v_vert = Vec{{0.6}};
  Vec xw = x_omega(*sys.chart, s);
  REQUIRE(xw[0] == 0.6);  // generator column is d/dpsi
  REQUIRE(xw[1] == 0.0);
  REQUIRE(xw[2] == 0.0);
  // consistency: full coordinate velocity minus the pure-horizontal one
  // (two matrix products, so only equal up to summation roundoff)
  QuasiState h = s;
  h.v_vert.setZero();
  Vec diff = quasi_to_coords(*sys.chart, s) - quasi_to_coords(*sys.chart, h);
  REQUIRE((diff - xw).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("construction guards") {
  const auto& sys = get_system("so3-sphere");
  BaseSODE wrong;
  wrong.base_dim = 3;
  wrong.force = [](const Vec&, const Vec& v) { return v; };
  REQUIRE_THROWS_AS(primary_unreduction(wrong, sys.chart), validation_error);

  TotalSODE g2 = gamma2(sys.primary, [](const QuasiState&) { return Vec::Zero(1); });
  REQUIRE(g2.kind == SodeKind::gamma2);
  REQUIRE_THROWS_AS(gamma2(g2, [](const QuasiState&) { return Vec::Zero(1); }),
                    validation_error);
}

TEST_CASE("constant vertical force integrates to linear vertical velocity") {
  const auto& sys = get_system("so3-sphere");
  TotalSODE g2 = gamma2(sys.primary, [](const QuasiState&) { return Vec::Constant(1, 0.25); });
  QuasiState s0;
  s0.x = Vec{{0.0, 1.1, 0.0}};
  s0.v_base = Vec{{0.3, 0.5}};
  s0.v_vert = Vec{{0.5}};
  Trajectory a = integrate(g2, s0, 1.0, 1e-3);
  Trajectory b = integrate(sys.primary, s0, 1.0, 1e-3);
  REQUIRE(a.complete());
  REQUIRE(std::abs(a.states.back().v_vert[0] - 0.75) <= 1e-12);

  // the base subsystem is closed, so adding a vertical force leaves the base
  // components bit identical
  for (size_t i = 0; i < a.states.size(); ++i) {
    REQUIRE(a.states[i].x[1] == b.states[i].x[1]);
    REQUIRE(a.states[i].x[2] == b.states[i].x[2]);
    REQUIRE((a.states[i].v_base - b.states[i].v_base).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("slice-anchored fields must collapse to the declared base") {
  const auto& sys = get_system("so3-sphere");
  auto chart = sys.chart;
  auto base_force = sys.base_sode.force;
  auto proj = chart->projection;

  // vanishes at w = 0, so this is a legitimate extension
  auto force_base_ok = [base_force, proj](const QuasiState& s) {
    Vec f = base_force(proj(s.x), s.v_base);
    f[0] += 0.3 * s.v_vert[0];
    return f;
  };
  auto force_vert_ok = [](const QuasiState& s) {
    return Vec::Constant(1, s.v_vert[0] * s.v_vert[0]);
  };
  TotalSODE g3 = gamma3(sys.base_sode, force_base_ok, force_vert_ok, chart, sys.default_box,
                        50, 13);
  REQUIRE(g3.kind == SodeKind::gamma3);

  QuasiState s;
  s.x = Vec{{0.0, 1.2, 0.0}};
  s.v_base = Vec{{0.2, 0.4}};
  s.v_vert = Vec{{0.8}};
  StateDeriv d3 = eval_sode(g3, s);
  StateDeriv d1 = eval_sode(sys.primary, s);
  REQUIRE(d3.vdot_base[0] - d1.vdot_base[0] == Catch::Approx(0.3 * 0.8).margin(1e-15));

  // constant vertical force does not vanish on the slice: rejected
  auto force_vert_bad = [](const QuasiState&) { return Vec::Constant(1, 0.1); };
  REQUIRE_THROWS_AS(gamma3(sys.base_sode, force_base_ok, force_vert_bad, chart,
                           sys.default_box, 50, 13),
                    validation_error);
}

TEST_CASE("second-order condition in quasi-velocity form") {
  for (const auto& [id, sys] : registry()) {
    INFO(id);
    REQUIRE(sode_condition_check(sys.primary, sys.default_box, 60, 3) <= 1e-12);
  }

  SECTION("horizontal lift without the vertical correction is flagged") {
    const auto& sys = get_system("so3-sphere");
    auto chart = sys.chart;
    auto force = sys.primary.force_base;
    FlowField lift_only = [chart, force](const QuasiState& s) {
      StateDeriv d;
      QuasiState h = s;
      h.v_vert.setZero();
      d.xdot = chart->frame(s.x) * h.quasi_velocity();
      d.vdot_base = force(s);
      d.vdot_vert = Vec::Zero(1);
      return d;
    };
    QuasiState worst;
    double dev = sode_condition_check(*chart, lift_only, sys.default_box, 100, 3, &worst);
    REQUIRE(dev >= 0.5);  // deviation equals |w| at the worst sample
    REQUIRE(std::abs(dev - std::abs(worst.v_vert[0])) <= 1e-12);
  }
}

TEST_CASE("non-finite field coefficients are reported") {
  const auto& sys = get_system("so3-sphere");
  TotalSODE bad = sys.primary;
  bad.force_base = [](const QuasiState&) {
    return Vec::Constant(2, std::numeric_limits<double>::quiet_NaN());
  };
  QuasiState s;
  s.x = Vec{{0.0, 1.0, 0.0}};
  s.v_base = Vec::Zero(2);
  s.v_vert = Vec::Zero(1);
  REQUIRE_THROWS_AS(eval_sode(bad, s), numeric_error);
}

TEST_CASE("conditions for inducing base dynamics") {
  SECTION("lifted field satisfies both conditions") {
    const auto& sys = get_system("so3-sphere");
    SubmersiveReport rep = submersive_check(sys.primary, sys.default_box, 40, 19);
    REQUIRE(rep.invariance_residual <= 1e-10);
    REQUIRE(rep.vertical_independence_residual <= 1e-10);
  }

  SECTION("full-metric spray is invariant but reads the vertical velocity") {
    const auto& sys = get_system("wong-so3");
    SubmersiveReport rep =
        submersive_check(sys.extras.at("wong_spray"), sys.default_box, 40, 19);
    REQUIRE(rep.invariance_residual <= 1e-10);
    REQUIRE(rep.vertical_independence_residual >= 0.05);
    REQUIRE(rep.max_residual() == rep.vertical_independence_residual);
  }

  SECTION("matrix system with a nonabelian fiber passes") {
    const auto& sys = get_system("glplus-2");
    SubmersiveReport rep = submersive_check(sys.primary, sys.default_box, 40, 19);
    REQUIRE(rep.invariance_residual <= 1e-8);
    REQUIRE(rep.vertical_independence_residual <= 1e-8);
  }

  SECTION("fiber-coordinate dependence is flagged") {
    const auto& sys = get_system("so3-sphere");
    TotalSODE broken = sys.primary;
    auto orig = sys.primary.force_base;
    broken.force_base = [orig](const QuasiState& s) {
      return Vec((orig(s).array() + 0.5 * std::sin(s.x[0])).matrix());
    };
    SubmersiveReport rep = submersive_check(broken, sys.default_box, 40, 19);
    REQUIRE(rep.invariance_residual >= 0.05);
  }
}
