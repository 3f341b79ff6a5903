#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "test_support.hpp"
#include "unreduce/analysis.hpp"
#include "unreduce/integrate.hpp"
#include "unreduce/systems.hpp"

using namespace unreduce;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("registry contents") {
  const auto& reg = registry();
  REQUIRE(reg.size() == 6);
  for (const std::string id :
       {"so3-sphere", "wong-so3", "glplus-2", "glplus-3", "canonical-so3", "flat-product"}) {
    REQUIRE(reg.count(id) == 1);
  }
  REQUIRE_THROWS_AS(get_system("bogus"), validation_error);
  try {
    get_system("bogus");
  } catch (const validation_error& e) {
    REQUIRE(std::string(e.what()).find("so3-sphere") != std::string::npos);
  }
}

TEST_CASE("sphere base force values") {
  const auto& sys = get_system("so3-sphere");
  // sin(pi/3) cos(pi/3) = sqrt(3)/4 at unit phi-rate
  Vec f = sys.base_sode.force(Vec{{kPi / 3.0, 0.0}}, Vec{{0.0, 1.0}});
  REQUIRE(f[0] == Catch::Approx(0.4330127018922193).margin(1e-16));
  REQUIRE(f[1] == 0.0);

  Vec g = sys.base_sode.force(Vec{{kPi / 4.0, 1.0}}, Vec{{0.5, 0.8}});
  REQUIRE(g[1] == Catch::Approx(-0.8).margin(1e-15));

  // great circles preserve speed; spot-check along a short run
  QuasiState s0{Vec{{0.0, 1.1, 0.0}}, Vec{{0.4, 0.7}}, Vec{{0.0}}};
  Trajectory traj = integrate(sys.primary, s0, 1.0, 1e-3);
  REQUIRE(traj.complete());
  auto speed2 = [](const QuasiState& s) {
    const double st = std::sin(s.x[1]);
    return s.v_base[0] * s.v_base[0] + st * st * s.v_base[1] * s.v_base[1];
  };
  REQUIRE(std::abs(speed2(traj.states.back()) - speed2(s0)) <= 1e-10);
}

TEST_CASE("invariant-metric spray values") {
  const auto& sys = get_system("wong-so3");
  const auto& spray = sys.extras.at("wong_spray");

  QuasiState s;
  s.x = Vec{{0.0, kPi / 2.0, 0.0}};
  s.v_base = Vec{{0.0, 1.0}};
  s.v_vert = Vec{{2.0}};
  StateDeriv d = eval_sode(spray, s);
  // at the equator the coupling term is -w v_phi
  REQUIRE(d.vdot_base[0] == Catch::Approx(-2.0).margin(1e-15));
  REQUIRE(std::abs(d.vdot_base[1]) <= 1e-15);
  REQUIRE(d.vdot_vert[0] == 0.0);
}

TEST_CASE("spray gap equals the curvature distortion force") {
  const auto& sys = get_system("wong-so3");
  const auto& spray = sys.extras.at("wong_spray");
  const auto& lag = *sys.lagrangian;

  SECTION("frozen value at the equator") {
    QuasiState s;
    s.x = Vec{{0.0, kPi / 2.0, 0.0}};
    s.v_base = Vec{{0.0, 1.0}};
    s.v_vert = Vec{{2.0}};
    Vec A = curvature_distortion(*sys.chart, lag.base_metric, *lag.vertical_form, s);
    REQUIRE(A[0] == Catch::Approx(-2.0).margin(1e-15));
    REQUIRE(std::abs(A[1]) <= 1e-15);
  }

  SECTION("frozen value at mid latitude") {
    QuasiState s;
    s.x = Vec{{0.3, kPi / 4.0, -0.2}};
    s.v_base = Vec{{1.0, 0.7}};
    s.v_vert = Vec{{1.0}};
    StateDeriv dg = eval_sode(spray, s);
    StateDeriv d1 = eval_sode(get_system("wong-so3").primary, s);
    Vec gap = dg.vdot_base - d1.vdot_base;
    REQUIRE(gap[0] == Catch::Approx(-std::sin(kPi / 4.0) * 0.7).margin(1e-15));
    REQUIRE(gap[1] == Catch::Approx(std::numbers::sqrt2).margin(1e-14));
  }

  SECTION("identity holds over sampled states") {
    Rng rng(41);
    for (int i = 0; i < 50; ++i) {
      QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
      StateDeriv dg = eval_sode(spray, s);
      StateDeriv d1 = eval_sode(sys.primary, s);
      Vec A = curvature_distortion(*sys.chart, lag.base_metric, *lag.vertical_form, s);
      REQUIRE((dg.vdot_base - d1.vdot_base - A).cwiseAbs().maxCoeff() <= 1e-14);
      REQUIRE((dg.vdot_vert - d1.vdot_vert).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SECTION("wrong-shaped fiber form is rejected") {
    QuasiState s{Vec{{0.0, 1.3, 0.0}}, Vec{{0.1, 0.1}}, Vec{{0.0}}};
    REQUIRE_THROWS_AS(curvature_distortion(*sys.chart, lag.base_metric, Mat::Identity(2, 2), s),
                      validation_error);
  }
}

TEST_CASE("vertical momentum is constant along the invariant-metric spray") {
  const auto& sys = get_system("wong-so3");
  const auto& spray = sys.extras.at("wong_spray");
  QuasiState s0{Vec{{0.0, kPi / 3.0, 0.0}}, Vec{{0.3, 0.9}}, Vec{{0.8}}};
  Trajectory traj = integrate(spray, s0, 1.0, 1e-3);
  REQUIRE(traj.complete());
  for (const auto& s : traj.states) {
    REQUIRE(s.v_vert[0] == 0.8);  // bit identical: the vertical force vanishes
  }
}

TEST_CASE("equatorial motion of the invariant-metric spray at zero momentum") {
  const auto& sys = get_system("wong-so3");
  const auto& spray = sys.extras.at("wong_spray");
  QuasiState s0{Vec{{0.0, kPi / 2.0, 0.0}}, Vec{{0.0, 1.0}}, Vec{{0.0}}};
  Trajectory traj = integrate(spray, s0, kPi / 2.0, 1e-3);
  REQUIRE(traj.complete());
  for (size_t i = 0; i < traj.times.size(); ++i) {
    REQUIRE(std::abs(traj.states[i].x[1] - kPi / 2.0) <= 1e-12);
    REQUIRE(std::abs(traj.states[i].x[2] - traj.times[i]) <= 1e-12);
  }
}

TEST_CASE("nonzero vertical momentum bends the projected path") {
  const auto& sys = get_system("wong-so3");
  const auto& spray = sys.extras.at("wong_spray");
  QuasiState s0{Vec{{0.0, kPi / 3.0, 0.0}}, Vec{{0.3, 0.9}}, Vec{{1.0}}};
  ProjectionCompare cmp = compare_projection(sys, spray, s0, 1.0, 1e-3);
  REQUIRE(cmp.clean);
  REQUIRE(cmp.max_err >= 1e-3);

  QuasiState h0 = s0;
  h0.v_vert.setZero();
  ProjectionCompare cmp0 = compare_projection(sys, spray, h0, 1.0, 1e-3);
  REQUIRE(cmp0.clean);
  REQUIRE(cmp0.max_err == 0.0);
}

TEST_CASE("matrix bundle velocity split") {
  const auto& sys = get_system("glplus-2");
  Vec id_flat{{1.0, 0.0, 0.0, 1.0}};
  QuasiState s = coords_to_quasi(*sys.chart, id_flat, id_flat);  // A = I, Adot = I
  // d(det)/dt at the identity along the identity direction is the dimension
  // times the frame normalization: v_det = 2
  REQUIRE(s.v_base[0] == Catch::Approx(2.0).margin(1e-13));
  REQUIRE(s.v_vert.cwiseAbs().maxCoeff() <= 1e-13);

  Vec f = sys.base_sode.force(Vec::Constant(1, 2.0), Vec::Constant(1, 3.0));
  REQUIRE(f[0] == 4.5);
}

TEST_CASE("determinant grows exponentially along the horizontal lift") {
  for (const std::string id : {"glplus-2", "glplus-3"}) {
    const auto& sys = get_system(id);
    const int nn = sys.chart->dim();
    const int n = nn == 4 ? 2 : 3;
    QuasiState s0 = horizontal_lift_ic(*sys.chart, detail::flatten_rm(Mat::Identity(n, n)),
                                       Vec::Constant(1, 1.0));
    Trajectory traj = integrate(sys.primary, s0, 1.0, 1e-3);
    REQUIRE(traj.complete());
    INFO(id);
    for (size_t i = 0; i < traj.times.size(); i += 100) {
      const double det = sys.chart->projection(traj.states[i].x)[0];
      REQUIRE(std::abs(det - std::exp(traj.times[i])) <= 1e-9);
    }
    // the lift from the identity scales uniformly: A(t) = e^{t/n} I
    Mat A = detail::unflatten_rm(traj.states.back().x, n);
    Mat expect = std::exp(1.0 / n) * Mat::Identity(n, n);
    REQUIRE((A - expect).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("euler chart of the rotation group") {
  const auto& sys = get_system("canonical-so3");

  SECTION("chart maps invert each other") {
    Rng rng(53);
    for (int i = 0; i < 50; ++i) {
      QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
      Mat R = so3detail::euler_to_matrix(s.x);
      REQUIRE((R * R.transpose() - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-14);
      REQUIRE(R.determinant() == Catch::Approx(1.0).margin(1e-13));
      Vec back = so3detail::matrix_to_euler(R);
      REQUIRE((back - s.x).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }

  SECTION("frame columns are the body-frame generator fields") {
    // D(euler_to_matrix) applied to a frame column must equal R * hat(e_a)
    Rng rng(59);
    const double eps = 1e-6;
    for (int i = 0; i < 20; ++i) {
      QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
      Mat Z = sys.chart->frame(s.x);
      Mat R = so3detail::euler_to_matrix(s.x);
      for (int a = 0; a < 3; ++a) {
        Vec e = Vec::Zero(3);
        e[a] = 1.0;
        Mat dR = (so3detail::euler_to_matrix(s.x + eps * Z.col(a)) -
                  so3detail::euler_to_matrix(s.x - eps * Z.col(a))) /
                 (2.0 * eps);
        Mat expect = R * groups::hat3(e);
        REQUIRE((dR - expect).cwiseAbs().maxCoeff() <= 1e-6);
      }
    }
  }

  SECTION("spray runs follow one-parameter subgroups") {
    QuasiState s0;
    s0.x = Vec{{0.4, 1.4, -0.7}};
    s0.v_base = Vec(0);
    s0.v_vert = Vec{{0.25, -0.2, 0.6}};
    Trajectory traj = integrate(sys.primary, s0, 1.0, 1e-3);
    REQUIRE(traj.complete());
    Mat R0 = so3detail::euler_to_matrix(s0.x);
    for (size_t i = 0; i < traj.times.size(); i += 200) {
      Mat expect = R0 * testsupport::rodrigues(traj.times[i] * s0.v_vert);
      Mat got = so3detail::euler_to_matrix(traj.states[i].x);
      REQUIRE((got - expect).cwiseAbs().maxCoeff() <= 1e-10);
    }
    // body rates are constants of motion, bit for bit
    REQUIRE((traj.states.back().v_vert - s0.v_vert).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("flat product bundle") {
  const auto& sys = get_system("flat-product");
  QuasiState s0{Vec{{1.0, 0.0, 0.0}}, Vec{{0.0, 1.0}}, Vec{{0.5}}};
  Trajectory traj = integrate(sys.primary, s0, 1.0, 1e-3);
  REQUIRE(traj.complete());
  REQUIRE(std::abs(traj.states.back().x[0] - std::cos(1.0)) <= 1e-11);
  REQUIRE(std::abs(traj.states.back().x[1] - std::sin(1.0)) <= 1e-11);
  REQUIRE(verify_curvature(*sys.chart, s0.x) == 0.0);
}

TEST_CASE("field selectors") {
  const auto& sys = get_system("wong-so3");
  REQUIRE(select_sode(sys, "primary").kind == SodeKind::primary);
  REQUIRE(select_sode(sys, "wong_spray").kind == SodeKind::geodesic_spray);
  REQUIRE(select_sode(sys, "gamma2:const").kind == SodeKind::gamma2);
  REQUIRE_THROWS_AS(select_sode(sys, "gamma2:nope"), validation_error);
  REQUIRE_THROWS_WITH((void)select_sode(sys, "nope"),
                      Catch::Matchers::ContainsSubstring("wong_spray"));

  const auto& gl = get_system("glplus-2");
  const auto& canon = gl.extras.at("canonical");
  REQUIRE(canon.kind == SodeKind::geodesic_spray);
  REQUIRE(canon.chart->base_dim == 0);
  REQUIRE(canon.chart->fiber_dim() == 4);
}

TEST_CASE("system descriptors") {
  nlohmann::json j = system_descriptor(get_system("wong-so3"));
  REQUIRE(j["id"] == "wong-so3");
  REQUIRE(j["base_dim"] == 2);
  REQUIRE(j["fiber_dim"] == 1);
  std::vector<std::string> sodes = j["sodes"].get<std::vector<std::string>>();
  REQUIRE(std::find(sodes.begin(), sodes.end(), "wong_spray") != sodes.end());
  REQUIRE(std::find(sodes.begin(), sodes.end(), "primary") != sodes.end());
}

TEST_CASE("registry validation catches inconsistent primaries") {
  SystemBundle sys = make_so3_sphere();
  auto orig = sys.primary.force_base;
  sys.primary.force_base = [orig](const QuasiState& s) { return Vec(-orig(s)); };
  REQUIRE_THROWS_AS(validate_system(sys), validation_error);

  SystemBundle sys2 = make_so3_sphere();
  sys2.primary.force_vert = [](const QuasiState&) { return Vec::Constant(1, 0.2); };
  REQUIRE_THROWS_AS(validate_system(sys2), validation_error);
}

TEST_CASE("canonical spray construction requires a bare group chart") {
  const auto& sys = get_system("so3-sphere");
  REQUIRE_THROWS_AS(make_canonical_spray(sys.chart), validation_error);
}
