#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "unreduce/chart.hpp"
#include "unreduce/systems.hpp"

using namespace unreduce;

TEST_CASE("velocity split round trips through the frame") {
  for (const auto& [id, sys] : registry()) {
    Rng rng(31);
    for (int i = 0; i < 50; ++i) {
      QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
      Vec xdot = quasi_to_coords(*sys.chart, s);
      QuasiState back = coords_to_quasi(*sys.chart, s.x, xdot);
      INFO(id);
      REQUIRE((back.quasi_velocity() - s.quasi_velocity()).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("velocity split on the sphere bundle at the equator") {
  const auto& sys = get_system("so3-sphere");
  const double pi = std::numbers::pi;
  Vec x{{0.0, pi / 2.0, 0.0}};
  Vec xdot{{2.0, 0.0, 1.0}};  // (psi_dot, theta_dot, phi_dot)
  QuasiState s = coords_to_quasi(*sys.chart, x, xdot);
  // at the equator the phi lift has no psi component, so the fiber rate
  // carries all of psi_dot
  REQUIRE(s.v_base[0] == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(s.v_base[1] == Catch::Approx(1.0).margin(1e-14));
  REQUIRE(s.v_vert[0] == Catch::Approx(2.0).margin(1e-13));
}

TEST_CASE("ill conditioned frames are rejected") {
  auto chart = std::make_shared<BundleChart>();
  chart->base_dim = 2;
  chart->group = GroupModel{};  // trivial fiber
  chart->coord_names = {"x", "y"};
  chart->base_coord_names = {"x", "y"};
  chart->velocity_names = {"vx", "vy"};
  chart->frame = [](const Vec&) {
    Mat Z = Mat::Identity(2, 2);
    Z(1, 1) = 1e-13;
    return Z;
  };
  chart->projection = [](const Vec& x) { return x; };
  REQUIRE_THROWS_AS(coords_to_quasi(*chart, Vec::Zero(2), Vec{{1.0, 1.0}}), numeric_error);
}

TEST_CASE("dimension mismatches are rejected") {
  const auto& sys = get_system("so3-sphere");
  QuasiState s;
  s.x = Vec::Zero(3);
  s.x[1] = 1.0;
  s.v_base = Vec::Zero(1);  // wrong: base_dim is 2
  s.v_vert = Vec::Zero(1);
  REQUIRE_THROWS_AS(quasi_to_coords(*sys.chart, s), validation_error);
  REQUIRE_THROWS_AS(coords_to_quasi(*sys.chart, s.x, Vec::Zero(2)), validation_error);
  REQUIRE_THROWS_AS(sys.chart->domain_violation(Vec::Zero(5)), validation_error);
}

TEST_CASE("chart domain bounds") {
  const auto& sys = get_system("so3-sphere");
  Vec inside{{0.0, 1.0, 0.0}};
  Vec outside{{0.0, 1e-4, 0.0}};
  REQUIRE(sys.chart->in_domain(inside));
  REQUIRE_FALSE(sys.chart->in_domain(outside));
  REQUIRE(sys.chart->domain_violation(outside).find("theta") != std::string::npos);
  REQUIRE_THROWS_AS(sys.chart->require_in_domain(outside), domain_error);

  const auto& gl = get_system("glplus-2");
  Vec singular = Vec::Zero(4);  // zero matrix, det = 0
  REQUIRE_FALSE(gl.chart->in_domain(singular));
  REQUIRE(gl.chart->domain_violation(singular).find("det") != std::string::npos);
}

TEST_CASE("declared curvature matches the frame bracket") {
  const auto& sphere = get_system("so3-sphere");
  const auto& flat = get_system("flat-product");
  Rng rng(17);
  for (int i = 0; i < 30; ++i) {
    QuasiState s = sample_state(*sphere.chart, sphere.default_box, rng);
    REQUIRE(verify_curvature(*sphere.chart, s.x) <= 1e-8);
  }
  for (int i = 0; i < 10; ++i) {
    QuasiState s = sample_state(*flat.chart, flat.default_box, rng);
    REQUIRE(verify_curvature(*flat.chart, s.x) <= 1e-12);
  }

  SECTION("zeroed-out curvature table is detected") {
    BundleChart mutant = *sphere.chart;
    mutant.curvature = nullptr;
    Vec x{{0.0, 1.0, 0.0}};
    REQUIRE(verify_curvature(mutant, x) >= 0.5);  // |sin(theta)| at theta = 1
  }

  SECTION("points too close to the boundary are refused") {
    Vec x{{0.0, 1e-3 + 5e-6, 0.0}};
    REQUIRE_THROWS_AS(verify_curvature(*sphere.chart, x), domain_error);
  }

  SECTION("degenerate base dimension is trivially consistent") {
    const auto& canon = get_system("canonical-so3");
    Vec x{{0.1, 1.4, -0.2}};
    REQUIRE(verify_curvature(*canon.chart, x) == 0.0);
  }
}

TEST_CASE("sampling stays in the chart domain") {
  const auto& sys = get_system("so3-sphere");
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    QuasiState s = sample_state(*sys.chart, sys.default_box, rng);
    REQUIRE(sys.chart->in_domain(s.x));
    REQUIRE(s.v_base.size() == 2);
    REQUIRE(s.v_vert.size() == 1);
  }

  SampleBox bad = sys.default_box;
  bad.x_lo[1] = -0.5;
  bad.x_hi[1] = -0.4;  // theta band never intersects the domain
  REQUIRE_THROWS_AS(sample_state(*sys.chart, bad, rng), validation_error);
}

TEST_CASE("projection is unchanged by the group action") {
  for (const auto& [id, sys] : registry()) {
    Rng rng(23);
    INFO(id);
    REQUIRE(check_equivariance(*sys.chart, sys.default_box, sys.sample_group, 40, rng) <= 1e-12);
  }
}

TEST_CASE("generator derivative table flips sign for right actions") {
  BundleChart left;
  left.group = groups::so3();
  left.action_is_right = false;
  BundleChart right = left;
  right.action_is_right = true;
  REQUIRE(left.vertical_table_constant(2, 0, 1) == 1.0);
  REQUIRE(right.vertical_table_constant(2, 0, 1) == -1.0);
}
