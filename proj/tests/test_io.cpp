#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "unreduce/integrate.hpp"
#include "unreduce/io.hpp"
#include "unreduce/systems.hpp"

using namespace unreduce;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  fs::path p = fs::temp_directory_path() / "unreduce_io_tests";
  fs::create_directories(p);
  return p;
}

Trajectory short_run() {
  const auto& sys = get_system("so3-sphere");
  QuasiState s0{Vec{{0.0, 1.2, 0.0}}, Vec{{0.3, 0.4}}, Vec{{0.6}}};
  Trajectory t = integrate(sys.primary, s0, 0.05, 1e-2);
  t.system_id = sys.id;
  t.seed = 99;
  return t;
}

}  // namespace

TEST_CASE("doubles are written with round-trip precision") {
  for (double v : {1.0 / 3.0, 0.1, 1e-17, 12345.6789, -2.5e300, 0.0}) {
    REQUIRE(std::stod(fmt_double(v)) == v);
  }
}

TEST_CASE("trajectory CSV layout") {
  Trajectory t = short_run();
  std::string csv = trajectory_csv(t);
  std::stringstream ss(csv);
  std::string header;
  std::getline(ss, header);
  REQUIRE(header == "t,psi,theta,phi,v_theta,v_phi,w");

  size_t rows = 0;
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty()) ++rows;
  }
  REQUIRE(rows == t.times.size());

  // first data row round-trips the initial state
  std::stringstream ss2(csv);
  std::getline(ss2, line);
  std::getline(ss2, line);
  std::stringstream row(line);
  std::string cell;
  std::getline(row, cell, ',');
  REQUIRE(std::stod(cell) == 0.0);
  std::getline(row, cell, ',');
  REQUIRE(std::stod(cell) == t.states[0].x[0]);
}

TEST_CASE("trajectory JSON metadata") {
  Trajectory t = short_run();
  nlohmann::json j = trajectory_json(t);
  REQUIRE(j["metadata"]["system_id"] == "so3-sphere");
  REQUIRE(j["metadata"]["method"] == "rk4");
  REQUIRE(j["metadata"]["step"] == 1e-2);
  REQUIRE(j["metadata"]["seed"] == 99);
  REQUIRE(j["metadata"].size() == 5);
  REQUIRE(j["columns"][0] == "t");
  REQUIRE(j["columns"].size() == 7);
  REQUIRE(j["rows"].size() == t.times.size());
  REQUIRE(j["rows"][0].size() == 7);
  REQUIRE_FALSE(j.contains("domain_exit"));

  SECTION("domain exits are recorded") {
    const auto& sys = get_system("so3-sphere");
    QuasiState bad{Vec{{0.0, 0.31, 0.0}}, Vec{{-1.0, 0.0}}, Vec{{0.0}}};
    Trajectory partial = integrate(sys.primary, bad, 1.0, 1e-3);
    nlohmann::json pj = trajectory_json(partial);
    REQUIRE(pj.contains("domain_exit"));
    REQUIRE(pj["domain_exit"]["time"].get<double>() > 0.0);
  }
}

TEST_CASE("atomic file writes") {
  fs::path dir = scratch_dir();
  fs::path nested = dir / "a" / "b" / "out.txt";
  fs::remove_all(dir / "a");
  atomic_write(nested, "payload\n");
  REQUIRE(fs::exists(nested));
  std::ifstream in(nested);
  std::string content;
  std::getline(in, content);
  REQUIRE(content == "payload");
  // no temporary left behind
  REQUIRE_FALSE(fs::exists(nested.string() + ".tmp"));
}

TEST_CASE("trajectory writer formats") {
  Trajectory t = short_run();
  fs::path dir = scratch_dir();

  fs::path csvp = dir / "run.csv";
  write_trajectory(t, csvp, "csv");
  REQUIRE(fs::exists(csvp));

  fs::path jsonp = dir / "run.json";
  write_trajectory(t, jsonp, "json");
  std::ifstream in(jsonp);
  nlohmann::json j = nlohmann::json::parse(in);
  REQUIRE(j["metadata"]["system_id"] == "so3-sphere");

  REQUIRE_THROWS_AS(write_trajectory(t, dir / "run.xml", "xml"), validation_error);
}
