// Command line front end: integrate registered systems, compare projected
// runs against base runs, and execute the property check suite.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "unreduce/analysis.hpp"
#include "unreduce/integrate.hpp"
#include "unreduce/io.hpp"
#include "unreduce/systems.hpp"
#include "unreduce/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDomain = 3;
constexpr int kExitCheckFailed = 4;

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(std::stod(item));
  }
  return out;
}

unreduce::Vec to_vec(const std::vector<double>& v) {
  unreduce::Vec out(static_cast<long>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<long>(i)] = v[i];
  return out;
}

unsigned default_seed() {
  if (const char* env = std::getenv("UNREDUCE_SEED")) {
    return static_cast<unsigned>(std::stoul(env));
  }
  return 2024;
}

struct RunOptions {
  std::string system;
  std::string sode = "primary";
  double h = 1e-3;
  double t_end = 1.0;
  std::string out;
  std::string format = "csv";
  unsigned seed = default_seed();
  std::optional<std::vector<double>> coords;
  std::optional<std::vector<double>> quasi;
  bool hlift = false;
};

// Flags override config file values; each CLI option records whether it was
// seen, so we only copy config values into unset fields.
void apply_config(RunOptions& o, const std::string& path, const CLI::App& cmd) {
  std::ifstream in(path);
  if (!in) throw unreduce::validation_error("cannot open config file: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  auto unset = [&cmd](const std::string& flag) {
    const CLI::Option* opt = cmd.get_option_no_throw(flag);
    return opt == nullptr || opt->count() == 0;
  };
  if (j.contains("system") && unset("--system")) o.system = j["system"].get<std::string>();
  if (j.contains("sode") && unset("--sode")) o.sode = j["sode"].get<std::string>();
  if (j.contains("h") && unset("--step")) o.h = j["h"].get<double>();
  if (j.contains("t_end") && unset("--t-end")) o.t_end = j["t_end"].get<double>();
  if (j.contains("out") && unset("--out")) o.out = j["out"].get<std::string>();
  if (j.contains("format") && unset("--format")) o.format = j["format"].get<std::string>();
  if (j.contains("seed") && unset("--seed")) o.seed = j["seed"].get<unsigned>();
  if (j.contains("coords") && unset("--coords")) o.coords = j["coords"].get<std::vector<double>>();
  if (j.contains("quasi") && unset("--quasi")) o.quasi = j["quasi"].get<std::vector<double>>();
  if (j.contains("hlift") && unset("--hlift")) o.hlift = j["hlift"].get<bool>();
}

unreduce::QuasiState resolve_ic(const unreduce::SystemBundle& sys, const RunOptions& o) {
  using namespace unreduce;
  const auto& chart = *sys.chart;
  const int n = chart.base_dim;
  const int k = chart.fiber_dim();
  QuasiState s;
  if (o.coords) {
    if (static_cast<int>(o.coords->size()) != chart.dim()) {
      throw validation_error("--coords expects " + std::to_string(chart.dim()) + " values");
    }
    s.x = to_vec(*o.coords);
  }
  if (o.quasi) {
    Vec q = to_vec(*o.quasi);
    if (o.hlift) {
      if (q.size() != n) throw validation_error("--quasi with --hlift expects " +
                                                std::to_string(n) + " base values");
      s.v_base = q;
      s.v_vert = Vec::Zero(k);
    } else {
      if (q.size() != n + k) throw validation_error("--quasi expects " +
                                                    std::to_string(n + k) + " values");
      s.v_base = q.head(n);
      s.v_vert = q.tail(k);
    }
  }
  if (!o.coords || !o.quasi) {
    Rng rng(o.seed);
    QuasiState sampled = sample_state(chart, sys.default_box, rng);
    if (!o.coords) s.x = sampled.x;
    if (!o.quasi) {
      s.v_base = sampled.v_base;
      s.v_vert = o.hlift ? Vec(Vec::Zero(k)) : sampled.v_vert;
    }
  }
  return s;
}

std::string with_suffix(const std::string& out, const std::string& tag) {
  std::filesystem::path p(out);
  std::filesystem::path q = p.parent_path() / (p.stem().string() + tag + p.extension().string());
  return q.string();
}

int cmd_run(const RunOptions& o) {
  using namespace unreduce;
  const SystemBundle& sys = get_system(o.system);
  QuasiState s0 = resolve_ic(sys, o);

  const bool base_only = o.sode == "base";
  Trajectory traj;
  if (base_only) {
    const auto& chart = *sys.chart;
    std::vector<std::string> cols = chart.base_coord_names;
    for (int i = 0; i < chart.base_dim; ++i) cols.push_back(chart.velocity_names[i]);
    traj = integrate_base(sys.base_sode, chart.projection(s0.x), s0.v_base, o.t_end, o.h, cols);
    traj.system_id = sys.id + "/base";
  } else {
    traj = integrate(select_sode(sys, o.sode), s0, o.t_end, o.h);
    traj.system_id = sys.id;
  }
  traj.seed = o.seed;

  if (o.out.empty()) {
    std::cout << (o.format == "json" ? trajectory_json(traj).dump(2) : trajectory_csv(traj))
              << "\n";
  } else {
    write_trajectory(traj, o.out, o.format);
    std::cerr << "wrote " << o.out << "\n";
    if (!base_only && sys.chart->base_dim > 0) {
      Trajectory base = project_trajectory(*sys.chart, traj);
      std::string base_out = with_suffix(o.out, ".base");
      write_trajectory(base, base_out, o.format);
      std::cerr << "wrote " << base_out << "\n";
    }
  }
  if (traj.domain_exit) {
    std::cerr << "domain exit at t=" << fmt_double(traj.domain_exit->time) << ": "
              << traj.domain_exit->message << "\n";
    return kExitDomain;
  }
  return kExitOk;
}

int cmd_compare(const RunOptions& o, const std::string& sweep_csv) {
  using namespace unreduce;
  const SystemBundle& sys = get_system(o.system);
  const TotalSODE& sode = select_sode(sys, o.sode);
  QuasiState s0 = resolve_ic(sys, o);
  if (!sweep_csv.empty()) {
    SweepResult sweep = convergence_sweep(sys, sode, s0, o.t_end, parse_doubles(sweep_csv));
    for (const auto& pt : sweep.points) {
      std::cout << "h=" << fmt_double(pt.h) << " projection_max=" << fmt_double(pt.proj_max)
                << " error_vs_reference=" << fmt_double(pt.total_err_vs_ref) << "\n";
    }
    std::cout << "observed_order=" << fmt_double(sweep.observed_order) << "\n";
    return kExitOk;
  }
  ProjectionCompare cmp = compare_projection(sys, sode, s0, o.t_end, o.h);
  if (!o.out.empty()) {
    std::ostringstream csv;
    csv << "t,projection_error\n";
    for (size_t i = 0; i < cmp.err.size(); ++i) {
      csv << fmt_double(cmp.total.times[i]) << "," << fmt_double(cmp.err[i]) << "\n";
    }
    atomic_write(o.out, csv.str());
    std::cerr << "wrote " << o.out << "\n";
  }
  std::cout << "max_projection_error=" << fmt_double(cmp.max_err)
            << " l2=" << fmt_double(cmp.l2_err) << "\n";
  if (!cmp.clean) {
    std::cerr << "run incomplete: domain exit\n";
    return kExitDomain;
  }
  return kExitOk;
}

int cmd_check(const std::string& filter, int samples, unsigned seed, double h,
              const std::vector<std::string>& tol_specs, const std::string& out) {
  using namespace unreduce;
  CheckParams params;
  params.n_samples = samples;
  params.seed = seed;
  params.h = h;
  std::map<std::string, double> overrides;
  for (const auto& spec : tol_specs) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) {
      throw validation_error("--tol expects <check-id>=<value>, got: " + spec);
    }
    overrides[spec.substr(0, eq)] = std::stod(spec.substr(eq + 1));
  }
  std::vector<CheckReport> reports = run_all(params, overrides, filter);
  if (reports.empty()) {
    std::cerr << "no checks matched filter: " << filter << "\n";
    return kExitUsage;
  }
  bool all_pass = true;
  for (const auto& r : reports) {
    all_pass = all_pass && r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.check_id << "  " << r.system_id
              << "  max_residual=" << fmt_double(r.max_residual)
              << " tolerance=" << fmt_double(r.tolerance);
    if (!r.note.empty()) std::cout << "  [" << r.note << "]";
    std::cout << "\n";
  }
  std::cout << (all_pass ? "ALL CHECKS PASSED" : "CHECK FAILURES PRESENT") << " ("
            << reports.size() << " reports)\n";
  if (!out.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    atomic_write(out, arr.dump(2) + "\n");
    std::cerr << "wrote " << out << "\n";
  }
  return all_pass ? kExitOk : kExitCheckFailed;
}

int cmd_list(bool as_json) {
  using namespace unreduce;
  if (as_json) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [id, sys] : registry()) arr.push_back(system_descriptor(sys));
    std::cout << arr.dump(2) << "\n";
    return kExitOk;
  }
  for (const auto& [id, sys] : registry()) {
    std::cout << id << "  base_dim=" << sys.chart->base_dim
              << " fiber_dim=" << sys.chart->fiber_dim() << "  sodes: primary";
    for (const auto& [name, _] : sys.extras) std::cout << ", " << name;
    for (const auto& [name, _] : sys.gamma2_fields) std::cout << ", gamma2:" << name;
    std::cout << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"un-reduction toolkit: lift base dynamics to bundle dynamics and verify them"};
  app.require_subcommand(1);
  // help stays on --help alone so --h can mean the step size
  app.set_help_flag("--help", "print help and exit");

  RunOptions run_opts;
  std::string run_config, run_coords, run_quasi;
  CLI::App* run = app.add_subcommand("run", "integrate a system and write the trajectory");
  run->set_help_flag("--help", "print help and exit");
  run->add_option("--system", run_opts.system, "system id (see `list`)");
  run->add_option("--sode", run_opts.sode, "field selector: base, primary, an extra, or gamma2:<name>");
  run->add_option("--h,--step", run_opts.h, "integration step size");
  run->add_option("--t-end", run_opts.t_end, "integration horizon");
  run->add_option("--out", run_opts.out, "output path (stdout when omitted)");
  run->add_option("--format", run_opts.format, "csv or json");
  run->add_option("--seed", run_opts.seed, "seed for sampled initial conditions");
  run->add_option("--coords", run_coords, "comma separated initial coordinates");
  run->add_option("--quasi", run_quasi, "comma separated initial quasi-velocities");
  run->add_flag("--hlift", run_opts.hlift, "zero the vertical velocities (horizontal lift)");
  run->add_option("--config", run_config, "JSON config file; flags override");

  RunOptions cmp_opts;
  std::string cmp_config, cmp_coords, cmp_quasi, cmp_sweep;
  CLI::App* cmp = app.add_subcommand("compare",
                                     "project a bundle run and compare with the base run");
  cmp->set_help_flag("--help", "print help and exit");
  cmp->add_option("--system", cmp_opts.system, "system id");
  cmp->add_option("--sode", cmp_opts.sode, "field selector");
  cmp->add_option("--h,--step", cmp_opts.h, "step size");
  cmp->add_option("--t-end", cmp_opts.t_end, "integration horizon");
  cmp->add_option("--out", cmp_opts.out, "per-time error CSV path");
  cmp->add_option("--seed", cmp_opts.seed, "seed for sampled initial conditions");
  cmp->add_option("--coords", cmp_coords, "comma separated initial coordinates");
  cmp->add_option("--quasi", cmp_quasi, "comma separated initial quasi-velocities");
  cmp->add_flag("--hlift", cmp_opts.hlift, "zero the vertical velocities");
  cmp->add_option("--sweep", cmp_sweep, "comma separated step sizes; reports convergence order");
  cmp->add_option("--config", cmp_config, "JSON config file; flags override");

  std::string chk_filter, chk_out;
  int chk_samples = 100;
  unsigned chk_seed = default_seed();
  double chk_h = 1e-3;
  std::vector<std::string> chk_tols;
  CLI::App* chk = app.add_subcommand("check", "run the property check suite");
  chk->set_help_flag("--help", "print help and exit");
  chk->add_option("--filter", chk_filter, "substring filter on check id or system id");
  chk->add_option("--system", chk_filter, "alias for --filter");
  chk->add_option("--samples", chk_samples, "samples per check");
  chk->add_option("--seed", chk_seed, "sampling seed");
  chk->add_option("--h,--step", chk_h, "step size for trajectory checks");
  chk->add_option("--tol", chk_tols, "tolerance override <check-id>=<value>, repeatable");
  chk->add_option("--out", chk_out, "write JSON reports here");

  bool list_json = false;
  CLI::App* lst = app.add_subcommand("list", "list registered systems");
  lst->set_help_flag("--help", "print help and exit");
  lst->add_flag("--json", list_json, "machine readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (run->parsed()) {
      if (!run_config.empty()) apply_config(run_opts, run_config, *run);
      if (!run_coords.empty()) run_opts.coords = parse_doubles(run_coords);
      if (!run_quasi.empty()) run_opts.quasi = parse_doubles(run_quasi);
      if (run_opts.system.empty()) throw unreduce::validation_error("--system is required");
      return cmd_run(run_opts);
    }
    if (cmp->parsed()) {
      if (!cmp_config.empty()) apply_config(cmp_opts, cmp_config, *cmp);
      if (!cmp_coords.empty()) cmp_opts.coords = parse_doubles(cmp_coords);
      if (!cmp_quasi.empty()) cmp_opts.quasi = parse_doubles(cmp_quasi);
      if (cmp_opts.system.empty()) throw unreduce::validation_error("--system is required");
      return cmd_compare(cmp_opts, cmp_sweep);
    }
    if (chk->parsed()) {
      return cmd_check(chk_filter, chk_samples, chk_seed, chk_h, chk_tols, chk_out);
    }
    if (lst->parsed()) {
      return cmd_list(list_json);
    }
  } catch (const unreduce::domain_error& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const unreduce::validation_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const unreduce::capability_error& e) {
    std::cerr << "unsupported: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
