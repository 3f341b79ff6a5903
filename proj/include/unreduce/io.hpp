#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "unreduce/core.hpp"
#include "unreduce/integrate.hpp"

namespace unreduce {

/// Writes via a temporary file in the same directory plus rename, so readers
/// never observe a half-written file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path dir = path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// CSV with header `t,<coord names...>,<velocity names...>` and shortest
/// round-trip decimals.
[[nodiscard]] inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t";
  for (const auto& c : traj.columns) {
    out += "," + c;
  }
  out += "\n";
  for (size_t i = 0; i < traj.times.size(); ++i) {
    out += fmt_double(traj.times[i]);
    Vec row = traj.states[i].flatten();
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      out += "," + fmt_double(row[j]);
    }
    out += "\n";
  }
  return out;
}

/// JSON mirror of the CSV with run metadata attached.
[[nodiscard]] inline nlohmann::json trajectory_json(const Trajectory& traj) {
  nlohmann::json j;
  j["metadata"] = {{"system_id", traj.system_id},
                   {"method", traj.method},
                   {"step", traj.step},
                   {"t_end", traj.t_end()},
                   {"seed", traj.seed}};
  nlohmann::json cols = nlohmann::json::array();
  cols.push_back("t");
  for (const auto& c : traj.columns) cols.push_back(c);
  j["columns"] = cols;
  nlohmann::json rows = nlohmann::json::array();
  for (size_t i = 0; i < traj.times.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    row.push_back(traj.times[i]);
    Vec flat = traj.states[i].flatten();
    for (Eigen::Index k = 0; k < flat.size(); ++k) row.push_back(flat[k]);
    rows.push_back(row);
  }
  j["rows"] = rows;
  if (traj.domain_exit) {
    j["domain_exit"] = {{"time", traj.domain_exit->time},
                        {"message", traj.domain_exit->message}};
  }
  return j;
}

inline void write_trajectory(const Trajectory& traj, const std::filesystem::path& path,
                             const std::string& format) {
  if (format == "csv") {
    atomic_write(path, trajectory_csv(traj));
  } else if (format == "json") {
    atomic_write(path, trajectory_json(traj).dump(2) + "\n");
  } else {
    throw validation_error("write_trajectory: unknown format '" + format + "'");
  }
}

}  // namespace unreduce
