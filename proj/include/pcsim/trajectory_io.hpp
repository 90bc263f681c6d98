#pragma once

#include "pcsim/scenario.hpp"

#include <iosfwd>
#include <string>

namespace pcsim {

/// Column names of the trajectory CSV for nu nodes, in order.
std::string trajectory_csv_header(Index nu);

/// Trajectory rows as CSV (17 significant digits, "nan" for missing values).
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

/// Reads a CSV written by write_trajectory_csv; the header must match exactly.
/// Row states (z) are left empty.
Trajectory read_trajectory_csv(std::istream& in, const std::string& source = "<stream>");
Trajectory read_trajectory_csv(const std::string& path);

/// Full closed-loop states: columns t, z_1..z_n.
void write_states_csv(std::ostream& out, const Trajectory& traj);
void write_states_csv(const std::string& path, const Trajectory& traj);

/// Attaches states to the rows of `traj` (row count and times must match).
void read_states_csv(std::istream& in, Trajectory& traj, const std::string& source = "<stream>");
void read_states_csv(const std::string& path, Trajectory& traj);

}  // namespace pcsim
