#pragma once

#include <string>
#include <vector>

#include "lcmito/sdesim.hpp"

namespace lcmito::csvio {

using matcore::Matrix;
using sdesim::TrajectorySet;

// Trajectory CSV schema: header "traj_id,t,x_1,...,x_d", rows sorted by
// (traj_id, t), values printed with 17 significant digits so that a
// round trip is lossless. traj_id is 1-based in files.
void emit_trajectories(const TrajectorySet& data, const std::string& path);

// Validates the header, uniform grid spacing (1e-9 relative), contiguous
// trajectory ids and a constant coordinate count. Errors carry the
// offending line number.
TrajectorySet ingest_csv(const std::string& path);

// Plain numeric matrix, one row per line, comma separated.
Matrix read_matrix_csv(const std::string& path);
void write_matrix_csv(const Matrix& m, const std::string& path);

// Two-column (t, gamma) file used for plotting the test path.
void write_gamma_csv(const std::vector<double>& gamma, const sdesim::TimeGrid& grid, const std::string& path);

}  // namespace lcmito::csvio
