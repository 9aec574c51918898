#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "porofrac/forward.hpp"
#include "porofrac/global_local.hpp"
#include "porofrac/mesh.hpp"

namespace porofrac {

/// Legacy ASCII VTK unstructured grid with point data u (vector), p, d and
/// cell data subdomain.
void write_vtk(const std::string& path, const Mesh& mesh, const FieldState& state);

/// Mesh-only export (subdomain labels as cell data).
void write_vtk_mesh(const std::string& path, const Mesh& mesh);

/// Deterministic double formatting shared by all CSV writers (%.17g).
std::string csv_double(double v);

void write_trajectory_csv(const std::string& path, const Trajectory& traj);
void write_gl_iteration_csv(const std::string& path, const std::vector<GLIterRow>& rows);

struct TimingStats {
  std::string model;
  double min_t = 0, max_t = 0, mean_t = 0, sum_t = 0;
  double ratio = -1;  // mean of the reference model over this one; < 0 = n/a
};
void write_timing_csv(const std::string& path, const std::vector<TimingStats>& rows);

void write_manifest(const std::string& path, const std::string& mode,
                    const std::string& config_path, std::uint64_t config_hash,
                    std::uint64_t seed, bool seeded, double wall_seconds);

std::uint64_t fnv1a_hash(const std::string& bytes);

/// Create the directory (and parents) if missing.
void ensure_directory(const std::string& dir);

}  // namespace porofrac
