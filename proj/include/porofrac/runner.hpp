#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "porofrac/config.hpp"

namespace porofrac {

struct CliOverrides {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

/// Mesh + material + boundary data ready for a single-scale run at the given
/// uniform refinement of the configured mesh.
struct ForwardSetup {
  Mesh mesh;
  MaterialParams params;
  BoundaryData bc;
  TimeGrid grid;
  SolverOptions solver;
};

struct GLSetup {
  GlobalLocalMesh meshes;
  MaterialParams params;
  BoundaryData bc_global;
  BoundaryData bc_local;
  TimeGrid grid;
  GLOptions gl;
  SolverOptions solver;
};

ForwardSetup make_ss_setup(const RunConfig& cfg, int refinement);
GLSetup make_gl_setup(const RunConfig& cfg);

BoundaryData resolve_bc(const BCConfig& bc, const Mesh& mesh);

/// Named parameter overrides applied to raw material values (before the
/// mesh-derived defaults are finalized). Unknown names throw ContractError.
MaterialParams apply_param_overrides(const MaterialParams& raw,
                                     const std::vector<std::string>& names,
                                     const Eigen::VectorXd& values);

struct ObsBundle {
  Eigen::VectorXd times;
  Eigen::VectorXd clean;  // noiseless model output at the true parameters
  Eigen::VectorXd obs;    // observations used for inversion
  double sigma2 = 0;
  std::vector<std::string> truth_names;
  Eigen::VectorXd truth_values;
};

/// Synthetic observations from the fine single-scale model (or a CSV file).
ObsBundle make_observations(const RunConfig& cfg, std::uint64_t seed, int jobs);

/// Forward-model closure for the inversion: parameter vector -> max-pressure
/// trajectory, nullopt on solver failure.
ForwardModel make_forward_model(const RunConfig& cfg, bool use_gl);

InverseProblem make_inverse_problem(const RunConfig& cfg, bool use_gl, const ObsBundle& obs,
                                    int jobs);

/// CLI entry point; returns a process exit status.
int run_mode(const std::string& mode, const CliOverrides& cli);

}  // namespace porofrac
