#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "porofrac/forward.hpp"
#include "porofrac/mesh.hpp"

namespace porofrac {

struct GLOptions {
  double tol = 1e-6;             ///< relative to the first-iteration interface residual
  double abs_floor = 1e-10;      ///< times the reaction magnitude, absolute convergence floor
  int max_iter = 50;
  double relaxation0 = 0.5;      ///< initial Aitken factor
  int max_halvings = 5;
  int max_relax_retries = 3;     ///< relaxation reductions after a local failure
  double crack_containment = 0.2;  ///< abort when d on Gamma_L reaches this value
};

/// Global (poroelastic) and local (poroelastic + fracture) fields plus the
/// interface correction loads carried between time steps.
struct GLState {
  FieldState global;
  FieldState local;
  Eigen::VectorXd corr_u;  // nodal force correction on Gamma_G (2 per node)
  Eigen::VectorXd corr_p;  // nodal flux correction on Gamma_G
  double t = 0;
};

struct GLStepStats {
  int gl_iters = 0;
  int newton_iters = 0;
  int halvings = 0;
  bool converged = false;
  double res_u = 0, res_p = 0;  // interface residual norms at convergence
  double min_d = 0, max_d = 0;
  double min_H_increment = 0;
};

struct GLIterRow {
  double t = 0;
  int iter = 0;
  double res_u = 0, res_p = 0;
  double relaxation = 0;
};

/// Non-intrusive global-local forward model: fixed-point iteration per time
/// step between the global poroelastic solve (with fictitious subdomain and
/// interface correction loads) and the local fracture solve driven by
/// interface Dirichlet data, with Aitken-accelerated multiplier updates.
class GlobalLocalSolver {
public:
  GlobalLocalSolver(const GlobalLocalMesh& meshes, const MaterialParams& params,
                    const BoundaryData& bc_global, const BoundaryData& bc_local,
                    const GLOptions& gl_opts, const SolverOptions& solver_opts);

  GLState initial_state() const;

  /// One time step with halving-on-failure.
  GLStepStats advance(GLState& state, double dt, std::vector<GLIterRow>* log = nullptr);

  double max_pressure(const GLState& s) const;

  const StaggeredSolver& global_block() const { return *global_; }
  const StaggeredSolver& local_block() const { return *local_; }
  const Interface& iface() const { return meshes_.iface; }
  const GlobalLocalMesh& meshes() const { return meshes_; }

private:
  GLStepStats fixed_point(GLState& state, double dt, double relax0,
                          std::vector<GLIterRow>* log);

  Eigen::VectorXd scatter_u(const Eigen::VectorXd& gamma_vals) const;
  Eigen::VectorXd scatter_p(const Eigen::VectorXd& gamma_vals) const;
  Eigen::VectorXd gather_u(const Eigen::VectorXd& full, const std::vector<int>& nodes) const;
  Eigen::VectorXd gather_p(const Eigen::VectorXd& full, const std::vector<int>& nodes) const;
  Eigen::VectorXd prolong_u(const Eigen::VectorXd& gamma_g_vals) const;
  Eigen::VectorXd restrict_u(const Eigen::VectorXd& gamma_l_vals) const;

  GlobalLocalMesh meshes_;
  GLOptions gl_opts_;
  std::unique_ptr<StaggeredSolver> global_;
  std::unique_ptr<StaggeredSolver> local_;
  std::vector<char> node_in_c_;  // global nodes touching a complement element
};

struct GLTrajectory {
  Trajectory traj;
  std::vector<GLIterRow> iter_log;
  std::vector<int> gl_iters_per_step;
};

GLTrajectory run_forward_gl(const GlobalLocalMesh& meshes, const MaterialParams& params,
                            const BoundaryData& bc_global, const BoundaryData& bc_local,
                            const TimeGrid& grid, const GLOptions& gl_opts,
                            const SolverOptions& solver_opts,
                            const SnapshotCallback& on_output_global = nullptr,
                            const SnapshotCallback& on_output_local = nullptr);

}  // namespace porofrac
