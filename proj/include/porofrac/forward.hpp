#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "porofrac/fem.hpp"
#include "porofrac/material.hpp"
#include "porofrac/mesh.hpp"

namespace porofrac {

/// Nodal fields plus the quadrature-point history field at one time level.
struct FieldState {
  Eigen::VectorXd u;  // 2 per node (m)
  Eigen::VectorXd p;  // per node (Pa)
  Eigen::VectorXd d;  // per node
  Eigen::VectorXd H;  // 4 quadrature points per element
  double t = 0;
};

/// Loads and constraint sets. Tag names refer to mesh boundary edge sets;
/// node lists are resolved against a concrete mesh.
struct BoundaryData {
  Eigen::Vector2d body_force = Eigen::Vector2d::Zero();      // N/m^3
  std::map<std::string, Eigen::Vector2d> tractions;          // tag -> N/m^2
  std::map<std::string, double> fluxes;                      // tag -> outward fluid flux
  std::function<double(const Eigen::Vector2d&)> injection;   // r_F(X), 1/s; may be null
  Eigen::Vector2d injection_monitor = Eigen::Vector2d::Zero();

  struct DirichletU {
    std::vector<int> nodes;
    std::array<std::optional<double>, 2> value;  // per component
  };
  struct DirichletScalar {
    std::vector<int> nodes;
    double value = 0;
  };
  std::vector<DirichletU> dirichlet_u;
  std::vector<DirichletScalar> dirichlet_p;
  std::vector<DirichletScalar> dirichlet_d;  // initial cracks: d = 1 node sets
  double initial_pressure = 0;

  /// Interface nodes receiving per-node Dirichlet data (global-local local
  /// block); values are installed later via StaggeredSolver::set_interface_values.
  std::vector<int> interface_nodes;
};

struct SolverOptions {
  NewtonOptions newton;
  double stagger_tol = 1e-5;
  int max_stagger = 200;
  int max_halvings = 5;
  bool enable_fracture = true;
};

struct StepStats {
  int stagger_iters = 0;
  int newton_iters = 0;
  int halvings = 0;
  bool converged = false;
  double min_d = 0, max_d = 0;         // before clamping
  double min_H_increment = 0;          // over quadrature points this step
  std::vector<double> stagger_increments;
};

enum class ElementFilter { All, ComplementOnly, FictitiousOnly };

/// Staggered solver for the coupled deformation / pressure / phase-field
/// system on one mesh. The same class serves the single-scale model and the
/// global (fracture disabled) and local blocks of the global-local scheme.
class StaggeredSolver {
public:
  StaggeredSolver(const Mesh& mesh, MaterialParams params, BoundaryData bc, SolverOptions opts);

  FieldState initial_state() const;

  /// One time step with halving-on-failure; state is advanced in place.
  StepStats advance(FieldState& state, double dt);

  /// One staggered step from `prev` at fixed dt. `working` supplies the
  /// initial guess and receives the converged fields. Does not halve.
  StepStats step(FieldState& working, const FieldState& prev, double dt);

  // individual blocks (frozen-field semantics per the staggered scheme)
  NewtonReport solve_mechanics(FieldState& s);
  void solve_pressure(FieldState& s, const FieldState& prev, double dt);
  void solve_phasefield(FieldState& s);
  void update_history(FieldState& s, const Eigen::VectorXd& H_ref) const;

  /// Unconstrained residuals for reaction (Lagrange-multiplier) recovery.
  Eigen::VectorXd mechanics_residual_raw(const FieldState& s, ElementFilter filter) const;
  Eigen::VectorXd pressure_residual_raw(const FieldState& s, const FieldState& prev, double dt,
                                        ElementFilter filter) const;
  /// Consistent tangent of the unconstrained mechanics residual (verification).
  Eigen::SparseMatrix<double> mechanics_jacobian_raw(const FieldState& s) const;

  /// Additional nodal loads on the interface (global-local correction).
  void set_extra_load_u(Eigen::VectorXd f);
  void set_extra_load_p(Eigen::VectorXd f);
  /// Per-node Dirichlet values for bc.interface_nodes (u: 2 per node).
  void set_interface_values(const Eigen::VectorXd& u_vals, const Eigen::VectorXd& p_vals);

  const Mesh& mesh() const { return mesh_; }
  const MaterialParams& params() const { return params_; }
  const BoundaryData& boundary() const { return bc_; }
  const SolverOptions& options() const { return opts_; }
  const DofMap& dofmap_u() const { return dof_u_; }
  const DofMap& dofmap_p() const { return dof_p_; }
  const DofMap& dofmap_d() const { return dof_d_; }

private:
  struct EdgeLoad {
    std::array<int, 2> nodes;
    Eigen::Vector2d traction = Eigen::Vector2d::Zero();
    double flux = 0;
    double length = 0;
    Subdomain side = Subdomain::C;  // subdomain of the adjacent element
  };

  std::optional<Eigen::VectorXd> assemble_mech_residual(const FieldState& s, bool reduced,
                                                        ElementFilter filter) const;
  Eigen::SparseMatrix<double> assemble_mech_jacobian(const FieldState& s, bool reduced) const;
  void assemble_pressure_system(const FieldState& s, const FieldState& prev, double dt,
                                std::vector<Eigen::Triplet<double>>& trips,
                                Eigen::VectorXd& rhs, ElementFilter filter) const;
  bool element_included(int e, ElementFilter f) const;
  Eigen::Vector2d qp_grad_scalar(const Eigen::VectorXd& field, int e, int q) const;

  Mesh mesh_;
  MaterialParams params_;
  BoundaryData bc_;
  SolverOptions opts_;
  std::vector<ElemGeom> geom_;
  DofMap dof_u_, dof_p_, dof_d_;
  std::vector<EdgeLoad> edge_loads_;
  Eigen::VectorXd extra_load_u_, extra_load_p_;
  LinearSolver mech_solver_{"mechanics"};
  LinearSolver pressure_solver_{"pressure"};
  LinearSolver phase_solver_{"phase-field"};
};

struct TimeGrid {
  double dt = 0.1;
  double t_end = 20.0;
  int output_stride = 1;
};

struct TrajectoryRow {
  double t = 0;
  double max_pressure = 0;
  double injection_pressure = 0;
  double min_d = 0, max_d = 0;
  int newton_iters = 0;
  double wall_ms = 0;
  double min_H_increment = 0;
};

struct Trajectory {
  std::vector<TrajectoryRow> rows;
  // accumulated over every time step, independent of the output stride
  double min_H_increment_all = 0;
  double min_d_all = 0, max_d_all = 0;
  double total_wall_ms = 0;

  /// Max-pressure observable at the output times (t > 0 rows).
  Eigen::VectorXd observable() const;
  Eigen::VectorXd times() const;
};

using SnapshotCallback =
    std::function<void(const Mesh& mesh, const FieldState& state, int output_index)>;

/// Single-scale forward model: staggered time stepping over the grid.
Trajectory run_forward_ss(const Mesh& mesh, const MaterialParams& params, const BoundaryData& bc,
                          const TimeGrid& grid, const SolverOptions& opts,
                          const SnapshotCallback& on_output = nullptr);

}  // namespace porofrac
