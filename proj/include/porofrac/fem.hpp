#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "porofrac/common.hpp"
#include "porofrac/mesh.hpp"

namespace porofrac {

struct QuadPoint {
  Eigen::Vector2d xi;
  double w;
};

/// 2x2 Gauss rule on [-1,1]^2, exact for bilinear x bilinear integrands.
std::array<QuadPoint, 4> quadrature_2x2();

struct Shape {
  Eigen::Vector4d N;
  Eigen::Matrix<double, 4, 2> dN;  // reference-coordinate gradients
};

/// Bilinear quad shape functions at a reference point.
Shape shape_eval(const Eigen::Vector2d& xi);

/// Precomputed per-element quadrature data (material configuration).
struct ElemGeom {
  std::array<Eigen::Matrix<double, 4, 2>, 4> dNdX;  // per qp
  std::array<double, 4> w;                          // gauss weight * det(mapping)
  std::array<Eigen::Vector2d, 4> x;                 // qp material coordinates
};

/// Throws InvalidGeometryError on a non-positive mapping Jacobian.
std::vector<ElemGeom> precompute_geometry(const Mesh& mesh);

/// Shape values at the four quadrature points (shared by all elements).
const std::array<Eigen::Vector4d, 4>& quad_shape_values();

/// Node -> global dof indexing for one field plus its Dirichlet set.
struct DofMap {
  int n_nodes = 0;
  int n_comp = 1;
  std::vector<char> fixed;
  Eigen::VectorXd fixed_value;

  DofMap() = default;
  DofMap(int nodes, int comps)
      : n_nodes(nodes), n_comp(comps), fixed(nodes * comps, 0),
        fixed_value(Eigen::VectorXd::Zero(nodes * comps)) {}

  int n_dofs() const { return n_nodes * n_comp; }
  int dof(int node, int c = 0) const { return node * n_comp + c; }
  void fix(int node, int c, double v) {
    fixed[dof(node, c)] = 1;
    fixed_value[dof(node, c)] = v;
  }
  /// Write the prescribed values into a state vector.
  void apply_values(Eigen::VectorXd& x) const {
    for (int i = 0; i < n_dofs(); ++i) {
      if (fixed[i]) x[i] = fixed_value[i];
    }
  }
};

/// Symmetric elimination of Dirichlet dofs on a triplet list. Constrained
/// columns are moved to the right-hand side (using dofs.fixed_value, or zero
/// in increment form), constrained rows become identity rows.
void eliminate_dirichlet(std::vector<Eigen::Triplet<double>>& triplets, Eigen::VectorXd& rhs,
                         const DofMap& dofs, bool increment_form);

struct SparseSystem {
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
};

/// Direct sparse LU with pattern reuse across repeated solves on the same
/// sparsity structure.
class LinearSolver {
public:
  explicit LinearSolver(std::string block_name = "system");
  ~LinearSolver();
  LinearSolver(LinearSolver&&) noexcept;
  LinearSolver& operator=(LinearSolver&&) noexcept;
  LinearSolver(const LinearSolver&) = delete;
  LinearSolver& operator=(const LinearSolver&) = delete;

  /// Throws SolverError (naming the block) on singular or inaccurate solves.
  Eigen::VectorXd solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b);

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string name_;
  long pattern_nnz_ = -1;
  long pattern_rows_ = -1;
};

/// One-shot direct solve with the residual contract ||Ax-b||/||b|| <= 1e-10.
Eigen::VectorXd sparse_solve(const SparseSystem& sys, const std::string& block = "system");

struct NewtonOptions {
  double tol_abs = 1e-8;
  double tol_rel = 1e-6;
  int max_iter = 50;
  int max_backtrack = 8;
};

struct NewtonReport {
  bool converged = false;
  int iterations = 0;
  double residual0 = 0;
  double residual = 0;
  std::string message;
};

/// Residual evaluation; nullopt flags an inadmissible state (line search backs off).
using ResidualFn = std::function<std::optional<Eigen::VectorXd>(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::SparseMatrix<double>(const Eigen::VectorXd&)>;

/// Full Newton with backtracking line search (halving). On failure the best
/// iterate is left in x and the report flags non-convergence; no throw.
NewtonReport newton_solve(const ResidualFn& residual, const JacobianFn& jacobian,
                          Eigen::VectorXd& x, const NewtonOptions& opts = {},
                          LinearSolver* solver = nullptr);

}  // namespace porofrac
