#include "porofrac/fem.hpp"
#include <Eigen/Dense>

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

namespace porofrac {

std::array<QuadPoint, 4> quadrature_2x2() {
  const double g = 1.0 / std::sqrt(3.0);
  return {QuadPoint{{-g, -g}, 1.0}, QuadPoint{{g, -g}, 1.0}, QuadPoint{{g, g}, 1.0},
          QuadPoint{{-g, g}, 1.0}};
}

Shape shape_eval(const Eigen::Vector2d& xi) {
  static const double xa[4] = {-1, 1, 1, -1};
  static const double ya[4] = {-1, -1, 1, 1};
  Shape s;
  for (int a = 0; a < 4; ++a) {
    s.N[a] = 0.25 * (1.0 + xa[a] * xi[0]) * (1.0 + ya[a] * xi[1]);
    s.dN(a, 0) = 0.25 * xa[a] * (1.0 + ya[a] * xi[1]);
    s.dN(a, 1) = 0.25 * ya[a] * (1.0 + xa[a] * xi[0]);
  }
  return s;
}

const std::array<Eigen::Vector4d, 4>& quad_shape_values() {
  static const std::array<Eigen::Vector4d, 4> values = [] {
    std::array<Eigen::Vector4d, 4> v;
    auto q = quadrature_2x2();
    for (int qi = 0; qi < 4; ++qi) v[qi] = shape_eval(q[qi].xi).N;
    return v;
  }();
  return values;
}

std::vector<ElemGeom> precompute_geometry(const Mesh& mesh) {
  std::vector<ElemGeom> out(mesh.n_elements());
  const auto quad = quadrature_2x2();
  for (int e = 0; e < mesh.n_elements(); ++e) {
    for (int qi = 0; qi < 4; ++qi) {
      const Shape s = shape_eval(quad[qi].xi);
      Eigen::Matrix2d Jm = Eigen::Matrix2d::Zero();
      Eigen::Vector2d xq = Eigen::Vector2d::Zero();
      for (int a = 0; a < 4; ++a) {
        const Eigen::Vector2d& Xa = mesh.nodes[mesh.elements[e][a]];
        Jm += Xa * s.dN.row(a);  // dX/dxi
        xq += s.N[a] * Xa;
      }
      const double detJ = Jm.determinant();
      if (!(detJ > 0)) {
        throw InvalidGeometryError("element " + std::to_string(e) +
                                   " has non-positive mapping Jacobian");
      }
      const Eigen::Matrix2d Jinv = Jm.inverse();
      out[e].dNdX[qi] = s.dN * Jinv;  // dN/dX = dN/dxi * dxi/dX
      out[e].w[qi] = quad[qi].w * detJ;
      out[e].x[qi] = xq;
    }
  }
  return out;
}

void eliminate_dirichlet(std::vector<Eigen::Triplet<double>>& triplets, Eigen::VectorXd& rhs,
                         const DofMap& dofs, bool increment_form) {
  std::vector<Eigen::Triplet<double>> kept;
  kept.reserve(triplets.size() + dofs.n_dofs());
  for (const auto& t : triplets) {
    const bool rf = dofs.fixed[t.row()];
    const bool cf = dofs.fixed[t.col()];
    if (!rf && !cf) {
      kept.push_back(t);
    } else if (!rf && cf && !increment_form) {
      rhs[t.row()] -= t.value() * dofs.fixed_value[t.col()];
    }
    // constrained rows are dropped entirely; replaced by identity below
  }
  for (int i = 0; i < dofs.n_dofs(); ++i) {
    if (dofs.fixed[i]) {
      kept.emplace_back(i, i, 1.0);
      rhs[i] = increment_form ? 0.0 : dofs.fixed_value[i];
    }
  }
  triplets.swap(kept);
}

struct LinearSolver::Impl {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
};

LinearSolver::LinearSolver(std::string block_name) : name_(std::move(block_name)) {}
LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

Eigen::VectorXd LinearSolver::solve(const Eigen::SparseMatrix<double>& A,
                                    const Eigen::VectorXd& b) {
  if (!impl_) impl_ = std::make_unique<Impl>();
  auto& lu = impl_->lu;
  if (!impl_->analyzed || pattern_nnz_ != A.nonZeros() || pattern_rows_ != A.rows()) {
    lu.analyzePattern(A);
    impl_->analyzed = true;
    pattern_nnz_ = A.nonZeros();
    pattern_rows_ = A.rows();
  }
  lu.factorize(A);
  if (lu.info() != Eigen::Success) {
    // pattern may have drifted; one full retry before giving up
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success) {
      throw SolverError(name_ + ": sparse factorization failed (singular matrix?)");
    }
  }
  Eigen::VectorXd x = lu.solve(b);
  const double bn = b.norm();
  if (x.allFinite() && bn > 0) {
    // iterative refinement recovers digits on ill-conditioned systems
    for (int sweep = 0; sweep < 3; ++sweep) {
      const Eigen::VectorXd r = b - A * x;
      if (r.norm() <= 1e-13 * bn) break;
      x += lu.solve(r);
    }
  }
  // backward-error criterion: the scale ||A|| ||x|| + ||b|| is attainable in
  // double precision even when ||x|| >> ||b|| / ||A||
  double anorm = 0;  // infinity norm via row sums
  {
    Eigen::VectorXd rowsum = Eigen::VectorXd::Zero(A.rows());
    for (int k = 0; k < A.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) {
        rowsum[it.row()] += std::abs(it.value());
      }
    }
    anorm = rowsum.maxCoeff();
  }
  const double rn = (A * x - b).norm();
  const double scale = bn + anorm * x.norm();
  if (!x.allFinite() || (scale > 0 && rn > 1e-10 * scale)) {
    char msg[64];
    std::snprintf(msg, sizeof(msg), "%.3e", rn / (scale > 0 ? scale : 1));
    throw SolverError(name_ + ": linear solve backward error " + msg +
                      " exceeds tolerance (matrix near-singular)");
  }
  return x;
}

Eigen::VectorXd sparse_solve(const SparseSystem& sys, const std::string& block) {
  LinearSolver ls(block);
  return ls.solve(sys.A, sys.b);
}

NewtonReport newton_solve(const ResidualFn& residual, const JacobianFn& jacobian,
                          Eigen::VectorXd& x, const NewtonOptions& opts, LinearSolver* solver) {
  NewtonReport rep;
  LinearSolver local("newton");
  LinearSolver& ls = solver ? *solver : local;

  auto r0 = residual(x);
  if (!r0) throw InadmissibleStateError("newton_solve: initial state is inadmissible");
  Eigen::VectorXd R = *r0;
  double rnorm = R.norm();
  rep.residual0 = rnorm;
  const double tol = std::max(opts.tol_abs, opts.tol_rel * rnorm);
  if (rnorm <= tol) {
    rep.converged = true;
    rep.residual = rnorm;
    return rep;
  }

  for (int it = 1; it <= opts.max_iter; ++it) {
    const Eigen::SparseMatrix<double> J = jacobian(x);
    Eigen::VectorXd dx = ls.solve(J, -R);

    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_trial, R_trial;
    double rnorm_trial = 0;
    for (int bt = 0; bt <= opts.max_backtrack; ++bt) {
      x_trial = x + alpha * dx;
      auto rt = residual(x_trial);
      if (rt && rt->allFinite()) {
        rnorm_trial = rt->norm();
        if (rnorm_trial < rnorm) {
          R_trial = std::move(*rt);
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    rep.iterations = it;
    if (!accepted) {
      rep.converged = false;
      rep.residual = rnorm;
      rep.message = "line search stalled at iteration " + std::to_string(it);
      return rep;
    }
    x = std::move(x_trial);
    R = std::move(R_trial);
    rnorm = rnorm_trial;
    if (rnorm <= tol) {
      rep.converged = true;
      rep.residual = rnorm;
      return rep;
    }
  }
  rep.converged = false;
  rep.residual = rnorm;
  rep.message = "maximum Newton iterations exceeded";
  return rep;
}

}  // namespace porofrac
