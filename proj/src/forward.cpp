#include "porofrac/forward.hpp"
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

namespace porofrac {

namespace {

double rel_increment(const Eigen::VectorXd& now, const Eigen::VectorXd& before,
                     double scale_floor = 0.0) {
  if (now.size() == 0) return 0.0;
  const double dn = (now - before).lpNorm<Eigen::Infinity>();
  if (dn == 0.0) return 0.0;
  const double scale = std::max({now.lpNorm<Eigen::Infinity>(), scale_floor, 1e-300});
  return dn / scale;
}

}  // namespace

StaggeredSolver::StaggeredSolver(const Mesh& mesh, MaterialParams params, BoundaryData bc,
                                 SolverOptions opts)
    : mesh_(mesh), params_(std::move(params)), bc_(std::move(bc)), opts_(opts) {
  params_.validate_or_throw();
  geom_ = precompute_geometry(mesh_);

  dof_u_ = DofMap(mesh_.n_nodes(), 2);
  dof_p_ = DofMap(mesh_.n_nodes(), 1);
  dof_d_ = DofMap(mesh_.n_nodes(), 1);

  for (const auto& set : bc_.dirichlet_u) {
    for (int n : set.nodes) {
      for (int c = 0; c < 2; ++c) {
        if (set.value[c]) dof_u_.fix(n, c, *set.value[c]);
      }
    }
  }
  for (const auto& set : bc_.dirichlet_p) {
    for (int n : set.nodes) dof_p_.fix(n, 0, set.value);
  }
  for (const auto& set : bc_.dirichlet_d) {
    for (int n : set.nodes) dof_d_.fix(n, 0, set.value);
  }
  for (int n : bc_.interface_nodes) {
    dof_u_.fix(n, 0, 0.0);
    dof_u_.fix(n, 1, 0.0);
    dof_p_.fix(n, 0, 0.0);
  }

  // adjacency for assigning boundary loads to an element side
  std::map<std::pair<int, int>, int> edge_elem;
  for (int e = 0; e < mesh_.n_elements(); ++e) {
    for (int k = 0; k < 4; ++k) {
      int a = mesh_.elements[e][k];
      int b = mesh_.elements[e][(k + 1) % 4];
      edge_elem[{std::min(a, b), std::max(a, b)}] = e;
    }
  }
  auto edges_of = [&](const std::string& tag) -> const std::vector<std::array<int, 2>>& {
    auto it = mesh_.boundary_tags.find(tag);
    if (it == mesh_.boundary_tags.end()) {
      throw ContractError("boundary tag '" + tag + "' does not exist on this mesh");
    }
    return it->second;
  };
  auto add_edges = [&](const std::string& tag, const Eigen::Vector2d* trac, const double* flux) {
    for (const auto& e : edges_of(tag)) {
      EdgeLoad el;
      el.nodes = e;
      el.length = (mesh_.nodes[e[1]] - mesh_.nodes[e[0]]).norm();
      if (trac) el.traction = *trac;
      if (flux) el.flux = *flux;
      auto it = edge_elem.find({std::min(e[0], e[1]), std::max(e[0], e[1])});
      el.side = it == edge_elem.end() ? Subdomain::C : mesh_.subdomain[it->second];
      edge_loads_.push_back(el);
    }
  };
  for (const auto& [tag, t] : bc_.tractions) add_edges(tag, &t, nullptr);
  for (const auto& [tag, f] : bc_.fluxes) add_edges(tag, nullptr, &f);
}

FieldState StaggeredSolver::initial_state() const {
  FieldState s;
  s.u = Eigen::VectorXd::Zero(dof_u_.n_dofs());
  s.p = Eigen::VectorXd::Constant(dof_p_.n_dofs(), bc_.initial_pressure);
  s.d = Eigen::VectorXd::Zero(dof_d_.n_dofs());
  s.H = Eigen::VectorXd::Zero(mesh_.n_elements() * 4);
  dof_u_.apply_values(s.u);
  dof_p_.apply_values(s.p);
  dof_d_.apply_values(s.d);
  s.t = 0;
  return s;
}

bool StaggeredSolver::element_included(int e, ElementFilter f) const {
  switch (f) {
    case ElementFilter::All:
      return true;
    case ElementFilter::ComplementOnly:
      return mesh_.subdomain[e] == Subdomain::C;
    case ElementFilter::FictitiousOnly:
      return mesh_.subdomain[e] == Subdomain::F;
  }
  return true;
}

Eigen::Vector2d StaggeredSolver::qp_grad_scalar(const Eigen::VectorXd& field, int e, int q) const {
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  const auto& dNdX = geom_[e].dNdX[q];
  for (int a = 0; a < 4; ++a) g += field[mesh_.elements[e][a]] * dNdX.row(a).transpose();
  return g;
}

std::optional<Eigen::VectorXd> StaggeredSolver::assemble_mech_residual(
    const FieldState& s, bool reduced, ElementFilter filter) const {
  const auto& Nq = quad_shape_values();
  Eigen::VectorXd R = Eigen::VectorXd::Zero(dof_u_.n_dofs());

  for (int e = 0; e < mesh_.n_elements(); ++e) {
    if (!element_included(e, filter)) continue;
    const auto& nodes = mesh_.elements[e];
    for (int q = 0; q < 4; ++q) {
      const auto& dNdX = geom_[e].dNdX[q];
      const double w = geom_[e].w[q];

      Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
      double pq = 0, dq = 0;
      for (int a = 0; a < 4; ++a) {
        const int n = nodes[a];
        F(0, 0) += s.u[2 * n] * dNdX(a, 0);
        F(0, 1) += s.u[2 * n] * dNdX(a, 1);
        F(1, 0) += s.u[2 * n + 1] * dNdX(a, 0);
        F(1, 1) += s.u[2 * n + 1] * dNdX(a, 1);
        pq += Nq[q][a] * s.p[n];
        dq += Nq[q][a] * s.d[n];
      }
      auto kin = Kinematics::try_from(F);
      if (!kin) return std::nullopt;
      const Eigen::Matrix2d P = piola_stress(*kin, pq, dq, params_);

      for (int a = 0; a < 4; ++a) {
        const int n = nodes[a];
        for (int i = 0; i < 2; ++i) {
          R[2 * n + i] += w * (P(i, 0) * dNdX(a, 0) + P(i, 1) * dNdX(a, 1)) -
                          w * bc_.body_force[i] * Nq[q][a];
        }
      }
    }
  }

  for (const auto& el : edge_loads_) {
    if (el.traction.isZero()) continue;
    if (filter == ElementFilter::ComplementOnly && el.side != Subdomain::C) continue;
    if (filter == ElementFilter::FictitiousOnly && el.side != Subdomain::F) continue;
    for (int k = 0; k < 2; ++k) {
      for (int i = 0; i < 2; ++i) {
        R[2 * el.nodes[k] + i] -= 0.5 * el.length * el.traction[i];
      }
    }
  }

  if (reduced) {
    if (extra_load_u_.size() == R.size()) R -= extra_load_u_;
    for (int i = 0; i < dof_u_.n_dofs(); ++i) {
      if (dof_u_.fixed[i]) R[i] = 0.0;
    }
  }
  return R;
}

Eigen::SparseMatrix<double> StaggeredSolver::assemble_mech_jacobian(const FieldState& s,
                                                                    bool reduced) const {
  const auto& Nq = quad_shape_values();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(mesh_.n_elements()) * 64 + dof_u_.n_dofs());

  for (int e = 0; e < mesh_.n_elements(); ++e) {
    const auto& nodes = mesh_.elements[e];
    Eigen::Matrix<double, 8, 8> Ke = Eigen::Matrix<double, 8, 8>::Zero();
    for (int q = 0; q < 4; ++q) {
      const auto& dNdX = geom_[e].dNdX[q];
      const double w = geom_[e].w[q];

      Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
      double pq = 0, dq = 0;
      for (int a = 0; a < 4; ++a) {
        const int n = nodes[a];
        F(0, 0) += s.u[2 * n] * dNdX(a, 0);
        F(0, 1) += s.u[2 * n] * dNdX(a, 1);
        F(1, 0) += s.u[2 * n + 1] * dNdX(a, 0);
        F(1, 1) += s.u[2 * n + 1] * dNdX(a, 1);
        pq += Nq[q][a] * s.p[n];
        dq += Nq[q][a] * s.d[n];
      }
      const Kinematics kin = Kinematics::from_F(F);
      const Eigen::Matrix4d A = elasticity_tangent(kin, pq, dq, params_);

      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          for (int i = 0; i < 2; ++i) {
            for (int k = 0; k < 2; ++k) {
              double v = 0;
              for (int Jd = 0; Jd < 2; ++Jd) {
                for (int L = 0; L < 2; ++L) {
                  v += dNdX(a, Jd) * A(2 * i + Jd, 2 * k + L) * dNdX(b, L);
                }
              }
              Ke(2 * a + i, 2 * b + k) += w * v;
            }
          }
        }
      }
    }
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        for (int i = 0; i < 2; ++i) {
          for (int k = 0; k < 2; ++k) {
            trips.emplace_back(2 * nodes[a] + i, 2 * nodes[b] + k, Ke(2 * a + i, 2 * b + k));
          }
        }
      }
    }
  }

  if (reduced) {
    Eigen::VectorXd dummy = Eigen::VectorXd::Zero(dof_u_.n_dofs());
    eliminate_dirichlet(trips, dummy, dof_u_, /*increment_form=*/true);
  }
  Eigen::SparseMatrix<double> A(dof_u_.n_dofs(), dof_u_.n_dofs());
  A.setFromTriplets(trips.begin(), trips.end());
  return A;
}

Eigen::SparseMatrix<double> StaggeredSolver::mechanics_jacobian_raw(const FieldState& s) const {
  return assemble_mech_jacobian(s, /*reduced=*/false);
}

void StaggeredSolver::assemble_pressure_system(const FieldState& s, const FieldState& prev,
                                               double dt,
                                               std::vector<Eigen::Triplet<double>>& trips,
                                               Eigen::VectorXd& rhs,
                                               ElementFilter filter) const {
  const auto& Nq = quad_shape_values();
  trips.clear();
  trips.reserve(static_cast<size_t>(mesh_.n_elements()) * 16 + dof_p_.n_dofs());
  rhs = Eigen::VectorXd::Zero(dof_p_.n_dofs());
  const double invM = 1.0 / params_.M;

  for (int e = 0; e < mesh_.n_elements(); ++e) {
    if (!element_included(e, filter)) continue;
    const auto& nodes = mesh_.elements[e];
    Eigen::Matrix4d Ae = Eigen::Matrix4d::Zero();
    Eigen::Vector4d be = Eigen::Vector4d::Zero();
    for (int q = 0; q < 4; ++q) {
      const auto& dNdX = geom_[e].dNdX[q];
      const double w = geom_[e].w[q];

      Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
      Eigen::Matrix2d Fn = Eigen::Matrix2d::Identity();
      double dq = 0, pn = 0;
      Eigen::Vector2d gd = Eigen::Vector2d::Zero();
      for (int a = 0; a < 4; ++a) {
        const int n = nodes[a];
        F(0, 0) += s.u[2 * n] * dNdX(a, 0);
        F(0, 1) += s.u[2 * n] * dNdX(a, 1);
        F(1, 0) += s.u[2 * n + 1] * dNdX(a, 0);
        F(1, 1) += s.u[2 * n + 1] * dNdX(a, 1);
        Fn(0, 0) += prev.u[2 * n] * dNdX(a, 0);
        Fn(0, 1) += prev.u[2 * n] * dNdX(a, 1);
        Fn(1, 0) += prev.u[2 * n + 1] * dNdX(a, 0);
        Fn(1, 1) += prev.u[2 * n + 1] * dNdX(a, 1);
        dq += Nq[q][a] * s.d[n];
        pn += Nq[q][a] * prev.p[n];
        gd += s.d[n] * dNdX.row(a).transpose();
      }
      const Kinematics kin = Kinematics::from_F(F);
      const double Jn = Fn.determinant();
      const Eigen::Matrix2d Kt = permeability(kin, dq, gd, mesh_.h_e, params_);
      const double rq = bc_.injection ? bc_.injection(geom_[e].x[q]) : 0.0;

      for (int a = 0; a < 4; ++a) {
        const Eigen::Vector2d ga = dNdX.row(a).transpose();
        be[a] += w * (invM * pn - params_.B * (kin.J - Jn) + dt * rq) * Nq[q][a];
        for (int b = 0; b < 4; ++b) {
          const Eigen::Vector2d gb = dNdX.row(b).transpose();
          Ae(a, b) += w * (invM * Nq[q][a] * Nq[q][b] + dt * ga.dot(Kt * gb));
        }
      }
    }
    for (int a = 0; a < 4; ++a) {
      rhs[nodes[a]] += be[a];
      for (int b = 0; b < 4; ++b) trips.emplace_back(nodes[a], nodes[b], Ae(a, b));
    }
  }

  for (const auto& el : edge_loads_) {
    if (el.flux == 0.0) continue;
    if (filter == ElementFilter::ComplementOnly && el.side != Subdomain::C) continue;
    if (filter == ElementFilter::FictitiousOnly && el.side != Subdomain::F) continue;
    for (int k = 0; k < 2; ++k) rhs[el.nodes[k]] -= 0.5 * el.length * el.flux;
  }
}

NewtonReport StaggeredSolver::solve_mechanics(FieldState& s) {
  dof_u_.apply_values(s.u);
  FieldState work = s;  // p, d frozen at the current iterate
  auto residual = [&](const Eigen::VectorXd& u) -> std::optional<Eigen::VectorXd> {
    work.u = u;
    return assemble_mech_residual(work, /*reduced=*/true, ElementFilter::All);
  };
  auto jacobian = [&](const Eigen::VectorXd& u) {
    work.u = u;
    return assemble_mech_jacobian(work, /*reduced=*/true);
  };
  Eigen::VectorXd x = s.u;
  NewtonReport rep = newton_solve(residual, jacobian, x, opts_.newton, &mech_solver_);
  s.u = x;
  return rep;
}

void StaggeredSolver::solve_pressure(FieldState& s, const FieldState& prev, double dt) {
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs;
  assemble_pressure_system(s, prev, dt, trips, rhs, ElementFilter::All);
  if (extra_load_p_.size() == rhs.size()) rhs += extra_load_p_;
  dof_p_.apply_values(s.p);
  eliminate_dirichlet(trips, rhs, dof_p_, /*increment_form=*/false);
  Eigen::SparseMatrix<double> A(dof_p_.n_dofs(), dof_p_.n_dofs());
  A.setFromTriplets(trips.begin(), trips.end());
  try {
    s.p = pressure_solver_.solve(A, rhs);
  } catch (const SolverError& err) {
    throw SolverError(std::string(err.what()) +
                      " (a vanishing storage term 1/M with pure-Neumann pressure data needs a "
                      "Dirichlet pressure anchor)");
  }
}

void StaggeredSolver::solve_phasefield(FieldState& s) {
  const auto& Nq = quad_shape_values();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(mesh_.n_elements()) * 16 + dof_d_.n_dofs());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dof_d_.n_dofs());
  const double psic = params_.psi_c;
  const double l2 = params_.l * params_.l;

  for (int e = 0; e < mesh_.n_elements(); ++e) {
    const auto& nodes = mesh_.elements[e];
    Eigen::Matrix4d Ae = Eigen::Matrix4d::Zero();
    Eigen::Vector4d be = Eigen::Vector4d::Zero();
    for (int q = 0; q < 4; ++q) {
      const auto& dNdX = geom_[e].dNdX[q];
      const double w = geom_[e].w[q];
      const double Hq = s.H[4 * e + q];
      for (int a = 0; a < 4; ++a) {
        be[a] += w * 2.0 * Hq * Nq[q][a];
        // row-sum lumped reaction keeps the system an M-matrix, so the
        // discrete maximum principle bounds d in [0, 1]
        Ae(a, a) += w * 2.0 * (psic + Hq) * Nq[q][a];
        for (int b = 0; b < 4; ++b) {
          Ae(a, b) += w * 2.0 * psic * l2 * dNdX.row(a).dot(dNdX.row(b));
        }
      }
    }
    for (int a = 0; a < 4; ++a) {
      rhs[nodes[a]] += be[a];
      for (int b = 0; b < 4; ++b) trips.emplace_back(nodes[a], nodes[b], Ae(a, b));
    }
  }

  dof_d_.apply_values(s.d);
  eliminate_dirichlet(trips, rhs, dof_d_, /*increment_form=*/false);
  Eigen::SparseMatrix<double> A(dof_d_.n_dofs(), dof_d_.n_dofs());
  A.setFromTriplets(trips.begin(), trips.end());
  s.d = phase_solver_.solve(A, rhs);
}

void StaggeredSolver::update_history(FieldState& s, const Eigen::VectorXd& H_ref) const {
  for (int e = 0; e < mesh_.n_elements(); ++e) {
    const auto& nodes = mesh_.elements[e];
    for (int q = 0; q < 4; ++q) {
      const auto& dNdX = geom_[e].dNdX[q];
      Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
      for (int a = 0; a < 4; ++a) {
        const int n = nodes[a];
        F(0, 0) += s.u[2 * n] * dNdX(a, 0);
        F(0, 1) += s.u[2 * n] * dNdX(a, 1);
        F(1, 0) += s.u[2 * n + 1] * dNdX(a, 0);
        F(1, 1) += s.u[2 * n + 1] * dNdX(a, 1);
      }
      const double D = crack_driving(Kinematics::from_F(F), params_);
      s.H[4 * e + q] = std::max(H_ref[4 * e + q], D);
    }
  }
}

Eigen::VectorXd StaggeredSolver::mechanics_residual_raw(const FieldState& s,
                                                        ElementFilter filter) const {
  auto r = assemble_mech_residual(s, /*reduced=*/false, filter);
  if (!r) throw InadmissibleStateError("mechanics_residual_raw: det F <= 0 in converged state");
  return *r;
}

Eigen::VectorXd StaggeredSolver::pressure_residual_raw(const FieldState& s,
                                                       const FieldState& prev, double dt,
                                                       ElementFilter filter) const {
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs;
  assemble_pressure_system(s, prev, dt, trips, rhs, filter);
  Eigen::SparseMatrix<double> A(dof_p_.n_dofs(), dof_p_.n_dofs());
  A.setFromTriplets(trips.begin(), trips.end());
  return A * s.p - rhs;
}

void StaggeredSolver::set_extra_load_u(Eigen::VectorXd f) { extra_load_u_ = std::move(f); }
void StaggeredSolver::set_extra_load_p(Eigen::VectorXd f) { extra_load_p_ = std::move(f); }

void StaggeredSolver::set_interface_values(const Eigen::VectorXd& u_vals,
                                           const Eigen::VectorXd& p_vals) {
  const int n = static_cast<int>(bc_.interface_nodes.size());
  if (u_vals.size() != 2 * n || p_vals.size() != n) {
    throw ContractError("set_interface_values: size mismatch with interface node list");
  }
  for (int k = 0; k < n; ++k) {
    const int node = bc_.interface_nodes[k];
    dof_u_.fixed_value[dof_u_.dof(node, 0)] = u_vals[2 * k];
    dof_u_.fixed_value[dof_u_.dof(node, 1)] = u_vals[2 * k + 1];
    dof_p_.fixed_value[dof_p_.dof(node, 0)] = p_vals[k];
  }
}

StepStats StaggeredSolver::step(FieldState& working, const FieldState& prev, double dt) {
  StepStats stats;
  working.t = prev.t + dt;
  dof_u_.apply_values(working.u);
  dof_p_.apply_values(working.p);
  dof_d_.apply_values(working.d);

  for (int it = 1; it <= opts_.max_stagger; ++it) {
    const Eigen::VectorXd u0 = working.u;
    const Eigen::VectorXd p0 = working.p;
    const Eigen::VectorXd d0 = working.d;

    const NewtonReport rep = solve_mechanics(working);
    stats.newton_iters += rep.iterations;
    if (!rep.converged) {
      stats.converged = false;
      stats.stagger_iters = it;
      return stats;
    }
    solve_pressure(working, prev, dt);
    update_history(working, prev.H);
    if (opts_.enable_fracture) solve_phasefield(working);

    // the phase-field is dimensionless and bounded by 1, so its increment is
    // measured against scale 1 when the field itself is still small
    const double inc = std::max({rel_increment(working.u, u0), rel_increment(working.p, p0),
                                 rel_increment(working.d, d0, 1.0)});
    stats.stagger_increments.push_back(inc);
    stats.stagger_iters = it;
    if (inc < opts_.stagger_tol) {
      stats.converged = true;
      break;
    }
  }

  if (stats.converged) {
    stats.min_d = working.d.size() ? working.d.minCoeff() : 0.0;
    stats.max_d = working.d.size() ? working.d.maxCoeff() : 0.0;
    stats.min_H_increment = working.H.size() ? (working.H - prev.H).minCoeff() : 0.0;
  }
  return stats;
}

namespace {

void merge_stats(StepStats& into, const StepStats& part, bool first) {
  into.stagger_iters += part.stagger_iters;
  into.newton_iters += part.newton_iters;
  if (first) {
    into.min_d = part.min_d;
    into.max_d = part.max_d;
    into.min_H_increment = part.min_H_increment;
  } else {
    into.min_d = std::min(into.min_d, part.min_d);
    into.max_d = std::max(into.max_d, part.max_d);
    into.min_H_increment = std::min(into.min_H_increment, part.min_H_increment);
  }
  into.stagger_increments.insert(into.stagger_increments.end(), part.stagger_increments.begin(),
                                 part.stagger_increments.end());
}

}  // namespace

StepStats StaggeredSolver::advance(FieldState& state, double dt) {
  struct Attempt {
    StaggeredSolver* self;
    FieldState run(const FieldState& prev, double dt, int depth, StepStats& total, bool& first) {
      FieldState working = prev;
      StepStats st = self->step(working, prev, dt);
      if (st.converged) {
        st.halvings = depth;
        merge_stats(total, st, first);
        first = false;
        total.halvings = std::max(total.halvings, depth);
        return working;
      }
      if (depth >= self->opts_.max_halvings) {
        throw NonconvergenceError(
            "staggered step failed to converge at t=" + std::to_string(prev.t + dt) +
            " after " + std::to_string(depth) + " time-step halvings");
      }
      log_info("staggered step at t=" + std::to_string(prev.t + dt) + " not converged; halving dt to " +
               std::to_string(dt / 2));
      FieldState mid = run(prev, dt / 2, depth + 1, total, first);
      return run(mid, dt / 2, depth + 1, total, first);
    }
  };

  StepStats total;
  bool first = true;
  Attempt a{this};
  FieldState result = a.run(state, dt, 0, total, first);
  total.converged = true;
  state = std::move(result);
  return total;
}

Eigen::VectorXd Trajectory::observable() const {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.t > 0) v.push_back(r.max_pressure);
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
}

Eigen::VectorXd Trajectory::times() const {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.t > 0) v.push_back(r.t);
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
}

Trajectory run_forward_ss(const Mesh& mesh, const MaterialParams& params, const BoundaryData& bc,
                          const TimeGrid& grid, const SolverOptions& opts,
                          const SnapshotCallback& on_output) {
  if (!(grid.dt > 0) || grid.t_end < grid.dt) {
    throw ContractError("time grid requires dt > 0 and t_end >= dt");
  }
  StaggeredSolver solver(mesh, params, bc, opts);
  FieldState state = solver.initial_state();
  const int monitor = mesh.nearest_node(bc.injection_monitor);
  const int n_steps = static_cast<int>(std::llround(grid.t_end / grid.dt));

  Trajectory traj;
  auto record = [&](const StepStats& st, double wall_ms) {
    TrajectoryRow row;
    row.t = state.t;
    row.max_pressure = state.p.maxCoeff();
    row.injection_pressure = state.p[monitor];
    row.min_d = st.min_d;
    row.max_d = st.max_d;
    row.newton_iters = st.newton_iters;
    row.wall_ms = wall_ms;
    row.min_H_increment = st.min_H_increment;
    traj.rows.push_back(row);
  };

  StepStats init;
  init.min_d = state.d.size() ? state.d.minCoeff() : 0.0;
  init.max_d = state.d.size() ? state.d.maxCoeff() : 0.0;
  record(init, 0.0);
  int output_index = 0;
  if (on_output) on_output(mesh, state, output_index++);

  for (int k = 1; k <= n_steps; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    StepStats st = solver.advance(state, grid.dt);
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    traj.total_wall_ms += wall_ms;
    if (k == 1) {
      traj.min_H_increment_all = st.min_H_increment;
      traj.min_d_all = st.min_d;
      traj.max_d_all = st.max_d;
    } else {
      traj.min_H_increment_all = std::min(traj.min_H_increment_all, st.min_H_increment);
      traj.min_d_all = std::min(traj.min_d_all, st.min_d);
      traj.max_d_all = std::max(traj.max_d_all, st.max_d);
    }
    if (k % grid.output_stride == 0 || k == n_steps) {
      record(st, wall_ms);
      if (on_output) on_output(mesh, state, output_index++);
    }
  }
  return traj;
}

}  // namespace porofrac
