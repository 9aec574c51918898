#include "porofrac/global_local.hpp"
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace porofrac {

GlobalLocalSolver::GlobalLocalSolver(const GlobalLocalMesh& meshes, const MaterialParams& params,
                                     const BoundaryData& bc_global, const BoundaryData& bc_local,
                                     const GLOptions& gl_opts, const SolverOptions& solver_opts)
    : meshes_(meshes), gl_opts_(gl_opts) {
  if (meshes_.iface.empty()) {
    throw ContractError("GlobalLocalSolver requires a marked local region with an interface");
  }

  SolverOptions global_opts = solver_opts;
  global_opts.enable_fracture = false;  // E-P response with d = 0 on B_G
  global_ = std::make_unique<StaggeredSolver>(meshes_.global, params, bc_global, global_opts);

  BoundaryData local_bc = bc_local;
  local_bc.interface_nodes = meshes_.iface.gamma_l_nodes;
  local_ = std::make_unique<StaggeredSolver>(meshes_.local, params, local_bc, solver_opts);

  node_in_c_.assign(meshes_.global.n_nodes(), 0);
  for (int e = 0; e < meshes_.global.n_elements(); ++e) {
    if (meshes_.global.subdomain[e] == Subdomain::C) {
      for (int n : meshes_.global.elements[e]) node_in_c_[n] = 1;
    }
  }
}

GLState GlobalLocalSolver::initial_state() const {
  GLState s;
  s.global = global_->initial_state();
  s.local = local_->initial_state();
  s.corr_u = Eigen::VectorXd::Zero(2 * meshes_.iface.n_global());
  s.corr_p = Eigen::VectorXd::Zero(meshes_.iface.n_global());
  s.t = 0;
  return s;
}

Eigen::VectorXd GlobalLocalSolver::scatter_u(const Eigen::VectorXd& gamma_vals) const {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(2 * meshes_.global.n_nodes());
  const auto& nodes = meshes_.iface.gamma_g_nodes;
  for (int k = 0; k < static_cast<int>(nodes.size()); ++k) {
    full[2 * nodes[k]] = gamma_vals[2 * k];
    full[2 * nodes[k] + 1] = gamma_vals[2 * k + 1];
  }
  return full;
}

Eigen::VectorXd GlobalLocalSolver::scatter_p(const Eigen::VectorXd& gamma_vals) const {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(meshes_.global.n_nodes());
  const auto& nodes = meshes_.iface.gamma_g_nodes;
  for (int k = 0; k < static_cast<int>(nodes.size()); ++k) full[nodes[k]] = gamma_vals[k];
  return full;
}

Eigen::VectorXd GlobalLocalSolver::gather_u(const Eigen::VectorXd& full,
                                            const std::vector<int>& nodes) const {
  Eigen::VectorXd out(2 * nodes.size());
  for (int k = 0; k < static_cast<int>(nodes.size()); ++k) {
    out[2 * k] = full[2 * nodes[k]];
    out[2 * k + 1] = full[2 * nodes[k] + 1];
  }
  return out;
}

Eigen::VectorXd GlobalLocalSolver::gather_p(const Eigen::VectorXd& full,
                                            const std::vector<int>& nodes) const {
  Eigen::VectorXd out(nodes.size());
  for (int k = 0; k < static_cast<int>(nodes.size()); ++k) out[k] = full[nodes[k]];
  return out;
}

Eigen::VectorXd GlobalLocalSolver::prolong_u(const Eigen::VectorXd& g) const {
  const auto& T = meshes_.iface.transfer;
  Eigen::VectorXd gx(T.cols()), gy(T.cols());
  for (int k = 0; k < T.cols(); ++k) {
    gx[k] = g[2 * k];
    gy[k] = g[2 * k + 1];
  }
  Eigen::VectorXd lx = T * gx, ly = T * gy;
  Eigen::VectorXd out(2 * T.rows());
  for (int k = 0; k < T.rows(); ++k) {
    out[2 * k] = lx[k];
    out[2 * k + 1] = ly[k];
  }
  return out;
}

Eigen::VectorXd GlobalLocalSolver::restrict_u(const Eigen::VectorXd& l) const {
  const auto& T = meshes_.iface.transfer;
  Eigen::VectorXd lx(T.rows()), ly(T.rows());
  for (int k = 0; k < T.rows(); ++k) {
    lx[k] = l[2 * k];
    ly[k] = l[2 * k + 1];
  }
  Eigen::VectorXd gx = T.transpose() * lx, gy = T.transpose() * ly;
  Eigen::VectorXd out(2 * T.cols());
  for (int k = 0; k < T.cols(); ++k) {
    out[2 * k] = gx[k];
    out[2 * k + 1] = gy[k];
  }
  return out;
}

namespace {

double aitken_update(double omega, const Eigen::VectorXd& r_prev, const Eigen::VectorXd& r) {
  const Eigen::VectorXd dr = r - r_prev;
  const double denom = dr.squaredNorm();
  if (denom <= 0) return omega;
  return std::clamp(-omega * r_prev.dot(dr) / denom, 0.01, 1.0);
}

}  // namespace

GLStepStats GlobalLocalSolver::fixed_point(GLState& state, double dt, double relax0,
                                           std::vector<GLIterRow>* log) {
  GLStepStats stats;
  const FieldState prev_g = state.global;
  const FieldState prev_l = state.local;
  const auto& ifc = meshes_.iface;

  Eigen::VectorXd q_u = state.corr_u;
  Eigen::VectorXd q_p = state.corr_p;
  double omega_u = relax0, omega_p = relax0;
  Eigen::VectorXd rho_u_prev, rho_p_prev;
  double first_ru = -1, first_rp = -1;

  FieldState g_work = prev_g;
  FieldState l_work = prev_l;

  for (int k = 1; k <= gl_opts_.max_iter; ++k) {
    global_->set_extra_load_u(scatter_u(q_u));
    global_->set_extra_load_p(scatter_p(q_p));
    StepStats gst = global_->step(g_work, prev_g, dt);
    stats.newton_iters += gst.newton_iters;
    if (!gst.converged) {
      stats.converged = false;
      return stats;  // caller halves dt
    }

    const Eigen::VectorXd u_gamma = gather_u(g_work.u, ifc.gamma_g_nodes);
    const Eigen::VectorXd p_gamma = gather_p(g_work.p, ifc.gamma_g_nodes);
    local_->set_interface_values(prolong_u(u_gamma), ifc.transfer * p_gamma);

    StepStats lst = local_->step(l_work, prev_l, dt);
    stats.newton_iters += lst.newton_iters;
    if (!lst.converged) {
      throw NonconvergenceError("local block failed to converge");
    }
    stats.min_d = lst.min_d;
    stats.max_d = lst.max_d;
    stats.min_H_increment = lst.min_H_increment;

    // variationally consistent reactions on both sides of Gamma
    const Eigen::VectorXd lam_l_u =
        gather_u(local_->mechanics_residual_raw(l_work, ElementFilter::All), ifc.gamma_l_nodes);
    const Eigen::VectorXd lam_l_p = gather_p(
        local_->pressure_residual_raw(l_work, prev_l, dt, ElementFilter::All), ifc.gamma_l_nodes);
    const Eigen::VectorXd lam_c_u = gather_u(
        global_->mechanics_residual_raw(g_work, ElementFilter::ComplementOnly), ifc.gamma_g_nodes);
    const Eigen::VectorXd lam_c_p =
        gather_p(global_->pressure_residual_raw(g_work, prev_g, dt, ElementFilter::ComplementOnly),
                 ifc.gamma_g_nodes);

    const Eigen::VectorXd lam_l_u_g = restrict_u(lam_l_u);
    const Eigen::VectorXd lam_l_p_g = ifc.transfer.transpose() * lam_l_p;
    const Eigen::VectorXd rho_u = lam_l_u_g + lam_c_u;
    const Eigen::VectorXd rho_p = lam_l_p_g + lam_c_p;

    const double nru = rho_u.norm();
    const double nrp = rho_p.norm();
    const double scale_u = lam_l_u_g.norm() + lam_c_u.norm();
    const double scale_p = lam_l_p_g.norm() + lam_c_p.norm();
    if (k == 1) {
      first_ru = nru;
      first_rp = nrp;
    }
    stats.gl_iters = k;
    stats.res_u = nru;
    stats.res_p = nrp;
    if (log) log->push_back({prev_g.t + dt, k, nru, nrp, omega_u});

    const bool conv_u = nru <= std::max(gl_opts_.tol * first_ru, gl_opts_.abs_floor * scale_u);
    const bool conv_p = nrp <= std::max(gl_opts_.tol * first_rp, gl_opts_.abs_floor * scale_p);
    if (conv_u && conv_p) {
      state.global = g_work;
      state.local = l_work;
      state.corr_u = q_u;
      state.corr_p = q_p;
      state.t = prev_g.t + dt;

      // phase-field must stay confined to the local domain
      double d_max_gamma = 0;
      for (int n : ifc.gamma_l_nodes) d_max_gamma = std::max(d_max_gamma, state.local.d[n]);
      if (d_max_gamma >= gl_opts_.crack_containment) {
        throw Error("crack reached the global-local interface (max d on Gamma_L = " +
                    std::to_string(d_max_gamma) + " at t = " + std::to_string(state.t) +
                    "); enlarge the local region");
      }
      stats.converged = true;
      return stats;
    }

    if (k >= 2) {
      omega_u = aitken_update(omega_u, rho_u_prev, rho_u);
      omega_p = aitken_update(omega_p, rho_p_prev, rho_p);
    }
    q_u -= omega_u * rho_u;
    q_p -= omega_p * rho_p;
    rho_u_prev = rho_u;
    rho_p_prev = rho_p;
  }
  stats.converged = false;
  return stats;
}

GLStepStats GlobalLocalSolver::advance(GLState& state, double dt, std::vector<GLIterRow>* log) {
  struct Runner {
    GlobalLocalSolver* self;
    std::vector<GLIterRow>* log;

    GLState run(const GLState& prev, double dt, int depth, GLStepStats& total, bool& first) {
      GLState working = prev;
      double relax = self->gl_opts_.relaxation0;
      for (int attempt = 0; attempt <= self->gl_opts_.max_relax_retries; ++attempt) {
        working = prev;
        try {
          GLStepStats st = self->fixed_point(working, dt, relax, log);
          if (st.converged) {
            accumulate(total, st, first);
            total.halvings = std::max(total.halvings, depth);
            return working;
          }
          break;  // fixed point exhausted max_iter: halve dt
        } catch (const NonconvergenceError&) {
          // local block failure: reduce the relaxation before retrying
          relax *= 0.5;
          if (attempt == self->gl_opts_.max_relax_retries) break;
          log_info("local solve failed; retrying GL step with relaxation " +
                   std::to_string(relax));
        }
      }
      if (depth >= self->gl_opts_.max_halvings) {
        throw NonconvergenceError("global-local iteration failed to converge at t=" +
                                  std::to_string(prev.t + dt) + " after " +
                                  std::to_string(depth) + " time-step halvings");
      }
      log_info("global-local step at t=" + std::to_string(prev.t + dt) +
               " not converged; halving dt to " + std::to_string(dt / 2));
      GLState mid = run(prev, dt / 2, depth + 1, total, first);
      return run(mid, dt / 2, depth + 1, total, first);
    }

    static void accumulate(GLStepStats& total, const GLStepStats& st, bool& first) {
      total.gl_iters += st.gl_iters;
      total.newton_iters += st.newton_iters;
      total.res_u = st.res_u;
      total.res_p = st.res_p;
      if (first) {
        total.min_d = st.min_d;
        total.max_d = st.max_d;
        total.min_H_increment = st.min_H_increment;
        first = false;
      } else {
        total.min_d = std::min(total.min_d, st.min_d);
        total.max_d = std::max(total.max_d, st.max_d);
        total.min_H_increment = std::min(total.min_H_increment, st.min_H_increment);
      }
    }
  };

  GLStepStats total;
  bool first = true;
  Runner r{this, log};
  GLState result = r.run(state, dt, 0, total, first);
  total.converged = true;
  state = std::move(result);
  return total;
}

double GlobalLocalSolver::max_pressure(const GLState& s) const {
  double mp = -std::numeric_limits<double>::infinity();
  for (int n = 0; n < meshes_.global.n_nodes(); ++n) {
    if (node_in_c_[n]) mp = std::max(mp, s.global.p[n]);
  }
  mp = std::max(mp, s.local.p.maxCoeff());
  return mp;
}

GLTrajectory run_forward_gl(const GlobalLocalMesh& meshes, const MaterialParams& params,
                            const BoundaryData& bc_global, const BoundaryData& bc_local,
                            const TimeGrid& grid, const GLOptions& gl_opts,
                            const SolverOptions& solver_opts,
                            const SnapshotCallback& on_output_global,
                            const SnapshotCallback& on_output_local) {
  if (!(grid.dt > 0) || grid.t_end < grid.dt) {
    throw ContractError("time grid requires dt > 0 and t_end >= dt");
  }
  GlobalLocalSolver solver(meshes, params, bc_global, bc_local, gl_opts, solver_opts);
  GLState state = solver.initial_state();

  const bool monitor_local =
      meshes.region.contains(bc_local.injection_monitor) && meshes.local.n_nodes() > 0;
  const int monitor = monitor_local ? meshes.local.nearest_node(bc_local.injection_monitor)
                                    : meshes.global.nearest_node(bc_global.injection_monitor);

  GLTrajectory out;
  const int n_steps = static_cast<int>(std::llround(grid.t_end / grid.dt));

  auto record = [&](const GLStepStats& st, double wall_ms) {
    TrajectoryRow row;
    row.t = state.t;
    row.max_pressure = solver.max_pressure(state);
    row.injection_pressure = monitor_local ? state.local.p[monitor] : state.global.p[monitor];
    row.min_d = st.min_d;
    row.max_d = st.max_d;
    row.newton_iters = st.newton_iters;
    row.wall_ms = wall_ms;
    row.min_H_increment = st.min_H_increment;
    out.traj.rows.push_back(row);
  };

  GLStepStats init;
  init.min_d = state.local.d.size() ? state.local.d.minCoeff() : 0.0;
  init.max_d = state.local.d.size() ? state.local.d.maxCoeff() : 0.0;
  record(init, 0.0);
  int output_index = 0;
  if (on_output_global) on_output_global(meshes.global, state.global, output_index);
  if (on_output_local) on_output_local(meshes.local, state.local, output_index);
  ++output_index;

  for (int k = 1; k <= n_steps; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    GLStepStats st = solver.advance(state, grid.dt, &out.iter_log);
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.traj.total_wall_ms += wall_ms;
    out.gl_iters_per_step.push_back(st.gl_iters);
    if (k == 1) {
      out.traj.min_H_increment_all = st.min_H_increment;
      out.traj.min_d_all = st.min_d;
      out.traj.max_d_all = st.max_d;
    } else {
      out.traj.min_H_increment_all = std::min(out.traj.min_H_increment_all, st.min_H_increment);
      out.traj.min_d_all = std::min(out.traj.min_d_all, st.min_d);
      out.traj.max_d_all = std::max(out.traj.max_d_all, st.max_d);
    }
    if (k % grid.output_stride == 0 || k == n_steps) {
      record(st, wall_ms);
      if (on_output_global) on_output_global(meshes.global, state.global, output_index);
      if (on_output_local) on_output_local(meshes.local, state.local, output_index);
      ++output_index;
    }
  }
  return out;
}

}  // namespace porofrac
