#include "porofrac/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "porofrac/output.hpp"

namespace porofrac {

namespace {

std::vector<std::string> all_tags(const Mesh& mesh) {
  std::vector<std::string> tags;
  for (const auto& [tag, edges] : mesh.boundary_tags) tags.push_back(tag);
  return tags;
}

std::vector<int> tag_nodes(const Mesh& mesh, const std::string& tag) {
  auto it = mesh.boundary_tags.find(tag);
  if (it == mesh.boundary_tags.end()) {
    throw ConfigError({"boundary tag '" + tag + "' does not exist on the mesh"});
  }
  std::vector<char> seen(mesh.n_nodes(), 0);
  std::vector<int> nodes;
  for (const auto& e : it->second) {
    for (int n : e) {
      if (!seen[n]) {
        seen[n] = 1;
        nodes.push_back(n);
      }
    }
  }
  return nodes;
}

std::vector<int> where_nodes(const Mesh& mesh, const std::string& where,
                             const std::optional<Rect>& region) {
  if (region) return mesh.nodes_in(*region);
  if (where == "all") {
    std::vector<char> seen(mesh.n_nodes(), 0);
    std::vector<int> nodes;
    for (const auto& tag : all_tags(mesh)) {
      for (int n : tag_nodes(mesh, tag)) {
        if (!seen[n]) {
          seen[n] = 1;
          nodes.push_back(n);
        }
      }
    }
    return nodes;
  }
  return tag_nodes(mesh, where);
}

}  // namespace

BoundaryData resolve_bc(const BCConfig& bc, const Mesh& mesh) {
  BoundaryData out;
  out.body_force = bc.body_force;
  out.initial_pressure = bc.initial_pressure;

  for (const auto& f : bc.fix_u) {
    BoundaryData::DirichletU du;
    du.nodes = where_nodes(mesh, f.where, f.region);
    for (int c = 0; c < 2; ++c) {
      if (f.components[c]) du.value[c] = f.value[c];
    }
    out.dirichlet_u.push_back(std::move(du));
  }
  for (const auto& f : bc.fix_p) {
    BoundaryData::DirichletScalar dp;
    dp.nodes = where_nodes(mesh, f.where, f.region);
    dp.value = f.value;
    out.dirichlet_p.push_back(std::move(dp));
  }
  for (const auto& crack : bc.initial_cracks) {
    BoundaryData::DirichletScalar dd;
    dd.nodes = mesh.nodes_in(crack.region);
    dd.value = 1.0;
    if (dd.nodes.empty()) continue;  // crack outside this mesh (e.g. global block)
    out.dirichlet_d.push_back(std::move(dd));
  }
  for (const auto& t : bc.traction) {
    if (mesh.boundary_tags.find(t.where) == mesh.boundary_tags.end()) {
      throw ConfigError({"traction tag '" + t.where + "' does not exist on the mesh"});
    }
    out.tractions[t.where] = t.value;
  }
  for (const auto& f : bc.flux) {
    if (mesh.boundary_tags.find(f.where) == mesh.boundary_tags.end()) {
      throw ConfigError({"flux tag '" + f.where + "' does not exist on the mesh"});
    }
    out.fluxes[f.where] = f.value;
  }

  if (!bc.injection.empty()) {
    auto regions = bc.injection;
    out.injection = [regions](const Eigen::Vector2d& x) {
      double r = 0;
      for (const auto& inj : regions) {
        if (inj.region.contains(x)) r += inj.rate;
      }
      return r;
    };
    out.injection_monitor = regions.front().region.center();
  } else {
    out.injection_monitor = mesh.bounds.center();
  }
  return out;
}

ForwardSetup make_ss_setup(const RunConfig& cfg, int refinement) {
  if (refinement < 1) throw ContractError("make_ss_setup: refinement must be >= 1");
  ForwardSetup s;
  s.mesh = build_rect_mesh(cfg.mesh.bounds, cfg.mesh.nx * refinement, cfg.mesh.ny * refinement);
  s.params = cfg.material;
  s.params.finalize_defaults(s.mesh.h_e);
  s.params.validate_or_throw();
  s.bc = resolve_bc(cfg.bc, s.mesh);
  s.grid = TimeGrid{cfg.time.dt, cfg.time.t_end, cfg.time.output_stride};
  s.solver = cfg.solver;
  return s;
}

GLSetup make_gl_setup(const RunConfig& cfg) {
  if (!cfg.mesh.local_region) {
    throw ConfigError({"global-local run requires mesh.local_region"});
  }
  GLSetup s;
  Mesh coarse = build_rect_mesh(cfg.mesh.bounds, cfg.mesh.nx, cfg.mesh.ny);
  s.meshes = mark_local_region(coarse, *cfg.mesh.local_region, cfg.mesh.refinement);
  if (s.meshes.iface.empty()) {
    throw ConfigError({"mesh.local_region does not cover any element"});
  }
  s.params = cfg.material;
  s.params.finalize_defaults(s.meshes.local.h_e);  // fracture lives on the local mesh
  s.params.validate_or_throw();

  BCConfig bc_global_cfg = cfg.bc;
  bc_global_cfg.initial_cracks.clear();  // the global model is undamaged poroelastic
  s.bc_global = resolve_bc(bc_global_cfg, s.meshes.global);
  s.bc_local = resolve_bc(cfg.bc, s.meshes.local);

  s.grid = TimeGrid{cfg.time.dt, cfg.time.t_end, cfg.time.output_stride};
  s.solver = cfg.solver;
  s.gl.tol = cfg.gl.tol;
  s.gl.max_iter = cfg.gl.max_iter;
  s.gl.relaxation0 = cfg.gl.relaxation;
  s.gl.crack_containment = cfg.gl.crack_containment;
  s.gl.max_halvings = cfg.solver.max_halvings;
  return s;
}

MaterialParams apply_param_overrides(const MaterialParams& raw,
                                     const std::vector<std::string>& names,
                                     const Eigen::VectorXd& values) {
  MaterialParams mp = raw;
  for (int i = 0; i < static_cast<int>(names.size()); ++i) {
    const std::string& n = names[i];
    const double v = values[i];
    if (n == "mu") mp.mu = v;
    else if (n == "nu") mp.nu = v;
    else if (n == "Gc") mp.Gc = v;
    else if (n == "l") mp.l = v;
    else if (n == "kappa") mp.kappa = v;
    else if (n == "eta_f") mp.eta_f = v;
    else if (n == "K") mp.K = v;
    else if (n == "Kc") mp.Kc = v;
    else if (n == "zeta") mp.zeta = v;
    else if (n == "M") mp.M = v;
    else if (n == "B") mp.B = v;
    else if (n == "psi_c") mp.psi_c = v;
    else throw ContractError("unknown material parameter name '" + n + "'");
  }
  return mp;
}

ObsBundle make_observations(const RunConfig& cfg, std::uint64_t seed, int jobs) {
  (void)jobs;
  ObsBundle out;
  if (cfg.bayes.observations_file) {
    std::ifstream f(*cfg.bayes.observations_file);
    if (!f) throw ConfigError({"cannot open observations file " + *cfg.bayes.observations_file});
    std::vector<double> ts, vs;
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string a, b;
      std::getline(ss, a, ',');
      std::getline(ss, b, ',');
      ts.push_back(std::stod(a));
      vs.push_back(std::stod(b));
    }
    out.times = Eigen::Map<Eigen::VectorXd>(ts.data(), static_cast<long>(ts.size()));
    out.obs = Eigen::Map<Eigen::VectorXd>(vs.data(), static_cast<long>(vs.size()));
    out.clean = out.obs;
    out.sigma2 = cfg.bayes.sigma2;
    return out;
  }

  if (!cfg.bayes.synthetic) {
    throw ConfigError({"inversion needs bayes.synthetic or bayes.observations_file"});
  }
  const auto& syn = *cfg.bayes.synthetic;
  for (const auto& [k, v] : syn.true_params) {
    out.truth_names.push_back(k);
  }
  out.truth_values.resize(static_cast<long>(out.truth_names.size()));
  for (long i = 0; i < out.truth_values.size(); ++i) {
    out.truth_values[i] = syn.true_params.at(out.truth_names[i]);
  }

  RunConfig truth_cfg = cfg;
  truth_cfg.material =
      apply_param_overrides(cfg.material, out.truth_names, out.truth_values);
  ForwardSetup setup = make_ss_setup(truth_cfg, cfg.mesh.refinement);
  Trajectory traj = run_forward_ss(setup.mesh, setup.params, setup.bc, setup.grid, setup.solver);
  out.times = traj.times();
  out.clean = traj.observable();

  const double scale = out.clean.cwiseAbs().maxCoeff();
  const double noise_sd = syn.noise_rel * scale;
  std::mt19937_64 rng(mix_seed(seed, 7));
  std::normal_distribution<double> n01(0.0, 1.0);
  out.obs = out.clean;
  for (long i = 0; i < out.obs.size(); ++i) out.obs[i] += noise_sd * n01(rng);
  out.sigma2 = cfg.bayes.sigma2 > 0 ? cfg.bayes.sigma2
                                    : std::max(noise_sd * noise_sd, 1e-300);
  return out;
}

ForwardModel make_forward_model(const RunConfig& cfg, bool use_gl) {
  std::vector<std::string> names;
  for (const auto& p : cfg.bayes.parameters) names.push_back(p.name);

  if (use_gl) {
    // meshes are immutable; build once and share across evaluations
    auto shared = std::make_shared<GLSetup>(make_gl_setup(cfg));
    auto cfg_copy = std::make_shared<RunConfig>(cfg);
    return [shared, cfg_copy, names](const Eigen::VectorXd& chi)
               -> std::optional<Eigen::VectorXd> {
      try {
        MaterialParams mp = apply_param_overrides(cfg_copy->material, names, chi);
        mp.finalize_defaults(shared->meshes.local.h_e);
        mp.validate_or_throw();
        GLTrajectory t = run_forward_gl(shared->meshes, mp, shared->bc_global, shared->bc_local,
                                        shared->grid, shared->gl, shared->solver);
        return t.traj.observable();
      } catch (const std::exception& e) {
        log_warn(std::string("GL forward failed: ") + e.what());
        return std::nullopt;
      }
    };
  }

  auto shared = std::make_shared<ForwardSetup>(make_ss_setup(cfg, cfg.mesh.refinement));
  auto cfg_copy = std::make_shared<RunConfig>(cfg);
  return [shared, cfg_copy, names](const Eigen::VectorXd& chi)
             -> std::optional<Eigen::VectorXd> {
    try {
      MaterialParams mp = apply_param_overrides(cfg_copy->material, names, chi);
      mp.finalize_defaults(shared->mesh.h_e);
      mp.validate_or_throw();
      Trajectory t = run_forward_ss(shared->mesh, mp, shared->bc, shared->grid, shared->solver);
      return t.observable();
    } catch (const std::exception& e) {
      log_warn(std::string("SS forward failed: ") + e.what());
      return std::nullopt;
    }
  };
}

InverseProblem make_inverse_problem(const RunConfig& cfg, bool use_gl, const ObsBundle& obs,
                                    int jobs) {
  InverseProblem ip;
  for (const auto& p : cfg.bayes.parameters) {
    ip.param_names.push_back(p.name);
    ip.priors.push_back(p.prior);
  }
  ip.observations = obs.obs;
  ip.sigma2 = obs.sigma2;
  ip.forward = make_forward_model(cfg, use_gl);
  ip.ensemble_size = cfg.bayes.ensemble_size;
  ip.chain_length = cfg.bayes.chain_length;
  ip.jobs = jobs;
  return ip;
}

namespace {

struct ModeContext {
  RunConfig cfg;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seeded = false;
  int jobs = 1;
};

SnapshotCallback vtk_writer(const ModeContext& ctx, const std::string& prefix) {
  if (!ctx.cfg.output.vtk) return nullptr;
  const std::string dir = ctx.out_dir + "/vtk";
  ensure_directory(dir);
  return [dir, prefix](const Mesh& mesh, const FieldState& state, int index) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%04d.vtk", prefix.c_str(), index);
    write_vtk(dir + "/" + name, mesh, state);
  };
}

TimingStats stats_from(const std::string& model, const std::vector<double>& secs) {
  TimingStats s;
  s.model = model;
  s.min_t = *std::min_element(secs.begin(), secs.end());
  s.max_t = *std::max_element(secs.begin(), secs.end());
  s.sum_t = 0;
  for (double v : secs) s.sum_t += v;
  s.mean_t = s.sum_t / static_cast<double>(secs.size());
  return s;
}

void run_inversion(const ModeContext& ctx, bool use_gl) {
  const std::string tag = use_gl ? "gl" : "ss";
  ObsBundle obs = make_observations(ctx.cfg, ctx.seed, ctx.jobs);
  InverseProblem ip = make_inverse_problem(ctx.cfg, use_gl, obs, ctx.jobs);
  Chain chain = mcmc_run(ip, ctx.seed);

  const double af = chain.acceptance_fraction();
  if (af <= 0.0 || af >= 1.0) {
    log_warn("degenerate MCMC acceptance fraction " + std::to_string(af));
  }
  write_chain_csv(ctx.out_dir + "/chain_" + tag + ".csv", chain, ip.param_names);
  auto summaries = posterior_summary(chain, ctx.cfg.bayes.burn_in, ip.param_names, ip.priors);
  write_posterior_report(ctx.out_dir + "/posterior_" + tag + ".txt", summaries, chain,
                         ctx.cfg.bayes.burn_in);
  write_kde_csv(ctx.out_dir + "/kde_" + tag + ".csv", summaries);
}

std::vector<double> forward_call_seconds(const Chain& chain) {
  std::vector<double> secs;
  for (long i = 0; i < chain.forward_wall_ms.size(); ++i) {
    if (chain.forward_wall_ms[i] > 0) secs.push_back(chain.forward_wall_ms[i] / 1000.0);
  }
  if (secs.empty()) secs.push_back(0.0);
  return secs;
}

void run_compare(const ModeContext& ctx) {
  std::vector<TimingStats> table;
  if (ctx.cfg.compare.target == "forward") {
    ForwardSetup ss = make_ss_setup(ctx.cfg, ctx.cfg.mesh.refinement);
    GLSetup gl = make_gl_setup(ctx.cfg);
    std::vector<double> ss_secs, gl_secs;
    for (int r = 0; r < ctx.cfg.compare.repeats; ++r) {
      Trajectory t = run_forward_ss(ss.mesh, ss.params, ss.bc, ss.grid, ss.solver);
      ss_secs.push_back(t.total_wall_ms / 1000.0);
      GLTrajectory g = run_forward_gl(gl.meshes, gl.params, gl.bc_global, gl.bc_local, gl.grid,
                                      gl.gl, gl.solver);
      gl_secs.push_back(g.traj.total_wall_ms / 1000.0);
    }
    TimingStats s1 = stats_from("SS", ss_secs);
    TimingStats s2 = stats_from("GL", gl_secs);
    s1.ratio = s2.mean_t > 0 ? s1.mean_t / s2.mean_t : -1;
    table = {s1, s2};
  } else {
    ObsBundle obs = make_observations(ctx.cfg, ctx.seed, ctx.jobs);
    InverseProblem ip_ss = make_inverse_problem(ctx.cfg, false, obs, ctx.jobs);
    Chain chain_ss = mcmc_run(ip_ss, ctx.seed);
    InverseProblem ip_gl = make_inverse_problem(ctx.cfg, true, obs, ctx.jobs);
    Chain chain_gl = mcmc_run(ip_gl, ctx.seed);
    TimingStats s1 = stats_from("BI-SS", forward_call_seconds(chain_ss));
    TimingStats s2 = stats_from("BI-GL", forward_call_seconds(chain_gl));
    s1.ratio = s2.mean_t > 0 ? s1.mean_t / s2.mean_t : -1;
    table = {s1, s2};
    write_chain_csv(ctx.out_dir + "/chain_ss.csv", chain_ss, ip_ss.param_names);
    write_chain_csv(ctx.out_dir + "/chain_gl.csv", chain_gl, ip_gl.param_names);
  }
  write_timing_csv(ctx.out_dir + "/timing_compare.csv", table);
}

}  // namespace

int run_mode(const std::string& mode, const CliOverrides& cli) {
  const auto wall0 = std::chrono::steady_clock::now();

  std::ifstream f(cli.config_path);
  if (!f) {
    log_warn("cannot open config file: " + cli.config_path);
    return 2;
  }
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string config_text = ss.str();

  try {
    RunConfig cfg = parse_config_text(config_text);
    if (cli.out_dir) cfg.output.directory = *cli.out_dir;
    if (cli.seed) cfg.bayes.seed = *cli.seed;

    auto issues = validate_for_mode(cfg, mode);
    if (!issues.empty()) throw ConfigError(std::move(issues));

    ModeContext ctx;
    ctx.cfg = cfg;
    ctx.out_dir = cfg.output.directory;
    ctx.jobs = std::max(1, cli.jobs);
    if (cfg.bayes.seed) {
      ctx.seed = *cfg.bayes.seed;
      ctx.seeded = true;
    }
    ensure_directory(ctx.out_dir);

    if (mode == "forward-ss") {
      ForwardSetup s = make_ss_setup(cfg, cfg.mesh.refinement);
      Trajectory t =
          run_forward_ss(s.mesh, s.params, s.bc, s.grid, s.solver, vtk_writer(ctx, "ss"));
      write_trajectory_csv(ctx.out_dir + "/trajectory_ss.csv", t);
    } else if (mode == "forward-gl") {
      GLSetup s = make_gl_setup(cfg);
      GLTrajectory t =
          run_forward_gl(s.meshes, s.params, s.bc_global, s.bc_local, s.grid, s.gl, s.solver,
                         vtk_writer(ctx, "gl_global"), vtk_writer(ctx, "gl_local"));
      write_trajectory_csv(ctx.out_dir + "/trajectory_gl.csv", t.traj);
      write_gl_iteration_csv(ctx.out_dir + "/gl_iterations.csv", t.iter_log);
    } else if (mode == "invert-ss") {
      run_inversion(ctx, false);
    } else if (mode == "invert-gl") {
      run_inversion(ctx, true);
    } else if (mode == "compare") {
      run_compare(ctx);
    } else {
      log_warn("unknown mode: " + mode);
      return 2;
    }

    const double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    write_manifest(ctx.out_dir + "/manifest.json", mode, cli.config_path,
                   fnv1a_hash(config_text), ctx.seed, ctx.seeded, wall_s);
    return 0;
  } catch (const std::exception& e) {
    log_warn(std::string("run failed: ") + e.what());
    return 1;
  }
}

}  // namespace porofrac
