// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion.
//
// Usage: acceptance [--configs DIR] [--criterion N]

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "porofrac/output.hpp"
#include "porofrac/runner.hpp"

using namespace porofrac;

namespace {

struct SharedRuns {
  std::string configs_dir;
  std::optional<RunConfig> ref_cfg, inv_cfg;
  std::optional<GLTrajectory> ref_gl;
  std::optional<Trajectory> ref_ss_fine;

  RunConfig& reference() {
    if (!ref_cfg) ref_cfg = parse_config(configs_dir + "/reference.json");
    return *ref_cfg;
  }
  RunConfig& inversion() {
    if (!inv_cfg) inv_cfg = parse_config(configs_dir + "/inversion.json");
    return *inv_cfg;
  }
  const GLTrajectory& reference_gl() {
    if (!ref_gl) {
      std::printf("  running the reference global-local forward model...\n");
      GLSetup s = make_gl_setup(reference());
      ref_gl = run_forward_gl(s.meshes, s.params, s.bc_global, s.bc_local, s.grid, s.gl,
                              s.solver);
      std::printf("  reference GL run: %.1f s wall\n", ref_gl->traj.total_wall_ms / 1000.0);
    }
    return *ref_gl;
  }
  const Trajectory& reference_ss_fine() {
    if (!ref_ss_fine) {
      std::printf("  running the reference fine single-scale forward model...\n");
      ForwardSetup s = make_ss_setup(reference(), reference().mesh.refinement);
      ref_ss_fine = run_forward_ss(s.mesh, s.params, s.bc, s.grid, s.solver);
      std::printf("  reference fine SS run: %.1f s wall\n",
                  ref_ss_fine->total_wall_ms / 1000.0);
    }
    return *ref_ss_fine;
  }
};

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- criterion 1

Eigen::Matrix2d random_admissible_F(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.25, 0.25);
  for (;;) {
    Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
    F(0, 0) += u(rng);
    F(0, 1) += u(rng);
    F(1, 0) += u(rng);
    F(1, 1) += u(rng);
    const double J = F.determinant();
    if (J >= 0.7 && J <= 1.4) return F;
  }
}

bool criterion_constitutive(SharedRuns&) {
  MaterialParams mp;
  mp.mu = 2e7;
  mp.nu = 0.2;
  mp.Gc = 1.2e4;
  mp.l = 0.2;
  mp.eta_f = 1e-3;
  mp.K = 2e-11;
  mp.M = 1.2e6;
  mp.B = 1.0;
  mp.psi_c = 1.0;

  auto potential = [&](const Eigen::Matrix2d& F, double p, double d) {
    const Kinematics kin = Kinematics::from_F(F);
    return degradation(d, mp.kappa) * psi_elas(kin, mp) - mp.B * p * (kin.J - 1.0);
  };

  std::mt19937_64 rng(314159);
  std::uniform_real_distribution<double> up(-5e5, 5e5);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  double worst_stress = 0, worst_tangent = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Matrix2d F = random_admissible_F(rng);
    const double p = up(rng);
    const double d = ud(rng);
    const double h = 1e-5;

    Eigen::Matrix2d Pfd;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        Eigen::Matrix2d Fp = F, Fm = F;
        Fp(i, j) += h;
        Fm(i, j) -= h;
        Pfd(i, j) = (potential(Fp, p, d) - potential(Fm, p, d)) / (2 * h);
      }
    }
    const Eigen::Matrix2d P = piola_stress(Kinematics::from_F(F), p, d, mp);
    worst_stress = std::max(worst_stress, (P - Pfd).norm() / std::max(P.norm(), 1e-12));

    Eigen::Matrix4d Afd;
    for (int k = 0; k < 2; ++k) {
      for (int L = 0; L < 2; ++L) {
        Eigen::Matrix2d Fp = F, Fm = F;
        Fp(k, L) += h;
        Fm(k, L) -= h;
        const Eigen::Matrix2d dP = (piola_stress(Kinematics::from_F(Fp), p, d, mp) -
                                    piola_stress(Kinematics::from_F(Fm), p, d, mp)) /
                                   (2 * h);
        for (int i = 0; i < 2; ++i) {
          for (int J = 0; J < 2; ++J) Afd(2 * i + J, 2 * k + L) = dP(i, J);
        }
      }
    }
    const Eigen::Matrix4d A = elasticity_tangent(Kinematics::from_F(F), p, d, mp);
    worst_tangent = std::max(worst_tangent, (A - Afd).norm() / std::max(A.norm(), 1e-12));
  }
  std::printf("  worst stress FD error %.3e (<= 1e-6), worst tangent FD error %.3e (<= 1e-5)\n",
              worst_stress, worst_tangent);
  return worst_stress <= 1e-6 && worst_tangent <= 1e-5;
}

// ---------------------------------------------------------------- criterion 2

bool criterion_phasefield_pointwise(SharedRuns&) {
  Mesh mesh = build_rect_mesh({0, 0, 2, 2}, 12, 12);
  MaterialParams mp;
  mp.mu = 1e6;
  mp.nu = 0.25;
  mp.Gc = 100;
  mp.l = 0.3;
  mp.eta_f = 1;
  mp.K = 1e-2;
  mp.M = 1e6;
  mp.B = 1;
  mp.psi_c = 2.7;
  BoundaryData bc;
  StaggeredSolver solver(mesh, mp, bc, {});

  double worst = 0;
  for (double H : {0.0, 0.5 * mp.psi_c, mp.psi_c, 10 * mp.psi_c, 1e6}) {
    FieldState s = solver.initial_state();
    s.H.setConstant(H);
    solver.solve_phasefield(s);
    const double expected = H / (mp.psi_c + H);
    for (int n = 0; n < s.d.size(); ++n) worst = std::max(worst, std::abs(s.d[n] - expected));
  }
  std::printf("  worst nodal deviation from H/(psi_c+H): %.3e (<= 1e-8)\n", worst);
  return worst <= 1e-8;
}

// ---------------------------------------------------------------- criterion 3

bool criterion_irreversibility(SharedRuns& shared) {
  const auto t0 = std::chrono::steady_clock::now();
  const GLTrajectory& gl = shared.reference_gl();
  const double wall = elapsed_s(t0);
  std::printf("  min H increment over all steps/qps: %.3e (>= 0)\n",
              gl.traj.min_H_increment_all);
  std::printf("  d range before clamping: [%.3e, %.6f] (within [-1e-4, 1+1e-4])\n",
              gl.traj.min_d_all, gl.traj.max_d_all);
  const bool runtime_ok = wall < 600.0;
  if (!runtime_ok) std::printf("  RUNTIME %.0f s exceeds 600 s\n", wall);
  return gl.traj.min_H_increment_all >= 0.0 && gl.traj.min_d_all >= -1e-4 &&
         gl.traj.max_d_all <= 1.0 + 1e-4 && runtime_ok;
}

// ---------------------------------------------------------------- criterion 4

bool criterion_pressure_convergence(SharedRuns&) {
  MaterialParams mp;
  mp.mu = 1e6;
  mp.nu = 0.25;
  mp.Gc = 1;
  mp.l = 0.1;
  mp.eta_f = 1.0;
  mp.K = 1.0;
  mp.M = 1e30;
  mp.B = 1.0;
  mp.psi_c = 1.0;

  auto l2_error = [&](int n) {
    Mesh mesh = build_rect_mesh({0, 0, 1, 1}, n, n);
    std::vector<char> seen(mesh.n_nodes(), 0);
    BoundaryData bc;
    BoundaryData::DirichletU fix;
    BoundaryData::DirichletScalar pfix;
    for (const auto& [tag, edges] : mesh.boundary_tags) {
      for (const auto& e : edges) {
        for (int node : e) {
          if (!seen[node]) {
            seen[node] = 1;
            fix.nodes.push_back(node);
            pfix.nodes.push_back(node);
          }
        }
      }
    }
    fix.value = {0.0, 0.0};
    pfix.value = 0.0;
    bc.dirichlet_u.push_back(fix);
    bc.dirichlet_p.push_back(pfix);
    const double pi = 3.14159265358979323846;
    bc.injection = [pi](const Eigen::Vector2d& x) {
      return 2.0 * pi * pi * std::sin(pi * x[0]) * std::sin(pi * x[1]);
    };
    StaggeredSolver solver(mesh, mp, bc, {});
    FieldState state = solver.initial_state();
    FieldState prev = state;
    solver.solve_pressure(state, prev, 1.0);

    const auto geom = precompute_geometry(mesh);
    const auto& Nq = quad_shape_values();
    double err2 = 0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
      for (int q = 0; q < 4; ++q) {
        double ph = 0;
        for (int a = 0; a < 4; ++a) ph += Nq[q][a] * state.p[mesh.elements[e][a]];
        const Eigen::Vector2d x = geom[e].x[q];
        const double pex = std::sin(pi * x[0]) * std::sin(pi * x[1]);
        err2 += geom[e].w[q] * (ph - pex) * (ph - pex);
      }
    }
    return std::sqrt(err2);
  };

  const double e8 = l2_error(8), e16 = l2_error(16), e32 = l2_error(32);
  std::printf("  L2 errors: %.4e, %.4e, %.4e; ratios %.2f, %.2f (>= 3.5)\n", e8, e16, e32,
              e8 / e16, e16 / e32);
  return e8 / e16 >= 3.5 && e16 / e32 >= 3.5;
}

// ---------------------------------------------------------------- criterion 5

bool criterion_null_coupling(SharedRuns& shared) {
  RunConfig cfg = shared.reference();
  cfg.mesh.refinement = 1;  // conforming local mesh
  cfg.material.Gc *= 1e6;   // fracture suppressed
  cfg.material.psi_c = cfg.material.Gc / (2.0 * cfg.material.l);
  cfg.time.t_end = 5.0;

  GLSetup gs = make_gl_setup(cfg);
  GLTrajectory gl =
      run_forward_gl(gs.meshes, gs.params, gs.bc_global, gs.bc_local, gs.grid, gs.gl, gs.solver);
  ForwardSetup ss = make_ss_setup(cfg, 1);
  Trajectory st = run_forward_ss(ss.mesh, ss.params, ss.bc, ss.grid, ss.solver);

  if (gl.traj.rows.size() != st.rows.size()) {
    std::printf("  trajectory length mismatch\n");
    return false;
  }
  double worst = 0;
  for (size_t i = 0; i < st.rows.size(); ++i) {
    if (st.rows[i].t == 0) continue;
    const double ref = std::abs(st.rows[i].max_pressure);
    worst = std::max(worst, std::abs(gl.traj.rows[i].max_pressure - st.rows[i].max_pressure) /
                                std::max(ref, 1e-12));
  }
  int max_gl_iters = 0;
  for (int it : gl.gl_iters_per_step) max_gl_iters = std::max(max_gl_iters, it);
  std::printf("  worst relative trajectory deviation: %.3e (<= 1e-8); max GL iters %d\n", worst,
              max_gl_iters);
  return worst <= 1e-8;
}

// ---------------------------------------------------------------- criterion 6

bool criterion_gl_accuracy(SharedRuns& shared) {
  const auto t0 = std::chrono::steady_clock::now();
  const GLTrajectory& gl = shared.reference_gl();
  const Trajectory& ss = shared.reference_ss_fine();
  const double wall = elapsed_s(t0);
  if (gl.traj.rows.size() != ss.rows.size()) {
    std::printf("  trajectory length mismatch\n");
    return false;
  }
  double worst = 0;
  double worst_t = 0;
  for (size_t i = 0; i < ss.rows.size(); ++i) {
    if (ss.rows[i].t == 0) continue;
    const double rel = std::abs(gl.traj.rows[i].max_pressure - ss.rows[i].max_pressure) /
                       std::max(std::abs(ss.rows[i].max_pressure), 1e-12);
    if (rel > worst) {
      worst = rel;
      worst_t = ss.rows[i].t;
    }
  }
  std::printf("  worst relative max-pressure deviation: %.4f%% at t=%.1f s (<= 2%%)\n",
              100 * worst, worst_t);
  const bool runtime_ok = wall < 1800.0;
  if (!runtime_ok) std::printf("  RUNTIME %.0f s exceeds 1800 s\n", wall);
  return worst <= 0.02 && runtime_ok;
}

// ---------------------------------------------------------------- criterion 7

bool criterion_gl_speedup(SharedRuns& shared) {
  RunConfig& cfg = shared.reference();
  if (cfg.mesh.refinement < 2) {
    std::printf("  reference config must use local refinement >= 2\n");
    return false;
  }
  std::vector<double> ss_secs{shared.reference_ss_fine().total_wall_ms / 1000.0};
  std::vector<double> gl_secs{shared.reference_gl().traj.total_wall_ms / 1000.0};

  ForwardSetup sss = make_ss_setup(cfg, cfg.mesh.refinement);
  GLSetup gls = make_gl_setup(cfg);
  for (int r = 1; r < 5; ++r) {
    Trajectory t = run_forward_ss(sss.mesh, sss.params, sss.bc, sss.grid, sss.solver);
    ss_secs.push_back(t.total_wall_ms / 1000.0);
    GLTrajectory g = run_forward_gl(gls.meshes, gls.params, gls.bc_global, gls.bc_local,
                                    gls.grid, gls.gl, gls.solver);
    gl_secs.push_back(g.traj.total_wall_ms / 1000.0);
    std::printf("  run %d: SS %.1f s, GL %.1f s\n", r + 1, ss_secs.back(), gl_secs.back());
  }
  TimingStats s_ss = [&] {
    TimingStats s;
    s.model = "SS";
    s.min_t = *std::min_element(ss_secs.begin(), ss_secs.end());
    s.max_t = *std::max_element(ss_secs.begin(), ss_secs.end());
    for (double v : ss_secs) s.sum_t += v;
    s.mean_t = s.sum_t / ss_secs.size();
    return s;
  }();
  TimingStats s_gl = [&] {
    TimingStats s;
    s.model = "GL";
    s.min_t = *std::min_element(gl_secs.begin(), gl_secs.end());
    s.max_t = *std::max_element(gl_secs.begin(), gl_secs.end());
    for (double v : gl_secs) s.sum_t += v;
    s.mean_t = s.sum_t / gl_secs.size();
    return s;
  }();
  s_ss.ratio = s_ss.mean_t / s_gl.mean_t;
  write_timing_csv("acceptance_timing.csv", {s_ss, s_gl});
  std::printf("  mean SS %.1f s, mean GL %.1f s, ratio_T %.2f (> 2 required)\n", s_ss.mean_t,
              s_gl.mean_t, s_ss.ratio);
  return s_gl.mean_t < 0.5 * s_ss.mean_t && s_ss.ratio > 2.0;
}

// ---------------------------------------------------------------- criterion 8

bool criterion_bayesian_recovery(SharedRuns& shared) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = shared.inversion();
  const std::uint64_t seed = *cfg.bayes.seed;

  ObsBundle obs = make_observations(cfg, seed, 1);
  std::printf("  synthetic observations: %ld points, sigma = %.4g Pa\n",
              static_cast<long>(obs.obs.size()), std::sqrt(obs.sigma2));
  InverseProblem ip = make_inverse_problem(cfg, /*use_gl=*/false, obs, /*jobs=*/1);
  Chain chain = mcmc_run(ip, seed);
  std::printf("  chain of %d samples, acceptance fraction %.2f\n", chain.n(),
              chain.acceptance_fraction());
  write_chain_csv("acceptance_chain.csv", chain, ip.param_names);

  auto summaries = posterior_summary(chain, cfg.bayes.burn_in, ip.param_names, ip.priors);
  bool ok = chain.n() >= 2000;
  for (size_t k = 0; k < summaries.size(); ++k) {
    double truth = 0;
    for (size_t j = 0; j < obs.truth_names.size(); ++j) {
      if (obs.truth_names[j] == summaries[k].name) truth = obs.truth_values[j];
    }
    const double rel = std::abs(summaries[k].mean - truth) / std::abs(truth);
    const bool inside = summaries[k].ci_lo <= truth && truth <= summaries[k].ci_hi;
    std::printf("  %s: mean %.5g vs truth %.5g (off %.2f%%, <= 5%%), 95%% CI [%.5g, %.5g] %s\n",
                summaries[k].name.c_str(), summaries[k].mean, truth, 100 * rel,
                summaries[k].ci_lo, summaries[k].ci_hi,
                inside ? "contains truth" : "MISSES truth");
    ok = ok && rel <= 0.05 && inside;
  }
  const double wall = elapsed_s(t0);
  std::printf("  runtime %.0f s (< 7200 s)\n", wall);
  return ok && wall < 7200.0;
}

// ---------------------------------------------------------------- criterion 9

double batch_means_mcse(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  const int nb = std::max(10, static_cast<int>(std::sqrt(static_cast<double>(n))));
  const int bs = n / nb;
  std::vector<double> means;
  for (int b = 0; b < nb; ++b) {
    double s = 0;
    for (int i = b * bs; i < (b + 1) * bs; ++i) s += x[i];
    means.push_back(s / bs);
  }
  double m = 0;
  for (double v : means) m += v;
  m /= means.size();
  double var = 0;
  for (double v : means) var += (v - m) * (v - m);
  var /= (means.size() - 1);
  return std::sqrt(var / means.size());
}

bool criterion_linear_gaussian_audit(SharedRuns&) {
  // f(chi) = a chi with Gaussian prior N(m0, v0) and noise variance s2:
  // posterior precision 1/v0 + n a^2 / s2 (conjugate closed form)
  const double a = 2.0, m0 = 0.0, v0 = 1.0, s2 = 1.0;
  Eigen::VectorXd obs(3);
  obs << 1.3, 0.9, 1.7;

  InverseProblem ip;
  ip.param_names = {"chi"};
  ip.priors = {{Prior::Type::Gaussian, -10.0, 10.0, m0, std::sqrt(v0)}};
  ip.observations = obs;
  ip.sigma2 = s2;
  ip.forward = [a](const Eigen::VectorXd& chi) -> std::optional<Eigen::VectorXd> {
    return Eigen::VectorXd::Constant(3, a * chi[0]);
  };
  ip.ensemble_size = 32;
  ip.chain_length = 60000;
  Chain chain = mcmc_run(ip, 271828);

  const double prec = 1.0 / v0 + obs.size() * a * a / s2;
  const double v_post = 1.0 / prec;
  const double m_post = v_post * (m0 / v0 + a * obs.sum() / s2);

  const int burn = 10000;
  std::vector<double> xs, x2s;
  for (int i = burn; i < chain.n(); ++i) {
    xs.push_back(chain.samples(i, 0));
    x2s.push_back(chain.samples(i, 0) * chain.samples(i, 0));
  }
  double mean = 0;
  for (double v : xs) mean += v;
  mean /= xs.size();
  double m2 = 0;
  for (double v : x2s) m2 += v;
  m2 /= x2s.size();
  const double var = m2 - mean * mean;

  const double mcse_mean = batch_means_mcse(xs);
  const double mcse_m2 = batch_means_mcse(x2s);
  const double mcse_var =
      std::sqrt(mcse_m2 * mcse_m2 + 4 * mean * mean * mcse_mean * mcse_mean);

  std::printf("  mean %.5f vs %.5f (|diff| %.2e <= 3 x MCSE %.2e)\n", mean, m_post,
              std::abs(mean - m_post), mcse_mean);
  std::printf("  var  %.5f vs %.5f (|diff| %.2e <= 3 x MCSE %.2e)\n", var, v_post,
              std::abs(var - v_post), mcse_var);
  return std::abs(mean - m_post) <= 3 * mcse_mean && std::abs(var - v_post) <= 3 * mcse_var;
}

// --------------------------------------------------------------- criterion 10

std::string file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool criterion_determinism(SharedRuns& shared) {
  RunConfig cfg = shared.inversion();
  cfg.bayes.chain_length = 25;
  cfg.bayes.ensemble_size = 8;
  const std::uint64_t seed = *cfg.bayes.seed;

  auto run_once = [&](bool use_gl, const std::string& path) {
    ObsBundle obs = make_observations(cfg, seed, 1);
    InverseProblem ip = make_inverse_problem(cfg, use_gl, obs, 1);
    Chain chain = mcmc_run(ip, seed);
    write_chain_csv(path, chain, ip.param_names);
  };

  run_once(false, "det_ss_a.csv");
  run_once(false, "det_ss_b.csv");
  const bool ss_ok = file_bytes("det_ss_a.csv") == file_bytes("det_ss_b.csv");

  cfg.bayes.chain_length = 8;
  run_once(true, "det_gl_a.csv");
  run_once(true, "det_gl_b.csv");
  const bool gl_ok = file_bytes("det_gl_a.csv") == file_bytes("det_gl_b.csv");

  std::printf("  invert-ss chain CSVs identical: %s; invert-gl chain CSVs identical: %s\n",
              ss_ok ? "yes" : "NO", gl_ok ? "yes" : "NO");
  return ss_ok && gl_ok;
}

struct Criterion {
  int id;
  const char* name;
  std::function<bool(SharedRuns&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  SharedRuns shared;
  shared.configs_dir = "configs";
  int only = -1;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--configs" && i + 1 < argc) shared.configs_dir = argv[++i];
    if (a == "--criterion" && i + 1 < argc) only = std::atoi(argv[++i]);
  }

  std::vector<Criterion> criteria = {
      {1, "constitutive FD consistency", criterion_constitutive},
      {2, "phase-field pointwise law", criterion_phasefield_pointwise},
      {3, "irreversibility and bounds (reference run)", criterion_irreversibility},
      {4, "pressure solver mesh convergence", criterion_pressure_convergence},
      {5, "GL null-coupling consistency", criterion_null_coupling},
      {6, "GL accuracy vs fine SS", criterion_gl_accuracy},
      {7, "GL speedup", criterion_gl_speedup},
      {8, "Bayesian synthetic-truth recovery", criterion_bayesian_recovery},
      {9, "linear-Gaussian sampler audit", criterion_linear_gaussian_audit},
      {10, "stochastic determinism", criterion_determinism},
  };

  int failures = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& c : criteria) {
    if (only > 0 && c.id != only) continue;
    std::printf("--- criterion %d: %s\n", c.id, c.name);
    std::fflush(stdout);
    bool ok = false;
    const auto tc = std::chrono::steady_clock::now();
    try {
      ok = c.run(shared);
    } catch (const std::exception& e) {
      std::printf("  exception: %s\n", e.what());
      ok = false;
    }
    std::printf("ACCEPTANCE %2d (%s): %s  [%.1f s]\n", c.id, c.name, ok ? "PASS" : "FAIL",
                elapsed_s(tc));
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  std::printf("total wall time %.1f s; %d failure(s)\n", elapsed_s(t0), failures);
  return failures == 0 ? 0 : 1;
}
