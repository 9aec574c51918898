#include "porofrac/bayes.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <thread>

#include "porofrac/output.hpp"

namespace porofrac {

double Prior::log_pdf(double x) const {
  if (x < lo || x > hi) return -std::numeric_limits<double>::infinity();
  if (type == Type::Uniform) return 0.0;
  const double z = (x - mean) / sd;
  return -0.5 * z * z;
}

double Prior::sample(std::mt19937_64& rng) const {
  if (type == Type::Uniform) {
    std::uniform_real_distribution<double> u(lo, hi);
    return u(rng);
  }
  std::normal_distribution<double> n(mean, sd);
  for (int i = 0; i < 1000; ++i) {
    const double x = n(rng);
    if (x >= lo && x <= hi) return x;
  }
  throw ContractError("Gaussian prior has negligible mass inside its bounds");
}

void Prior::validate(std::vector<std::string>& issues, const std::string& name) const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
    issues.push_back("prior bounds for '" + name + "' must be finite and ordered");
  }
  if (type == Type::Gaussian && !(sd > 0)) {
    issues.push_back("Gaussian prior for '" + name + "' needs sd > 0");
  }
}

void InverseProblem::validate_or_throw() const {
  std::vector<std::string> issues;
  if (priors.empty()) issues.push_back("no parameters to identify");
  if (param_names.size() != priors.size()) issues.push_back("parameter names/priors mismatch");
  for (size_t i = 0; i < priors.size(); ++i) {
    priors[i].validate(issues, i < param_names.size() ? param_names[i] : "?");
  }
  if (observations.size() == 0) issues.push_back("observation vector is empty");
  if (!(sigma2 > 0)) issues.push_back("noise variance sigma2 must be > 0");
  if (ensemble_size < n_params() + 1) {
    issues.push_back("ensemble size must be at least the parameter count + 1");
  }
  if (chain_length < 1) issues.push_back("chain length must be >= 1");
  if (!forward) issues.push_back("forward model is not set");
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

double Chain::acceptance_fraction() const {
  if (accepted.empty()) return 0;
  double s = 0;
  for (char a : accepted) s += a ? 1.0 : 0.0;
  return s / static_cast<double>(accepted.size());
}

double log_likelihood(const Eigen::VectorXd& obs, const Eigen::VectorXd& model_out,
                      double sigma2) {
  if (obs.size() != model_out.size()) {
    throw ContractError("log_likelihood: observation / model output length mismatch");
  }
  return -0.5 * (obs - model_out).squaredNorm() / sigma2;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> estimate_covariances(
    const Eigen::MatrixXd& ensemble_params, const Eigen::MatrixXd& ensemble_outputs) {
  const long n = ensemble_params.rows();
  if (n < 2 || ensemble_outputs.rows() != n) {
    throw ContractError("estimate_covariances: need at least 2 ensemble members with matching "
                        "parameter/output rows");
  }
  const Eigen::RowVectorXd pm = ensemble_params.colwise().mean();
  const Eigen::RowVectorXd ym = ensemble_outputs.colwise().mean();
  const Eigen::MatrixXd P = ensemble_params.rowwise() - pm;
  const Eigen::MatrixXd Y = ensemble_outputs.rowwise() - ym;
  const double inv = 1.0 / static_cast<double>(n - 1);
  return {inv * P.transpose() * Y, inv * Y.transpose() * Y};
}

Eigen::MatrixXd enkf_gain(const Eigen::MatrixXd& C_tm, const Eigen::MatrixXd& C_mm,
                          const Eigen::MatrixXd& R) {
  Eigen::MatrixXd S = C_mm + R;
  auto try_solve = [&](const Eigen::MatrixXd& M) -> std::optional<Eigen::MatrixXd> {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) return std::nullopt;
    Eigen::MatrixXd K = ldlt.solve(C_tm.transpose()).transpose();
    if (!K.allFinite()) return std::nullopt;
    const double res = (M * K.transpose() - C_tm.transpose()).norm();
    const double scale = C_tm.norm();
    if (scale > 0 && res > 1e-8 * scale) return std::nullopt;
    return K;
  };
  if (auto K = try_solve(S)) return *K;
  const double reg = 1e-12 * std::max(S.trace(), 1.0);
  log_warn("Kalman gain system near-singular; regularizing with +1e-12*trace*I");
  S += reg * Eigen::MatrixXd::Identity(S.rows(), S.cols());
  if (auto K = try_solve(S)) return *K;
  throw SolverError("Kalman gain: covariance system singular even after regularization");
}

Eigen::VectorXd propose(const Eigen::VectorXd& chi_prev, const Eigen::VectorXd& f_prev,
                        const Eigen::MatrixXd& gain, const Eigen::VectorXd& obs,
                        const Eigen::VectorXd& noise, const std::vector<Prior>& priors) {
  Eigen::VectorXd chi = chi_prev + gain * (obs - f_prev + noise);
  for (int i = 0; i < chi.size(); ++i) {
    const double lo = priors[i].lo, hi = priors[i].hi;
    double x = chi[i];
    // reflect until inside; span guard for far overshoots
    for (int guard = 0; guard < 1000 && (x < lo || x > hi); ++guard) {
      if (x > hi) x = 2 * hi - x;
      if (x < lo) x = 2 * lo - x;
    }
    chi[i] = std::clamp(x, lo, hi);
  }
  return chi;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + stream * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

struct TimedEval {
  std::optional<Eigen::VectorXd> out;
  double wall_ms = 0;
};

TimedEval eval_forward(const ForwardModel& fwd, const Eigen::VectorXd& chi, long n_obs) {
  TimedEval r;
  const auto t0 = std::chrono::steady_clock::now();
  r.out = fwd(chi);
  r.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (r.out && r.out->size() != n_obs) {
    log_warn("forward model returned " + std::to_string(r.out->size()) + " values, expected " +
             std::to_string(n_obs) + "; treating as failure");
    r.out.reset();
  }
  return r;
}

/// Evaluate a batch of parameter vectors, optionally with worker threads.
/// Results are stored by index, so the outcome is order-independent.
std::vector<TimedEval> eval_batch(const ForwardModel& fwd,
                                  const std::vector<Eigen::VectorXd>& params, long n_obs,
                                  int jobs) {
  std::vector<TimedEval> out(params.size());
  if (jobs <= 1 || params.size() <= 1) {
    for (size_t i = 0; i < params.size(); ++i) out[i] = eval_forward(fwd, params[i], n_obs);
    return out;
  }
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= params.size()) return;
      out[i] = eval_forward(fwd, params[i], n_obs);
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = static_cast<int>(std::min<size_t>(jobs, params.size()));
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace

Chain mcmc_run(const InverseProblem& problem, std::uint64_t seed) {
  problem.validate_or_throw();
  const int np = problem.n_params();
  const long n_obs = problem.observations.size();
  const int n_ens = problem.ensemble_size;

  std::mt19937_64 rng_ensemble(mix_seed(seed, 1));
  std::mt19937_64 rng_proposal(mix_seed(seed, 2));
  std::mt19937_64 rng_accept(mix_seed(seed, 3));

  // fixed prior ensemble, propagated through the forward model once
  Eigen::MatrixXd ens_params(n_ens, np);
  Eigen::MatrixXd ens_outputs(n_ens, n_obs);
  {
    int have = 0;
    int attempts = 0;
    while (have < n_ens) {
      if (attempts > 5 * n_ens) {
        throw SolverError("forward model failed for most prior draws while building the "
                          "ensemble");
      }
      const int want = n_ens - have;
      std::vector<Eigen::VectorXd> batch(want);
      for (int i = 0; i < want; ++i) {
        Eigen::VectorXd chi(np);
        for (int k = 0; k < np; ++k) chi[k] = problem.priors[k].sample(rng_ensemble);
        batch[i] = chi;
      }
      auto results = eval_batch(problem.forward, batch, n_obs, problem.jobs);
      for (int i = 0; i < want; ++i) {
        ++attempts;
        if (results[i].out) {
          ens_params.row(have) = batch[i].transpose();
          ens_outputs.row(have) = results[i].out->transpose();
          ++have;
        }
      }
    }
  }

  const Eigen::MatrixXd R = problem.sigma2 * Eigen::MatrixXd::Identity(n_obs, n_obs);
  const double sigma = std::sqrt(problem.sigma2);

  Chain chain;
  chain.samples.resize(problem.chain_length, np);
  chain.log_post.resize(problem.chain_length);
  chain.accepted.assign(problem.chain_length, 0);
  chain.forward_wall_ms = Eigen::VectorXd::Zero(problem.chain_length);

  auto log_prior = [&](const Eigen::VectorXd& chi) {
    double lp = 0;
    for (int k = 0; k < np; ++k) lp += problem.priors[k].log_pdf(chi[k]);
    return lp;
  };

  Eigen::VectorXd chi = ens_params.row(0).transpose();
  Eigen::VectorXd f = ens_outputs.row(0).transpose();
  double lp = log_likelihood(problem.observations, f, problem.sigma2) + log_prior(chi);

  chain.samples.row(0) = chi.transpose();
  chain.log_post[0] = lp;
  chain.accepted[0] = 1;

  // Kalman gain from the prior ensemble; with informative data this scales
  // the proposal jumps to the posterior width automatically. Re-estimating
  // from accepted samples collapses the proposal and freezes the chain.
  const auto [Ctm, Cmm] = estimate_covariances(ens_params, ens_outputs);
  const Eigen::MatrixXd K = enkf_gain(Ctm, Cmm, R);

  // proposal covariance K R K^T for the Hastings correction; the proposal
  // mean at either end reuses the forward value needed for the likelihood,
  // so the correction costs no extra model evaluations
  const Eigen::MatrixXd Sigma = problem.sigma2 * K * K.transpose();
  Eigen::LDLT<Eigen::MatrixXd> sigma_ldlt;
  bool have_correction = false;
  {
    Eigen::MatrixXd S = Sigma;
    const double jitter = 1e-12 * std::max(S.trace(), 0.0);
    S += jitter * Eigen::MatrixXd::Identity(np, np);
    sigma_ldlt.compute(S);
    have_correction = sigma_ldlt.info() == Eigen::Success && S.trace() > 0 &&
                      sigma_ldlt.vectorD().minCoeff() > 0;
  }
  // log density of moving a -> b (up to a constant), reflection folding ignored
  auto log_q = [&](const Eigen::VectorXd& from, const Eigen::VectorXd& f_from,
                   const Eigen::VectorXd& to) {
    const Eigen::VectorXd mean = from + K * (problem.observations - f_from);
    const Eigen::VectorXd r = to - mean;
    return -0.5 * r.dot(sigma_ldlt.solve(r));
  };

  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif01(0.0, 1.0);

  for (int j = 1; j < problem.chain_length; ++j) {
    Eigen::VectorXd s(n_obs);
    for (long i = 0; i < n_obs; ++i) s[i] = sigma * std_normal(rng_proposal);
    const Eigen::VectorXd chi_star = propose(chi, f, K, problem.observations, s, problem.priors);

    bool accept = false;
    double wall_ms = 0;
    if ((chi_star.array() == chi.array()).all()) {
      // degenerate (zero-gain) proposal: nothing to evaluate
      chain.samples.row(j) = chi.transpose();
      chain.log_post[j] = lp;
      chain.forward_wall_ms[j] = 0;
      continue;
    }
    TimedEval ev = eval_forward(problem.forward, chi_star, n_obs);
    wall_ms = ev.wall_ms;
    if (ev.out) {
      const double lp_star =
          log_likelihood(problem.observations, *ev.out, problem.sigma2) + log_prior(chi_star);
      double log_alpha = lp_star - lp;
      if (have_correction && std::isfinite(lp_star)) {
        log_alpha += log_q(chi_star, *ev.out, chi) - log_q(chi, f, chi_star);
      }
      const double u = unif01(rng_accept);
      if (std::isfinite(lp_star) && std::log(u) < log_alpha) {
        accept = true;
        chi = chi_star;
        f = *ev.out;
        lp = lp_star;
      }
    } else {
      log_warn("forward model failed at a proposal; rejecting and continuing the chain");
    }
    chain.samples.row(j) = chi.transpose();
    chain.log_post[j] = lp;
    chain.accepted[j] = accept ? 1 : 0;
    chain.forward_wall_ms[j] = wall_ms;
  }
  return chain;
}

namespace {

double percentile(std::vector<double> sorted, double q) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = q * static_cast<double>(n - 1);
  const size_t i = static_cast<size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  if (i + 1 >= n) return sorted[n - 1];
  return sorted[i] * (1.0 - frac) + sorted[i + 1] * frac;
}

}  // namespace

std::vector<ParamSummary> posterior_summary(const Chain& chain, double burn_in_fraction,
                                            const std::vector<std::string>& names,
                                            const std::vector<Prior>& priors, int grid_n) {
  const int n = chain.n();
  const int burn = static_cast<int>(burn_in_fraction * n);
  if (burn >= n) throw ContractError("posterior_summary: empty post-burn-in chain");
  const int m = n - burn;

  std::vector<ParamSummary> out;
  for (int k = 0; k < chain.n_params(); ++k) {
    ParamSummary ps;
    ps.name = k < static_cast<int>(names.size()) ? names[k] : ("param" + std::to_string(k));
    Eigen::VectorXd x = chain.samples.col(k).tail(m);
    ps.mean = x.mean();
    ps.sd = m > 1 ? std::sqrt((x.array() - ps.mean).square().sum() / (m - 1)) : 0.0;

    std::vector<double> sorted(x.data(), x.data() + x.size());
    std::sort(sorted.begin(), sorted.end());
    ps.ci_lo = percentile(sorted, 0.025);
    ps.ci_hi = percentile(sorted, 0.975);

    // Silverman bandwidth
    const double iqr = percentile(sorted, 0.75) - percentile(sorted, 0.25);
    double spread = ps.sd;
    if (iqr > 0) spread = std::min(spread, iqr / 1.34);
    double bw = 0.9 * spread * std::pow(static_cast<double>(m), -0.2);
    if (!(bw > 0)) bw = 1e-12 * (std::abs(ps.mean) + 1.0);

    const double lo = k < static_cast<int>(priors.size()) ? priors[k].lo : sorted.front();
    const double hi = k < static_cast<int>(priors.size()) ? priors[k].hi : sorted.back();
    ps.kde_x.resize(grid_n);
    ps.kde_y.resize(grid_n);
    const double norm = 1.0 / (static_cast<double>(m) * bw * std::sqrt(2.0 * std::numbers::pi));
    for (int g = 0; g < grid_n; ++g) {
      const double xg = lo + (hi - lo) * g / (grid_n - 1);
      double acc = 0;
      for (double xi : sorted) {
        const double z = (xg - xi) / bw;
        acc += std::exp(-0.5 * z * z);
      }
      ps.kde_x[g] = xg;
      ps.kde_y[g] = norm * acc;
    }
    out.push_back(std::move(ps));
  }
  return out;
}

void write_chain_csv(const std::string& path, const Chain& chain,
                     const std::vector<std::string>& names) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open output file: " + path);
  f << "index";
  for (const auto& n : names) f << "," << n;
  f << ",log_post,accepted,forward_wall_ms\n";
  for (int i = 0; i < chain.n(); ++i) {
    f << i;
    for (int k = 0; k < chain.n_params(); ++k) f << "," << csv_double(chain.samples(i, k));
    f << "," << csv_double(chain.log_post[i]) << "," << int(chain.accepted[i]) << ","
      << csv_double(chain.forward_wall_ms[i]) << "\n";
  }
}

void write_kde_csv(const std::string& path, const std::vector<ParamSummary>& summaries) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open output file: " + path);
  f << "parameter,x,density\n";
  for (const auto& s : summaries) {
    for (int g = 0; g < s.kde_x.size(); ++g) {
      f << s.name << "," << csv_double(s.kde_x[g]) << "," << csv_double(s.kde_y[g]) << "\n";
    }
  }
}

void write_posterior_report(const std::string& path, const std::vector<ParamSummary>& summaries,
                            const Chain& chain, double burn_in_fraction) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open output file: " + path);
  f << "posterior summary (" << chain.n() << " samples, burn-in fraction " << burn_in_fraction
    << ")\n";
  f << "acceptance fraction: " << chain.acceptance_fraction() << "\n\n";
  for (const auto& s : summaries) {
    f << s.name << ":\n";
    f << "  mean   = " << csv_double(s.mean) << "\n";
    f << "  sd     = " << csv_double(s.sd) << "\n";
    f << "  95% CI = [" << csv_double(s.ci_lo) << ", " << csv_double(s.ci_hi) << "]\n";
  }
}

}  // namespace porofrac
