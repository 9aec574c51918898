#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "porofrac/common.hpp"

namespace porofrac {

/// Bounded prior for one parameter.
struct Prior {
  enum class Type { Uniform, Gaussian };
  Type type = Type::Uniform;
  double lo = 0, hi = 1;
  double mean = 0, sd = 1;  // Gaussian only

  double log_pdf(double x) const;
  double sample(std::mt19937_64& rng) const;
  void validate(std::vector<std::string>& issues, const std::string& name) const;
};

/// Forward model evaluation; nullopt signals a solver failure (the proposal
/// is then rejected and the chain continues).
using ForwardModel = std::function<std::optional<Eigen::VectorXd>(const Eigen::VectorXd&)>;

struct InverseProblem {
  std::vector<std::string> param_names;
  std::vector<Prior> priors;
  Eigen::VectorXd observations;
  double sigma2 = 1;  // noise variance; R = sigma2 * I
  ForwardModel forward;
  int ensemble_size = 32;
  int chain_length = 2000;
  int jobs = 1;

  int n_params() const { return static_cast<int>(priors.size()); }
  void validate_or_throw() const;
};

struct Chain {
  Eigen::MatrixXd samples;  // chain_length x n_params
  Eigen::VectorXd log_post;
  std::vector<char> accepted;
  Eigen::VectorXd forward_wall_ms;

  int n() const { return static_cast<int>(samples.rows()); }
  int n_params() const { return static_cast<int>(samples.cols()); }
  double acceptance_fraction() const;
};

/// Gaussian log-likelihood up to its additive constant.
double log_likelihood(const Eigen::VectorXd& obs, const Eigen::VectorXd& model_out, double sigma2);

/// Unbiased sample cross- and output covariances of an ensemble.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> estimate_covariances(
    const Eigen::MatrixXd& ensemble_params, const Eigen::MatrixXd& ensemble_outputs);

/// Kalman gain K = C_tm (C_mm + R)^{-1}, with trace regularization fallback.
Eigen::MatrixXd enkf_gain(const Eigen::MatrixXd& C_tm, const Eigen::MatrixXd& C_mm,
                          const Eigen::MatrixXd& R);

/// EnKF proposal: chi* = chi + K (obs - f(chi) + s), reflected into the prior
/// bounds.
Eigen::VectorXd propose(const Eigen::VectorXd& chi_prev, const Eigen::VectorXd& f_prev,
                        const Eigen::MatrixXd& gain, const Eigen::VectorXd& obs,
                        const Eigen::VectorXd& noise, const std::vector<Prior>& priors);

/// Metropolis-Hastings chain with EnKF proposal adaptation. Deterministic for
/// a fixed seed regardless of the number of worker threads.
Chain mcmc_run(const InverseProblem& problem, std::uint64_t seed);

struct ParamSummary {
  std::string name;
  double mean = 0, sd = 0;
  double ci_lo = 0, ci_hi = 0;  // 95% credible interval
  Eigen::VectorXd kde_x, kde_y;
};

/// Post-burn-in summaries; KDE uses a Gaussian kernel with Silverman's rule
/// on a fixed grid over the prior bounds.
std::vector<ParamSummary> posterior_summary(const Chain& chain, double burn_in_fraction,
                                            const std::vector<std::string>& names,
                                            const std::vector<Prior>& priors, int grid_n = 201);

void write_chain_csv(const std::string& path, const Chain& chain,
                     const std::vector<std::string>& names);
void write_kde_csv(const std::string& path, const std::vector<ParamSummary>& summaries);
void write_posterior_report(const std::string& path, const std::vector<ParamSummary>& summaries,
                            const Chain& chain, double burn_in_fraction);

/// splitmix64; used to derive independent per-purpose RNG streams from one seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace porofrac
