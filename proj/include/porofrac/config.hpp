#pragma once

#include <Eigen/Core>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "porofrac/bayes.hpp"
#include "porofrac/forward.hpp"
#include "porofrac/global_local.hpp"
#include "porofrac/material.hpp"
#include "porofrac/mesh.hpp"

namespace porofrac {

struct MeshConfig {
  Rect bounds{0, 0, 1, 1};
  int nx = 10, ny = 10;
  std::optional<Rect> local_region;
  int refinement = 1;
};

struct FixUEntry {
  std::string where;  // boundary tag, "all", or empty when region is set
  std::optional<Rect> region;
  std::array<bool, 2> components{true, true};
  Eigen::Vector2d value = Eigen::Vector2d::Zero();
};

struct FixScalarEntry {
  std::string where;
  std::optional<Rect> region;
  double value = 0;
};

struct TractionEntry {
  std::string where;
  Eigen::Vector2d value = Eigen::Vector2d::Zero();
};

struct FluxEntry {
  std::string where;
  double value = 0;
};

struct InjectionEntry {
  Rect region;
  double rate = 0;
};

struct CrackEntry {
  Rect region;
};

struct BCConfig {
  Eigen::Vector2d body_force = Eigen::Vector2d::Zero();
  std::vector<FixUEntry> fix_u;
  std::vector<FixScalarEntry> fix_p;
  std::vector<TractionEntry> traction;
  std::vector<FluxEntry> flux;
  std::vector<InjectionEntry> injection;
  std::vector<CrackEntry> initial_cracks;
  double initial_pressure = 0;
};

struct TimeConfig {
  double dt = 0.1;
  double t_end = 20.0;
  int output_stride = 1;
};

struct GLUserConfig {
  double tol = 1e-6;
  int max_iter = 50;
  double relaxation = 0.5;
  double crack_containment = 0.2;
};

struct BayesParamConfig {
  std::string name;
  Prior prior;
};

struct SyntheticObsConfig {
  std::map<std::string, double> true_params;
  double noise_rel = 0.01;
};

struct BayesConfig {
  std::vector<BayesParamConfig> parameters;
  double sigma2 = -1;  // < 0: derive from the synthetic noise level
  int ensemble_size = 32;
  int chain_length = 2000;
  std::optional<std::uint64_t> seed;
  double burn_in = 0.2;
  std::optional<SyntheticObsConfig> synthetic;
  std::optional<std::string> observations_file;
};

struct CompareConfig {
  std::string target = "forward";  // "forward" or "invert"
  int repeats = 5;
};

struct OutputConfig {
  std::string directory = "out";
  bool vtk = false;
};

struct RunConfig {
  MeshConfig mesh;
  MaterialParams material;  // raw: l / psi_c may still be negative (derived later)
  BCConfig bc;
  TimeConfig time;
  SolverOptions solver;
  GLUserConfig gl;
  BayesConfig bayes;
  CompareConfig compare;
  OutputConfig output;
  bool has_bayes = false;
};

/// Parse and validate; throws ConfigError carrying every problem found, not
/// just the first. Unknown keys are errors.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& json_text);

/// Mode-dependent requirements (seed for stochastic modes, local region for
/// GL modes, ...). Returns the list of violations.
std::vector<std::string> validate_for_mode(const RunConfig& cfg, const std::string& mode);

}  // namespace porofrac
