#include "porofrac/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace porofrac {

namespace {

using nlohmann::json;

/// Collects problems while walking the document; unknown keys are reported.
struct Ctx {
  std::vector<std::string> issues;

  void fail(const std::string& where, const std::string& what) {
    issues.push_back(where + ": " + what);
  }

  void check_keys(const json& j, const std::string& where,
                  const std::set<std::string>& allowed) {
    if (!j.is_object()) {
      fail(where, "expected an object");
      return;
    }
    for (const auto& [k, v] : j.items()) {
      if (!allowed.count(k)) fail(where, "unknown key '" + k + "'");
    }
  }

  double number(const json& j, const std::string& where, const std::string& key, double dflt,
                bool required = false) {
    if (!j.contains(key)) {
      if (required) fail(where, "missing required key '" + key + "'");
      return dflt;
    }
    if (!j[key].is_number()) {
      fail(where, "'" + key + "' must be a number");
      return dflt;
    }
    return j[key].get<double>();
  }

  int integer(const json& j, const std::string& where, const std::string& key, int dflt,
              bool required = false) {
    if (!j.contains(key)) {
      if (required) fail(where, "missing required key '" + key + "'");
      return dflt;
    }
    if (!j[key].is_number_integer()) {
      fail(where, "'" + key + "' must be an integer");
      return dflt;
    }
    return j[key].get<int>();
  }

  bool boolean(const json& j, const std::string& where, const std::string& key, bool dflt) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_boolean()) {
      fail(where, "'" + key + "' must be a boolean");
      return dflt;
    }
    return j[key].get<bool>();
  }

  std::string text(const json& j, const std::string& where, const std::string& key,
                   const std::string& dflt, bool required = false) {
    if (!j.contains(key)) {
      if (required) fail(where, "missing required key '" + key + "'");
      return dflt;
    }
    if (!j[key].is_string()) {
      fail(where, "'" + key + "' must be a string");
      return dflt;
    }
    return j[key].get<std::string>();
  }

  std::optional<Rect> rect(const json& j, const std::string& where, const std::string& key,
                           bool required = false) {
    if (!j.contains(key)) {
      if (required) fail(where, "missing required key '" + key + "'");
      return std::nullopt;
    }
    const auto& a = j[key];
    if (!a.is_array() || a.size() != 4 || !a[0].is_number()) {
      fail(where, "'" + key + "' must be [x0, y0, x1, y1]");
      return std::nullopt;
    }
    Rect r{a[0].get<double>(), a[1].get<double>(), a[2].get<double>(), a[3].get<double>()};
    if (!r.valid()) fail(where, "'" + key + "' is degenerate or inverted");
    return r;
  }

  std::optional<Eigen::Vector2d> vec2(const json& j, const std::string& where,
                                      const std::string& key) {
    if (!j.contains(key)) return std::nullopt;
    const auto& a = j[key];
    if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
      fail(where, "'" + key + "' must be [x, y]");
      return std::nullopt;
    }
    return Eigen::Vector2d(a[0].get<double>(), a[1].get<double>());
  }
};

void parse_mesh(Ctx& c, const json& j, MeshConfig& m) {
  c.check_keys(j, "mesh", {"bounds", "nx", "ny", "local_region", "refinement"});
  if (!j.is_object()) return;
  if (auto b = c.rect(j, "mesh", "bounds", true)) m.bounds = *b;
  m.nx = c.integer(j, "mesh", "nx", m.nx, true);
  m.ny = c.integer(j, "mesh", "ny", m.ny, true);
  if (m.nx < 1 || m.ny < 1) c.fail("mesh", "nx and ny must be >= 1");
  m.local_region = c.rect(j, "mesh", "local_region");
  m.refinement = c.integer(j, "mesh", "refinement", m.refinement);
  if (m.refinement < 1) c.fail("mesh", "refinement must be >= 1");
}

void parse_material(Ctx& c, const json& j, MaterialParams& mp) {
  c.check_keys(j, "material",
               {"mu", "nu", "Gc", "l", "kappa", "eta_f", "K", "Kc", "zeta", "M", "B", "psi_c"});
  if (!j.is_object()) return;
  mp.mu = c.number(j, "material", "mu", 0, true);
  mp.nu = c.number(j, "material", "nu", 0, true);
  mp.Gc = c.number(j, "material", "Gc", 0, true);
  mp.l = c.number(j, "material", "l", -1);
  mp.kappa = c.number(j, "material", "kappa", 1e-8);
  mp.eta_f = c.number(j, "material", "eta_f", 0, true);
  mp.K = c.number(j, "material", "K", 0, true);
  mp.Kc = c.number(j, "material", "Kc", 0);
  mp.zeta = c.number(j, "material", "zeta", 1);
  mp.M = c.number(j, "material", "M", 0, true);
  mp.B = c.number(j, "material", "B", 0, true);
  mp.psi_c = c.number(j, "material", "psi_c", -1);

  // defer l / psi_c checks (mesh-derived defaults), validate the rest now
  MaterialParams probe = mp;
  probe.l = probe.l > 0 ? probe.l : 1.0;
  probe.psi_c = probe.psi_c > 0 ? probe.psi_c : 1.0;
  for (auto& msg : probe.validate()) c.fail("material", msg);
}

void parse_bc(Ctx& c, const json& j, BCConfig& bc) {
  c.check_keys(j, "bc",
               {"body_force", "fix_u", "fix_p", "traction", "flux", "injection",
                "initial_cracks", "initial_pressure"});
  if (!j.is_object()) return;
  if (auto b = c.vec2(j, "bc", "body_force")) bc.body_force = *b;
  bc.initial_pressure = c.number(j, "bc", "initial_pressure", 0.0);

  if (j.contains("fix_u")) {
    int idx = 0;
    for (const auto& e : j["fix_u"]) {
      const std::string where = "bc.fix_u[" + std::to_string(idx++) + "]";
      c.check_keys(e, where, {"where", "region", "components", "value"});
      FixUEntry f;
      f.where = c.text(e, where, "where", "");
      f.region = c.rect(e, where, "region");
      if (f.where.empty() && !f.region) c.fail(where, "needs 'where' or 'region'");
      if (e.contains("components")) {
        f.components = {false, false};
        for (const auto& comp : e["components"]) {
          const int ci = comp.get<int>();
          if (ci < 0 || ci > 1) {
            c.fail(where, "components must be 0 or 1");
          } else {
            f.components[ci] = true;
          }
        }
      }
      if (auto v = c.vec2(e, where, "value")) f.value = *v;
      bc.fix_u.push_back(std::move(f));
    }
  }

  auto parse_scalar_list = [&](const char* key, std::vector<FixScalarEntry>& out) {
    if (!j.contains(key)) return;
    int idx = 0;
    for (const auto& e : j[key]) {
      const std::string where = std::string("bc.") + key + "[" + std::to_string(idx++) + "]";
      c.check_keys(e, where, {"where", "region", "value"});
      FixScalarEntry f;
      f.where = c.text(e, where, "where", "");
      f.region = c.rect(e, where, "region");
      if (f.where.empty() && !f.region) c.fail(where, "needs 'where' or 'region'");
      f.value = c.number(e, where, "value", 0.0, true);
      out.push_back(std::move(f));
    }
  };
  parse_scalar_list("fix_p", bc.fix_p);

  if (j.contains("traction")) {
    int idx = 0;
    for (const auto& e : j["traction"]) {
      const std::string where = "bc.traction[" + std::to_string(idx++) + "]";
      c.check_keys(e, where, {"where", "value"});
      TractionEntry t;
      t.where = c.text(e, where, "where", "", true);
      if (auto v = c.vec2(e, where, "value")) t.value = *v;
      bc.traction.push_back(std::move(t));
    }
  }
  if (j.contains("flux")) {
    int idx = 0;
    for (const auto& e : j["flux"]) {
      const std::string where = "bc.flux[" + std::to_string(idx++) + "]";
      c.check_keys(e, where, {"where", "value"});
      FluxEntry f;
      f.where = c.text(e, where, "where", "", true);
      f.value = c.number(e, where, "value", 0.0, true);
      bc.flux.push_back(std::move(f));
    }
  }
  if (j.contains("injection")) {
    int idx = 0;
    for (const auto& e : j["injection"]) {
      const std::string where = "bc.injection[" + std::to_string(idx++) + "]";
      c.check_keys(e, where, {"region", "rate"});
      InjectionEntry inj;
      if (auto r = c.rect(e, where, "region", true)) inj.region = *r;
      inj.rate = c.number(e, where, "rate", 0.0, true);
      bc.injection.push_back(inj);
    }
  }
  if (j.contains("initial_cracks")) {
    int idx = 0;
    for (const auto& e : j["initial_cracks"]) {
      const std::string where = "bc.initial_cracks[" + std::to_string(idx++) + "]";
      c.check_keys(e, where, {"region"});
      if (auto r = c.rect(e, where, "region", true)) bc.initial_cracks.push_back({*r});
    }
  }
}

void parse_time(Ctx& c, const json& j, TimeConfig& t) {
  c.check_keys(j, "time", {"dt", "t_end", "output_stride"});
  if (!j.is_object()) return;
  t.dt = c.number(j, "time", "dt", t.dt, true);
  t.t_end = c.number(j, "time", "t_end", t.t_end, true);
  t.output_stride = c.integer(j, "time", "output_stride", t.output_stride);
  if (!(t.dt > 0)) c.fail("time", "dt must be > 0");
  if (!(t.t_end >= t.dt)) c.fail("time", "t_end must be >= dt");
  if (t.output_stride < 1) c.fail("time", "output_stride must be >= 1");
}

void parse_solver(Ctx& c, const json& j, SolverOptions& s) {
  c.check_keys(j, "solver",
               {"newton_tol_abs", "newton_tol_rel", "newton_max_iter", "stagger_tol",
                "max_stagger", "max_halvings"});
  if (!j.is_object()) return;
  s.newton.tol_abs = c.number(j, "solver", "newton_tol_abs", s.newton.tol_abs);
  s.newton.tol_rel = c.number(j, "solver", "newton_tol_rel", s.newton.tol_rel);
  s.newton.max_iter = c.integer(j, "solver", "newton_max_iter", s.newton.max_iter);
  s.stagger_tol = c.number(j, "solver", "stagger_tol", s.stagger_tol);
  s.max_stagger = c.integer(j, "solver", "max_stagger", s.max_stagger);
  s.max_halvings = c.integer(j, "solver", "max_halvings", s.max_halvings);
}

void parse_gl(Ctx& c, const json& j, GLUserConfig& g) {
  c.check_keys(j, "gl", {"tol", "max_iter", "relaxation", "crack_containment"});
  if (!j.is_object()) return;
  g.tol = c.number(j, "gl", "tol", g.tol);
  g.max_iter = c.integer(j, "gl", "max_iter", g.max_iter);
  g.relaxation = c.number(j, "gl", "relaxation", g.relaxation);
  g.crack_containment = c.number(j, "gl", "crack_containment", g.crack_containment);
  if (!(g.tol > 0)) c.fail("gl", "tol must be > 0");
  if (!(g.relaxation > 0 && g.relaxation <= 1)) c.fail("gl", "relaxation must be in (0, 1]");
}

void parse_bayes(Ctx& c, const json& j, BayesConfig& b) {
  c.check_keys(j, "bayes",
               {"parameters", "sigma2", "ensemble_size", "chain_length", "seed", "burn_in",
                "synthetic", "observations_file"});
  if (!j.is_object()) return;
  if (j.contains("parameters")) {
    int idx = 0;
    for (const auto& e : j["parameters"]) {
      const std::string where = "bayes.parameters[" + std::to_string(idx++) + "]";
      c.check_keys(e, where, {"name", "prior", "bounds", "mean", "sd"});
      BayesParamConfig p;
      p.name = c.text(e, where, "name", "", true);
      const std::string prior = c.text(e, where, "prior", "uniform");
      if (prior == "uniform") {
        p.prior.type = Prior::Type::Uniform;
      } else if (prior == "gaussian") {
        p.prior.type = Prior::Type::Gaussian;
      } else {
        c.fail(where, "prior must be 'uniform' or 'gaussian'");
      }
      if (e.contains("bounds") && e["bounds"].is_array() && e["bounds"].size() == 2) {
        p.prior.lo = e["bounds"][0].get<double>();
        p.prior.hi = e["bounds"][1].get<double>();
      } else {
        c.fail(where, "'bounds' must be [lo, hi]");
      }
      p.prior.mean = c.number(e, where, "mean", 0.5 * (p.prior.lo + p.prior.hi));
      p.prior.sd = c.number(e, where, "sd", 1.0);
      p.prior.validate(c.issues, p.name);
      b.parameters.push_back(std::move(p));
    }
  } else {
    c.fail("bayes", "missing required key 'parameters'");
  }
  b.sigma2 = c.number(j, "bayes", "sigma2", -1.0);
  b.ensemble_size = c.integer(j, "bayes", "ensemble_size", b.ensemble_size);
  b.chain_length = c.integer(j, "bayes", "chain_length", b.chain_length);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) {
      c.fail("bayes", "'seed' must be an integer");
    } else {
      b.seed = j["seed"].get<std::uint64_t>();
    }
  }
  b.burn_in = c.number(j, "bayes", "burn_in", b.burn_in);
  if (!(b.burn_in >= 0 && b.burn_in < 1)) c.fail("bayes", "burn_in must be in [0, 1)");
  if (j.contains("synthetic")) {
    const auto& s = j["synthetic"];
    c.check_keys(s, "bayes.synthetic", {"true_params", "noise_rel"});
    SyntheticObsConfig so;
    if (s.contains("true_params") && s["true_params"].is_object()) {
      for (const auto& [k, v] : s["true_params"].items()) {
        if (!v.is_number()) {
          c.fail("bayes.synthetic", "true_params values must be numbers");
        } else {
          so.true_params[k] = v.get<double>();
        }
      }
    } else {
      c.fail("bayes.synthetic", "missing 'true_params' object");
    }
    so.noise_rel = c.number(s, "bayes.synthetic", "noise_rel", so.noise_rel);
    if (!(so.noise_rel >= 0)) c.fail("bayes.synthetic", "noise_rel must be >= 0");
    b.synthetic = std::move(so);
  }
  if (j.contains("observations_file")) {
    b.observations_file = c.text(j, "bayes", "observations_file", "", true);
  }
  if (b.ensemble_size < 2) c.fail("bayes", "ensemble_size must be >= 2");
  if (b.chain_length < 1) c.fail("bayes", "chain_length must be >= 1");
}

void parse_compare(Ctx& c, const json& j, CompareConfig& cc) {
  c.check_keys(j, "compare", {"target", "repeats"});
  if (!j.is_object()) return;
  cc.target = c.text(j, "compare", "target", cc.target);
  if (cc.target != "forward" && cc.target != "invert") {
    c.fail("compare", "target must be 'forward' or 'invert'");
  }
  cc.repeats = c.integer(j, "compare", "repeats", cc.repeats);
  if (cc.repeats < 1) c.fail("compare", "repeats must be >= 1");
}

void parse_output(Ctx& c, const json& j, OutputConfig& o) {
  c.check_keys(j, "output", {"directory", "vtk"});
  if (!j.is_object()) return;
  o.directory = c.text(j, "output", "directory", o.directory);
  o.vtk = c.boolean(j, "output", "vtk", o.vtk);
}

RunConfig parse_json(const json& root) {
  Ctx c;
  RunConfig cfg;
  if (!root.is_object()) {
    throw ConfigError({"top level must be a JSON object"});
  }
  c.check_keys(root, "config",
               {"mesh", "material", "bc", "time", "solver", "gl", "bayes", "compare", "output"});

  if (root.contains("mesh")) {
    parse_mesh(c, root["mesh"], cfg.mesh);
  } else {
    c.fail("config", "missing required section 'mesh'");
  }
  if (root.contains("material")) {
    parse_material(c, root["material"], cfg.material);
  } else {
    c.fail("config", "missing required section 'material'");
  }
  if (root.contains("bc")) parse_bc(c, root["bc"], cfg.bc);
  if (root.contains("time")) parse_time(c, root["time"], cfg.time);
  if (root.contains("solver")) parse_solver(c, root["solver"], cfg.solver);
  if (root.contains("gl")) parse_gl(c, root["gl"], cfg.gl);
  if (root.contains("bayes")) {
    cfg.has_bayes = true;
    parse_bayes(c, root["bayes"], cfg.bayes);
  }
  if (root.contains("compare")) parse_compare(c, root["compare"], cfg.compare);
  if (root.contains("output")) parse_output(c, root["output"], cfg.output);

  // geometric cross-checks
  if (cfg.mesh.local_region) {
    const Rect& r = *cfg.mesh.local_region;
    const Rect& b = cfg.mesh.bounds;
    if (r.x0 <= b.x0 || r.y0 <= b.y0 || r.x1 >= b.x1 || r.y1 >= b.y1) {
      c.fail("mesh", "local_region must be strictly inside the domain bounds");
    }
  }

  if (!c.issues.empty()) throw ConfigError(std::move(c.issues));
  return cfg;
}

}  // namespace

RunConfig parse_config_text(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("JSON parse error: ") + e.what()});
  }
  return parse_json(root);
}

RunConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError({"cannot open config file: " + path});
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::vector<std::string> validate_for_mode(const RunConfig& cfg, const std::string& mode) {
  std::vector<std::string> issues;
  const bool gl_mode = mode == "forward-gl" || mode == "invert-gl";
  const bool invert_mode = mode == "invert-ss" || mode == "invert-gl";
  const bool compare_mode = mode == "compare";

  if ((gl_mode || compare_mode) && !cfg.mesh.local_region) {
    issues.push_back(mode + " requires mesh.local_region");
  }
  if (invert_mode || compare_mode || (cfg.has_bayes && cfg.bayes.synthetic)) {
    if (invert_mode && !cfg.has_bayes) {
      issues.push_back(mode + " requires a 'bayes' section");
    }
  }
  if (invert_mode && cfg.has_bayes) {
    if (!cfg.bayes.seed) issues.push_back(mode + " requires bayes.seed (stochastic mode)");
    if (!cfg.bayes.synthetic && !cfg.bayes.observations_file) {
      issues.push_back(mode + " needs bayes.synthetic or bayes.observations_file");
    }
    if (!cfg.bayes.synthetic && cfg.bayes.sigma2 <= 0) {
      issues.push_back("bayes.sigma2 must be > 0 when observations come from a file");
    }
  }
  if (compare_mode && cfg.compare.target == "invert") {
    if (!cfg.has_bayes) {
      issues.push_back("compare with target 'invert' requires a 'bayes' section");
    } else if (!cfg.bayes.seed) {
      issues.push_back("compare with target 'invert' requires bayes.seed");
    }
  }
  return issues;
}

}  // namespace porofrac
