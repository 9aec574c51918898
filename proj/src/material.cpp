#include "porofrac/material.hpp"
#include <Eigen/Dense>

#include <cmath>
#include <mutex>

namespace porofrac {

void MaterialParams::finalize_defaults(double h_e) {
  if (l <= 0) l = 2.0 * h_e;
  if (psi_c <= 0) psi_c = Gc / (2.0 * l);
}

std::vector<std::string> MaterialParams::validate() const {
  std::vector<std::string> e;
  if (!(mu > 0)) e.push_back("shear modulus mu must be > 0");
  if (!(nu >= 0 && nu < 0.5)) e.push_back("Poisson ratio nu must be in [0, 0.5)");
  if (nu == 0.0) e.push_back("Poisson ratio nu = 0 makes beta = 0 and the volumetric energy term singular");
  if (!(Gc > 0)) e.push_back("critical energy release rate Gc must be > 0");
  if (!(l > 0)) e.push_back("regularization length l must be > 0");
  if (!(kappa > 0 && kappa < 1e-2)) e.push_back("residual stiffness kappa must be in (0, 1e-2)");
  if (!(eta_f > 0)) e.push_back("fluid viscosity eta_f must be > 0");
  if (!(K > 0)) e.push_back("intrinsic permeability K must be > 0");
  if (!(Kc >= 0)) e.push_back("fracture permeability coefficient Kc must be >= 0");
  if (!(zeta >= 1)) e.push_back("permeability transition exponent zeta must be >= 1");
  if (!(M > 0)) e.push_back("Biot modulus M must be > 0");
  if (!(B >= 0 && B <= 1)) e.push_back("Biot coefficient B must be in [0, 1]");
  if (!(psi_c > 0)) e.push_back("fracture threshold psi_c must be > 0");
  if (nu > 0 && nu < 0.5) {
    const double b = beta();
    if (!(b > -1) || !std::isfinite(b)) e.push_back("beta(nu) must be finite and > -1");
  }
  return e;
}

void MaterialParams::validate_or_throw() const {
  auto e = validate();
  if (!e.empty()) throw ConfigError(std::move(e));
}

Kinematics Kinematics::from_F(const Eigen::Matrix2d& F) {
  auto k = try_from(F);
  if (!k) throw InadmissibleStateError("deformation gradient has det F <= 0");
  return *k;
}

std::optional<Kinematics> Kinematics::try_from(const Eigen::Matrix2d& F) {
  const double J = F.determinant();
  if (!(J > 0) || !F.allFinite()) return std::nullopt;
  Kinematics k;
  k.F = F;
  k.J = J;
  k.C = F.transpose() * F;
  Eigen::Matrix2d Finv;
  const double inv = 1.0 / J;
  Finv << F(1, 1) * inv, -F(0, 1) * inv, -F(1, 0) * inv, F(0, 0) * inv;
  k.FinvT = Finv.transpose();
  k.Cinv = Finv * k.FinvT;  // (F^T F)^{-1} = F^{-1} F^{-T}
  return k;
}

Kinematics Kinematics::identity() { return from_F(Eigen::Matrix2d::Identity()); }

double psi_elas(const Kinematics& kin, const MaterialParams& mp) {
  const double beta = mp.beta();
  // plane strain: F:F in 3D is |F_2d|^2 + 1
  const double trFF = kin.F.squaredNorm() + 1.0;
  return 0.5 * mp.mu * ((trFF - 3.0) + (2.0 / beta) * (std::pow(kin.J, -beta) - 1.0));
}

namespace {

std::once_flag g_clamp_warned;

double clamp01(double d) {
  if (d < 0.0 || d > 1.0) {
    std::call_once(g_clamp_warned, [] {
      log_warn("phase-field value outside [0,1] clamped before constitutive use "
               "(reported once; transient overshoot in staggered iteration)");
    });
    return d < 0.0 ? 0.0 : 1.0;
  }
  return d;
}

}  // namespace

double degradation(double d, double kappa) {
  d = clamp01(d);
  return (1.0 - d) * (1.0 - d) + kappa;
}

Eigen::Matrix2d piola_stress(const Kinematics& kin, double p, double d,
                             const MaterialParams& mp) {
  const double beta = mp.beta();
  const double Jmb = std::pow(kin.J, -beta);
  const Eigen::Matrix2d Peff = mp.mu * (kin.F - Jmb * kin.FinvT);
  return degradation(d, mp.kappa) * Peff - mp.B * p * kin.J * kin.FinvT;
}

Eigen::Matrix4d elasticity_tangent(const Kinematics& kin, double p, double d,
                                   const MaterialParams& mp) {
  const double beta = mp.beta();
  const double Jmb = std::pow(kin.J, -beta);
  const double g = degradation(d, mp.kappa);
  const double bp = mp.B * p * kin.J;
  const Eigen::Matrix2d& Fit = kin.FinvT;

  Eigen::Matrix4d A;
  for (int i = 0; i < 2; ++i) {
    for (int Jd = 0; Jd < 2; ++Jd) {
      for (int k = 0; k < 2; ++k) {
        for (int L = 0; L < 2; ++L) {
          const double eff = (i == k && Jd == L ? 1.0 : 0.0) +
                             beta * Jmb * Fit(i, Jd) * Fit(k, L) +
                             Jmb * Fit(i, L) * Fit(k, Jd);
          const double fluid = Fit(i, Jd) * Fit(k, L) - Fit(i, L) * Fit(k, Jd);
          A(2 * i + Jd, 2 * k + L) = g * mp.mu * eff - bp * fluid;
        }
      }
    }
  }
  return A;
}

double crack_aperture(const Eigen::Vector2d& grad_d, const Kinematics& kin, double h_e) {
  const double gg = grad_d.squaredNorm();
  if (gg < 1e-24) return 0.0;  // |grad d| < 1e-12, no crack direction
  const double denom = grad_d.dot(kin.Cinv * grad_d);
  if (denom <= 0) return 0.0;
  const double lambda_perp = std::sqrt(gg / denom);
  return std::max(0.0, (lambda_perp - 1.0) * h_e);
}

Eigen::Matrix2d permeability(const Kinematics& kin, double d, const Eigen::Vector2d& grad_d,
                             double h_e, const MaterialParams& mp) {
  Eigen::Matrix2d Kt = (mp.K / mp.eta_f) * kin.J * kin.Cinv;
  const double dc = std::clamp(d, 0.0, 1.0);
  const double gnorm = grad_d.norm();
  if (dc > 0.0 && mp.Kc > 0.0 && gnorm >= 1e-12) {
    const double w = crack_aperture(grad_d, kin, h_e);
    if (w > 0.0) {
      const Eigen::Vector2d N = grad_d / gnorm;
      const Eigen::Vector2d CiN = kin.Cinv * N;
      const Eigen::Matrix2d Kfrac =
          mp.Kc * w * w * kin.J * (kin.Cinv - CiN * CiN.transpose());
      Kt += std::pow(dc, mp.zeta) * Kfrac;
    }
  }
  return Kt;
}

double crack_driving(const Kinematics& kin, const MaterialParams& mp) {
  return (2.0 * mp.l / mp.Gc) * (1.0 - mp.kappa) * psi_elas(kin, mp);
}

}  // namespace porofrac
