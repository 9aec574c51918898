#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "porofrac/common.hpp"

namespace porofrac {

/// Constitutive and fracture constants, SI units throughout.
/// l and psi_c may be left negative to request the mesh-derived defaults
/// (l = 2 h_e on the mesh carrying the fracture field, psi_c = G_c / (2 l));
/// finalize_defaults() fills them in.
struct MaterialParams {
  double mu = 0;        ///< shear modulus (Pa)
  double nu = 0;        ///< Poisson ratio
  double Gc = 0;        ///< critical energy release rate (J/m^2)
  double l = -1;        ///< phase-field regularization length (m)
  double kappa = 1e-8;  ///< residual stiffness
  double eta_f = 0;     ///< dynamic fluid viscosity (Pa s)
  double K = 0;         ///< intrinsic Darcy permeability (m^2)
  double Kc = 0;        ///< fracture (Poiseuille) permeability coefficient (1/(Pa s))
  double zeta = 1;      ///< permeability transition exponent
  double M = 0;         ///< Biot modulus (Pa)
  double B = 0;         ///< Biot coefficient
  double psi_c = -1;    ///< fracture threshold energy density (Pa)

  double beta() const { return 2.0 * nu / (1.0 - 2.0 * nu); }

  void finalize_defaults(double h_e);

  /// All violated invariants, empty when valid.
  std::vector<std::string> validate() const;
  /// Throws ConfigError listing every violation.
  void validate_or_throw() const;
};

/// Deformation state at a material point, plane strain (F_33 = 1).
struct Kinematics {
  Eigen::Matrix2d F;
  double J = 1;
  Eigen::Matrix2d C;     // F^T F
  Eigen::Matrix2d Cinv;
  Eigen::Matrix2d FinvT;

  static Kinematics from_F(const Eigen::Matrix2d& F);  // throws InadmissibleStateError if J<=0
  static std::optional<Kinematics> try_from(const Eigen::Matrix2d& F);
  static Kinematics identity();
};

/// Compressible Neo-Hookean strain energy density (Pa).
double psi_elas(const Kinematics& kin, const MaterialParams& mp);

/// Degradation g(d) = (1-d)^2 + kappa; d is clamped into [0,1].
double degradation(double d, double kappa);

/// First Piola-Kirchhoff stress, effective part degraded and Terzaghi fluid
/// part -B p J F^{-T}.
Eigen::Matrix2d piola_stress(const Kinematics& kin, double p, double d, const MaterialParams& mp);

/// Consistent tangent A = dP/dF as a 4x4 matrix with row index 2*i+J and
/// column index 2*k+L for A_{iJkL}.
Eigen::Matrix4d elasticity_tangent(const Kinematics& kin, double p, double d,
                                   const MaterialParams& mp);

/// Crack aperture w = (lambda_perp - 1) h_e, clamped at zero; zero when the
/// phase-field gradient is (numerically) zero.
double crack_aperture(const Eigen::Vector2d& grad_d, const Kinematics& kin, double h_e);

/// Permeability tensor: Darcy part (K/eta_F) J C^{-1} plus d^zeta times the
/// Poiseuille part K_c w^2 J [C^{-1} - (C^{-1}N)otimes(C^{-1}N)].
Eigen::Matrix2d permeability(const Kinematics& kin, double d, const Eigen::Vector2d& grad_d,
                             double h_e, const MaterialParams& mp);

/// Crack driving state D = (2l/G_c)(1-kappa) psi_elas, dimensionless.
double crack_driving(const Kinematics& kin, const MaterialParams& mp);

}  // namespace porofrac
