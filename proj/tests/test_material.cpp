#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "porofrac/material.hpp"

using namespace porofrac;

namespace {

MaterialParams base_params() {
  MaterialParams mp;
  mp.mu = 2.0;
  mp.nu = 0.25;  // beta = 1
  mp.Gc = 1.0;
  mp.l = 0.1;
  mp.kappa = 1e-8;
  mp.eta_f = 1.0;
  mp.K = 1.0;
  mp.Kc = 1.0;
  mp.zeta = 1.0;
  mp.M = 1.0;
  mp.B = 1.0;
  mp.psi_c = 5.0;
  return mp;
}

/// Energy potential whose F-gradient is the stress: g(d) psi_elas - B p (J-1).
double potential(const Eigen::Matrix2d& F, double p, double d, const MaterialParams& mp) {
  const Kinematics kin = Kinematics::from_F(F);
  return degradation(d, mp.kappa) * psi_elas(kin, mp) - mp.B * p * (kin.J - 1.0);
}

Eigen::Matrix2d fd_stress(const Eigen::Matrix2d& F, double p, double d,
                          const MaterialParams& mp, double h = 1e-5) {
  Eigen::Matrix2d P;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      Eigen::Matrix2d Fp = F, Fm = F;
      Fp(i, j) += h;
      Fm(i, j) -= h;
      P(i, j) = (potential(Fp, p, d, mp) - potential(Fm, p, d, mp)) / (2 * h);
    }
  }
  return P;
}

Eigen::Matrix4d fd_tangent(const Eigen::Matrix2d& F, double p, double d,
                           const MaterialParams& mp, double h = 1e-5) {
  Eigen::Matrix4d A;
  for (int k = 0; k < 2; ++k) {
    for (int L = 0; L < 2; ++L) {
      Eigen::Matrix2d Fp = F, Fm = F;
      Fp(k, L) += h;
      Fm(k, L) -= h;
      const Eigen::Matrix2d dP =
          (piola_stress(Kinematics::from_F(Fp), p, d, mp) -
           piola_stress(Kinematics::from_F(Fm), p, d, mp)) /
          (2 * h);
      for (int i = 0; i < 2; ++i) {
        for (int J = 0; J < 2; ++J) A(2 * i + J, 2 * k + L) = dP(i, J);
      }
    }
  }
  return A;
}

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

}  // namespace

TEST_CASE("psi_elas vanishes at identity") {
  auto mp = base_params();
  CHECK(psi_elas(Kinematics::identity(), mp) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("psi_elas hand value for mu=2 nu=0.25 F=diag(2,1)") {
  auto mp = base_params();
  Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
  F(0, 0) = 2.0;
  // F:F-3 = (4+1+1)-3 = 3, J = 2, (2/beta)(J^-1 - 1) = -1, psi = (mu/2)*2 = 2
  CHECK(psi_elas(Kinematics::from_F(F), mp) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("psi_elas is frame indifferent") {
  auto mp = base_params();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> angle(0, 6.28);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Matrix2d F = random_admissible_F(rng);
    const double th = angle(rng);
    Eigen::Matrix2d R;
    R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    CHECK(psi_elas(Kinematics::from_F(R * F), mp) ==
          doctest::Approx(psi_elas(Kinematics::from_F(F), mp)).epsilon(1e-12));
  }
}

TEST_CASE("psi_elas rejects J <= 0") {
  Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
  F(0, 0) = -1.0;
  CHECK_THROWS_AS(Kinematics::from_F(F), InadmissibleStateError);
  CHECK_FALSE(Kinematics::try_from(F).has_value());
}

TEST_CASE("degradation endpoints and midpoint") {
  const double kappa = 1e-8;
  CHECK(degradation(0.0, kappa) == doctest::Approx(1.0 + kappa));
  CHECK(degradation(1.0, kappa) == doctest::Approx(kappa));
  CHECK(degradation(0.5, kappa) == doctest::Approx(0.25 + kappa));
  // monotone decreasing
  double prev = degradation(0.0, kappa);
  for (double d = 0.1; d <= 1.0; d += 0.1) {
    const double g = degradation(d, kappa);
    CHECK(g < prev);
    prev = g;
  }
  // out-of-range input is clamped
  CHECK(degradation(-0.3, kappa) == doctest::Approx(1.0 + kappa));
  CHECK(degradation(1.7, kappa) == doctest::Approx(kappa));
}

TEST_CASE("piola stress vanishes at the reference state") {
  auto mp = base_params();
  for (double d : {0.0, 0.3, 1.0}) {
    const Eigen::Matrix2d P = piola_stress(Kinematics::identity(), 0.0, d, mp);
    CHECK(P.norm() == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("piola stress fluid term at identity is -B p I") {
  auto mp = base_params();
  mp.B = 1.0;
  const double p = 1e5;
  const Eigen::Matrix2d P = piola_stress(Kinematics::identity(), p, 0.0, mp);
  CHECK(P(0, 0) == doctest::Approx(-1e5).epsilon(1e-12));
  CHECK(P(1, 1) == doctest::Approx(-1e5).epsilon(1e-12));
  CHECK(P(0, 1) == doctest::Approx(0.0));
  CHECK(P(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("piola stress equals finite-difference gradient of the potential") {
  auto mp = base_params();
  mp.mu = 10.0;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> up(-2.0, 2.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Matrix2d F = random_admissible_F(rng);
    const double p = up(rng);
    const double d = ud(rng);
    const Eigen::Matrix2d P = piola_stress(Kinematics::from_F(F), p, d, mp);
    const Eigen::Matrix2d Pfd = fd_stress(F, p, d, mp);
    CHECK((P - Pfd).norm() <= 1e-6 * std::max(P.norm(), 1e-12));
  }
}

TEST_CASE("tangent matches finite differences of the stress") {
  auto mp = base_params();
  mp.mu = 10.0;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> up(-2.0, 2.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Matrix2d F = random_admissible_F(rng);
    const double p = up(rng);
    const double d = ud(rng);
    const Eigen::Matrix4d A = elasticity_tangent(Kinematics::from_F(F), p, d, mp);
    const Eigen::Matrix4d Afd = fd_tangent(F, p, d, mp);
    CHECK((A - Afd).norm() <= 1e-5 * std::max(A.norm(), 1e-12));
  }
}

TEST_CASE("tangent A_1111 at identity equals mu(2+beta) for undamaged material") {
  auto mp = base_params();
  mp.mu = 1.0;
  mp.kappa = 1e-12;
  // beta = 1: A_1111 = mu (1 + beta + 1) = 3
  const Eigen::Matrix4d A = elasticity_tangent(Kinematics::identity(), 0.0, 0.0, mp);
  CHECK(A(0, 0) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("fully damaged tangent reduces to kappa times the effective block") {
  auto mp = base_params();
  std::mt19937_64 rng(17);
  const Eigen::Matrix2d F = random_admissible_F(rng);
  const Eigen::Matrix4d A1 = elasticity_tangent(Kinematics::from_F(F), 0.0, 1.0, mp);
  auto mp_undamaged = mp;
  mp_undamaged.kappa = 1.0;  // g(1) with kappa=1 -> 1, i.e. the raw effective block
  const Eigen::Matrix4d Aeff = elasticity_tangent(Kinematics::from_F(F), 0.0, 1.0, mp_undamaged);
  CHECK((A1 - mp.kappa * Aeff).norm() <= 1e-12 * Aeff.norm());
}

TEST_CASE("effective tangent block has major symmetry") {
  auto mp = base_params();
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Matrix2d F = random_admissible_F(rng);
    const Eigen::Matrix4d A = elasticity_tangent(Kinematics::from_F(F), 0.0, 0.4, mp);
    for (int iJ = 0; iJ < 4; ++iJ) {
      for (int kL = 0; kL < 4; ++kL) {
        CHECK(A(iJ, kL) == doctest::Approx(A(kL, iJ)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("crack aperture: identity metric gives zero opening") {
  const Eigen::Vector2d gd(3.0, -1.0);
  CHECK(crack_aperture(gd, Kinematics::identity(), 0.1) == doctest::Approx(0.0));
}

TEST_CASE("crack aperture: compression clamps to zero") {
  // C = diag(1/4, 1): lambda_perp = 1/2 < 1 -> clamped
  Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
  F(0, 0) = 0.5;
  const Eigen::Vector2d gd(1.0, 0.0);
  CHECK(crack_aperture(gd, Kinematics::from_F(F), 0.1) == doctest::Approx(0.0));
}

TEST_CASE("crack aperture: hand value for C = diag(4,1)") {
  Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
  F(0, 0) = 2.0;  // C = diag(4, 1), Cinv = diag(1/4, 1)
  const Eigen::Vector2d gd(1.0, 0.0);
  // lambda^2 = 1 / (1/4) = 4 -> omega = (2-1) * 0.1
  CHECK(crack_aperture(gd, Kinematics::from_F(F), 0.1) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("crack aperture: zero gradient has no crack direction") {
  CHECK(crack_aperture(Eigen::Vector2d::Zero(), Kinematics::identity(), 0.1) == 0.0);
}

TEST_CASE("permeability reduces to (K/eta) I at the reference state") {
  auto mp = base_params();
  mp.K = 3.0;
  mp.eta_f = 2.0;
  const Eigen::Matrix2d Kt =
      permeability(Kinematics::identity(), 0.0, Eigen::Vector2d(1, 0), 0.1, mp);
  CHECK((Kt - 1.5 * Eigen::Matrix2d::Identity()).norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("fracture permeability off at d=0 regardless of gradient") {
  auto mp = base_params();
  std::mt19937_64 rng(23);
  const Eigen::Matrix2d F = random_admissible_F(rng);
  const Kinematics kin = Kinematics::from_F(F);
  const Eigen::Matrix2d K0 = permeability(kin, 0.0, Eigen::Vector2d(5, 2), 0.1, mp);
  const Eigen::Matrix2d Kd = (mp.K / mp.eta_f) * kin.J * kin.Cinv;
  CHECK((K0 - Kd).norm() <= 1e-14 * Kd.norm());
}

TEST_CASE("fully cracked permeability adds the Poiseuille branch") {
  auto mp = base_params();
  mp.K = 1.0;
  mp.eta_f = 1.0;
  mp.Kc = 7.0;
  mp.zeta = 1.0;
  // stretched normal to the crack: C = diag(4,1), grad d along x
  Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
  F(0, 0) = 2.0;
  const Kinematics kin = Kinematics::from_F(F);
  const Eigen::Vector2d gd(1.0, 0.0);
  const double h_e = 0.1;
  const double w = crack_aperture(gd, kin, h_e);
  const Eigen::Vector2d N(1.0, 0.0);
  const Eigen::Vector2d CiN = kin.Cinv * N;
  const Eigen::Matrix2d expected = (mp.K / mp.eta_f) * kin.J * kin.Cinv +
                                   mp.Kc * w * w * kin.J *
                                       (kin.Cinv - CiN * CiN.transpose());
  const Eigen::Matrix2d Kt = permeability(kin, 1.0, gd, h_e, mp);
  CHECK((Kt - expected).norm() <= 1e-13 * expected.norm());
}

TEST_CASE("permeability stays positive semidefinite over random states") {
  auto mp = base_params();
  mp.Kc = 10.0;
  mp.zeta = 1.5;
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::uniform_real_distribution<double> ug(-1.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const Eigen::Matrix2d F = random_admissible_F(rng);
    const double d = ud(rng);
    const Eigen::Vector2d gd(ug(rng), ug(rng));
    const Eigen::Matrix2d Kt = permeability(Kinematics::from_F(F), d, gd, 0.1, mp);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(Kt);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12 * Kt.norm());
  }
}

TEST_CASE("crack driving state hand value and scaling") {
  auto mp = base_params();
  mp.l = 0.1;
  mp.Gc = 1.0;
  mp.kappa = 1e-15;
  // psi = 2 at F = diag(2,1) for mu=2, nu=0.25; D = (2*0.1/1)*2 = 0.4
  Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
  F(0, 0) = 2.0;
  CHECK(crack_driving(Kinematics::from_F(F), mp) == doctest::Approx(0.4).epsilon(1e-10));
  CHECK(crack_driving(Kinematics::identity(), mp) == doctest::Approx(0.0));
  // linear in psi: doubling mu doubles D
  auto mp2 = mp;
  mp2.mu = 2 * mp.mu;
  CHECK(crack_driving(Kinematics::from_F(F), mp2) ==
        doctest::Approx(2 * crack_driving(Kinematics::from_F(F), mp)).epsilon(1e-12));
}

TEST_CASE("psi_elas is convex along the radial path") {
  auto mp = base_params();
  std::vector<double> vals;
  for (double a = 0.8; a <= 1.2001; a += 0.02) {
    vals.push_back(psi_elas(Kinematics::from_F(a * Eigen::Matrix2d::Identity()), mp));
  }
  for (size_t i = 1; i + 1 < vals.size(); ++i) {
    CHECK(vals[i + 1] - 2 * vals[i] + vals[i - 1] >= -1e-12);
  }
}

TEST_CASE("parameter validation rejects bad values") {
  auto mp = base_params();
  mp.nu = 0.6;
  auto issues = mp.validate();
  REQUIRE(!issues.empty());
  bool found = false;
  for (const auto& s : issues) {
    if (s.find("Poisson") != std::string::npos) found = true;
  }
  CHECK(found);

  mp = base_params();
  mp.nu = 0.0;  // beta = 0 singular
  CHECK(!mp.validate().empty());

  mp = base_params();
  CHECK(mp.validate().empty());
}

TEST_CASE("finalize_defaults derives l and psi_c") {
  MaterialParams mp = base_params();
  mp.l = -1;
  mp.psi_c = -1;
  mp.finalize_defaults(0.05);
  CHECK(mp.l == doctest::Approx(0.1));
  CHECK(mp.psi_c == doctest::Approx(mp.Gc / (2 * mp.l)));
}
