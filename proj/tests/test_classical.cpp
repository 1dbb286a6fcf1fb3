#include <gtest/gtest.h>

#include <cmath>

#include "gcs/classical.hpp"

using namespace gcs;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) t[static_cast<std::size_t>(k)] = a + (b - a) * k / (n - 1);
  return t;
}

RealVector vec(std::initializer_list<double> xs) {
  RealVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

HamiltonianSpec number_hamiltonian(const Representation& rep, double omega) {
  HamiltonianSpec H;
  H.add_matrix(Coefficient::constant(omega), named_operator(rep, "n"), "n");
  return H;
}

HamiltonianSpec driven_oscillator(const Representation& rep, double omega, cplx F) {
  HamiltonianSpec H;
  H.add_generator(Coefficient::constant(omega), rep.index_of("N"), "N");
  H.add_hermitian_pair(Coefficient::constant(F), named_operator(rep, "adag"), "adag");
  return H;
}

struct HwSetup {
  Representation rep = build_heisenberg_weyl(50);
  FiducialSpec fid = ground_fiducial(rep);
  BirkhoffData data = make_birkhoff_data(rep, fid);
};

}  // namespace

// ---------------------------------------------------------------------------

TEST(Phi1, MatchesScalarFormulaOnDiagonal) {
  for (double a : {0.0, 1e-9, 0.2, -0.7, 3.0, -12.0, 25.0}) {
    RealMatrix A = RealMatrix::Zero(2, 2);
    A(0, 0) = a;
    A(1, 1) = -a;
    const RealMatrix P = phi1(A);
    auto scalar = [](double x) { return x == 0.0 ? 1.0 : std::expm1(x) / x; };
    EXPECT_NEAR(P(0, 0), scalar(a), 1e-13 * std::max(1.0, scalar(a))) << a;
    EXPECT_NEAR(P(1, 1), scalar(-a), 1e-13 * std::max(1.0, scalar(-a))) << a;
    EXPECT_EQ(P(0, 1), 0.0);
  }
}

TEST(Phi1, RotationGeneratorClosedForm) {
  // A = θJ with J² = −1: φ(A) = (sinθ/θ) 1 + ((1 − cosθ)/θ) J.
  for (double th : {0.3, 2.0, 7.5}) {
    RealMatrix J(2, 2);
    J << 0, -1, 1, 0;
    const RealMatrix P = phi1(th * J);
    RealMatrix expected = (std::sin(th) / th) * RealMatrix::Identity(2, 2) + ((1 - std::cos(th)) / th) * J;
    EXPECT_LT((P - expected).cwiseAbs().maxCoeff(), 1e-13) << th;
  }
}

TEST(Birkhoff, RVectorAtOriginIsMinusFiducialExpectation) {
  const auto su2 = build_su2(4);
  const auto fid = ground_fiducial(su2);
  const auto data = make_birkhoff_data(su2, fid);
  const RealVector r = r_vector(data, RealVector::Zero(3));
  for (int a = 0; a < 3; ++a)
    EXPECT_NEAR(r(a), -fid.state.dot(su2.generators[a] * fid.state).real(), 1e-15);
}

TEST(Birkhoff, HeisenbergWeylRVectorIsLinear) {
  HwSetup s;
  for (auto l : {vec({0.3, -0.4, 0.0}), vec({1.2, 0.7, 5.0}), vec({-2.0, 0.1, -1.0})}) {
    const RealVector r = r_vector(s.data, l);
    EXPECT_NEAR(r(0), l(1) / 2, 1e-14);
    EXPECT_NEAR(r(1), -l(0) / 2, 1e-14);
    EXPECT_NEAR(r(2), -1.0, 1e-14);
  }
}

TEST(Birkhoff, HeisenbergWeylOmegaHasRankTwo) {
  HwSetup s;
  const auto om = omega_matrix(s.data, vec({0.4, -0.2, 0.3}));
  EXPECT_NEAR(om.omega(0, 1), -1.0, 1e-9);
  EXPECT_NEAR(om.omega(1, 0), 1.0, 1e-9);
  EXPECT_LT(om.omega.row(2).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(om.omega.col(2).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(om.rank, 2);
  EXPECT_LT(om.antisymmetry, 1e-15);
}

TEST(Birkhoff, SpinOmegaIsAntisymmetricAndMatchesFiniteCurl) {
  const auto su2 = build_su2(3);
  const auto data = make_birkhoff_data(su2, ground_fiducial(su2));
  const RealVector l = vec({0.3, -0.5, 0.2});
  const auto om = omega_matrix(data, l, 1e-4);
  const auto om2 = omega_matrix(data, l, 5e-5);
  EXPECT_LT(om.antisymmetry, 1e-15);
  EXPECT_LT((om.omega - om2.omega).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Birkhoff, FullHeisenbergWeylSystemIsDegenerate) {
  HwSetup s;
  const auto H = number_hamiltonian(s.rep, 1.0);
  const auto grad = hamiltonian_gradient(s.rep, s.fid, H);
  try {
    birkhoff_rhs(s.data, grad, vec({0.2, 0.1, 0.0}), 0.0);
    FAIL() << "expected DegenerateForm";
  } catch (const DegenerateForm& e) {
    EXPECT_EQ(e.rank, 2);
    ASSERT_EQ(e.null_directions.cols(), 1);
    EXPECT_NEAR(std::abs(e.null_directions(2, 0)), 1.0, 1e-9);
  }
}

TEST(Birkhoff, CentralChargeWithoutIdentityIsRejected) {
  auto rep = build_heisenberg_weyl(20);
  rep.algebra.identity_index.reset();
  EXPECT_THROW(make_birkhoff_data(rep, ground_fiducial(rep)), InvalidArgument);
}

TEST(Birkhoff, HeisenbergWeylOrbitIsCircularAndConservesEnergy) {
  HwSetup s;
  const double omega = 1.3;
  const auto H = number_hamiltonian(s.rep, omega);
  const auto grad = hamiltonian_gradient(s.rep, s.fid, H, {0, 1});
  const VelocityField rhs = [&](double t, const RealVector& l) {
    return birkhoff_rhs(s.data, grad, l, t, {0, 1});
  };
  const RealVector l0 = vec({0.8, -0.5, 0.0});
  const double period = 2 * pi / omega;
  const auto traj = integrate_classical(rhs, l0, linspace(0.0, period, 9), 0.01);
  const double e0 = classical_hamiltonian(s.rep, s.fid, H, l0, 0.0);
  EXPECT_NEAR(e0, omega * (0.64 + 0.25) / 2, 1e-12);
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const double t = traj.times[k];
    const RealVector& l = traj.points[k];
    EXPECT_NEAR(l(0), l0(0) * std::cos(omega * t) + l0(1) * std::sin(omega * t), 1e-7) << t;
    EXPECT_NEAR(l(1), l0(1) * std::cos(omega * t) - l0(0) * std::sin(omega * t), 1e-7) << t;
    EXPECT_EQ(l(2), 0.0);
    EXPECT_LT(std::abs(classical_hamiltonian(s.rep, s.fid, H, l, t) - e0), 1e-7);
  }
}

TEST(Birkhoff, OrbitTracksQuantumExpectations) {
  HwSetup s;
  const auto H = number_hamiltonian(s.rep, 1.0);
  const auto grad = hamiltonian_gradient(s.rep, s.fid, H, {0, 1});
  const VelocityField rhs = [&](double t, const RealVector& l) {
    return birkhoff_rhs(s.data, grad, l, t, {0, 1});
  };
  const RealVector l0 = vec({0.6, 0.3, 0.0});
  const auto grid = linspace(0.0, 2.0, 5);
  const auto traj = integrate_classical(rhs, l0, grid, 0.01);
  const auto q = evolve(s.rep, H, group_exp(s.rep, GroupPoint(l0)) * s.fid.state, grid, 0.01);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    // |Φ_ℓ⟩ = exp(iℓ·T)|0⟩ has ⟨Q⟩ = −ℓ_P and ⟨P⟩ = ℓ_Q.
    const Vector& psi = q.states[k];
    EXPECT_NEAR(psi.dot(s.rep.generators[0] * psi).real(), -traj.points[k](1), 1e-7);
    EXPECT_NEAR(psi.dot(s.rep.generators[1] * psi).real(), traj.points[k](0), 1e-7);
  }
}

// ---------------------------------------------------------------------------

TEST(Kahler, PlanePotentialAndFlatMetric) {
  const auto rep = build_heisenberg_weyl(60);
  const auto fid = ground_fiducial(rep);
  const GcsEvaluator family(rep, make_plane_chart(rep, fid), fid);
  for (cplx z : {cplx(0.0), cplx(0.7, -0.4), cplx(-1.1, 0.9)}) {
    EXPECT_NEAR(kahler_potential(family, z), std::norm(z), 1e-12) << z;
    const auto m = kahler_metric(family, z, 1e-3);
    EXPECT_NEAR(m.g(0, 0).real(), 1.0, 1e-6) << z;
    EXPECT_NEAR(m.g_inv(0, 0).real(), 1.0, 1e-6) << z;
  }
}

TEST(Kahler, SphereMetric) {
  const auto rep = build_su2(6);
  const auto fid = ground_fiducial(rep);
  const GcsEvaluator family(rep, make_sphere_chart(rep, fid), fid);
  for (cplx z : {cplx(0.0), cplx(0.5, 0.2), cplx(-1.3, 2.0)}) {
    EXPECT_NEAR(kahler_potential(family, z), 6.0 * std::log1p(std::norm(z)), 1e-11) << z;
    const double g = 6.0 / std::pow(1 + std::norm(z), 2);
    EXPECT_NEAR(kahler_metric(family, z).g(0, 0).real(), g, 1e-6 * g + 1e-5) << z;
  }
}

TEST(Kahler, DiskMetric) {
  const double k = 1.5;
  const auto rep = build_su11(k, 200);
  const auto fid = ground_fiducial(rep);
  const GcsEvaluator family(rep, make_disk_chart(rep, fid), fid);
  for (cplx z : {cplx(0.0), cplx(0.3, -0.2), cplx(-0.1, 0.5)}) {
    EXPECT_NEAR(kahler_potential(family, z), -2 * k * std::log1p(-std::norm(z)), 1e-10) << z;
    const double g = 2 * k / std::pow(1 - std::norm(z), 2);
    EXPECT_NEAR(kahler_metric(family, z).g(0, 0).real(), g, 1e-6 * g + 1e-5) << z;
  }
}

TEST(Kahler, StencilRefinementIsConsistent) {
  const auto rep = build_su2(5);
  const auto fid = ground_fiducial(rep);
  const GcsEvaluator family(rep, make_sphere_chart(rep, fid), fid);
  const cplx z(0.4, 0.9);
  const double g1 = kahler_metric(family, z, 2e-3).g(0, 0).real();
  const double g2 = kahler_metric(family, z, 1e-3).g(0, 0).real();
  EXPECT_NEAR(g1, g2, 1e-6);
}

TEST(Kahler, StencilOutsideDiskIsRejected) {
  const auto rep = build_su11(1.0, 60);
  const auto fid = ground_fiducial(rep);
  const GcsEvaluator family(rep, make_disk_chart(rep, fid), fid);
  EXPECT_THROW(kahler_metric(family, cplx(0.99995, 0.0), 1e-4), InvalidArgument);
}

TEST(CosetFlow, PlaneNumberOperatorRotatesClockwise) {
  const auto rep = build_heisenberg_weyl(60);
  const auto fid = ground_fiducial(rep);
  const GcsEvaluator family(rep, make_plane_chart(rep, fid), fid);
  const double omega = 0.8;
  const Matrix H = omega * named_operator(rep, "n");
  for (cplx z : {cplx(0.5, 0.0), cplx(-0.3, 1.2)}) {
    const cplx zdot = coset_rhs(family, H, z, 1e-3);
    EXPECT_LT(std::abs(zdot - (-I_unit * omega * z)), 1e-6) << z;
  }
}

TEST(CosetFlow, DiskTwoPhotonNumberOperatorRotatesAtTwiceTheFrequency) {
  const auto rep = build_two_photon_su11(160);
  const auto fid = ground_fiducial(rep);
  const GcsEvaluator family(rep, make_disk_chart(rep, fid), fid);
  const double omega = 1.0;
  const Matrix H = omega * (named_operator(rep, "n") + 0.5 * Matrix::Identity(rep.dim, rep.dim));
  for (cplx z : {cplx(0.3, 0.0), cplx(-0.2, 0.4)}) {
    const cplx zdot = coset_rhs(family, H, z, 1e-3);
    EXPECT_LT(std::abs(zdot - (-2.0 * I_unit * omega * z)), 1e-5) << z;
  }
}

// ---------------------------------------------------------------------------

TEST(Rk4, FourthOrderConvergence) {
  const VelocityField rhs = [](double t, const RealVector& x) { return RealVector(-x * std::cos(t)); };
  const RealVector x0 = vec({1.0});
  const double exact = std::exp(-std::sin(2.0));
  const double e1 = std::abs(integrate_classical(rhs, x0, {0.0, 2.0}, 0.1).points.back()(0) - exact);
  const double e2 = std::abs(integrate_classical(rhs, x0, {0.0, 2.0}, 0.05).points.back()(0) - exact);
  EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.2);
}

TEST(Rk4, DomainExitReportsTime) {
  const VelocityField rhs = [](double, const RealVector&) { return vec({1.0}); };
  try {
    integrate_classical(rhs, vec({0.0}), {0.0, 1.0}, 0.01, [](const RealVector& x) { return x(0) < 0.5; });
    FAIL() << "expected DomainExit";
  } catch (const DomainExit& e) {
    EXPECT_NEAR(e.time, 0.5, 0.011);
  }
}

TEST(Rk4, RejectsBadGrid) {
  const VelocityField rhs = [](double, const RealVector& x) { return x; };
  EXPECT_THROW(integrate_classical(rhs, vec({1.0}), {0.0, 1.0}, 0.0), InvalidArgument);
  EXPECT_THROW(integrate_classical(rhs, vec({1.0}), {1.0, 0.0}, 0.1), InvalidArgument);
}

// ---------------------------------------------------------------------------

namespace {

struct ActionSetup : HwSetup {
  HamiltonianSpec H = number_hamiltonian(rep, 1.0);
  ClassicalEnergyFn energy = [this](const RealVector& l, double t) {
    return classical_hamiltonian(rep, fid, H, l, t);
  };

  ClassicalTrajectory solution(const std::vector<double>& grid) {
    const auto grad = hamiltonian_gradient(rep, fid, H, {0, 1});
    const VelocityField rhs = [this, grad](double t, const RealVector& l) {
      return birkhoff_rhs(data, grad, l, t, {0, 1});
    };
    return integrate_classical(rhs, vec({0.7, 0.2, 0.0}), grid, 0.005);
  }

  static ClassicalTrajectory perturbed(ClassicalTrajectory traj, double eps, int component) {
    const double T = traj.times.back() - traj.times.front();
    for (std::size_t k = 0; k < traj.times.size(); ++k)
      traj.points[k](component) += eps * std::sin(pi * (traj.times[k] - traj.times.front()) / T);
    return traj;
  }
};

}  // namespace

TEST(Action, ClassicalSolutionIsStationary) {
  ActionSetup s;
  const auto traj = s.solution(linspace(0.0, 2.0, 801));
  const double eps = 1e-3;
  for (int c : {0, 1}) {
    const double slope = (action_value(s.data, ActionSetup::perturbed(traj, eps, c), s.energy) -
                          action_value(s.data, ActionSetup::perturbed(traj, -eps, c), s.energy)) /
                         (2 * eps);
    EXPECT_LT(std::abs(slope), 1e-4) << c;
  }
}

TEST(Action, NonSolutionIsNotStationary) {
  ActionSetup s;
  auto traj = s.solution(linspace(0.0, 2.0, 801));
  for (auto& p : traj.points) p = vec({0.7, 0.2, 0.0});
  const double eps = 1e-3;
  const double slope = (action_value(s.data, ActionSetup::perturbed(traj, eps, 0), s.energy) -
                        action_value(s.data, ActionSetup::perturbed(traj, -eps, 0), s.energy)) /
                       (2 * eps);
  EXPECT_GT(std::abs(slope), 0.1);
}

TEST(Action, AgreesWithStateSpaceAction) {
  ActionSetup s;
  const auto traj = s.solution(linspace(0.0, 1.5, 601));
  const double classical = action_value(s.data, traj, s.energy);
  const double quantum = quantum_action(s.rep, s.fid, s.H, traj);
  EXPECT_NEAR(classical, quantum, 1e-5);
}

TEST(Action, RejectsNonUniformGrid) {
  ActionSetup s;
  ClassicalTrajectory traj;
  traj.times = {0.0, 0.1, 0.3};
  traj.points = {vec({0, 0, 0}), vec({0, 0, 0}), vec({0, 0, 0})};
  EXPECT_THROW(action_value(s.data, traj, s.energy), InvalidArgument);
}

// ---------------------------------------------------------------------------

TEST(Compare, DrivenOscillatorStaysCoherent) {
  const auto rep = build_oscillator_algebra(60);
  const auto fid = ground_fiducial(rep);
  const auto chart = make_plane_chart(rep, fid);
  const auto H = driven_oscillator(rep, 1.0, cplx(0.3, -0.1));
  const auto rep_out = compare_quantum_classical(rep, chart, fid, H, cplx(0.5, 0.2), linspace(0.0, 3.0, 7), 1e-3);
  EXPECT_EQ(rep_out.regime, "exact");
  EXPECT_TRUE(rep_out.passed);
  EXPECT_GT(rep_out.min_fidelity, 1 - 1e-8);
  EXPECT_LT(rep_out.max_discrepancy, 1e-4);
}

TEST(Compare, SpinPrecessionStaysCoherent) {
  const auto rep = build_su2(8);
  const auto fid = ground_fiducial(rep);
  const auto chart = make_sphere_chart(rep, fid);
  HamiltonianSpec H;
  H.add_generator(Coefficient::constant(1.0), rep.index_of("Jz"), "Jz");
  H.add_generator(Coefficient::trig(0.4, 1.0, 0.0), rep.index_of("Jx"), "Jx");
  const auto out = compare_quantum_classical(rep, chart, fid, H, cplx(0.3, 0.1), linspace(0.0, 2.0, 5), 1e-3);
  EXPECT_EQ(out.regime, "exact");
  EXPECT_TRUE(out.passed);
  EXPECT_GT(out.min_fidelity, 1 - 1e-8);
}

TEST(Compare, SqueezingLeavesTheFamily) {
  const auto rep = build_oscillator_algebra(80);
  const auto fid = ground_fiducial(rep);
  const auto chart = make_plane_chart(rep, fid);
  HamiltonianSpec H;
  H.add_hermitian_pair(Coefficient::constant(0.25), named_operator(rep, "adag*adag"), "adag^2");
  const auto out = compare_quantum_classical(rep, chart, fid, H, cplx(0.0), linspace(0.0, 1.0, 3), 1e-3);
  EXPECT_EQ(out.regime, "approximate");
  EXPECT_FALSE(out.passed);
  // exp(−it·s(a†² + a²))|0⟩ has vacuum fidelity 1/cosh(2st).
  EXPECT_NEAR(out.fidelity.back(), 1.0 / std::cosh(0.5), 1e-6);
}

// ---------------------------------------------------------------------------

TEST(Mobius, FitRecoversMap) {
  const Mobius m{cplx(1.0, 0.5), cplx(0.2, -0.1), cplx(0.3, 0.0), cplx(1.0, -0.2)};
  const std::array<cplx, 3> z = {cplx(0.0), cplx(0.4, 0.0), cplx(0.0, 0.4)};
  const auto fit = Mobius::fit(z, {m(z[0]), m(z[1]), m(z[2])});
  for (cplx w : {cplx(0.1, 0.2), cplx(-0.5, 0.3)}) {
    EXPECT_LT(std::abs(fit(w) - m(w)), 1e-12);
    EXPECT_LT(std::abs(fit.inverse()(fit(w)) - w), 1e-12);
  }
}

namespace {

struct TranslationSetup {
  Representation rep = build_oscillator_algebra(120);
  FiducialSpec fid = ground_fiducial(rep);
  CosetChart chart = make_plane_chart(rep, fid);
  std::vector<PolarRegion> sectors = angular_sectors(8, 0.0, 6.0);
  QuadratureSpec quad = default_quadrature(ChartKind::Plane);
  Matrix rho = pure_density(gcs_vector(rep, chart, fid, cplx(1.0, 0.4)));
};

}  // namespace

TEST(TranslatedDistribution, RotationShiftsSectorsByOne) {
  TranslationSetup s;
  const double omega = 1.0;
  HamiltonianSpec H;
  H.add_generator(Coefficient::constant(omega), s.rep.index_of("N"), "N");
  const auto out = translated_distribution_check(s.rep, s.chart, s.fid, s.rho, H, s.sectors, s.quad, pi / (4 * omega),
                                                 1e-3);
  const auto original = translated_distribution_check(s.rep, s.chart, s.fid, s.rho, H, s.sectors, s.quad, 0.0, 1e-3);
  EXPECT_TRUE(out.within_budget) << out.max_difference << " > " << out.budget;
  // z ↦ e^{−iωt}z moves each sector clockwise by one slot.
  for (int k = 0; k < 8; ++k)
    EXPECT_NEAR(out.evolved[static_cast<std::size_t>(k)], original.evolved[static_cast<std::size_t>((k + 1) % 8)],
                1e-6)
        << k;
}

TEST(TranslatedDistribution, ZeroTimeIsIdentity) {
  TranslationSetup s;
  HamiltonianSpec H;
  H.add_generator(Coefficient::constant(1.0), s.rep.index_of("N"), "N");
  const auto out = translated_distribution_check(s.rep, s.chart, s.fid, s.rho, H, s.sectors, s.quad, 0.0, 1e-3);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(out.evolved[k], out.translated[k], out.quad_error_bound + 1e-12);
  EXPECT_TRUE(out.within_budget);
}

TEST(TranslatedDistribution, DisplacementDriveIsCovariant) {
  TranslationSetup s;
  const auto H = driven_oscillator(s.rep, 1.0, cplx(0.2, 0.1));
  const auto out = translated_distribution_check(s.rep, s.chart, s.fid, s.rho, H, s.sectors, s.quad, 0.8, 1e-3);
  EXPECT_TRUE(out.within_budget) << out.max_difference << " > " << out.budget;
}

TEST(TranslatedDistribution, SqueezingViolatesCovariance) {
  TranslationSetup s;
  HamiltonianSpec H;
  H.add_hermitian_pair(Coefficient::constant(0.25), named_operator(s.rep, "adag*adag"), "adag^2");
  const auto out = translated_distribution_check(s.rep, s.chart, s.fid, s.rho, H, s.sectors, s.quad, 0.5, 1e-3);
  EXPECT_FALSE(out.within_budget);
  EXPECT_GT(out.max_difference, 0.01);
}
