// Acceptance driver: one line per criterion, exit status 1 if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gcs/classical.hpp"

using namespace gcs;

namespace {

struct Verdict {
  bool passed = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) passed = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [FAIL]");
  }
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

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

cplx expect(const Vector& psi, const Matrix& A) { return psi.dot(A * psi); }

HamiltonianSpec driven_oscillator(const Representation& rep, const Coefficient& omega, const Coefficient& F) {
  HamiltonianSpec H;
  H.add_generator(omega, rep.index_of("N"), "N");
  H.add_hermitian_pair(F, named_operator(rep, "adag"), "adag");
  return H;
}

HamiltonianSpec number_hamiltonian(const Representation& rep, double omega) {
  HamiltonianSpec H;
  H.add_matrix(Coefficient::constant(omega), named_operator(rep, "n"), "n");
  return H;
}

// ---------------------------------------------------------------------------

void representation_validity(Verdict& v) {
  double spin = 0.0;
  for (int two_j = 1; two_j <= 8; ++two_j) spin = std::max(spin, check_structure(build_su2(two_j), 1e-13).max_residual);
  v.check(spin < 1e-13, "su2 two_j<=8 residual " + sci(spin) + " < 1e-13");
  const double hw = check_structure(build_heisenberg_weyl(40)).max_residual;
  v.check(hw < 1e-10, "heisenberg_weyl n=40 residual " + sci(hw) + " < 1e-10");
  double su11 = 0.0;
  for (double k : {0.5, 1.0, 1.5}) su11 = std::max(su11, check_structure(build_su11(k, 40)).max_residual);
  v.check(su11 < 1e-10, "su11 n=40 residual " + sci(su11) + " < 1e-10");
}

void overcompleteness(Verdict& v) {
  double sphere = 0.0;
  for (int two_j = 1; two_j <= 8; ++two_j) {
    const auto rep = build_su2(two_j);
    const auto fid = ground_fiducial(rep);
    sphere = std::max(sphere, resolution_of_identity(rep, make_sphere_chart(rep, fid), fid,
                                                     default_quadrature(ChartKind::Sphere))
                                  .deviation);
  }
  v.check(sphere < 1e-12, "sphere deviation " + sci(sphere) + " < 1e-12");

  // The n_trunc = 40 grid rejects nodes whose coherent states leave the reliable
  // subspace; n_trunc = 120 rejects none and isolates the radial cutoff tail.
  QuadratureSpec q = default_quadrature(ChartKind::Plane);
  for (int n : {40, 120}) {
    const auto rep = build_heisenberg_weyl(n);
    const auto fid = ground_fiducial(rep);
    const auto r = resolution_of_identity(rep, make_plane_chart(rep, fid), fid, q, 20);
    v.check(r.deviation < 1e-8, "plane n_trunc=" + std::to_string(n) + " first 20 Fock states deviation " +
                                    sci(r.deviation) + " < 1e-8 (rejected nodes " + std::to_string(r.rejected_nodes) +
                                    ")");
  }

  const auto rep = build_heisenberg_weyl(120);
  const auto fid = ground_fiducial(rep);
  const auto chart = make_plane_chart(rep, fid);
  bool monotone = true;
  double previous = 1e300;
  std::string series;
  for (int nodes : {15, 30, 60, 120, 240}) {
    q.radial_nodes = nodes;
    const double dev = resolution_of_identity(rep, chart, fid, q, 20).deviation;
    monotone = monotone && dev <= previous + 1e-12;
    series += (series.empty() ? "" : ",") + sci(dev);
    previous = dev;
  }
  v.check(monotone, "radial doubling 15..240 at n_trunc=120 non-increasing within 1e-12 (" + series + ")");
}

void covariance(Verdict& v) {
  {
    const auto rep = build_oscillator_algebra(120);
    const auto fid = ground_fiducial(rep);
    const auto chart = make_plane_chart(rep, fid);
    const auto quad = default_quadrature(ChartKind::Plane);
    const auto sectors = angular_sectors(8, 0.0, 6.0);
    double worst_ratio = 0.0;
    for (int shift = 1; shift < 8; ++shift) {
      RealVector l = RealVector::Zero(4);
      l(0) = 2.0 * pi * shift / 8;
      const auto r = covariance_check(rep, chart, fid, GroupPoint(l), sectors, quad);
      worst_ratio = std::max(worst_ratio, r.deviation / r.quad_error_bound);
    }
    v.check(worst_ratio < 1.0, "plane 8 sectors max deviation/bound " + sci(worst_ratio) + " < 1");
    const double id = covariance_check(rep, chart, fid, GroupPoint::identity(4), sectors, quad).deviation;
    v.check(id < 1e-14, "plane identity element " + sci(id) + " < 1e-14");
  }
  {
    const auto rep = build_su2(4);
    const auto fid = ground_fiducial(rep);
    const auto chart = make_sphere_chart(rep, fid);
    const auto quad = default_quadrature(ChartKind::Sphere);
    double worst_ratio = 0.0;
    for (int L : {4, 8, 16}) {
      RealVector l = RealVector::Zero(3);
      l(2) = 2.0 * pi / L;
      const auto r = covariance_check(rep, chart, fid, GroupPoint(l), angular_sectors(L, 0.0, pi), quad);
      worst_ratio = std::max(worst_ratio, r.deviation / std::max(r.quad_error_bound, 1e-300));
    }
    v.check(worst_ratio < 1.0, "sphere max deviation/bound " + sci(worst_ratio) + " < 1");
    const double id =
        covariance_check(rep, chart, fid, GroupPoint::identity(3), angular_sectors(8, 0.0, pi), quad).deviation;
    v.check(id < 1e-14, "sphere identity element " + sci(id) + " < 1e-14");
  }
}

void conjugation(Verdict& v) {
  const auto rep = build_heisenberg_weyl(40);
  double worst = 0.0;
  int count = 0;
  for (cplx s : {cplx(0.3, 0.0), cplx(0.0, 0.7), cplx(0.2, 0.5)})
    for (int len = 1; len <= 4; ++len)
      for (int mask = 0; mask < (1 << len); ++mask) {
        std::vector<Ladder> w;
        for (int i = 0; i < len; ++i) w.push_back((mask >> i) & 1 ? Ladder::Raise : Ladder::Lower);
        worst = std::max(worst, conjugation_identity_check(rep, s, {{1.0, w}}).residual);
        ++count;
      }
  v.check(worst < 1e-10, std::to_string(count) + " monomials max residual " + sci(worst) + " < 1e-10");
}

void malkin(Verdict& v) {
  std::mt19937 rng(20240517);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto rep = build_oscillator_algebra(40);
  const auto fid = ground_fiducial(rep);
  const auto chart = make_plane_chart(rep, fid);
  double worst = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto omega =
        Coefficient::sum({Coefficient::constant(1.0 + 0.5 * u(rng)), Coefficient::trig(0.3 * u(rng), 2.0 * u(rng), u(rng))});
    const auto F = Coefficient::sum({Coefficient::trig(cplx(0.2 * u(rng), 0.2 * u(rng)), 1.5 * u(rng), u(rng)),
                                     Coefficient::trig(cplx(0.1 * u(rng), 0.1 * u(rng)), 0.5, u(rng))});
    const auto H = driven_oscillator(rep, omega, F);
    const cplx z0(0.5 * u(rng), 0.5 * u(rng));
    worst = std::min(worst, stability_test(rep, chart, fid, H, z0, linspace(0.0, 5.0, 11), 1e-3).min_fidelity);
  }
  v.check(worst >= 1.0 - 1e-7, "20 random drives min fidelity 1-" + sci(1.0 - worst) + " >= 1-1e-7");

  {
    const auto hw = build_heisenberg_weyl(60);
    const auto hfid = ground_fiducial(hw);
    HamiltonianSpec H;
    H.add_hermitian_pair(Coefficient::constant(0.5), named_operator(hw, "adag*adag"), "adag^2");
    const auto r = stability_test(hw, make_plane_chart(hw, hfid), hfid, H, 0.0, linspace(0.0, 0.5, 6), 1e-3);
    v.check(r.fidelity.back() < 0.99, "squeeze plane fidelity at t=0.5 " + sci(r.fidelity.back()) + " < 0.99");
  }
  {
    const auto tp = build_two_photon_su11(128);
    const auto tfid = ground_fiducial(tp);
    HamiltonianSpec H;
    H.add_generator(Coefficient::constant(2.0), tp.index_of("K1"), "K1");
    const auto r = stability_test(tp, make_disk_chart(tp, tfid), tfid, H, 0.0, linspace(0.0, 0.5, 6), 1e-3);
    v.check(r.min_fidelity >= 1.0 - 1e-7, "squeeze disk min fidelity 1-" + sci(1.0 - r.min_fidelity) + " >= 1-1e-7");
  }
}

void superstability(Verdict& v) {
  const auto rep = build_oscillator_algebra(40);
  const auto fid = ground_fiducial(rep);
  HamiltonianSpec H;
  H.add_generator(Coefficient::sum({Coefficient::constant(1.0), Coefficient::trig(0.3, 1.0, 0.0)}), rep.index_of("N"),
                  "N");
  const auto t = linspace(0.0, 6.0, 13);
  const auto r = superstability_check(rep, H, fid, {1, 2, 3}, t, 1e-3, 1e-8, 20);
  v.check(r.fiducial_residual < 1e-8, "fiducial residual " + sci(r.fiducial_residual) + " < 1e-8");
  v.check(r.automorphism_residual < 1e-8, "automorphism residual " + sci(r.automorphism_residual) + " < 1e-8");
  double worst = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double th = t[k] + 0.3 * std::sin(t[k]);
    RealMatrix expected = RealMatrix::Identity(3, 3);
    expected(0, 0) = std::cos(th);
    expected(0, 1) = -std::sin(th);
    expected(1, 0) = std::sin(th);
    expected(1, 1) = std::cos(th);
    worst = std::max(worst, (r.parameter_maps[k] - expected).cwiseAbs().maxCoeff());
  }
  v.check(worst < 1e-6, "parameter map vs rotation by t+0.3 sin t " + sci(worst) + " < 1e-6");
}

void birkhoff(Verdict& v) {
  const auto rep = build_heisenberg_weyl(50);
  const auto fid = ground_fiducial(rep);
  const auto data = make_birkhoff_data(rep, fid);

  const auto om = omega_matrix(data, vec({0.4, -0.2, 0.3}));
  const double central = std::max(om.omega.row(2).cwiseAbs().maxCoeff(), om.omega.col(2).cwiseAbs().maxCoeff());
  v.check(om.rank == 2 && central < 1e-9,
          "Omega rank " + std::to_string(om.rank) + ", central row/col " + sci(central) + " < 1e-9");

  const double omega = 1.0;
  const auto H = number_hamiltonian(rep, omega);
  const auto grad = hamiltonian_gradient(rep, fid, H, {0, 1});
  const VelocityField rhs = [&](double t, const RealVector& l) { return birkhoff_rhs(data, grad, l, t, {0, 1}); };
  const RealVector l0 = vec({0.8, -0.5, 0.0});
  const auto traj = integrate_classical(rhs, l0, linspace(0.0, 10.0, 101), 1e-3);
  const double e0 = classical_hamiltonian(rep, fid, H, l0, 0.0);
  double drift = 0.0, radius = 0.0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const RealVector& l = traj.points[k];
    drift = std::max(drift, std::abs(classical_hamiltonian(rep, fid, H, l, traj.times[k]) - e0));
    radius = std::max(radius, std::abs(l.head(2).norm() - l0.head(2).norm()));
  }
  v.check(drift < 1e-7, "energy drift over 10 units " + sci(drift) + " < 1e-7");
  v.check(radius < 1e-7, "orbit radius deviation " + sci(radius) + " < 1e-7");

  const ClassicalEnergyFn energy = [&](const RealVector& l, double t) {
    return classical_hamiltonian(rep, fid, H, l, t);
  };
  const auto solution = integrate_classical(rhs, vec({0.7, 0.2, 0.0}), linspace(0.0, 2.0, 2001), 1e-3);
  const double I0 = action_value(data, solution, energy);
  std::vector<double> ratio;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    auto bumped = solution;
    for (std::size_t k = 0; k < bumped.times.size(); ++k) {
      const double s = std::sin(pi * bumped.times[k] / 2.0);
      bumped.points[k](0) += eps * s;
      bumped.points[k](1) += eps * s * s;
    }
    ratio.push_back(std::abs(action_value(data, bumped, energy) - I0) / eps);
  }
  const double slope1 = std::log10(ratio[0] / ratio[1]);
  const double slope2 = std::log10(ratio[1] / ratio[2]);
  v.check(std::abs(slope1 - 1.0) < 0.1 && std::abs(slope2 - 1.0) < 0.1,
          "|dI|/eps = " + sci(ratio[0]) + "," + sci(ratio[1]) + "," + sci(ratio[2]) + " log-slopes " + sci(slope1) +
              "," + sci(slope2) + " within 1+-0.1");
}

void kahler(Verdict& v) {
  double worst = 0.0;
  {
    const auto rep = build_heisenberg_weyl(60);
    const auto fid = ground_fiducial(rep);
    const GcsEvaluator family(rep, make_plane_chart(rep, fid), fid);
    for (cplx z : {cplx(0.0), cplx(0.7, -0.4), cplx(-1.1, 0.9), cplx(1.5, 0.5)})
      worst = std::max(worst, std::abs(kahler_potential(family, z) - std::norm(z)));
  }
  for (int two_j : {1, 4, 8}) {
    const auto rep = build_su2(two_j);
    const auto fid = ground_fiducial(rep);
    const GcsEvaluator family(rep, make_sphere_chart(rep, fid), fid);
    for (cplx z : {cplx(0.0), cplx(0.5, 0.2), cplx(-1.3, 2.0), cplx(4.0, -3.0)})
      worst = std::max(worst, std::abs(kahler_potential(family, z) - two_j * std::log1p(std::norm(z))));
  }
  for (double k : {0.5, 1.0, 1.5}) {
    const auto rep = build_su11(k, 200);
    const auto fid = ground_fiducial(rep);
    const GcsEvaluator family(rep, make_disk_chart(rep, fid), fid);
    for (cplx z : {cplx(0.0), cplx(0.3, -0.2), cplx(-0.1, 0.5), cplx(0.6, 0.0)})
      worst = std::max(worst, std::abs(kahler_potential(family, z) + 2 * k * std::log1p(-std::norm(z))));
  }
  v.check(worst < 1e-5, "potentials vs closed forms " + sci(worst) + " < 1e-5");

  const auto rep = build_heisenberg_weyl(60);
  const auto fid = ground_fiducial(rep);
  const auto chart = make_plane_chart(rep, fid);
  const GcsEvaluator family(rep, chart, fid);
  const double omega = 1.0;
  const auto H = number_hamiltonian(rep, omega);
  const cplx z0(0.8, 0.3);
  const auto grid = linspace(0.0, 2.0 * pi / omega, 17);
  const auto traj = integrate_coset(rep, family, H, z0, grid, 1e-3);
  const auto q = evolve(rep, H, gcs_vector(rep, chart, fid, z0), grid, 1e-3);
  double gap = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k)
    gap = std::max(gap, std::abs(to_complex(traj.points[k]) - expect(q.states[k], rep.lowering[0])));
  v.check(gap < 1e-5, "coset trajectory vs quantum <a> over one period " + sci(gap) + " < 1e-5");
}

void correspondence(Verdict& v) {
  const auto rep = build_oscillator_algebra(120);
  const auto fid = ground_fiducial(rep);
  const auto chart = make_plane_chart(rep, fid);
  const auto H = driven_oscillator(rep, Coefficient::constant(1.0), Coefficient::trig(1.0, 1.0, 0.0));
  const auto cmp = compare_quantum_classical(rep, chart, fid, H, cplx(0.5, 0.2), linspace(0.0, 3.0, 7), 1e-3);
  v.check(cmp.min_fidelity >= 1.0 - 1e-5, "driven F=cos t compare fidelity 1-" + sci(1.0 - cmp.min_fidelity) +
                                              " >= 1-1e-5 (" + cmp.regime + ")");

  const auto sectors = angular_sectors(8, 0.0, 6.0);
  const auto quad = default_quadrature(ChartKind::Plane);
  const Matrix rho = pure_density(gcs_vector(rep, chart, fid, cplx(1.0, 0.4)));
  const auto tr = translated_distribution_check(rep, chart, fid, rho, H, sectors, quad, 0.8, 1e-3);
  v.check(tr.within_budget, "translated distribution diff " + sci(tr.max_difference) + " <= budget " + sci(tr.budget));

  HamiltonianSpec S;
  S.add_hermitian_pair(Coefficient::constant(0.25), named_operator(rep, "adag*adag"), "adag^2");
  const auto neg = translated_distribution_check(rep, chart, fid, rho, S, sectors, quad, 0.5, 1e-3);
  v.check(neg.max_difference > 0.01, "squeeze control violation " + sci(neg.max_difference) + " > 0.01");
}

void stepper_orders(Verdict& v) {
  const auto rep = build_heisenberg_weyl(40);
  const auto fid = ground_fiducial(rep);
  const auto chart = make_plane_chart(rep, fid);
  HamiltonianSpec H;
  H.add_matrix(Coefficient::sum({Coefficient::constant(1.0), Coefficient::trig(0.8, 3.0, 0.0)}),
               named_operator(rep, "n"));
  const double T = 2.0;
  const cplx exact = std::polar(1.0, -(T + 0.8 * std::sin(3.0 * T) / 3.0));
  std::vector<double> err;
  for (double dt : {0.04, 0.02, 0.01}) {
    const auto traj = evolve(rep, H, gcs_vector(rep, chart, fid, 1.0), {0.0, T}, dt);
    err.push_back(std::abs(expect(traj.states.back(), rep.lowering[0]) - exact));
  }
  const double p1 = std::log2(err[0] / err[1]), p2 = std::log2(err[1] / err[2]);
  v.check(std::abs(p1 - 2.0) < 0.1 && std::abs(p2 - 2.0) < 0.1,
          "evolve observed orders " + sci(p1) + "," + sci(p2) + " within 2+-0.1");

  RealMatrix A(2, 2);
  A << -0.1, 1.0, -1.0, -0.1;
  const VelocityField rhs = [&](double, const RealVector& x) { return RealVector(A * x); };
  const RealVector x0 = vec({1.0, 0.5});
  // exp(tA) = e^{-0.1t} [[cos t, sin t], [-sin t, cos t]]
  const double T3 = 3.0;
  const RealVector exact_x =
      std::exp(-0.1 * T3) * vec({std::cos(T3) * x0(0) + std::sin(T3) * x0(1), -std::sin(T3) * x0(0) + std::cos(T3) * x0(1)});
  std::vector<double> e;
  for (double dt : {0.2, 0.1, 0.05})
    e.push_back((integrate_classical(rhs, x0, {0.0, T3}, dt).points.back() - exact_x).norm());
  const double q1 = std::log2(e[0] / e[1]), q2 = std::log2(e[1] / e[2]);
  v.check(std::abs(q1 - 4.0) < 0.2 && std::abs(q2 - 4.0) < 0.2,
          "rk4 observed orders " + sci(q1) + "," + sci(q2) + " within 4+-0.2");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria = {
      {"representation validity", representation_validity},
      {"overcompleteness", overcompleteness},
      {"covariance", covariance},
      {"conjugation identity", conjugation},
      {"Malkin forward direction", malkin},
      {"superstability", superstability},
      {"Birkhoff route", birkhoff},
      {"Kahler route", kahler},
      {"quantum-classical correspondence", correspondence},
      {"stepper orders", stepper_orders},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!v.passed) ++failed;
    std::printf("criterion %2zu %s  %s (%.1fs): %s\n", i + 1, v.passed ? "PASS" : "FAIL", criteria[i].first.c_str(),
                secs, v.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
