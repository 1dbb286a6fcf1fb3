#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "gcs/evolution.hpp"

namespace gcs {

// ---------------------------------------------------------------------------
// Classical Hamiltonian 𝓗 = ⟨Φ|H(t)|Φ⟩

/// 𝓗 at the chart point z.
inline double classical_hamiltonian(const GcsEvaluator& family, const Matrix& Ht, cplx z) {
  const Vector psi = family.vector(z);
  return psi.dot(Ht * psi).real();
}

inline double classical_hamiltonian(const Representation& rep, const GcsEvaluator& family, const HamiltonianSpec& H,
                                    cplx z, double t) {
  return classical_hamiltonian(family, H.assemble(rep, t), z);
}

/// 𝓗 at the group point ℓ, with |Φ_ℓ⟩ = exp(iℓ·T)|Φ₀⟩.
inline double classical_hamiltonian(const Representation& rep, const FiducialSpec& fid, const Matrix& Ht,
                                    const RealVector& l) {
  const Vector psi = group_exp_apply(rep, GroupPoint(l), fid.state);
  const double tail = rep.tail_mass(psi);
  if (tail >= tail_mass_threshold) throw TruncationOverflow("group point leaves the reliable subspace", tail);
  return psi.dot(Ht * psi).real();
}

inline double classical_hamiltonian(const Representation& rep, const FiducialSpec& fid, const HamiltonianSpec& H,
                                    const RealVector& l, double t) {
  return classical_hamiltonian(rep, fid, H.assemble(rep, t), l);
}

// ---------------------------------------------------------------------------
// Birkhoffian form on group parameters

/// The Birkhoff data for a fiducial. Internally M(ℓ)_bd = −ℓ_a C_ab^d with the
/// Hermitian-generator constants (central charges folded into the identity
/// direction), which is ℓ_a C_a for the anti-Hermitian generators L = iT.
struct BirkhoffData {
  AlgebraSpec algebra;
  RealVector v;                   // −⟨Φ₀|T_a|Φ₀⟩
  std::vector<double> structure;  // extended C_ab^d, index (a*r + b)*r + d

  int dim() const { return algebra.dim; }

  RealMatrix structure_matrix(const RealVector& l) const {
    const int r = dim();
    RealMatrix M = RealMatrix::Zero(r, r);
    for (int a = 0; a < r; ++a) {
      if (l(a) == 0.0) continue;
      for (int b = 0; b < r; ++b)
        for (int d = 0; d < r; ++d) M(b, d) -= l(a) * structure[(a * r + b) * r + d];
    }
    return M;
  }
};

inline BirkhoffData make_birkhoff_data(const Representation& rep, const FiducialSpec& fid) {
  validate_fiducial(rep, fid);
  const AlgebraSpec& alg = rep.algebra;
  if (!alg.identity_index && alg.central.cwiseAbs().maxCoeff() > 0.0)
    throw InvalidArgument("central charges need an identity generator in the algebra");
  BirkhoffData data;
  data.algebra = alg;
  data.structure = alg.extended_structure();
  data.v.resize(alg.dim);
  for (int a = 0; a < alg.dim; ++a) data.v(a) = -fid.state.dot(rep.generators[a] * fid.state).real();
  return data;
}

/// φ(A) = (e^A − 1)/A = Σ A^k/(k+1)!, via Taylor on A/2^s and the doubling
/// relation φ(2A) = φ(A)(e^A + 1)/2.
inline RealMatrix phi1(const RealMatrix& A) {
  const Eigen::Index n = A.rows();
  const double norm = A.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm > 0.25) s = static_cast<int>(std::ceil(std::log2(norm / 0.25)));
  const RealMatrix X = A / std::ldexp(1.0, s);
  RealMatrix phi = RealMatrix::Identity(n, n);
  RealMatrix ex = RealMatrix::Identity(n, n) + X;
  RealMatrix power = X;  // X^k
  double fact = 1.0;     // k!
  for (int k = 1; k < 30; ++k) {
    fact *= k;
    const RealMatrix term_phi = power / (fact * (k + 1));
    phi += term_phi;
    power = power * X;
    const RealMatrix term_exp = power / (fact * (k + 1));
    ex += term_exp;
    if (term_phi.cwiseAbs().maxCoeff() < 1e-16 && term_exp.cwiseAbs().maxCoeff() < 1e-16) break;
  }
  for (int i = 0; i < s; ++i) {
    phi = 0.5 * phi * (ex + RealMatrix::Identity(n, n));
    ex = ex * ex;
  }
  return phi;
}

/// R(ℓ) = φ(−M(ℓ))·v with the entire function φ(−M) = Σ(−M)^k/(k+1)!.
inline RealVector r_vector(const BirkhoffData& data, const RealVector& l) {
  if (l.size() != data.dim()) throw InvalidArgument("parameter vector has wrong length");
  if (!l.allFinite()) throw InvalidArgument("parameter vector is not finite");
  return phi1(RealMatrix(-data.structure_matrix(l))) * data.v;
}

struct OmegaReport {
  RealMatrix omega;
  RealVector singular_values;
  int rank = 0;
  double condition = 0.0;  // σ_max/σ_min; infinity when singular
  double antisymmetry = 0.0;
};

namespace detail {

inline void rank_report(OmegaReport& rep, double rel_tol = 1e-8) {
  Eigen::JacobiSVD<RealMatrix> svd(rep.omega);
  rep.singular_values = svd.singularValues();
  const double smax = rep.singular_values.size() ? rep.singular_values(0) : 0.0;
  rep.rank = 0;
  for (Eigen::Index i = 0; i < rep.singular_values.size(); ++i)
    if (rep.singular_values(i) > rel_tol * std::max(1.0, smax)) ++rep.rank;
  const double smin = rep.singular_values.size() ? rep.singular_values(rep.singular_values.size() - 1) : 0.0;
  rep.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  rep.antisymmetry = (rep.omega + rep.omega.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Ω_ab = ∂_aR_b − ∂_bR_a from central differences of R with step h.
inline OmegaReport omega_matrix(const BirkhoffData& data, const RealVector& l, double h = 1e-5) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  const int r = data.dim();
  RealMatrix D(r, r);  // D(a, b) = ∂_a R_b
  for (int a = 0; a < r; ++a) {
    RealVector lp = l, lm = l;
    lp(a) += h;
    lm(a) -= h;
    D.row(a) = ((r_vector(data, lp) - r_vector(data, lm)) / (2.0 * h)).transpose();
  }
  OmegaReport rep;
  rep.omega = D - D.transpose();
  detail::rank_report(rep);
  return rep;
}

using GradientFn = std::function<RealVector(const RealVector&, double)>;

/// ∇𝓗 by central differences along the active coordinates (all when empty).
inline GradientFn hamiltonian_gradient(const Representation& rep, const FiducialSpec& fid, const HamiltonianSpec& H,
                                       std::vector<int> active = {}, double h = 1e-5) {
  return [&rep, &fid, &H, active, h](const RealVector& l, double t) {
    const Matrix Ht = H.assemble(rep, t);
    RealVector g = RealVector::Zero(l.size());
    auto one = [&](int a) {
      RealVector lp = l, lm = l;
      lp(a) += h;
      lm(a) -= h;
      g(a) = (classical_hamiltonian(rep, fid, Ht, lp) - classical_hamiltonian(rep, fid, Ht, lm)) / (2.0 * h);
    };
    if (active.empty())
      for (int a = 0; a < l.size(); ++a) one(a);
    else
      for (int a : active) one(a);
    return g;
  };
}

/// Solves Ω ℓ̇ = ∇𝓗 on the active block (inactive velocities are zero).
/// Throws DegenerateForm when the block's condition number exceeds cond_limit.
inline RealVector birkhoff_rhs(const BirkhoffData& data, const GradientFn& grad, const RealVector& l, double t,
                               const std::vector<int>& active = {}, double h = 1e-5, double cond_limit = 1e10) {
  const int r = data.dim();
  std::vector<int> idx = active;
  if (idx.empty())
    for (int a = 0; a < r; ++a) idx.push_back(a);
  const Eigen::Index k = static_cast<Eigen::Index>(idx.size());
  const RealMatrix full = omega_matrix(data, l, h).omega;
  OmegaReport block;
  block.omega.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) block.omega(i, j) = full(idx[i], idx[j]);
  detail::rank_report(block);
  if (!(block.condition < cond_limit)) {
    Eigen::JacobiSVD<RealMatrix> svd(block.omega, Eigen::ComputeFullV);
    const double smax = svd.singularValues()(0);
    std::vector<Eigen::Index> nulls;
    for (Eigen::Index i = 0; i < k; ++i)
      if (svd.singularValues()(i) * cond_limit <= std::max(smax, 1e-300)) nulls.push_back(i);
    RealMatrix dirs = RealMatrix::Zero(r, static_cast<Eigen::Index>(nulls.size()));
    for (std::size_t c = 0; c < nulls.size(); ++c)
      for (Eigen::Index i = 0; i < k; ++i) dirs(idx[i], static_cast<Eigen::Index>(c)) = svd.matrixV()(i, nulls[c]);
    throw DegenerateForm("Birkhoff form is degenerate (rank " + std::to_string(block.rank) + " of " +
                             std::to_string(k) + ")",
                         block.rank, dirs);
  }
  const RealVector g = grad(l, t);
  RealVector gb(k);
  for (Eigen::Index i = 0; i < k; ++i) gb(i) = g(idx[i]);
  const RealVector vb = block.omega.fullPivLu().solve(gb);
  RealVector out = RealVector::Zero(r);
  for (Eigen::Index i = 0; i < k; ++i) out(idx[i]) = vb(i);
  return out;
}

// ---------------------------------------------------------------------------
// Kähler geometry on the coset chart

inline double kahler_potential(const GcsEvaluator& family, cplx z) {
  const cplx ov = family.fiducial().dot(family.vector(z));
  return -2.0 * std::log(std::abs(ov));
}

struct KahlerMetric {
  double f = 0.0;
  Matrix g;      // g_{z z*}, 1×1 Hermitian
  Matrix g_inv;  // g^{z z*}
};

namespace detail {

inline void require_stencil_in_domain(const CosetChart& chart, cplx z, double h) {
  for (cplx d : {cplx(h, h), cplx(h, -h), cplx(-h, h), cplx(-h, -h)})
    if (!chart.in_domain(z + d)) throw InvalidArgument("finite-difference stencil leaves the chart domain");
}

}  // namespace detail

/// g = ∂²f/∂z∂z* = ¼Δf with the 9-point Laplacian of step h.
inline KahlerMetric kahler_metric(const GcsEvaluator& family, cplx z, double h = 1e-4) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  detail::require_stencil_in_domain(family.chart(), z, h);
  auto f = [&](double dx, double dy) { return kahler_potential(family, z + cplx(dx * h, dy * h)); };
  const double c = f(0, 0);
  const double edges = f(1, 0) + f(-1, 0) + f(0, 1) + f(0, -1);
  const double corners = f(1, 1) + f(1, -1) + f(-1, 1) + f(-1, -1);
  const double laplacian = (4.0 * edges + corners - 20.0 * c) / (6.0 * h * h);
  KahlerMetric out;
  out.f = c;
  const double g = 0.25 * laplacian;
  if (!(g > 0.0) || !std::isfinite(g)) throw Error("Kähler metric is not positive at this chart point");
  out.g = Matrix::Constant(1, 1, g);
  out.g_inv = Matrix::Constant(1, 1, 1.0 / g);
  return out;
}

/// ż = −i g^{zz*} ∂𝓗/∂z*, ∂/∂z* = ½(∂_x + i∂_y).
inline cplx coset_rhs(const GcsEvaluator& family, const Matrix& Ht, cplx z, double h = 1e-4) {
  detail::require_stencil_in_domain(family.chart(), z, h);
  const double hx = (classical_hamiltonian(family, Ht, z + h) - classical_hamiltonian(family, Ht, z - h)) / (2.0 * h);
  const double hy = (classical_hamiltonian(family, Ht, z + cplx(0.0, h)) -
                     classical_hamiltonian(family, Ht, z - cplx(0.0, h))) /
                    (2.0 * h);
  const cplx dzbar = 0.5 * cplx(hx, hy);
  const KahlerMetric m = kahler_metric(family, z, h);
  return -I_unit * m.g_inv(0, 0) * dzbar;
}

inline cplx coset_rhs(const Representation& rep, const GcsEvaluator& family, const HamiltonianSpec& H, cplx z, double t,
                      double h = 1e-4) {
  return coset_rhs(family, H.assemble(rep, t), z, h);
}

// ---------------------------------------------------------------------------
// Fixed-step RK4

struct ClassicalTrajectory {
  std::vector<double> times;
  std::vector<RealVector> points;
  std::string method = "rk4";
  double dt = 0.0;
  long steps = 0;
};

using VelocityField = std::function<RealVector(double, const RealVector&)>;
using DomainPredicate = std::function<bool(const RealVector&)>;

inline ClassicalTrajectory integrate_classical(const VelocityField& rhs, const RealVector& x0,
                                               const std::vector<double>& t_grid, double dt,
                                               const DomainPredicate& in_domain = {}) {
  detail::validate_grid(t_grid, dt);
  if (!x0.allFinite()) throw InvalidArgument("initial point is not finite");
  if (in_domain && !in_domain(x0)) throw DomainExit("initial point outside the domain", t_grid.front());
  ClassicalTrajectory traj;
  traj.dt = dt;
  RealVector x = x0;
  traj.times.push_back(t_grid.front());
  traj.points.push_back(x);
  for (std::size_t k = 1; k < t_grid.size(); ++k) {
    const double span = t_grid[k] - t_grid[k - 1];
    const int n = detail::substeps(span, dt);
    const double h = span / n;
    for (int s = 0; s < n; ++s) {
      const double t = t_grid[k - 1] + s * h;
      const RealVector k1 = rhs(t, x);
      const RealVector k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
      const RealVector k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
      const RealVector k4 = rhs(t + h, x + h * k3);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      ++traj.steps;
      if (!x.allFinite() || (in_domain && !in_domain(x)))
        throw DomainExit("trajectory left the domain at t = " + std::to_string(t + h), t + h);
    }
    traj.times.push_back(t_grid[k]);
    traj.points.push_back(x);
  }
  return traj;
}

inline RealVector to_real2(cplx z) {
  RealVector x(2);
  x << z.real(), z.imag();
  return x;
}

inline cplx to_complex(const RealVector& x) { return {x(0), x(1)}; }

/// RK4 on the chart with the Kähler velocity field.
inline ClassicalTrajectory integrate_coset(const Representation& rep, const GcsEvaluator& family,
                                           const HamiltonianSpec& H, cplx z0, const std::vector<double>& t_grid,
                                           double dt, double h = 1e-4) {
  const bool constant = H.time_independent();
  const Matrix H0 = constant ? H.assemble(rep, 0.0) : Matrix();
  const VelocityField rhs = [&](double t, const RealVector& x) {
    const cplx z = to_complex(x);
    return to_real2(constant ? coset_rhs(family, H0, z, h) : coset_rhs(rep, family, H, z, t, h));
  };
  const CosetChart& chart = family.chart();
  const DomainPredicate dom = [&chart, h](const RealVector& x) {
    const cplx z = to_complex(x);
    return chart.in_domain(z) && (chart.kind != ChartKind::Disk || std::abs(z) + 2.0 * h < 1.0);
  };
  return integrate_classical(rhs, to_real2(z0), t_grid, dt, dom);
}

// ---------------------------------------------------------------------------
// Action

namespace detail {

inline double uniform_step(const std::vector<double>& times) {
  if (times.size() < 3) throw InvalidArgument("action needs at least three trajectory points");
  const double dt = times[1] - times[0];
  for (std::size_t k = 1; k < times.size(); ++k)
    if (std::abs((times[k] - times[k - 1]) - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
      throw InvalidArgument("action needs a uniform time grid");
  return dt;
}

inline double trapezoid(const std::vector<double>& y, double dt) {
  double s = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) s += (k == 0 || k + 1 == y.size() ? 0.5 : 1.0) * y[k];
  return s * dt;
}

/// Second-order derivative of a sampled vector sequence.
template <class V>
V sample_derivative(const std::vector<V>& x, std::size_t k, double dt) {
  const std::size_t n = x.size();
  if (k == 0) return (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt);
  if (k + 1 == n) return (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * dt);
  return (x[k + 1] - x[k - 1]) / (2.0 * dt);
}

}  // namespace detail

using ClassicalEnergyFn = std::function<double(const RealVector&, double)>;

/// I = ∫ (R_a(ℓ) ℓ̇_a − 𝓗(ℓ, t)) dt by the trapezoidal rule.
inline double action_value(const BirkhoffData& data, const ClassicalTrajectory& traj, const ClassicalEnergyFn& energy) {
  const double dt = detail::uniform_step(traj.times);
  std::vector<double> integrand;
  for (std::size_t k = 0; k < traj.points.size(); ++k) {
    const RealVector ldot = detail::sample_derivative(traj.points, k, dt);
    integrand.push_back(r_vector(data, traj.points[k]).dot(ldot) - energy(traj.points[k], traj.times[k]));
  }
  return detail::trapezoid(integrand, dt);
}

/// ∫ (i⟨Φ|Φ̇⟩ − ⟨Φ|H|Φ⟩) dt along |Φ(t)⟩ = exp(iℓ(t)·T)|Φ₀⟩, with Φ̇ from the
/// sampled states.
inline double quantum_action(const Representation& rep, const FiducialSpec& fid, const HamiltonianSpec& H,
                             const ClassicalTrajectory& traj) {
  const double dt = detail::uniform_step(traj.times);
  std::vector<Vector> states;
  for (const auto& l : traj.points) states.push_back(group_exp_apply(rep, GroupPoint(l), fid.state));
  std::vector<double> integrand;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Vector dphi = detail::sample_derivative(states, k, dt);
    const double kinetic = (I_unit * states[k].dot(dphi)).real();
    integrand.push_back(kinetic - states[k].dot(H.assemble(rep, traj.times[k]) * states[k]).real());
  }
  return detail::trapezoid(integrand, dt);
}

// ---------------------------------------------------------------------------
// Quantum–classical comparison

struct ComparisonReport {
  std::vector<double> times;
  std::vector<double> fidelity;      // |⟨Φ_{z_cl(t)}|ψ(t)⟩|²
  std::vector<double> discrepancy;   // |z_cl − z_qm|
  std::vector<cplx> z_classical, z_quantum;
  double min_fidelity = 1.0;
  double max_discrepancy = 0.0;
  MalkinClass malkin = MalkinClass::Outside;
  std::string regime;                // "exact" for Malkin-class H, else "approximate"
  double tolerance = 1e-5;
  double quantum_step_error = 0.0;   // Richardson estimate, dt vs 2dt
  double classical_step_error = 0.0; // Richardson estimate, dt vs 2dt
  double optimizer_tolerance = 1e-10;
  bool passed = false;
};

inline ComparisonReport compare_quantum_classical(const Representation& rep, const CosetChart& chart,
                                                  const FiducialSpec& fid, const HamiltonianSpec& H, cplx z0,
                                                  const std::vector<double>& t_grid, double dt, double tol = 1e-5,
                                                  double h = 1e-4) {
  const GcsEvaluator family(rep, chart, fid);
  ComparisonReport report;
  report.tolerance = tol;
  report.malkin = malkin_classify(rep, H, detail::hermiticity_samples(t_grid)).classification;
  report.regime = report.malkin == MalkinClass::LinearInGenerators ? "exact" : "approximate";

  const Vector psi0 = family.vector(z0);
  const auto quantum = evolve(rep, H, psi0, t_grid, dt);
  const auto quantum2 = evolve(rep, H, psi0, t_grid, 2.0 * dt);
  const auto classical = integrate_coset(rep, family, H, z0, t_grid, dt, h);
  const auto classical2 = integrate_coset(rep, family, H, z0, t_grid, 2.0 * dt, h);
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const cplx zc = to_complex(classical.points[k]);
    const Vector& psi = quantum.states[k];
    const auto best = nearest_gcs(rep, family, psi);
    const double fid_k = std::norm(overlap(family.vector(zc), psi));
    report.times.push_back(t_grid[k]);
    report.fidelity.push_back(fid_k);
    report.z_classical.push_back(zc);
    report.z_quantum.push_back(best.z);
    report.discrepancy.push_back(std::abs(zc - best.z));
    report.min_fidelity = std::min(report.min_fidelity, fid_k);
    report.max_discrepancy = std::max(report.max_discrepancy, report.discrepancy.back());
    report.quantum_step_error =
        std::max(report.quantum_step_error, (quantum.states[k] - quantum2.states[k]).norm() / 3.0);
    report.classical_step_error =
        std::max(report.classical_step_error, (classical.points[k] - classical2.points[k]).norm() / 15.0);
  }
  report.passed = report.malkin == MalkinClass::LinearInGenerators && report.min_fidelity >= 1.0 - tol;
  return report;
}

// ---------------------------------------------------------------------------
// Translated measurement distribution along a stable evolution

/// w = (a z + b)/(c z + d).
struct Mobius {
  cplx a{1.0}, b{0.0}, c{0.0}, d{1.0};

  cplx operator()(cplx z) const { return (a * z + b) / (c * z + d); }
  Mobius inverse() const { return {d, -b, -c, a}; }

  /// The unique map sending z_i to w_i for three distinct points.
  static Mobius fit(const std::array<cplx, 3>& z, const std::array<cplx, 3>& w) {
    Eigen::Matrix<cplx, 3, 4> A;
    for (int i = 0; i < 3; ++i) A.row(i) << z[i], 1.0, -z[i] * w[i], -w[i];
    Eigen::JacobiSVD<Eigen::Matrix<cplx, 3, 4>> svd(A, Eigen::ComputeFullV);
    const auto n = svd.matrixV().col(3);
    return {n(0), n(1), n(2), n(3)};
  }
};

struct TranslationReport {
  std::vector<double> evolved;     // tr(ρ(t) M(Δ))
  std::vector<double> translated;  // w_ρ(g⁻¹(t)Δ)
  double max_difference = 0.0;
  double budget = 0.0;
  double quad_error_bound = 0.0;
  double anchor_error = 0.0;       // sensitivity of the translated side to the ODE step
  int nodes_outside = 0;           // nodes whose preimage left the representable region
  Mobius g_inverse;
  double t = 0.0;
  bool within_budget = false;
};

namespace detail {

inline std::vector<double> translated_probabilities(const GcsEvaluator& family, const QuadratureGrid& grid,
                                                    const Matrix& rho, const std::vector<PolarRegion>& partition,
                                                    const Mobius& ginv, int& outside) {
  const CosetChart& chart = family.chart();
  std::vector<double> out(partition.size(), 0.0);
  outside = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const cplx x = ginv(chart.from_polar(grid.u[i], grid.phi[i]));
    double q = 0.0;
    bool ok = chart.in_domain(x);
    if (ok) {
      try {
        const Vector phi = family.vector(x);
        q = phi.dot(rho * phi).real();
      } catch (const TruncationOverflow&) {
        ok = false;
      }
    }
    if (!ok) {
      ++outside;
      continue;
    }
    for (std::size_t c = 0; c < partition.size(); ++c)
      if (partition[c].contains(grid.u[i], grid.phi[i])) out[c] += grid.weight[i] * q;
  }
  return out;
}

inline Mobius flow_map(const Representation& rep, const GcsEvaluator& family, const HamiltonianSpec& H, double t,
                       double dt, double scale, double h) {
  const std::array<cplx, 3> anchors = {cplx(0.0), cplx(scale, 0.0), cplx(0.0, scale)};
  std::array<cplx, 3> images{};
  for (int i = 0; i < 3; ++i)
    images[i] = to_complex(integrate_coset(rep, family, H, anchors[i], {0.0, t}, dt, h).points.back());
  return Mobius::fit(anchors, images);
}

}  // namespace detail

/// Compares tr(ρ(t)M(Δ)) with w_ρ(g⁻¹(t)Δ) = ∫_Δ μ(dy) ⟨Φ_{g⁻¹y}|ρ|Φ_{g⁻¹y}⟩,
/// where g(t) acts on the chart as the Möbius map fitted to three classical
/// trajectories.
inline TranslationReport translated_distribution_check(const Representation& rep, const CosetChart& chart,
                                                       const FiducialSpec& fid, const Matrix& rho,
                                                       const HamiltonianSpec& H,
                                                       const std::vector<PolarRegion>& partition,
                                                       const QuadratureSpec& quad, double t, double dt,
                                                       double h = 1e-4) {
  if (t < 0.0) throw InvalidArgument("translation time must be non-negative");
  validate_density_matrix(rep, rho);
  const GcsEvaluator family(rep, chart, fid);
  const Povm povm = build_povm(rep, chart, fid, partition, quad);
  const QuadratureGrid grid = assemble_grid(rep, chart, fid, quad);
  TranslationReport report;
  report.t = t;
  report.quad_error_bound = povm.quad_error_bound;

  Matrix rho_t = rho;
  Mobius g{}, g2{};
  if (t > 0.0) {
    const Matrix S = evolution_operators(rep, H, {0.0, t}, dt).back();
    rho_t = S * rho * S.adjoint();
    const double scale = chart.kind == ChartKind::Disk ? 0.3 : 0.5;
    g = detail::flow_map(rep, family, H, t, dt, scale, h);
    g2 = detail::flow_map(rep, family, H, t, 2.0 * dt, scale, h);
  }
  report.g_inverse = g.inverse();
  for (const auto& cell : povm.cells) report.evolved.push_back((rho_t * cell.effect).trace().real());
  report.translated = detail::translated_probabilities(family, grid, rho, partition, report.g_inverse,
                                                       report.nodes_outside);
  int outside2 = 0;
  const auto coarse = detail::translated_probabilities(family, grid, rho, partition, g2.inverse(), outside2);
  for (std::size_t c = 0; c < partition.size(); ++c) {
    report.max_difference = std::max(report.max_difference, std::abs(report.evolved[c] - report.translated[c]));
    report.anchor_error = std::max(report.anchor_error, std::abs(report.translated[c] - coarse[c]));
  }
  report.budget = report.quad_error_bound + report.anchor_error + 1e-12;
  report.within_budget = report.max_difference <= report.budget;
  return report;
}

}  // namespace gcs
