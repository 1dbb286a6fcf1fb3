#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "gcs/gcs_family.hpp"
#include "gcs/hamiltonian.hpp"
#include "gcs/optimize.hpp"

namespace gcs {

// ---------------------------------------------------------------------------
// Time stepping

struct StepperMeta {
  std::string method = "midpoint-exponential";
  double dt = 0.0;            // requested maximum step
  double max_step = 0.0;      // largest step actually taken
  long steps = 0;
  double local_error = 0.0;   // step-doubling estimate on the first step
};

struct QuantumTrajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  StepperMeta meta;
  double max_norm_defect = 0.0;
  double max_tail_mass = 0.0;
};

namespace detail {

inline void validate_grid(const std::vector<double>& t_grid, double dt) {
  if (t_grid.empty()) throw InvalidArgument("time grid is empty");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    if (!std::isfinite(t_grid[k])) throw InvalidArgument("time grid has non-finite entries");
    if (k > 0 && !(t_grid[k] > t_grid[k - 1])) throw InvalidArgument("time grid must be strictly increasing");
  }
}

inline int substeps(double span, double dt) {
  return std::max(1, static_cast<int>(std::ceil(span / dt - 1e-9)));
}

/// exp(−i h H(t + h/2)), with the eigendecomposition and the last step
/// matrix cached for time-independent H.
class MidpointPropagator {
public:
  MidpointPropagator(const Representation& rep, const HamiltonianSpec& H)
      : rep_(rep), H_(H), constant_(H.time_independent()) {
    if (constant_) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(H.assemble(rep, 0.0));
      vectors_ = es.eigenvectors();
      values_ = es.eigenvalues();
    }
  }

  const Matrix& step(double t, double h) {
    if (constant_) {
      if (h != cached_h_) {
        Vector ph(values_.size());
        for (Eigen::Index k = 0; k < ph.size(); ++k) ph(k) = std::polar(1.0, -h * values_(k));
        cached_ = vectors_ * ph.asDiagonal() * vectors_.adjoint();
        cached_h_ = h;
      }
      return cached_;
    }
    cached_ = linalg::expm_hermitian(H_.assemble(rep_, t + 0.5 * h), cplx(0.0, -h));
    return cached_;
  }

private:
  const Representation& rep_;
  const HamiltonianSpec& H_;
  bool constant_;
  Matrix vectors_;
  RealVector values_;
  Matrix cached_;
  double cached_h_ = -1.0;
};

inline std::vector<double> hermiticity_samples(const std::vector<double>& t_grid) {
  std::vector<double> s;
  const std::size_t stride = std::max<std::size_t>(1, t_grid.size() / 16);
  for (std::size_t k = 0; k < t_grid.size(); k += stride) s.push_back(t_grid[k]);
  s.push_back(t_grid.back());
  return s;
}

}  // namespace detail

/// ψ(t + h) = exp(−i h H(t + h/2)) ψ(t) with h ≤ dt chosen so that every
/// grid time is hit exactly. The first grid entry is the initial time.
inline QuantumTrajectory evolve(const Representation& rep, const HamiltonianSpec& H, const Vector& psi0,
                                const std::vector<double>& t_grid, double dt) {
  detail::validate_grid(t_grid, dt);
  if (psi0.size() != rep.dim) throw InvalidArgument("initial state has wrong dimension");
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw InvalidArgument("initial state is not normalized");
  if (!rep.representable(psi0)) throw TruncationOverflow("initial state is not representable", rep.tail_mass(psi0));
  H.require_hermitian(rep, detail::hermiticity_samples(t_grid));

  QuantumTrajectory traj;
  traj.meta.dt = dt;
  detail::MidpointPropagator prop(rep, H);
  Vector psi = psi0;
  traj.times.push_back(t_grid.front());
  traj.states.push_back(psi);
  for (std::size_t k = 1; k < t_grid.size(); ++k) {
    const double span = t_grid[k] - t_grid[k - 1];
    const int n = detail::substeps(span, dt);
    const double h = span / n;
    traj.meta.max_step = std::max(traj.meta.max_step, h);
    if (traj.meta.steps == 0) {
      const Vector one = prop.step(t_grid[0], h) * psi;
      const Matrix half1 = prop.step(t_grid[0], 0.5 * h);
      const Vector mid = half1 * psi;
      const Vector two = prop.step(t_grid[0] + 0.5 * h, 0.5 * h) * mid;
      traj.meta.local_error = (one - two).norm();
    }
    for (int s = 0; s < n; ++s) {
      const double t = t_grid[k - 1] + s * h;
      psi = prop.step(t, h) * psi;
      ++traj.meta.steps;
      const double tail = rep.tail_mass(psi);
      traj.max_tail_mass = std::max(traj.max_tail_mass, tail);
      if (tail >= tail_mass_threshold)
        throw TruncationOverflow("evolved state leaves the reliable subspace at t = " + std::to_string(t + h), tail);
    }
    traj.max_norm_defect = std::max(traj.max_norm_defect, std::abs(psi.norm() - 1.0));
    traj.times.push_back(t_grid[k]);
    traj.states.push_back(psi);
  }
  return traj;
}

/// Accumulated propagators S_{t_k} (S_{t_0} = 1) on the same stepping as evolve.
inline std::vector<Matrix> evolution_operators(const Representation& rep, const HamiltonianSpec& H,
                                               const std::vector<double>& t_grid, double dt) {
  detail::validate_grid(t_grid, dt);
  H.require_hermitian(rep, detail::hermiticity_samples(t_grid));
  detail::MidpointPropagator prop(rep, H);
  std::vector<Matrix> out;
  Matrix S = Matrix::Identity(rep.dim, rep.dim);
  out.push_back(S);
  for (std::size_t k = 1; k < t_grid.size(); ++k) {
    const double span = t_grid[k] - t_grid[k - 1];
    const int n = detail::substeps(span, dt);
    const double h = span / n;
    for (int s = 0; s < n; ++s) S = prop.step(t_grid[k - 1] + s * h, h) * S;
    out.push_back(S);
  }
  return out;
}

/// A(t) = S_t A₀ S_t⁻¹ on the grid.
inline std::vector<Matrix> invariant_operator(const Representation& rep, const HamiltonianSpec& H, const Matrix& A0,
                                              const std::vector<double>& t_grid, double dt) {
  if (A0.rows() != rep.dim || A0.cols() != rep.dim) throw InvalidArgument("operator has wrong dimension");
  std::vector<Matrix> out;
  for (const Matrix& S : evolution_operators(rep, H, t_grid, dt)) out.push_back(S * A0 * S.adjoint());
  return out;
}

// ---------------------------------------------------------------------------
// Projection onto the real span of the generators

struct SpanProjection {
  RealVector coefficients;  // one per basis operator
  double residual = 0.0;    // relative Frobenius residual on the reliable subspace
};

/// Least-squares fit of a Hermitian M by real combinations of the basis,
/// measured on the reliable subspace.
inline SpanProjection project_onto_span(const Representation& rep, const std::vector<Matrix>& basis, const Matrix& M,
                                        std::optional<Eigen::Index> probe_dim = std::nullopt) {
  auto restrict = [&](const Matrix& X) -> Matrix {
    if (probe_dim) return linalg::compress(X, *probe_dim);
    return rep.compress(X);
  };
  const Matrix target = restrict(M);
  const Eigen::Index m = target.size();
  RealMatrix A(2 * m, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t c = 0; c < basis.size(); ++c) {
    const Matrix B = restrict(basis[c]);
    const Eigen::Map<const Vector> flat(B.data(), m);
    A.col(static_cast<Eigen::Index>(c)) << flat.real(), flat.imag();
  }
  const Eigen::Map<const Vector> tflat(target.data(), m);
  RealVector b(2 * m);
  b << tflat.real(), tflat.imag();
  SpanProjection out;
  out.coefficients = A.completeOrthogonalDecomposition().solve(b);
  const double scale = b.norm();
  out.residual = scale > 0.0 ? (A * out.coefficients - b).norm() / scale : 0.0;
  return out;
}

namespace detail {

/// Generators plus the identity when the algebra does not already contain it.
inline std::vector<Matrix> generator_basis(const Representation& rep) {
  std::vector<Matrix> basis = rep.generators;
  if (!rep.algebra.identity_index) basis.push_back(Matrix::Identity(rep.dim, rep.dim));
  return basis;
}

}  // namespace detail

enum class MalkinClass { LinearInGenerators, Outside };

inline const char* to_string(MalkinClass c) {
  return c == MalkinClass::LinearInGenerators ? "LinearInGenerators" : "Outside";
}

struct MalkinReport {
  MalkinClass classification = MalkinClass::Outside;
  std::vector<double> times;
  std::vector<double> residuals;
  std::vector<RealVector> coefficients;  // f_a(t_k), identity last if appended
  double max_residual = 0.0;
  double tolerance = 1e-9;
};

/// Whether H(t) = f_a(t) T_a (+ f_0(t) 1) at every sample time.
inline MalkinReport malkin_classify(const Representation& rep, const HamiltonianSpec& H,
                                    const std::vector<double>& t_samples, double tol = 1e-9) {
  if (t_samples.empty()) throw InvalidArgument("malkin_classify needs sample times");
  const auto basis = detail::generator_basis(rep);
  MalkinReport report;
  report.tolerance = tol;
  for (double t : t_samples) {
    const auto proj = project_onto_span(rep, basis, H.assemble(rep, t));
    report.times.push_back(t);
    report.residuals.push_back(proj.residual);
    report.coefficients.push_back(proj.coefficients);
    report.max_residual = std::max(report.max_residual, proj.residual);
  }
  report.classification = report.max_residual < tol ? MalkinClass::LinearInGenerators : MalkinClass::Outside;
  return report;
}

// ---------------------------------------------------------------------------
// Nearest GCS and stability

struct NearestGcs {
  cplx z;
  double fidelity = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct NearestGcsOptions {
  int max_iterations = 500;
  double tolerance = 1e-10;
  /// Below this fidelity the search is restarted from a ring of seeds.
  double restart_below = 0.999;
};

/// max_z |⟨Φ_z|ψ⟩|² by Nelder–Mead from the moment seed.
inline NearestGcs nearest_gcs(const Representation& rep, const GcsEvaluator& family, const Vector& psi,
                              const NearestGcsOptions& opt = {}) {
  if (std::abs(psi.norm() - 1.0) > 1e-8) throw InvalidArgument("nearest_gcs needs a normalized state");
  const CosetChart& chart = family.chart();
  auto fidelity_at = [&](cplx z) -> double {
    if (!chart.in_domain(z)) return -1.0;
    try {
      return std::norm(overlap(family.vector(z), psi));
    } catch (const TruncationOverflow&) {
      return -1.0;
    }
  };
  auto cost = [&](const RealVector& x) { return 1.0 - fidelity_at(cplx(x(0), x(1))); };

  optimize::NelderMeadOptions nm;
  nm.max_iterations = opt.max_iterations;
  nm.f_tol = 1e-16;
  nm.x_tol = 1e-9;
  auto run = [&](cplx seed, double step) {
    nm.initial_step = step;
    RealVector x0(2);
    x0 << seed.real(), seed.imag();
    return optimize::nelder_mead(cost, x0, nm);
  };

  cplx seed = moment_coordinate(rep, chart, psi);
  if (!chart.in_domain(seed) || fidelity_at(seed) < 0.0) seed = 0.0;
  const double base_step = chart.kind == ChartKind::Disk ? 0.05 : 0.1;
  auto best = run(seed, base_step);
  int iterations = best.iterations;
  if (1.0 - best.value < opt.restart_below) {
    const double scale = chart.kind == ChartKind::Disk ? 0.3 : 1.0;
    for (double r : {0.5 * scale, scale, 2.0 * scale})
      for (int k = 0; k < 8; ++k) {
        cplx start = seed + std::polar(r, 2.0 * pi * k / 8);
        if (!chart.in_domain(start) || fidelity_at(start) < 0.0) continue;
        const auto trial = run(start, 0.5 * base_step);
        iterations += trial.iterations;
        if (trial.value < best.value) best = trial;
      }
  }
  NearestGcs out;
  out.z = cplx(best.x(0), best.x(1));
  out.fidelity = 1.0 - best.value;
  out.converged = best.converged || best.value < opt.tolerance;
  out.iterations = iterations;
  return out;
}

inline NearestGcs nearest_gcs(const Representation& rep, const CosetChart& chart, const FiducialSpec& fid,
                              const Vector& psi, const NearestGcsOptions& opt = {}) {
  return nearest_gcs(rep, GcsEvaluator(rep, chart, fid), psi, opt);
}

struct StabilityReport {
  std::vector<double> times;
  std::vector<double> fidelity;
  std::vector<cplx> z;
  std::vector<bool> converged;
  double min_fidelity = 1.0;
  double tolerance = 1e-8;
  bool stable = false;
  QuantumTrajectory trajectory;
};

/// Evolves |Φ_{z₀}⟩ and tracks the nearest GCS at every grid time.
inline StabilityReport stability_test(const Representation& rep, const CosetChart& chart, const FiducialSpec& fid,
                                      const HamiltonianSpec& H, cplx z0, const std::vector<double>& t_grid, double dt,
                                      double tol = 1e-8) {
  const GcsEvaluator family(rep, chart, fid);
  StabilityReport report;
  report.tolerance = tol;
  report.trajectory = evolve(rep, H, family.vector(z0), t_grid, dt);
  for (std::size_t k = 0; k < report.trajectory.times.size(); ++k) {
    const auto best = nearest_gcs(rep, family, report.trajectory.states[k]);
    report.times.push_back(report.trajectory.times[k]);
    report.fidelity.push_back(best.fidelity);
    report.z.push_back(best.z);
    report.converged.push_back(best.converged);
    report.min_fidelity = std::min(report.min_fidelity, best.fidelity);
  }
  report.stable = report.min_fidelity >= 1.0 - tol;
  return report;
}

// ---------------------------------------------------------------------------
// Superstability

struct SuperstabilityReport {
  std::vector<double> times;
  double fiducial_residual = 0.0;     // max_k | 1 − |⟨Φ₀|S_t|Φ₀⟩| |
  double automorphism_residual = 0.0; // max relative projection residual
  std::vector<RealMatrix> parameter_maps;  // rows: subset generators, cols: subset (+ identity)
  std::vector<int> subset;
  double tolerance = 1e-8;
  bool fiducial_stable = false;
  bool automorphism = false;
};

/// (i) S_t|Φ₀⟩ ∝ |Φ₀⟩ and (ii) S_t T_a S_t⁻¹ ∈ real-span{T_b : b ∈ subset} ∪ {1}.
/// (ii) is measured on the first probe_dim basis states (default: the
/// reliable subspace); propagators that move weight across the truncation
/// boundary need a probe well inside it.
inline SuperstabilityReport superstability_check(const Representation& rep, const HamiltonianSpec& H,
                                                 const FiducialSpec& fid, const std::vector<int>& subset,
                                                 const std::vector<double>& t_grid, double dt, double tol = 1e-8,
                                                 std::optional<Eigen::Index> probe_dim = std::nullopt) {
  validate_fiducial(rep, fid);
  if (probe_dim && (*probe_dim < 1 || *probe_dim > rep.dim)) throw InvalidArgument("probe dimension out of range");
  if (subset.empty()) throw InvalidArgument("superstability subset is empty");
  for (int a : subset)
    if (a < 0 || a >= rep.size()) throw InvalidArgument("superstability subset index out of range");
  std::vector<Matrix> basis;
  bool has_identity = false;
  for (int a : subset) {
    basis.push_back(rep.generators[a]);
    if (rep.algebra.identity_index && a == *rep.algebra.identity_index) has_identity = true;
  }
  if (!has_identity) basis.push_back(Matrix::Identity(rep.dim, rep.dim));

  SuperstabilityReport report;
  report.subset = subset;
  report.tolerance = tol;
  const auto ops = evolution_operators(rep, H, t_grid, dt);
  for (std::size_t k = 0; k < ops.size(); ++k) {
    const Matrix& S = ops[k];
    report.times.push_back(t_grid[k]);
    const double amp = std::abs(fid.state.dot(S * fid.state));
    report.fiducial_residual = std::max(report.fiducial_residual, std::abs(1.0 - amp));
    RealMatrix map(static_cast<Eigen::Index>(subset.size()), static_cast<Eigen::Index>(basis.size()));
    for (std::size_t i = 0; i < subset.size(); ++i) {
      const auto proj = project_onto_span(rep, basis, S * rep.generators[subset[i]] * S.adjoint(), probe_dim);
      map.row(static_cast<Eigen::Index>(i)) = proj.coefficients.transpose();
      report.automorphism_residual = std::max(report.automorphism_residual, proj.residual);
    }
    report.parameter_maps.push_back(map);
  }
  report.fiducial_stable = report.fiducial_residual < tol;
  report.automorphism = report.automorphism_residual < tol;
  return report;
}

// ---------------------------------------------------------------------------
// Conjugation identity exp(s a†a) F(a, a†) exp(−s a†a) = F(a e^{−s}, a† e^{s})

enum class Ladder { Lower, Raise };

struct MonomialTerm {
  cplx coefficient{1.0};
  std::vector<Ladder> word;  // operator product, left to right
  int declared_a = -1;       // optional declared degrees; checked when given
  int declared_adag = -1;
};

/// Parses "a*adag*a" (also "a^2", "adag^3", "1") into a ladder word.
inline std::vector<Ladder> parse_ladder_word(const std::string& expr) {
  std::vector<Ladder> word;
  std::stringstream ss(expr);
  std::string factor;
  while (std::getline(ss, factor, '*')) {
    factor.erase(0, factor.find_first_not_of(' '));
    factor.erase(factor.find_last_not_of(' ') + 1);
    int power = 1;
    if (const auto caret = factor.find('^'); caret != std::string::npos) {
      const std::string p = factor.substr(caret + 1);
      if (p.empty() || p.find_first_not_of("0123456789") != std::string::npos)
        throw InvalidArgument("bad exponent in monomial '" + expr + "'");
      power = std::stoi(p);
      factor = factor.substr(0, caret);
    }
    if (factor == "1") continue;
    Ladder l;
    if (factor == "a") l = Ladder::Lower;
    else if (factor == "adag") l = Ladder::Raise;
    else throw InvalidArgument("monomial factor '" + factor + "' is not a or adag");
    for (int i = 0; i < power; ++i) word.push_back(l);
  }
  return word;
}

struct ConjugationReport {
  double residual = 0.0;  // relative Frobenius norm on the reliable subspace
  Matrix lhs, rhs;
};

inline ConjugationReport conjugation_identity_check(const Representation& rep, cplx s,
                                                    const std::vector<MonomialTerm>& F) {
  if (rep.lowering.size() != 1) throw InvalidArgument("conjugation identity needs a single bosonic mode");
  if (F.empty()) throw InvalidArgument("polynomial has no terms");
  const Matrix& a = rep.lowering[0];
  const Matrix ad = a.adjoint();
  const Eigen::Index n = rep.dim;
  Matrix f = Matrix::Zero(n, n), rhs = Matrix::Zero(n, n);
  for (const auto& term : F) {
    int na = 0, nad = 0;
    Matrix w = Matrix::Identity(n, n);
    for (Ladder l : term.word) {
      if (l == Ladder::Lower) {
        ++na;
        w = w * a;
      } else {
        ++nad;
        w = w * ad;
      }
    }
    if ((term.declared_a >= 0 && term.declared_a != na) || (term.declared_adag >= 0 && term.declared_adag != nad))
      throw InvalidArgument("monomial word does not match its declared degrees");
    f += term.coefficient * w;
    rhs += term.coefficient * std::exp(s * static_cast<double>(nad - na)) * w;
  }
  const Matrix number = ad * a;
  Vector up(n), down(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    up(k) = std::exp(s * number(k, k).real());
    down(k) = std::exp(-s * number(k, k).real());
  }
  ConjugationReport out;
  out.lhs = up.asDiagonal() * f * down.asDiagonal();
  out.rhs = rhs;
  const double scale = rep.compress(rhs).norm();
  const double diff = rep.compress(Matrix(out.lhs - out.rhs)).norm();
  out.residual = scale > 0.0 ? diff / scale : diff;
  return out;
}

}  // namespace gcs
