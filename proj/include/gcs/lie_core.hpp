#pragma once

#include <Eigen/SparseCore>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gcs/linalg.hpp"
#include "gcs/types.hpp"

namespace gcs {

/// Lie algebra basis with structure constants, convention
///   [T_a, T_b] = i C_ab^d T_d + i z_ab 1
/// for Hermitian T. z carries the projective (central) part.
struct AlgebraSpec {
  std::string name;
  int dim = 0;
  std::vector<std::string> basis_names;
  std::vector<double> structure;  // dim^3, index (a*dim + b)*dim + d
  RealMatrix central;             // z_ab
  /// Basis element represented by the identity operator, if any.
  std::optional<int> identity_index;

  AlgebraSpec() = default;
  AlgebraSpec(std::string name_, std::vector<std::string> names)
      : name(std::move(name_)),
        dim(static_cast<int>(names.size())),
        basis_names(std::move(names)),
        structure(static_cast<std::size_t>(dim) * dim * dim, 0.0),
        central(RealMatrix::Zero(dim, dim)) {}

  double C(int a, int b, int d) const { return structure[(a * dim + b) * dim + d]; }
  double& C(int a, int b, int d) { return structure[(a * dim + b) * dim + d]; }

  /// Sets C_ab^d and C_ba^d = -C_ab^d.
  void set_bracket(int a, int b, int d, double value) {
    C(a, b, d) = value;
    C(b, a, d) = -value;
  }
  void set_central(int a, int b, double value) {
    central(a, b) = value;
    central(b, a) = -value;
  }

  int index_of(std::string_view basis_name) const {
    for (int a = 0; a < dim; ++a)
      if (basis_names[a] == basis_name) return a;
    throw InvalidArgument("algebra " + name + " has no basis element '" + std::string(basis_name) + "'");
  }

  /// Structure constants with the central charges folded into the identity
  /// direction (requires identity_index).
  std::vector<double> extended_structure() const {
    std::vector<double> out = structure;
    if (identity_index) {
      for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) out[(a * dim + b) * dim + *identity_index] += central(a, b);
    }
    return out;
  }

  bool antisymmetric() const {
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) {
        if (central(a, b) != -central(b, a)) return false;
        for (int d = 0; d < dim; ++d)
          if (C(a, b, d) != -C(b, a, d)) return false;
      }
    return true;
  }

  /// Largest violation of the Jacobi identity, including the 2-cocycle
  /// condition on the central charges.
  double jacobi_residual() const {
    double worst = 0.0;
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b)
        for (int c = 0; c < dim; ++c) {
          for (int d = 0; d < dim; ++d) {
            double s = 0.0;
            for (int e = 0; e < dim; ++e)
              s += C(a, b, e) * C(e, c, d) + C(b, c, e) * C(e, a, d) + C(c, a, e) * C(e, b, d);
            worst = std::max(worst, std::abs(s));
          }
          double z = 0.0;
          for (int e = 0; e < dim; ++e)
            z += C(a, b, e) * central(e, c) + C(b, c, e) * central(e, a) + C(c, a, e) * central(e, b);
          worst = std::max(worst, std::abs(z));
        }
    return worst;
  }
};

enum class RepKind { HeisenbergWeyl, Oscillator, SU2, SU11, TwoPhotonSU11, BilinearUpq };

inline const char* to_string(RepKind kind) {
  switch (kind) {
    case RepKind::HeisenbergWeyl: return "heisenberg_weyl";
    case RepKind::Oscillator: return "oscillator";
    case RepKind::SU2: return "su2";
    case RepKind::SU11: return "su11";
    case RepKind::TwoPhotonSU11: return "two_photon_su11";
    case RepKind::BilinearUpq: return "bilinear_upq";
  }
  return "unknown";
}

/// Parameters sufficient to rebuild a representation.
struct RepParams {
  RepKind kind = RepKind::HeisenbergWeyl;
  int n_trunc = 0;  // per mode for bilinear reps
  int two_j = 0;
  double k = 0.0;
  int p = 0, q = 0;
  std::vector<Matrix> defining_generators;
};

struct Representation {
  AlgebraSpec algebra;
  Eigen::Index dim = 0;
  std::vector<Matrix> generators;  // Hermitian T_a
  bool truncated = false;
  /// Basis indices on which algebraic identities are trusted.
  std::vector<Eigen::Index> reliable;
  /// Lowering operators a_i of the underlying bosonic modes (empty for spin reps).
  std::vector<Matrix> lowering;
  RepParams params;

  Eigen::Index reliable_dim() const { return static_cast<Eigen::Index>(reliable.size()); }

  bool reliable_is_prefix() const {
    return reliable.empty() || reliable.back() == reliable_dim() - 1;
  }

  Matrix compress(const Matrix& M) const {
    if (reliable_is_prefix()) return linalg::compress(M, reliable_dim());
    return M(reliable, reliable);
  }

  Vector compress(const Vector& v) const {
    if (reliable_is_prefix()) return v.head(reliable_dim());
    return v(reliable);
  }

  /// Amplitude mass outside the reliable subspace.
  double tail_mass(const Vector& psi) const {
    if (!truncated) return 0.0;
    return std::max(0.0, psi.squaredNorm() - compress(psi).squaredNorm());
  }

  bool representable(const Vector& psi) const { return tail_mass(psi) < tail_mass_threshold; }

  int index_of(std::string_view name) const { return algebra.index_of(name); }
  const Matrix& generator(std::string_view name) const { return generators[index_of(name)]; }
  int size() const { return algebra.dim; }
};

struct GroupPoint {
  RealVector params;

  GroupPoint() = default;
  explicit GroupPoint(RealVector p) : params(std::move(p)) {}
  static GroupPoint identity(int r) { return GroupPoint(RealVector::Zero(r)); }
};

namespace detail {

inline Eigen::Index default_reliable_count(Eigen::Index n) {
  return n - (n + 3) / 4;
}

inline std::vector<Eigen::Index> prefix_indices(Eigen::Index m) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
  return idx;
}

inline Matrix lowering_operator(Eigen::Index n) {
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return a;
}

inline void require_trunc(int n_trunc) {
  if (n_trunc < 2) throw InvalidArgument("n_trunc must be >= 2, got " + std::to_string(n_trunc));
}

}  // namespace detail

/// {Q, P, 1} on a truncated Fock space, Q = (a+a†)/√2, P = (a-a†)/(i√2).
inline Representation build_heisenberg_weyl(int n_trunc) {
  detail::require_trunc(n_trunc);
  const Eigen::Index n = n_trunc;
  AlgebraSpec alg("heisenberg_weyl", {"Q", "P", "1"});
  alg.set_central(0, 1, 1.0);
  alg.identity_index = 2;

  const Matrix a = detail::lowering_operator(n);
  const Matrix ad = a.adjoint();
  Representation rep;
  rep.algebra = std::move(alg);
  rep.dim = n;
  rep.generators = {(a + ad) / std::sqrt(2.0), (a - ad) / (I_unit * std::sqrt(2.0)),
                    Matrix::Identity(n, n)};
  rep.truncated = true;
  rep.reliable = detail::prefix_indices(detail::default_reliable_count(n));
  rep.lowering = {a};
  rep.params.kind = RepKind::HeisenbergWeyl;
  rep.params.n_trunc = n_trunc;
  return rep;
}

/// Projective E(2) representation {a†a, Q, P, 1}.
inline Representation build_oscillator_algebra(int n_trunc) {
  detail::require_trunc(n_trunc);
  const Eigen::Index n = n_trunc;
  AlgebraSpec alg("oscillator", {"N", "Q", "P", "1"});
  // [N,Q] = -iP, [N,P] = iQ, [Q,P] = i
  alg.set_bracket(0, 1, 2, -1.0);
  alg.set_bracket(0, 2, 1, 1.0);
  alg.set_central(1, 2, 1.0);
  alg.identity_index = 3;

  const Matrix a = detail::lowering_operator(n);
  const Matrix ad = a.adjoint();
  Representation rep;
  rep.algebra = std::move(alg);
  rep.dim = n;
  rep.generators = {ad * a, (a + ad) / std::sqrt(2.0), (a - ad) / (I_unit * std::sqrt(2.0)),
                    Matrix::Identity(n, n)};
  rep.truncated = true;
  rep.reliable = detail::prefix_indices(detail::default_reliable_count(n));
  rep.lowering = {a};
  rep.params.kind = RepKind::Oscillator;
  rep.params.n_trunc = n_trunc;
  return rep;
}

/// Spin-j representation, basis |j,m⟩ ordered m = -j … j.
inline Representation build_su2(int two_j) {
  if (two_j < 1) throw InvalidArgument("two_j must be >= 1, got " + std::to_string(two_j));
  const Eigen::Index n = two_j + 1;
  const double j = 0.5 * two_j;
  AlgebraSpec alg("su2", {"Jx", "Jy", "Jz"});
  alg.set_bracket(0, 1, 2, 1.0);
  alg.set_bracket(1, 2, 0, 1.0);
  alg.set_bracket(2, 0, 1, 1.0);

  Matrix jp = Matrix::Zero(n, n);
  Matrix jz = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = -j + static_cast<double>(i);
    jz(i, i) = m;
    if (i + 1 < n) jp(i + 1, i) = std::sqrt(j * (j + 1) - m * (m + 1));
  }
  const Matrix jm = jp.adjoint();
  Representation rep;
  rep.algebra = std::move(alg);
  rep.dim = n;
  rep.generators = {(jp + jm) / 2.0, (jp - jm) / (2.0 * I_unit), jz};
  rep.truncated = false;
  rep.reliable = detail::prefix_indices(n);
  rep.params.kind = RepKind::SU2;
  rep.params.two_j = two_j;
  return rep;
}

namespace detail {

inline AlgebraSpec su11_algebra() {
  AlgebraSpec alg("su11", {"K1", "K2", "K0"});
  // [K1,K2] = -iK0, [K0,K1] = iK2, [K2,K0] = iK1
  alg.set_bracket(0, 1, 2, -1.0);
  alg.set_bracket(2, 0, 1, 1.0);
  alg.set_bracket(1, 2, 0, 1.0);
  return alg;
}

}  // namespace detail

/// Truncated discrete series D⁺(k): K₀|m⟩ = (k+m)|m⟩, K₊|m⟩ = √((m+1)(m+2k))|m+1⟩.
inline Representation build_su11(double k, int n_trunc) {
  if (!(k >= 0.5)) throw InvalidArgument("su(1,1) discrete series requires k >= 1/2");
  detail::require_trunc(n_trunc);
  const Eigen::Index n = n_trunc;
  Matrix kp = Matrix::Zero(n, n);
  Matrix k0 = Matrix::Zero(n, n);
  for (Eigen::Index m = 0; m < n; ++m) {
    const double md = static_cast<double>(m);
    k0(m, m) = k + md;
    if (m + 1 < n) kp(m + 1, m) = std::sqrt((md + 1.0) * (md + 2.0 * k));
  }
  const Matrix km = kp.adjoint();
  Representation rep;
  rep.algebra = detail::su11_algebra();
  rep.dim = n;
  rep.generators = {(kp + km) / 2.0, (kp - km) / (2.0 * I_unit), k0};
  rep.truncated = true;
  rep.reliable = detail::prefix_indices(detail::default_reliable_count(n));
  rep.params.kind = RepKind::SU11;
  rep.params.k = k;
  rep.params.n_trunc = n_trunc;
  return rep;
}

/// Single-mode two-photon realization K₀ = (a†a + 1/2)/2, K₊ = a†²/2, K₋ = a²/2.
/// Reducible: D⁺(1/4) on even Fock states, D⁺(3/4) on odd ones.
inline Representation build_two_photon_su11(int n_trunc) {
  detail::require_trunc(n_trunc);
  const Eigen::Index n = n_trunc;
  const Matrix a = detail::lowering_operator(n);
  const Matrix ad = a.adjoint();
  const Matrix kp = ad * ad / 2.0;
  const Matrix km = a * a / 2.0;
  Representation rep;
  rep.algebra = detail::su11_algebra();
  rep.algebra.name = "two_photon_su11";
  rep.dim = n;
  rep.generators = {(kp + km) / 2.0, (kp - km) / (2.0 * I_unit),
                    (ad * a + 0.5 * Matrix::Identity(n, n)) / 2.0};
  rep.truncated = true;
  rep.reliable = detail::prefix_indices(detail::default_reliable_count(n));
  rep.lowering = {a};
  rep.params.kind = RepKind::TwoPhotonSU11;
  rep.params.n_trunc = n_trunc;
  return rep;
}

/// Maximum Hilbert-space dimension accepted by build_bilinear_upq.
inline constexpr Eigen::Index default_dimension_cap = 4096;

/// Homogeneous bilinear generators L_i = φ̃ X_i φ with
/// φ = (a_1..a_p, a†_{p+1}..a†_{p+q})ᵀ, φ̃ = (a†_1..a†_p, -a_{p+1}..-a_{p+q}).
/// Each η X_i (η = diag(1_p, -1_q)) must be Hermitian so that L_i is.
inline Representation build_bilinear_upq(int p, int q, const std::vector<Matrix>& defining,
                                         int n_trunc_per_mode,
                                         Eigen::Index dimension_cap = default_dimension_cap) {
  const int modes = p + q;
  if (p < 0 || q < 0 || modes < 1) throw InvalidArgument("bilinear_upq needs p+q >= 1");
  detail::require_trunc(n_trunc_per_mode);
  if (defining.empty()) throw InvalidArgument("bilinear_upq needs at least one defining generator");
  double total = 1.0;
  for (int i = 0; i < modes; ++i) total *= n_trunc_per_mode;
  if (total > static_cast<double>(dimension_cap))
    throw InvalidArgument("bilinear_upq dimension " + std::to_string(static_cast<long long>(total)) +
                          " exceeds cap " + std::to_string(dimension_cap));
  for (const auto& X : defining)
    if (X.rows() != modes || X.cols() != modes)
      throw InvalidArgument("defining generators must be (p+q)x(p+q)");

  const Eigen::Index nm = n_trunc_per_mode;
  const Eigen::Index n = static_cast<Eigen::Index>(total);
  const Matrix a1 = detail::lowering_operator(nm);

  // Embed the single-mode lowering operator as mode i of the tensor product
  // (mode 0 is the most significant index).
  auto embed = [&](const Matrix& op, int mode) {
    Matrix out = Matrix::Identity(1, 1);
    for (int m = 0; m < modes; ++m) {
      const Matrix& factor = (m == mode) ? op : Matrix(Matrix::Identity(nm, nm));
      Matrix next(out.rows() * factor.rows(), out.cols() * factor.cols());
      for (Eigen::Index r = 0; r < out.rows(); ++r)
        for (Eigen::Index c = 0; c < out.cols(); ++c)
          next.block(r * factor.rows(), c * factor.cols(), factor.rows(), factor.cols()) =
              out(r, c) * factor;
      out = std::move(next);
    }
    return out;
  };

  std::vector<Matrix> lowering;
  for (int m = 0; m < modes; ++m) lowering.push_back(embed(a1, m));

  std::vector<Matrix> phi, phi_t;
  for (int m = 0; m < modes; ++m) {
    if (m < p) {
      phi.push_back(lowering[m]);
      phi_t.push_back(lowering[m].adjoint());
    } else {
      phi.push_back(lowering[m].adjoint());
      phi_t.push_back(-lowering[m]);
    }
  }

  RealVector eta = RealVector::Ones(modes);
  for (int m = p; m < modes; ++m) eta(m) = -1.0;

  std::vector<std::string> names;
  std::vector<Matrix> gens;
  for (std::size_t i = 0; i < defining.size(); ++i) {
    const Matrix etaX = eta.cast<cplx>().asDiagonal() * defining[i];
    if (linalg::hermiticity_residual(etaX) > 1e-12)
      throw InvalidArgument("defining generator " + std::to_string(i) +
                            " does not give a Hermitian bilinear (eta*X must be Hermitian)");
    Matrix L = Matrix::Zero(n, n);
    for (int j = 0; j < modes; ++j)
      for (int k = 0; k < modes; ++k)
        if (defining[i](j, k) != cplx(0.0)) L += defining[i](j, k) * (phi_t[j] * phi[k]);
    gens.push_back(0.5 * (L + L.adjoint()));
    names.push_back("L" + std::to_string(i));
  }

  // Structure constants from the defining matrices: the map X -> φ̃Xφ is a
  // Lie homomorphism, so [X_i, X_j] = i C_ij^k X_k.
  const int r = static_cast<int>(defining.size());
  AlgebraSpec alg("bilinear_upq", names);
  Eigen::MatrixXcd basis(modes * modes, r);
  for (int k = 0; k < r; ++k) basis.col(k) = defining[k].reshaped();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(basis);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b) {
      const Matrix comm = linalg::commutator(defining[a], defining[b]) / I_unit;
      const Eigen::VectorXcd target = comm.reshaped();
      const Eigen::VectorXcd coeff = cod.solve(target);
      if ((basis * coeff - target).norm() > 1e-10 * std::max(1.0, target.norm()))
        throw InvalidArgument("defining generators do not close under commutation");
      for (int d = 0; d < r; ++d) {
        if (std::abs(coeff(d).imag()) > 1e-10)
          throw InvalidArgument("defining generators give complex structure constants");
        alg.C(a, b, d) = std::abs(coeff(d).real()) < 1e-14 ? 0.0 : coeff(d).real();
      }
    }

  Representation rep;
  rep.algebra = std::move(alg);
  rep.dim = n;
  rep.generators = std::move(gens);
  rep.truncated = true;
  const Eigen::Index m_mode = detail::default_reliable_count(nm);
  for (Eigen::Index idx = 0; idx < n; ++idx) {
    Eigen::Index rest = idx;
    bool inside = true;
    for (int m = 0; m < modes; ++m) {
      if (rest % nm >= m_mode) inside = false;
      rest /= nm;
    }
    if (inside) rep.reliable.push_back(idx);
  }
  rep.lowering = std::move(lowering);
  rep.params.kind = RepKind::BilinearUpq;
  rep.params.n_trunc = n_trunc_per_mode;
  rep.params.p = p;
  rep.params.q = q;
  rep.params.defining_generators = defining;
  return rep;
}

struct ValidationReport {
  RealMatrix residuals;  // per generator pair, on the reliable subspace
  double max_residual = 0.0;
  double max_hermiticity = 0.0;
  int worst_a = -1, worst_b = -1;
  double tolerance = 1e-10;
  bool passed = false;
};

/// Commutator residual ‖P([T_a,T_b] − iC_ab^d T_d − i z_ab 1)P‖_max for every pair.
inline ValidationReport check_structure(const Representation& rep, double tol = 1e-10) {
  const int r = rep.size();
  ValidationReport report;
  report.tolerance = tol;
  report.residuals = RealMatrix::Zero(r, r);
  const Matrix id = Matrix::Identity(rep.dim, rep.dim);
  for (const auto& T : rep.generators)
    report.max_hermiticity = std::max(report.max_hermiticity, linalg::hermiticity_residual(T));
  for (int a = 0; a < r; ++a)
    for (int b = a + 1; b < r; ++b) {
      Matrix expected = I_unit * rep.algebra.central(a, b) * id;
      for (int d = 0; d < r; ++d)
        if (rep.algebra.C(a, b, d) != 0.0) expected += I_unit * rep.algebra.C(a, b, d) * rep.generators[d];
      const Matrix diff =
          rep.compress(Matrix(linalg::commutator(rep.generators[a], rep.generators[b]) - expected));
      const double res = linalg::max_abs(diff);
      report.residuals(a, b) = report.residuals(b, a) = res;
      if (res > report.max_residual) {
        report.max_residual = res;
        report.worst_a = a;
        report.worst_b = b;
      }
    }
  report.passed = report.max_residual < tol && report.max_hermiticity < 1e-13;
  return report;
}

/// exp(i ℓ_a T_a).
inline Matrix group_exp(const Representation& rep, const GroupPoint& g) {
  if (g.params.size() != rep.size())
    throw InvalidArgument("group point has " + std::to_string(g.params.size()) + " parameters, algebra has " +
                          std::to_string(rep.size()));
  if (!g.params.allFinite()) throw InvalidArgument("group point has non-finite parameters");
  Matrix X = Matrix::Zero(rep.dim, rep.dim);
  for (int a = 0; a < rep.size(); ++a)
    if (g.params(a) != 0.0) X += g.params(a) * rep.generators[a];
  return linalg::expm_hermitian(X, I_unit);
}

/// exp(i ℓ_a T_a) v without forming the exponential: Taylor series on
/// s substeps with ‖X‖₁/s ≤ 3, using a sparse X when it has few nonzeros.
inline Vector group_exp_apply(const Representation& rep, const GroupPoint& g, const Vector& v) {
  if (g.params.size() != rep.size())
    throw InvalidArgument("group point has " + std::to_string(g.params.size()) + " parameters, algebra has " +
                          std::to_string(rep.size()));
  if (!g.params.allFinite()) throw InvalidArgument("group point has non-finite parameters");
  if (v.size() != rep.dim) throw InvalidArgument("vector has wrong dimension");
  Matrix X = Matrix::Zero(rep.dim, rep.dim);
  for (int a = 0; a < rep.size(); ++a)
    if (g.params(a) != 0.0) X += g.params(a) * rep.generators[a];
  const double norm = X.cwiseAbs().colwise().sum().maxCoeff();
  const int s = std::max(1, static_cast<int>(std::ceil(norm / 3.0)));
  const cplx scale = I_unit / static_cast<double>(s);
  auto run = [&](const auto& A) {
    Vector w = v;
    for (int step = 0; step < s; ++step) {
      Vector term = w;
      Vector acc = w;
      for (int k = 1; k < 80; ++k) {
        term = (A * term) * (scale / static_cast<double>(k));
        acc += term;
        if (term.norm() <= 1e-17 * acc.norm()) break;
      }
      w = acc;
    }
    return w;
  };
  const Eigen::Index nnz = (X.array() != cplx(0.0)).count();
  if (nnz * 4 < X.size()) {
    const Eigen::SparseMatrix<cplx> S = X.sparseView();
    return run(S);
  }
  return run(X);
}

/// Unitarity defect ‖V†V − 1‖_max, measured on the reliable subspace.
inline double unitarity_defect(const Representation& rep, const Matrix& V) {
  const Matrix D = V.adjoint() * V - Matrix::Identity(V.rows(), V.cols());
  return linalg::max_abs(rep.compress(D));
}

}  // namespace gcs
