#pragma once

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "gcs/lie_core.hpp"

namespace gcs {

/// Time-dependent scalar from the grammar
///   const | poly(t) | trig(A, ω, φ) | sum(…) | product(…)
/// Evaluation order is fixed: polynomial terms and sums accumulate left to
/// right, products multiply left to right.
class Coefficient {
public:
  enum class Kind { Const, Poly, Trig, Sum, Product };

  static Coefficient constant(cplx c) {
    Coefficient k(Kind::Const);
    k.value_ = c;
    return k;
  }
  /// Σ_k c_k t^k.
  static Coefficient poly(std::vector<cplx> coeffs) {
    Coefficient k(Kind::Poly);
    k.poly_ = std::move(coeffs);
    return k;
  }
  /// A·cos(ω t + φ).
  static Coefficient trig(cplx amplitude, double omega, double phase) {
    Coefficient k(Kind::Trig);
    k.value_ = amplitude;
    k.omega_ = omega;
    k.phase_ = phase;
    return k;
  }
  static Coefficient sum(std::vector<Coefficient> parts) {
    Coefficient k(Kind::Sum);
    k.children_ = std::move(parts);
    return k;
  }
  static Coefficient product(std::vector<Coefficient> parts) {
    Coefficient k(Kind::Product);
    k.children_ = std::move(parts);
    return k;
  }
  /// A·e^{i(ω t + φ)} written in the grammar as trig + i·trig.
  static Coefficient phasor(double amplitude, double omega, double phase) {
    return sum({trig(amplitude, omega, phase), trig(cplx(0.0, amplitude), omega, phase - 0.5 * pi)});
  }

  Kind kind() const { return kind_; }

  /// Pointwise complex conjugate, kept inside the grammar.
  Coefficient conjugate() const {
    Coefficient k(kind_);
    k.value_ = std::conj(value_);
    k.omega_ = omega_;
    k.phase_ = phase_;
    for (const auto& c : poly_) k.poly_.push_back(std::conj(c));
    for (const auto& c : children_) k.children_.push_back(c.conjugate());
    return k;
  }

  cplx operator()(double t) const {
    switch (kind_) {
      case Kind::Const: return value_;
      case Kind::Poly: {
        cplx acc = 0.0;
        double power = 1.0;
        for (const auto& c : poly_) {
          acc += c * power;
          power *= t;
        }
        return acc;
      }
      case Kind::Trig: return value_ * std::cos(omega_ * t + phase_);
      case Kind::Sum: {
        cplx acc = 0.0;
        for (const auto& c : children_) acc += c(t);
        return acc;
      }
      case Kind::Product: {
        cplx acc = 1.0;
        for (const auto& c : children_) acc *= c(t);
        return acc;
      }
    }
    return 0.0;
  }

  bool time_independent() const {
    switch (kind_) {
      case Kind::Const: return true;
      case Kind::Poly:
        for (std::size_t k = 1; k < poly_.size(); ++k)
          if (poly_[k] != cplx(0.0)) return false;
        return true;
      case Kind::Trig: return omega_ == 0.0 || value_ == cplx(0.0);
      case Kind::Sum:
      case Kind::Product:
        for (const auto& c : children_)
          if (!c.time_independent()) return false;
        return true;
    }
    return false;
  }

  const cplx& value() const { return value_; }
  const std::vector<cplx>& poly_coefficients() const { return poly_; }
  double omega() const { return omega_; }
  double phase() const { return phase_; }
  const std::vector<Coefficient>& children() const { return children_; }

private:
  explicit Coefficient(Kind kind) : kind_(kind) {}
  Kind kind_;
  cplx value_{0.0};
  double omega_ = 0.0, phase_ = 0.0;
  std::vector<cplx> poly_;
  std::vector<Coefficient> children_;
};

struct HamiltonianTerm {
  Coefficient coefficient;
  /// Generator index into the representation, or an explicit matrix.
  std::variant<int, Matrix> op;
  std::string label;
};

/// H(t) = Σ c_k(t) O_k.
class HamiltonianSpec {
public:
  HamiltonianSpec() = default;
  explicit HamiltonianSpec(std::vector<HamiltonianTerm> terms) : terms_(std::move(terms)) {}

  HamiltonianSpec& add_generator(Coefficient c, int index, std::string label = {}) {
    terms_.push_back({std::move(c), index, std::move(label)});
    return *this;
  }
  HamiltonianSpec& add_matrix(Coefficient c, Matrix m, std::string label = {}) {
    terms_.push_back({std::move(c), std::move(m), std::move(label)});
    return *this;
  }

  /// c(t)·O + c(t)*·O†.
  HamiltonianSpec& add_hermitian_pair(const Coefficient& c, const Matrix& op, const std::string& label = {}) {
    add_matrix(c, op, label);
    add_matrix(c.conjugate(), op.adjoint(), label.empty() ? label : label + "^dag");
    return *this;
  }

  const std::vector<HamiltonianTerm>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  bool time_independent() const {
    for (const auto& t : terms_)
      if (!t.coefficient.time_independent()) return false;
    return true;
  }

  Matrix assemble(const Representation& rep, double t) const {
    Matrix H = Matrix::Zero(rep.dim, rep.dim);
    for (const auto& term : terms_) {
      const cplx c = term.coefficient(t);
      if (c == cplx(0.0)) continue;
      if (const int* idx = std::get_if<int>(&term.op)) {
        if (*idx < 0 || *idx >= rep.size()) throw InvalidArgument("Hamiltonian term references unknown generator");
        H += c * rep.generators[*idx];
      } else {
        const Matrix& M = std::get<Matrix>(term.op);
        if (M.rows() != rep.dim || M.cols() != rep.dim)
          throw InvalidArgument("Hamiltonian term matrix has wrong dimension");
        H += c * M;
      }
    }
    return H;
  }

  /// Largest ‖H(t) − H(t)†‖_max over the sample times.
  double hermiticity_residual(const Representation& rep, const std::vector<double>& samples) const {
    double worst = 0.0;
    for (double t : samples) worst = std::max(worst, linalg::hermiticity_residual(assemble(rep, t)));
    return worst;
  }

  void require_hermitian(const Representation& rep, const std::vector<double>& samples) const {
    const double res = hermiticity_residual(rep, samples);
    if (res > 1e-12)
      throw InvalidArgument("Hamiltonian is not Hermitian (residual " + std::to_string(res) +
                            "); complex coefficients need conjugate partners");
  }

private:
  std::vector<HamiltonianTerm> terms_;
};

/// Resolves an operator expression: generator names, `a`, `adag`, `n`
/// (number operator), `I`, joined by `*` (left to right product).
inline Matrix named_operator(const Representation& rep, const std::string& expr) {
  Matrix result = Matrix::Identity(rep.dim, rep.dim);
  std::stringstream ss(expr);
  std::string factor;
  bool any = false;
  while (std::getline(ss, factor, '*')) {
    factor.erase(0, factor.find_first_not_of(' '));
    factor.erase(factor.find_last_not_of(' ') + 1);
    if (factor.empty()) throw InvalidArgument("empty factor in operator expression '" + expr + "'");
    any = true;
    Matrix f;
    bool found = false;
    for (int a = 0; a < rep.size(); ++a)
      if (rep.algebra.basis_names[a] == factor) {
        f = rep.generators[a];
        found = true;
      }
    if (!found) {
      auto mode_index = [&](const std::string& base) -> int {
        if (factor == base) return 0;
        if (factor.rfind(base, 0) == 0 && factor.size() > base.size()) {
          const std::string tail = factor.substr(base.size());
          if (tail.find_first_not_of("0123456789") == std::string::npos) return std::stoi(tail) - 1;
        }
        return -1;
      };
      if (factor == "I") {
        f = Matrix::Identity(rep.dim, rep.dim);
      } else if (int m = mode_index("adag"); m >= 0) {
        if (m >= static_cast<int>(rep.lowering.size())) throw InvalidArgument("no bosonic mode for '" + factor + "'");
        f = rep.lowering[m].adjoint();
      } else if (int m2 = mode_index("a"); m2 >= 0) {
        if (m2 >= static_cast<int>(rep.lowering.size())) throw InvalidArgument("no bosonic mode for '" + factor + "'");
        f = rep.lowering[m2];
      } else if (int m3 = mode_index("n"); m3 >= 0) {
        if (m3 >= static_cast<int>(rep.lowering.size())) throw InvalidArgument("no bosonic mode for '" + factor + "'");
        f = rep.lowering[m3].adjoint() * rep.lowering[m3];
      } else {
        throw InvalidArgument("unknown operator '" + factor + "' for representation " + rep.algebra.name);
      }
    }
    result = result * f;
  }
  if (!any) throw InvalidArgument("empty operator expression");
  return result;
}

}  // namespace gcs
