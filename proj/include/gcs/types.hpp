#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gcs {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr cplx I_unit{0.0, 1.0};
inline constexpr double pi = 3.14159265358979323846;

/// Amplitude mass above the reliable index beyond which a state is not trusted.
inline constexpr double tail_mass_threshold = 1e-10;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// The state carries too much weight on the truncation boundary.
class TruncationOverflow : public Error {
public:
  TruncationOverflow(const std::string& what, double tail)
      : Error(what), tail_mass(tail) {}
  double tail_mass;
};

/// Ω(ℓ) cannot be inverted; carries the numerical rank and the null directions.
class DegenerateForm : public Error {
public:
  DegenerateForm(const std::string& what, int rank_, RealMatrix null_dirs)
      : Error(what), rank(rank_), null_directions(std::move(null_dirs)) {}
  int rank;
  RealMatrix null_directions;  // columns span the kernel
};

class DomainExit : public Error {
public:
  DomainExit(const std::string& what, double t_exit)
      : Error(what), time(t_exit) {}
  double time;
};

class PartitionError : public Error {
public:
  using Error::Error;
};

}  // namespace gcs
