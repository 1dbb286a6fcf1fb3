#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "gcs/lie_core.hpp"
#include "gcs/linalg.hpp"
#include "gcs/quadrature.hpp"

namespace gcs {

struct FiducialSpec {
  Vector state;
  std::string description;
};

/// Basis state |index⟩ (Fock ground state, lowest weight, …).
inline FiducialSpec basis_fiducial(const Representation& rep, Eigen::Index index, std::string description) {
  if (index < 0 || index >= rep.dim) throw InvalidArgument("fiducial index out of range");
  Vector v = Vector::Zero(rep.dim);
  v(index) = 1.0;
  return {v, std::move(description)};
}

inline FiducialSpec ground_fiducial(const Representation& rep) {
  return basis_fiducial(rep, 0, rep.params.kind == RepKind::SU2 ? "lowest weight |j,-j>" : "ground state |0>");
}

inline void validate_fiducial(const Representation& rep, const FiducialSpec& fid) {
  if (fid.state.size() != rep.dim) throw InvalidArgument("fiducial dimension does not match representation");
  if (std::abs(fid.state.norm() - 1.0) > 1e-13) throw InvalidArgument("fiducial vector is not normalized");
  if (!rep.representable(fid.state))
    throw TruncationOverflow("fiducial vector has weight outside the reliable subspace", rep.tail_mass(fid.state));
}

inline cplx overlap(const Vector& psi, const Vector& phi) {
  if (psi.size() != phi.size())
    throw InvalidArgument("overlap of vectors with dimensions " + std::to_string(psi.size()) + " and " +
                          std::to_string(phi.size()));
  return psi.dot(phi);
}

// ---------------------------------------------------------------------------
// Stationary subgroup

struct StationarySubgroup {
  std::vector<RealVector> basis;       // real parameter directions fixing |Φ₀⟩ up to phase
  std::vector<double> phase_gradients; // ⟨Φ₀|ℓ·T|Φ₀⟩ per basis vector
  std::vector<double> residuals;
  RealVector singular_values;
};

/// Null space of the real n×r system Σ ℓ_a (1 − |Φ₀⟩⟨Φ₀|) T_a|Φ₀⟩ = 0.
inline StationarySubgroup find_stationary_subgroup(const Representation& rep, const FiducialSpec& fid,
                                                   double tol = 1e-8) {
  validate_fiducial(rep, fid);
  const int r = rep.size();
  const Vector& phi0 = fid.state;
  Matrix cols(rep.dim, r);
  for (int a = 0; a < r; ++a) {
    const Vector t = rep.generators[a] * phi0;
    cols.col(a) = t - phi0 * phi0.dot(t);
  }
  RealMatrix stacked(2 * rep.dim, r);
  stacked.topRows(rep.dim) = cols.real();
  stacked.bottomRows(rep.dim) = cols.imag();
  Eigen::JacobiSVD<RealMatrix> svd(stacked, Eigen::ComputeFullV);
  StationarySubgroup out;
  out.singular_values = svd.singularValues();
  const RealMatrix& V = svd.matrixV();
  for (int c = 0; c < r; ++c) {
    const double sigma = c < out.singular_values.size() ? out.singular_values(c) : 0.0;
    if (sigma >= tol) continue;
    RealVector dir = V.col(c);
    Eigen::Index imax = 0;
    dir.cwiseAbs().maxCoeff(&imax);
    if (dir(imax) < 0) dir = -dir;
    for (Eigen::Index i = 0; i < dir.size(); ++i)
      if (std::abs(dir(i)) < 1e-15) dir(i) = 0.0;
    Matrix X = Matrix::Zero(rep.dim, rep.dim);
    for (int a = 0; a < r; ++a) X += dir(a) * rep.generators[a];
    const Vector image = X * phi0;
    const cplx lambda = phi0.dot(image);
    out.basis.push_back(dir);
    out.phase_gradients.push_back(lambda.real());
    out.residuals.push_back((image - lambda * phi0).norm());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coset charts

enum class ChartKind { Plane, Sphere, Disk };

inline const char* to_string(ChartKind kind) {
  switch (kind) {
    case ChartKind::Plane: return "plane";
    case ChartKind::Sphere: return "sphere";
    case ChartKind::Disk: return "disk";
  }
  return "unknown";
}

/// Parametrization of X = G/K by one complex coordinate z.
///
/// The cross-section is the displacement-type section s(z) = exp(ζA† − ζ*A)
/// with A† = c_x T_x + c_y T_y the raising combination and |ζ| a chart
/// specific function of |z| (plane |z|, sphere atan|z|, disk atanh|z|).
/// Polar chart coordinates (u, φ) are used by quadratures and regions:
/// u = |z| on the plane and disk, u = θ = 2 atan|z| on the sphere.
struct CosetChart {
  ChartKind kind = ChartKind::Plane;
  int x_index = -1, y_index = -1;
  cplx cx, cy;
  /// Generator acting as the rotation z → z e^{iθ}, if the algebra has one.
  std::optional<int> rotation_index;
  /// Diagonal of the rotation operator W with [W, A†] = A†.
  RealVector rotation_weights;
  /// ⟨Φ₀|W|Φ₀⟩: -j on the sphere, k on the disk, 0 on the plane.
  double weight0 = 0.0;
  /// Raising operator A† as a matrix.
  Matrix raising;

  double spin() const { return -weight0; }
  double bargmann_index() const { return weight0; }

  bool in_domain(cplx z) const {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return kind != ChartKind::Disk || std::abs(z) < 1.0;
  }

  double radius_of(double u) const { return kind == ChartKind::Sphere ? std::tan(0.5 * u) : u; }
  double u_of(double r) const { return kind == ChartKind::Sphere ? 2.0 * std::atan(r) : r; }

  cplx from_polar(double u, double phi) const { return std::polar(radius_of(u), phi); }

  std::pair<double, double> to_polar(cplx z) const {
    double phi = std::arg(z);
    if (phi < 0) phi += 2.0 * pi;
    return {u_of(std::abs(z)), phi};
  }

  /// Density μ(z) of the invariant measure w.r.t. d²z = dRe z dIm z.
  double measure_density(cplx z) const {
    const double r2 = std::norm(z);
    switch (kind) {
      case ChartKind::Plane: return 1.0 / pi;
      case ChartKind::Sphere: return (2.0 * spin() + 1.0) / pi / ((1.0 + r2) * (1.0 + r2));
      case ChartKind::Disk: return (2.0 * bargmann_index() - 1.0) / pi / ((1.0 - r2) * (1.0 - r2));
    }
    return 0.0;
  }

  /// μ(z)·r·dr/du: the radial weight of the measure in polar chart coordinates.
  double radial_weight(double u) const {
    switch (kind) {
      case ChartKind::Plane: return u / pi;
      case ChartKind::Sphere: return (2.0 * spin() + 1.0) / (4.0 * pi) * std::sin(u);
      case ChartKind::Disk: {
        const double d = 1.0 - u * u;
        return (2.0 * bargmann_index() - 1.0) / pi * u / (d * d);
      }
    }
    return 0.0;
  }

  /// |ζ| of the section for polar radius u.
  double section_modulus(double u) const {
    switch (kind) {
      case ChartKind::Plane: return u;
      case ChartKind::Sphere: return 0.5 * u;
      case ChartKind::Disk: return std::atanh(u);
    }
    return 0.0;
  }

  GroupPoint cross_section_polar(int r, double u, double phi) const {
    const cplx zeta = std::polar(section_modulus(u), phi);
    RealVector l = RealVector::Zero(r);
    l(x_index) = 2.0 * (zeta * cx).imag();
    l(y_index) = 2.0 * (zeta * cy).imag();
    return GroupPoint(l);
  }

  GroupPoint cross_section(int r, cplx z) const {
    if (!in_domain(z)) throw InvalidArgument("chart coordinate outside the chart domain");
    const auto [u, phi] = to_polar(z);
    return cross_section_polar(r, u, phi);
  }
};

namespace detail {

inline bool is_diagonal(const Matrix& M) {
  return linalg::max_abs(Matrix(M - Matrix(M.diagonal().asDiagonal()))) < 1e-14;
}

inline void finish_chart(CosetChart& chart, const Representation& rep, const FiducialSpec& fid,
                         const Matrix& rotation_op) {
  validate_fiducial(rep, fid);
  if (!is_diagonal(rotation_op)) throw InvalidArgument("rotation operator must be diagonal in the basis");
  chart.rotation_weights = rotation_op.diagonal().real();
  chart.weight0 = fid.state.dot(rotation_op * fid.state).real();
  const Vector w_phi = rotation_op * fid.state;
  if ((w_phi - chart.weight0 * fid.state).norm() > 1e-10)
    throw InvalidArgument("fiducial must be an eigenvector of the chart rotation generator");
  chart.raising = chart.cx * rep.generators[chart.x_index] + chart.cy * rep.generators[chart.y_index];
  if ((chart.raising.adjoint() * fid.state).norm() > 1e-10)
    throw InvalidArgument("fiducial must be annihilated by the chart lowering operator");
}

}  // namespace detail

/// z = α ∈ ℂ, section D(α) = exp(αa† − α*a); needs Q and P generators.
inline CosetChart make_plane_chart(const Representation& rep, const FiducialSpec& fid) {
  if (rep.lowering.size() != 1) throw InvalidArgument("plane chart needs a single-mode Fock representation");
  CosetChart chart;
  chart.kind = ChartKind::Plane;
  chart.x_index = rep.index_of("Q");
  chart.y_index = rep.index_of("P");
  chart.cx = 1.0 / std::sqrt(2.0);
  chart.cy = -I_unit / std::sqrt(2.0);
  for (int a = 0; a < rep.size(); ++a)
    if (rep.algebra.basis_names[a] == "N") chart.rotation_index = a;
  const Matrix number = rep.lowering[0].adjoint() * rep.lowering[0];
  detail::finish_chart(chart, rep, fid, number);
  return chart;
}

/// Stereographic coordinate from the lowest weight; needs Jx, Jy, Jz.
inline CosetChart make_sphere_chart(const Representation& rep, const FiducialSpec& fid) {
  CosetChart chart;
  chart.kind = ChartKind::Sphere;
  chart.x_index = rep.index_of("Jx");
  chart.y_index = rep.index_of("Jy");
  chart.cx = 1.0;
  chart.cy = I_unit;
  chart.rotation_index = rep.index_of("Jz");
  detail::finish_chart(chart, rep, fid, rep.generators[*chart.rotation_index]);
  return chart;
}

/// Poincaré disk |z| < 1 from the lowest weight; needs K1, K2, K0.
inline CosetChart make_disk_chart(const Representation& rep, const FiducialSpec& fid) {
  CosetChart chart;
  chart.kind = ChartKind::Disk;
  chart.x_index = rep.index_of("K1");
  chart.y_index = rep.index_of("K2");
  chart.cx = 1.0;
  chart.cy = I_unit;
  chart.rotation_index = rep.index_of("K0");
  detail::finish_chart(chart, rep, fid, rep.generators[*chart.rotation_index]);
  return chart;
}

inline CosetChart make_chart(ChartKind kind, const Representation& rep, const FiducialSpec& fid) {
  switch (kind) {
    case ChartKind::Plane: return make_plane_chart(rep, fid);
    case ChartKind::Sphere: return make_sphere_chart(rep, fid);
    case ChartKind::Disk: return make_disk_chart(rep, fid);
  }
  throw InvalidArgument("unknown chart kind");
}

// ---------------------------------------------------------------------------
// GCS states

struct GcsState {
  Vector state;
  double correction = 0.0;  // |1 − ‖ψ‖| removed by renormalization
  double tail_mass = 0.0;
};

inline GcsState gcs_state_polar(const Representation& rep, const CosetChart& chart, const FiducialSpec& fid,
                                double u, double phi) {
  const Matrix V = group_exp(rep, chart.cross_section_polar(rep.size(), u, phi));
  Vector psi = V * fid.state;
  GcsState out;
  out.tail_mass = rep.tail_mass(psi);
  if (out.tail_mass >= tail_mass_threshold)
    throw TruncationOverflow("GCS at chart radius " + std::to_string(u) + " is not representable (tail mass " +
                                 std::to_string(out.tail_mass) + ")",
                             out.tail_mass);
  const double norm = psi.norm();
  out.correction = std::abs(1.0 - norm);
  out.state = psi / norm;
  return out;
}

/// |Φ_z⟩ = V_{s(z)}|Φ₀⟩.
inline GcsState gcs_state(const Representation& rep, const CosetChart& chart, const FiducialSpec& fid, cplx z) {
  if (!chart.in_domain(z)) throw InvalidArgument("chart coordinate outside the chart domain");
  const auto [u, phi] = chart.to_polar(z);
  return gcs_state_polar(rep, chart, fid, u, phi);
}

inline Vector gcs_vector(const Representation& rep, const CosetChart& chart, const FiducialSpec& fid, cplx z) {
  return gcs_state(rep, chart, fid, z).state;
}

/// Repeated evaluation of |Φ_z⟩ from one eigendecomposition: the section
/// generator along φ = 0 is diagonalized once and the phase is restored with
/// the diagonal rotation operator.
class GcsEvaluator {
public:
  GcsEvaluator(const Representation& rep, const CosetChart& chart, const FiducialSpec& fid)
      : rep_(&rep), chart_(chart), fiducial_(fid.state) {
    const RealVector l = chart.cross_section_polar(rep.size(), 0.5, 0.0).params;
    const double unit = chart.section_modulus(0.5);
    Matrix X = Matrix::Zero(rep.dim, rep.dim);
    for (int a = 0; a < rep.size(); ++a)
      if (l(a) != 0.0) X += (l(a) / unit) * rep.generators[a];
    Eigen::SelfAdjointEigenSolver<Matrix> es(X);
    vectors_ = es.eigenvectors();
    values_ = es.eigenvalues();
    coeffs_ = vectors_.adjoint() * fid.state;
  }

  const CosetChart& chart() const { return chart_; }
  const Representation& representation() const { return *rep_; }
  const Vector& fiducial() const { return fiducial_; }

  GcsState polar(double u, double phi) const {
    const double s = chart_.section_modulus(u);
    Vector c = coeffs_;
    for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= std::polar(1.0, s * values_(k));
    Vector psi = vectors_ * c;
    if (phi != 0.0)
      for (Eigen::Index k = 0; k < psi.size(); ++k)
        psi(k) *= std::polar(1.0, phi * (chart_.rotation_weights(k) - chart_.weight0));
    GcsState out;
    out.tail_mass = rep_->tail_mass(psi);
    if (out.tail_mass >= tail_mass_threshold)
      throw TruncationOverflow("GCS at chart radius " + std::to_string(u) + " is not representable", out.tail_mass);
    const double norm = psi.norm();
    out.correction = std::abs(1.0 - norm);
    out.state = psi / norm;
    return out;
  }

  GcsState operator()(cplx z) const {
    if (!chart_.in_domain(z)) throw InvalidArgument("chart coordinate outside the chart domain");
    const auto [u, phi] = chart_.to_polar(z);
    return polar(u, phi);
  }

  Vector vector(cplx z) const { return (*this)(z).state; }

private:
  const Representation* rep_;
  CosetChart chart_;
  Vector fiducial_;
  Matrix vectors_;
  RealVector values_;
  Vector coeffs_;
};

/// Chart coordinate of a state assumed to lie on the GCS manifold, from the
/// ratio of its components along A†|Φ₀⟩ and |Φ₀⟩.
inline cplx coordinate_from_state(const CosetChart& chart, const FiducialSpec& fid, const Vector& psi) {
  const Vector raised = chart.raising * fid.state;
  const double c1 = raised.norm();
  const cplx c0 = fid.state.dot(psi);
  if (std::abs(c0) < 1e-300) throw InvalidArgument("state is orthogonal to the fiducial; no chart coordinate");
  return raised.dot(psi) / (c1 * c1) / c0;
}

/// Moment-based chart coordinate: exact for GCS, a seed otherwise.
inline cplx moment_coordinate(const Representation& rep, const CosetChart& chart, const Vector& psi) {
  const Matrix lowering = chart.raising.adjoint();
  const cplx mean_lower = psi.dot(lowering * psi);
  switch (chart.kind) {
    case ChartKind::Plane: return mean_lower;
    case ChartKind::Sphere: {
      const double wz = psi.dot(rep.generators[*chart.rotation_index] * psi).real();
      const double denom = -chart.weight0 - wz;
      return std::abs(denom) > 1e-300 ? mean_lower / denom : cplx(0.0);
    }
    case ChartKind::Disk: {
      const double w = psi.dot(rep.generators[*chart.rotation_index] * psi).real();
      const cplx z = mean_lower / (w + chart.weight0);
      return std::abs(z) < 1.0 ? z : z / (std::abs(z) * 1.0000001);
    }
  }
  return 0.0;
}

struct GroupActionResult {
  cplx z;
  double phase;
};

/// V_g|Φ_z⟩ = e^{if(g,z)}|Φ_{z'}⟩ with z' and f extracted numerically.
inline GroupActionResult group_action(const Representation& rep, const CosetChart& chart, const FiducialSpec& fid,
                                      const GroupPoint& g, cplx z) {
  const Vector psi = group_exp(rep, g) * gcs_vector(rep, chart, fid, z);
  const cplx zp = coordinate_from_state(chart, fid, psi);
  const Vector target = gcs_vector(rep, chart, fid, zp);
  return {zp, std::arg(target.dot(psi))};
}

// ---------------------------------------------------------------------------
// Quadrature over the chart, resolution of identity, POVM

struct QuadratureSpec {
  int radial_nodes = 120;
  int angular_nodes = 128;
  double u_min = 0.0;
  double u_max = 6.0;
};

inline QuadratureSpec default_quadrature(ChartKind kind) {
  switch (kind) {
    case ChartKind::Plane: return {120, 128, 0.0, 6.0};
    case ChartKind::Sphere: return {64, 64, 0.0, pi};
    case ChartKind::Disk: return {120, 64, 0.0, 0.9};
  }
  return {};
}

/// Rectangle in polar chart coordinates: u ∈ [u0, u1], φ ∈ [phi0, phi1) mod 2π.
struct PolarRegion {
  double u0 = 0.0, u1 = 0.0;
  double phi0 = 0.0, phi1 = 0.0;

  bool empty() const { return !(u1 > u0) || !(phi1 > phi0); }

  bool contains(double u, double phi) const {
    if (empty() || u < u0 || u > u1) return false;
    const double span = phi1 - phi0;
    if (span >= 2.0 * pi) return true;
    double d = std::fmod(phi - phi0, 2.0 * pi);
    if (d < 0) d += 2.0 * pi;
    return d < span;
  }

  PolarRegion rotated(double angle) const { return {u0, u1, phi0 + angle, phi1 + angle}; }
};

namespace detail {

inline double arc_overlap(double a0, double a1, double b0, double b1) {
  const double la = a1 - a0, lb = b1 - b0;
  if (la >= 2.0 * pi) return std::min(lb, 2.0 * pi);
  if (lb >= 2.0 * pi) return std::min(la, 2.0 * pi);
  double best = 0.0;
  double shift = std::fmod(b0 - a0, 2.0 * pi);
  if (shift < 0) shift += 2.0 * pi;
  for (double s : {shift - 2.0 * pi, shift}) {
    const double lo = std::max(0.0, s), hi = std::min(la, s + lb);
    best += std::max(0.0, hi - lo);
  }
  return best;
}

}  // namespace detail

inline bool regions_overlap(const PolarRegion& a, const PolarRegion& b) {
  if (a.empty() || b.empty()) return false;
  const double radial = std::min(a.u1, b.u1) - std::max(a.u0, b.u0);
  if (radial <= 1e-14) return false;
  return detail::arc_overlap(a.phi0, a.phi1, b.phi0, b.phi1) > 1e-12;
}

/// Equal angular sectors spanning the full radial range of the quadrature.
inline std::vector<PolarRegion> angular_sectors(int count, double u0, double u1, double offset = 0.0) {
  std::vector<PolarRegion> out;
  for (int s = 0; s < count; ++s)
    out.push_back({u0, u1, offset + 2.0 * pi * s / count, offset + 2.0 * pi * (s + 1) / count});
  return out;
}

/// Quadrature nodes with their GCS columns; rejected nodes are accounted for.
struct QuadratureGrid {
  QuadratureSpec spec;
  std::vector<double> u, phi, weight;
  Matrix states;  // one column per accepted node
  double rejected_weight = 0.0;
  double total_weight = 0.0;
  int rejected_nodes = 0;
  double max_correction = 0.0;

  double coverage_loss() const { return total_weight > 0.0 ? rejected_weight / total_weight : 0.0; }

  std::size_t size() const { return weight.size(); }

  Matrix operator_over(const std::vector<std::size_t>& idx) const {
    const Eigen::Index n = states.rows();
    Matrix sel(n, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c)
      sel.col(static_cast<Eigen::Index>(c)) = states.col(static_cast<Eigen::Index>(idx[c])) * std::sqrt(weight[idx[c]]);
    return sel * sel.adjoint();
  }

  Matrix total() const {
    std::vector<std::size_t> all(size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return operator_over(all);
  }

  Matrix region_operator(const PolarRegion& region) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < size(); ++i)
      if (region.contains(u[i], phi[i])) idx.push_back(i);
    if (idx.empty()) return Matrix::Zero(states.rows(), states.rows());
    return operator_over(idx);
  }
};

/// States at (u, 0) come from the cross-section; the angular copies use
/// |Φ_{z e^{iφ}}⟩ = e^{iφ(W − w₀)}|Φ_z⟩, exact because [W, A†] = A†.
inline QuadratureGrid assemble_grid(const Representation& rep, const CosetChart& chart, const FiducialSpec& fid,
                                    const QuadratureSpec& spec) {
  if (spec.radial_nodes < 1 || spec.angular_nodes < 1) throw InvalidArgument("quadrature needs nodes");
  if (!(spec.u_max > spec.u_min) || spec.u_min < 0.0) throw InvalidArgument("invalid quadrature radial range");
  if (chart.kind == ChartKind::Disk && spec.u_max >= 1.0)
    throw InvalidArgument("disk quadrature must stop before |z| = 1");
  if (chart.kind == ChartKind::Sphere && spec.u_max > pi + 1e-12)
    throw InvalidArgument("sphere quadrature polar angle exceeds pi");
  QuadratureGrid grid;
  grid.spec = spec;
  const Rule1D radial = gauss_legendre(spec.radial_nodes, spec.u_min, spec.u_max);
  const Rule1D angular = periodic_midpoint(spec.angular_nodes);
  std::vector<Vector> columns;
  for (int i = 0; i < spec.radial_nodes; ++i) {
    const double u = radial.nodes[i];
    const double wr = radial.weights[i] * chart.radial_weight(u);
    std::optional<GcsState> base;
    try {
      base = gcs_state_polar(rep, chart, fid, u, 0.0);
    } catch (const TruncationOverflow&) {
      base.reset();
    }
    for (int j = 0; j < spec.angular_nodes; ++j) {
      const double w = wr * angular.weights[j];
      grid.total_weight += w;
      if (!base) {
        grid.rejected_weight += w;
        ++grid.rejected_nodes;
        continue;
      }
      const double phi = angular.nodes[j];
      Vector col = base->state;
      for (Eigen::Index k = 0; k < col.size(); ++k)
        col(k) *= std::polar(1.0, phi * (chart.rotation_weights(k) - chart.weight0));
      columns.push_back(std::move(col));
      grid.u.push_back(u);
      grid.phi.push_back(phi);
      grid.weight.push_back(w);
    }
    if (base) grid.max_correction = std::max(grid.max_correction, base->correction);
  }
  grid.states.resize(rep.dim, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) grid.states.col(static_cast<Eigen::Index>(c)) = columns[c];
  return grid;
}

namespace detail {

inline std::vector<Eigen::Index> subspace_indices(const Representation& rep, std::optional<Eigen::Index> first) {
  if (first) {
    if (*first < 1 || *first > rep.dim) throw InvalidArgument("subspace dimension out of range");
    return prefix_indices(*first);
  }
  return rep.reliable;
}

inline Matrix restrict_to(const Matrix& M, const std::vector<Eigen::Index>& idx) { return M(idx, idx); }

/// Spread between the quadrature and its half-resolution radial and angular
/// variants, with a round-off floor.
inline double quadrature_error_estimate(const Representation& rep, const CosetChart& chart, const FiducialSpec& fid,
                                        const QuadratureGrid& grid, const Matrix& fine,
                                        const std::vector<Eigen::Index>& idx) {
  const QuadratureSpec& spec = grid.spec;
  double est = 0.0;
  if (spec.radial_nodes >= 2) {
    QuadratureSpec coarse = spec;
    coarse.radial_nodes = spec.radial_nodes / 2;
    const QuadratureGrid g2 = assemble_grid(rep, chart, fid, coarse);
    est = std::max(est, linalg::op_norm(restrict_to(Matrix(fine - g2.total()), idx)));
  }
  if (spec.angular_nodes >= 2) {
    QuadratureSpec coarse = spec;
    coarse.angular_nodes = spec.angular_nodes / 2;
    const QuadratureGrid g2 = assemble_grid(rep, chart, fid, coarse);
    est = std::max(est, linalg::op_norm(restrict_to(Matrix(fine - g2.total()), idx)));
  }
  const double floor = 1e-13 * std::max(1.0, linalg::op_norm(restrict_to(fine, idx)));
  return std::max(est, floor);
}

}  // namespace detail

struct IdentityReport {
  double deviation = 0.0;          // ‖P(M_tot − 1)P‖₂
  double per_element_max = 0.0;    // max |(M_tot − 1)_ij| on P
  double quad_error_bound = 0.0;
  double coverage_loss = 0.0;
  int rejected_nodes = 0;
  int total_nodes = 0;
  Eigen::Index subspace_dim = 0;
  double max_correction = 0.0;
  RealVector diagonal_deficit;     // 1 − ⟨k|M_tot|k⟩ for k in the subspace
  Matrix total;                    // M_tot on the full space
};

/// M_tot = Σ_i w_i μ(z_i)|Φ_{z_i}⟩⟨Φ_{z_i}| compared with the identity.
inline IdentityReport resolution_of_identity(const Representation& rep, const CosetChart& chart,
                                             const FiducialSpec& fid, const QuadratureSpec& quad,
                                             std::optional<Eigen::Index> subspace_dim = std::nullopt) {
  const auto idx = detail::subspace_indices(rep, subspace_dim);
  const QuadratureGrid grid = assemble_grid(rep, chart, fid, quad);
  IdentityReport report;
  report.total = grid.total();
  const Matrix diff = detail::restrict_to(report.total, idx) -
                      Matrix::Identity(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
  report.deviation = linalg::op_norm(diff);
  report.per_element_max = linalg::max_abs(diff);
  report.diagonal_deficit = -diff.diagonal().real();
  report.quad_error_bound = detail::quadrature_error_estimate(rep, chart, fid, grid, report.total, idx);
  report.coverage_loss = grid.coverage_loss();
  report.rejected_nodes = grid.rejected_nodes;
  report.total_nodes = quad.radial_nodes * quad.angular_nodes;
  report.subspace_dim = static_cast<Eigen::Index>(idx.size());
  report.max_correction = grid.max_correction;
  return report;
}

struct PovmCell {
  PolarRegion region;
  Matrix effect;
};

struct Povm {
  std::vector<PovmCell> cells;
  QuadratureSpec quadrature;
  Matrix total;
  double quad_error_bound = 0.0;
  double coverage_loss = 0.0;
};

inline void validate_partition(const std::vector<PolarRegion>& partition) {
  for (std::size_t i = 0; i < partition.size(); ++i)
    for (std::size_t j = i + 1; j < partition.size(); ++j)
      if (regions_overlap(partition[i], partition[j]))
        throw PartitionError("partition regions " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
}

/// M(Δ) = ∫_Δ μ(dx)|Φ_x⟩⟨Φ_x| for each region of a disjoint partition.
inline Povm build_povm(const Representation& rep, const CosetChart& chart, const FiducialSpec& fid,
                       const std::vector<PolarRegion>& partition, const QuadratureSpec& quad) {
  validate_partition(partition);
  const QuadratureGrid grid = assemble_grid(rep, chart, fid, quad);
  Povm povm;
  povm.quadrature = quad;
  povm.total = grid.total();
  povm.coverage_loss = grid.coverage_loss();
  povm.quad_error_bound = detail::quadrature_error_estimate(rep, chart, fid, grid, povm.total, rep.reliable);
  for (const auto& region : partition) povm.cells.push_back({region, grid.region_operator(region)});
  return povm;
}

struct MeasurementResult {
  std::vector<double> probabilities;
  double total = 0.0;
  double quad_error_bound = 0.0;
};

inline void validate_density_matrix(const Representation& rep, const Matrix& rho) {
  if (rho.rows() != rep.dim || rho.cols() != rep.dim) throw InvalidArgument("density matrix has wrong dimension");
  if (linalg::hermiticity_residual(rho) > 1e-10) throw InvalidArgument("density matrix is not Hermitian");
  const double tr = rho.trace().real();
  if (std::abs(tr - 1.0) > 1e-10) throw InvalidArgument("density matrix trace " + std::to_string(tr) + " != 1");
  const double lmin = linalg::min_eigenvalue(Matrix(0.5 * (rho + rho.adjoint())));
  if (lmin < -1e-10) throw InvalidArgument("density matrix has negative eigenvalue " + std::to_string(lmin));
  if (rep.truncated) {
    const double inside = rep.compress(rho).trace().real();
    if (tr - inside > tail_mass_threshold)
      throw TruncationOverflow("density matrix has weight outside the reliable subspace", tr - inside);
  }
}

/// p_Δ = tr(ρ M(Δ)).
inline MeasurementResult measurement_distribution(const Representation& rep, const Matrix& rho, const Povm& povm) {
  validate_density_matrix(rep, rho);
  MeasurementResult out;
  for (const auto& cell : povm.cells) {
    const double p = (rho * cell.effect).trace().real();
    out.probabilities.push_back(p);
  }
  for (double p : out.probabilities) out.total += p;
  out.quad_error_bound = povm.quad_error_bound;
  return out;
}

inline Matrix pure_density(const Vector& psi) { return psi * psi.adjoint(); }

struct CovarianceReport {
  std::vector<double> per_cell;
  double deviation = 0.0;
  double quad_error_bound = 0.0;
  double rotation_angle = 0.0;
};

/// Rotation angle of g about the chart center, if g lies in the rotation
/// subgroup (possibly times a central phase); nullopt otherwise.
inline std::optional<double> rotation_angle(const Representation& rep, const CosetChart& chart, const GroupPoint& g) {
  double angle = 0.0;
  for (int a = 0; a < rep.size(); ++a) {
    if (g.params(a) == 0.0) continue;
    if (chart.rotation_index && a == *chart.rotation_index) {
      angle = g.params(a);
    } else if (rep.algebra.identity_index && a == *rep.algebra.identity_index) {
      continue;
    } else {
      return std::nullopt;
    }
  }
  return angle;
}

/// max over Δ of ‖V_g† M(Δ) V_g − M(g⁻¹Δ)‖₂ on the reliable subspace.
/// g must be a rotation by a multiple of the angular grid step.
inline CovarianceReport covariance_check(const Representation& rep, const CosetChart& chart, const FiducialSpec& fid,
                                         const GroupPoint& g, const std::vector<PolarRegion>& partition,
                                         const QuadratureSpec& quad) {
  if (g.params.size() != rep.size()) throw InvalidArgument("group point has wrong number of parameters");
  const auto angle = rotation_angle(rep, chart, g);
  if (!angle) throw PartitionError("group element does not act by rotations; g^-1 of a polar region is not a polar region");
  const double step = 2.0 * pi / quad.angular_nodes;
  const double ratio = *angle / step;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw PartitionError("rotation angle is not a multiple of the angular quadrature step");
  validate_partition(partition);
  const QuadratureGrid grid = assemble_grid(rep, chart, fid, quad);
  const Matrix V = group_exp(rep, g);
  CovarianceReport report;
  report.rotation_angle = *angle;
  for (const auto& region : partition) {
    const Matrix M = grid.region_operator(region);
    const Matrix lhs = V.adjoint() * M * V;
    const Matrix rhs = grid.region_operator(region.rotated(-*angle));
    const double dev = linalg::op_norm(rep.compress(Matrix(lhs - rhs)));
    report.per_cell.push_back(dev);
    report.deviation = std::max(report.deviation, dev);
  }
  report.quad_error_bound = detail::quadrature_error_estimate(rep, chart, fid, grid, grid.total(), rep.reliable);
  return report;
}

}  // namespace gcs
