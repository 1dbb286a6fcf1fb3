#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "gcs/scenario.hpp"

namespace gcs::cli {

inline constexpr int exit_pass = 0;
inline constexpr int exit_input_error = 1;
inline constexpr int exit_quantitative_failure = 2;

// ---------------------------------------------------------------------------
// CSV

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) out += (i ? "," : "") + table.header[i];
  out += '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw Error("CSV row width does not match the header");
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_number(row[i]);
    out += '\n';
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ScenarioError("cannot write '" + path.string() + "'");
  f << content;
  if (!f) throw ScenarioError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Command plumbing

namespace detail {

inline Json matrix_json(const RealMatrix& M) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Json vector_json(const RealVector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

template <class T>
Json list_json(const std::vector<T>& v) {
  Json out = Json::array();
  for (const auto& x : v) out.push_back(x);
  return out;
}

inline Json quadrature_json(const QuadratureSpec& q) {
  return {{"radial_nodes", q.radial_nodes}, {"angular_nodes", q.angular_nodes}, {"u_min", q.u_min}, {"u_max", q.u_max}};
}

inline std::vector<int> generator_indices(const Representation& rep, const std::vector<std::string>& names) {
  std::vector<int> idx;
  for (const auto& n : names) {
    const int a = rep.index_of(n);
    if (std::find(idx.begin(), idx.end(), a) != idx.end()) throw ScenarioError("generator '" + n + "' listed twice");
    idx.push_back(a);
  }
  return idx;
}

}  // namespace detail

struct Context {
  Scenario scenario;
  Representation rep;
  FiducialSpec fid;
  HamiltonianSpec H;

  CosetChart chart() const { return make_chart(scenario.chart, rep, fid); }
  const Numerics& numerics() const { return scenario.numerics; }
  std::vector<double> grid() const { return time_grid(scenario.numerics); }
  const Json& task() const { return scenario.task; }
};

struct Outcome {
  bool passed = false;
  std::string headline;
  Json numerics = Json::object();
  Json budget = Json::object();
  Json results = Json::object();
  std::optional<Table> csv;
};

using Command = void (*)(const Context&, Outcome&);

namespace commands {

using gcs::cli::detail::list_json;
using gcs::cli::detail::matrix_json;
using gcs::cli::detail::vector_json;

inline void rep_check(const Context& c, Outcome& o) {
  gcs::cli::detail::allow_keys(c.task(), "task", {});
  const double tol = c.numerics().tolerance.value_or(c.rep.truncated ? 1e-10 : 1e-13);
  o.numerics = {{"tolerance", tol}};
  o.budget = {{"max_residual", tol}, {"max_hermiticity", tol}};
  const auto v = check_structure(c.rep, tol);
  o.passed = v.passed;
  o.results["dimension"] = c.rep.dim;
  o.results["reliable_dimension"] = c.rep.reliable.size();
  o.results["truncated"] = c.rep.truncated;
  o.results["basis"] = c.rep.algebra.basis_names;
  o.results["max_residual"] = v.max_residual;
  o.results["max_hermiticity"] = v.max_hermiticity;
  o.results["jacobi_residual"] = c.rep.algebra.jacobi_residual();
  o.results["worst_pair"] = v.worst_a >= 0 ? Json::array({c.rep.algebra.basis_names[v.worst_a],
                                                          c.rep.algebra.basis_names[v.worst_b]})
                                           : Json(nullptr);
  o.results["residuals"] = matrix_json(v.residuals);
  char buf[96];
  std::snprintf(buf, sizeof buf, "max commutator residual %.3e (tolerance %.1e)", v.max_residual, tol);
  o.headline = buf;
}

inline void identity(const Context& c, Outcome& o) {
  using namespace gcs::cli::detail;
  allow_keys(c.task(), "task", {"deficit_csv"});
  const bool csv = c.task().contains("deficit_csv") ? boolean(c.task()["deficit_csv"], "task.deficit_csv") : true;
  const double tol = c.numerics().tolerance.value_or(c.scenario.chart == ChartKind::Sphere ? 1e-12 : 1e-8);
  std::optional<Eigen::Index> sub;
  if (c.numerics().subspace_dim) sub = *c.numerics().subspace_dim;
  o.numerics = {{"quadrature", quadrature_json(c.numerics().quadrature)},
                {"subspace_dim", sub ? Json(*sub) : Json("reliable")},
                {"tolerance", tol}};
  o.budget = {{"deviation", tol}};
  const auto r = resolution_of_identity(c.rep, c.chart(), c.fid, c.numerics().quadrature, sub);
  o.passed = r.deviation <= tol;
  o.numerics["subspace_dim"] = r.subspace_dim;
  o.budget["quad_error_bound"] = r.quad_error_bound;
  o.results["deviation"] = r.deviation;
  o.results["per_element_max"] = r.per_element_max;
  o.results["per_cell"] = vector_json(r.diagonal_deficit);
  o.results["quad_error_bound"] = r.quad_error_bound;
  o.results["coverage_loss"] = r.coverage_loss;
  o.results["rejected_nodes"] = r.rejected_nodes;
  o.results["total_nodes"] = r.total_nodes;
  o.results["max_correction"] = r.max_correction;
  if (csv) {
    Table t{{"k", "deficit"}, {}};
    for (Eigen::Index k = 0; k < r.diagonal_deficit.size(); ++k)
      t.rows.push_back({static_cast<double>(k), r.diagonal_deficit(k)});
    o.csv = std::move(t);
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "identity deviation %.3e (tolerance %.1e)", r.deviation, tol);
  o.headline = buf;
}

inline void evolve_cmd(const Context& c, Outcome& o) {
  using namespace gcs::cli::detail;
  allow_keys(c.task(), "task", {"observables"});
  std::vector<std::string> names = c.rep.algebra.basis_names;
  if (c.task().contains("observables")) names = string_list(c.task()["observables"], "task.observables");
  std::vector<Matrix> ops;
  std::vector<bool> hermitian;
  for (const auto& n : names) {
    ops.push_back(named_operator(c.rep, n));
    hermitian.push_back((ops.back() - ops.back().adjoint()).cwiseAbs().maxCoeff() < 1e-12);
  }
  const double tol = c.numerics().tolerance.value_or(1e-10);
  o.numerics = {{"dt", c.numerics().dt}, {"t_max", c.numerics().t_max}, {"samples", c.numerics().samples},
                {"tolerance", tol}};
  o.budget = {{"max_norm_defect", tol}, {"tail_mass_threshold", tail_mass_threshold}};
  const auto grid = c.grid();
  const Vector psi0 = gcs_vector(c.rep, c.chart(), c.fid, c.scenario.z0);
  const auto traj = evolve(c.rep, c.H, psi0, grid, c.numerics().dt);

  Table t;
  t.header.push_back("t");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (hermitian[i]) {
      t.header.push_back(names[i]);
    } else {
      t.header.push_back("re(" + names[i] + ")");
      t.header.push_back("im(" + names[i] + ")");
    }
  }
  t.header.push_back("norm");
  Json final_values = Json::object();
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const Vector& psi = traj.states[k];
    std::vector<double> row{traj.times[k]};
    for (std::size_t i = 0; i < ops.size(); ++i) {
      const cplx e = psi.dot(ops[i] * psi);
      row.push_back(e.real());
      if (!hermitian[i]) row.push_back(e.imag());
      if (k + 1 == traj.times.size())
        final_values[names[i]] = hermitian[i] ? Json(e.real()) : complex_json(e);
    }
    row.push_back(psi.norm());
    t.rows.push_back(std::move(row));
  }
  o.passed = traj.max_norm_defect <= tol;
  o.results["stepper"] = {{"method", traj.meta.method}, {"dt", traj.meta.dt}, {"max_step", traj.meta.max_step},
                          {"steps", traj.meta.steps}, {"local_error", traj.meta.local_error}};
  o.results["max_norm_defect"] = traj.max_norm_defect;
  o.results["max_tail_mass"] = traj.max_tail_mass;
  o.results["final_expectations"] = final_values;
  o.csv = std::move(t);
  char buf[96];
  std::snprintf(buf, sizeof buf, "max norm defect %.3e over %ld steps", traj.max_norm_defect, traj.meta.steps);
  o.headline = buf;
}

inline void stability(const Context& c, Outcome& o) {
  using namespace gcs::cli::detail;
  allow_keys(c.task(), "task", {"superstability"});
  const double tol = c.numerics().tolerance.value_or(1e-8);
  o.numerics = {{"dt", c.numerics().dt}, {"t_max", c.numerics().t_max}, {"samples", c.numerics().samples},
                {"tolerance", tol}};
  o.budget = {{"fidelity_floor", 1.0 - tol}};
  const auto grid = c.grid();
  const auto malkin = malkin_classify(c.rep, c.H, gcs::detail::hermiticity_samples(grid));
  const auto st = stability_test(c.rep, c.chart(), c.fid, c.H, c.scenario.z0, grid, c.numerics().dt, tol);
  o.passed = st.stable;
  o.numerics["malkin_tolerance"] = malkin.tolerance;
  o.results["malkin"] = {{"classification", to_string(malkin.classification)},
                         {"max_residual", malkin.max_residual}};
  o.results["stable"] = st.stable;
  o.results["min_fidelity"] = st.min_fidelity;
  o.results["fidelity"] = list_json(st.fidelity);
  if (c.task().contains("superstability")) {
    const Json& sj = c.task()["superstability"];
    allow_keys(sj, "task.superstability", {"subset"});
    if (!sj.contains("subset")) throw ScenarioError("task.superstability.subset is required");
    const auto subset = generator_indices(c.rep, string_list(sj["subset"], "task.superstability.subset"));
    std::optional<Eigen::Index> probe;
    if (c.numerics().probe_dim) probe = *c.numerics().probe_dim;
    const auto ss = superstability_check(c.rep, c.H, c.fid, subset, grid, c.numerics().dt, tol, probe);
    o.passed = o.passed && ss.fiducial_stable && ss.automorphism;
    o.numerics["probe_dim"] = probe ? Json(*probe) : Json(nullptr);
    o.budget["fiducial_residual"] = tol;
    o.budget["automorphism_residual"] = tol;
    Json maps = Json::array();
    for (const auto& m : ss.parameter_maps) maps.push_back(matrix_json(m));
    o.results["superstability"] = {{"fiducial_stable", ss.fiducial_stable},
                                   {"automorphism", ss.automorphism},
                                   {"fiducial_residual", ss.fiducial_residual},
                                   {"automorphism_residual", ss.automorphism_residual},
                                   {"parameter_maps", maps}};
  }
  Table t{{"t", "fidelity", "re_z", "im_z"}, {}};
  for (std::size_t k = 0; k < st.times.size(); ++k)
    t.rows.push_back({st.times[k], st.fidelity[k], st.z[k].real(), st.z[k].imag()});
  o.csv = std::move(t);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s, min nearest-GCS fidelity %.12f", to_string(malkin.classification),
                st.min_fidelity);
  o.headline = buf;
}

inline void classical_birkhoff(const Context& c, Outcome& o, double h, double tol) {
  using namespace gcs::cli::detail;
  const auto data = make_birkhoff_data(c.rep, c.fid);
  const int r = c.rep.size();
  RealVector l0 = RealVector::Zero(r);
  if (c.task().contains("l0")) {
    const auto v = number_list(c.task()["l0"], "task.l0");
    if (static_cast<int>(v.size()) != r) throw ScenarioError("task.l0 needs " + std::to_string(r) + " entries");
    for (int a = 0; a < r; ++a) l0(a) = v[static_cast<std::size_t>(a)];
  }
  std::vector<int> active;
  if (c.task().contains("active")) active = generator_indices(c.rep, string_list(c.task()["active"], "task.active"));
  const auto om = omega_matrix(data, l0, h);
  o.results["omega"] = {{"matrix", matrix_json(om.omega)},
                        {"rank", om.rank},
                        {"singular_values", vector_json(om.singular_values)},
                        {"condition", std::isfinite(om.condition) ? Json(om.condition) : Json("inf")},
                        {"antisymmetry", om.antisymmetry}};
  o.results["r_vector"] = vector_json(r_vector(data, l0));
  const auto grad = hamiltonian_gradient(c.rep, c.fid, c.H, active, h);
  const VelocityField rhs = [&](double t, const RealVector& l) { return birkhoff_rhs(data, grad, l, t, active, h); };
  const auto traj = integrate_classical(rhs, l0, c.grid(), c.numerics().dt);
  Table t;
  t.header.push_back("t");
  for (const auto& n : c.rep.algebra.basis_names) t.header.push_back("l_" + n);
  t.header.push_back("H");
  std::vector<double> energy;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    energy.push_back(classical_hamiltonian(c.rep, c.fid, c.H, traj.points[k], traj.times[k]));
    std::vector<double> row{traj.times[k]};
    for (int a = 0; a < r; ++a) row.push_back(traj.points[k](a));
    row.push_back(energy.back());
    t.rows.push_back(std::move(row));
  }
  double drift = 0.0;
  for (double e : energy) drift = std::max(drift, std::abs(e - energy.front()));
  const bool conserved = c.H.time_independent();
  o.passed = !conserved || drift <= tol;
  o.results["energy_drift"] = drift;
  o.results["energy_check"] = conserved ? "applied" : "skipped: time-dependent Hamiltonian";
  o.results["final_point"] = vector_json(traj.points.back());
  o.results["steps"] = traj.steps;
  o.csv = std::move(t);
  char buf[96];
  std::snprintf(buf, sizeof buf, "Birkhoff route, Omega rank %d, energy drift %.3e", om.rank, drift);
  o.headline = buf;
}

inline void classical_kahler(const Context& c, Outcome& o, double h, double tol) {
  const GcsEvaluator family(c.rep, c.chart(), c.fid);
  const auto metric = kahler_metric(family, c.scenario.z0, h);
  const auto traj = integrate_coset(c.rep, family, c.H, c.scenario.z0, c.grid(), c.numerics().dt, h);
  o.results["metric"] = {{"f", metric.f}, {"g", metric.g(0, 0).real()}, {"g_inv", metric.g_inv(0, 0).real()}};
  Table t{{"t", "re_z", "im_z", "H"}, {}};
  std::vector<double> energy;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const cplx z = to_complex(traj.points[k]);
    energy.push_back(classical_hamiltonian(family, c.H.assemble(c.rep, traj.times[k]), z));
    t.rows.push_back({traj.times[k], z.real(), z.imag(), energy.back()});
  }
  double drift = 0.0;
  for (double e : energy) drift = std::max(drift, std::abs(e - energy.front()));
  const bool conserved = c.H.time_independent();
  o.passed = !conserved || drift <= tol;
  o.results["energy_drift"] = drift;
  o.results["energy_check"] = conserved ? "applied" : "skipped: time-dependent Hamiltonian";
  o.results["final_z"] = gcs::cli::detail::complex_json(to_complex(traj.points.back()));
  o.results["steps"] = traj.steps;
  o.csv = std::move(t);
  char buf[96];
  std::snprintf(buf, sizeof buf, "Kahler route, energy drift %.3e", drift);
  o.headline = buf;
}

inline void classical(const Context& c, Outcome& o) {
  using namespace gcs::cli::detail;
  allow_keys(c.task(), "task", {"route", "l0", "active"});
  const std::string route =
      c.task().contains("route") ? one_of(c.task()["route"], "task.route", {"birkhoff", "kahler"}) : "birkhoff";
  if (route == "kahler" && (c.task().contains("l0") || c.task().contains("active")))
    throw ScenarioError("task.l0 and task.active apply only to the birkhoff route");
  const double h = c.numerics().fd_step.value_or(route == "birkhoff" ? 1e-5 : 1e-4);
  const double tol = c.numerics().tolerance.value_or(1e-7);
  o.numerics = {{"route", route},         {"dt", c.numerics().dt}, {"t_max", c.numerics().t_max},
                {"samples", c.numerics().samples}, {"fd_step", h},      {"tolerance", tol}};
  o.budget = {{"energy_drift", tol}};
  if (route == "birkhoff")
    classical_birkhoff(c, o, h, tol);
  else
    classical_kahler(c, o, h, tol);
}

inline void compare(const Context& c, Outcome& o) {
  gcs::cli::detail::allow_keys(c.task(), "task", {});
  const double tol = c.numerics().tolerance.value_or(1e-5);
  const double h = c.numerics().fd_step.value_or(1e-4);
  o.numerics = {{"dt", c.numerics().dt}, {"t_max", c.numerics().t_max}, {"samples", c.numerics().samples},
                {"fd_step", h}, {"tolerance", tol}};
  o.budget = {{"fidelity_floor", 1.0 - tol}};
  const auto r = compare_quantum_classical(c.rep, c.chart(), c.fid, c.H, c.scenario.z0, c.grid(), c.numerics().dt,
                                           tol, h);
  o.passed = r.passed;
  o.budget["quantum_step_error"] = r.quantum_step_error;
  o.budget["classical_step_error"] = r.classical_step_error;
  o.budget["optimizer_tolerance"] = r.optimizer_tolerance;
  o.results["malkin"] = to_string(r.malkin);
  o.results["regime"] = r.regime;
  o.results["min_fidelity"] = r.min_fidelity;
  o.results["max_discrepancy"] = r.max_discrepancy;
  Table t{{"t", "fidelity", "discrepancy", "re_z_cl", "im_z_cl", "re_z_qm", "im_z_qm"}, {}};
  for (std::size_t k = 0; k < r.times.size(); ++k)
    t.rows.push_back({r.times[k], r.fidelity[k], r.discrepancy[k], r.z_classical[k].real(), r.z_classical[k].imag(),
                      r.z_quantum[k].real(), r.z_quantum[k].imag()});
  o.csv = std::move(t);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s regime, min fidelity %.12f, max |z_cl - z_qm| %.3e", r.regime.c_str(),
                r.min_fidelity, r.max_discrepancy);
  o.headline = buf;
}

inline void povm(const Context& c, Outcome& o) {
  using namespace gcs::cli::detail;
  allow_keys(c.task(), "task", {"sectors", "u_range", "offset", "group_point", "translate_t"});
  const auto& quad = c.numerics().quadrature;
  const int sectors = c.task().contains("sectors") ? integer(c.task()["sectors"], "task.sectors") : 8;
  if (sectors < 1) throw ScenarioError("task.sectors must be positive");
  double u0 = quad.u_min, u1 = quad.u_max;
  if (c.task().contains("u_range")) {
    const auto v = number_list(c.task()["u_range"], "task.u_range");
    if (v.size() != 2 || !(v[1] > v[0]) || v[0] < 0.0) throw ScenarioError("task.u_range must be [u0, u1], 0 <= u0 < u1");
    u0 = v[0];
    u1 = v[1];
  }
  const double offset = c.task().contains("offset") ? number(c.task()["offset"], "task.offset") : 0.0;
  RealVector g = RealVector::Zero(c.rep.size());
  if (c.task().contains("group_point")) {
    const auto v = number_list(c.task()["group_point"], "task.group_point");
    if (static_cast<int>(v.size()) != c.rep.size())
      throw ScenarioError("task.group_point needs " + std::to_string(c.rep.size()) + " entries");
    for (int a = 0; a < c.rep.size(); ++a) g(a) = v[static_cast<std::size_t>(a)];
  }
  std::optional<double> translate_t;
  if (c.task().contains("translate_t")) {
    translate_t = number(c.task()["translate_t"], "task.translate_t");
    if (*translate_t < 0.0) throw ScenarioError("task.translate_t must be non-negative");
  }

  o.numerics = {{"quadrature", quadrature_json(quad)}, {"sectors", sectors}, {"u_range", Json::array({u0, u1})},
                {"offset", offset}, {"dt", c.numerics().dt}};
  if (translate_t) {
    o.numerics["translate_t"] = *translate_t;
    o.numerics["fd_step"] = c.numerics().fd_step.value_or(1e-4);
  }
  const auto chart = c.chart();
  const auto partition = angular_sectors(sectors, u0, u1, offset);
  const auto P = build_povm(c.rep, chart, c.fid, partition, quad);
  const Matrix rho = pure_density(gcs_vector(c.rep, chart, c.fid, c.scenario.z0));
  const auto meas = measurement_distribution(c.rep, rho, P);
  const auto cov = covariance_check(c.rep, chart, c.fid, GroupPoint(g), partition, quad);
  const double cov_budget = cov.quad_error_bound + 1e-14;

  o.passed = cov.deviation <= cov_budget;
  o.budget = {{"covariance", cov_budget}};
  o.results["probabilities"] = list_json(meas.probabilities);
  o.results["total"] = meas.total;
  o.results["quad_error_bound"] = meas.quad_error_bound;
  o.results["coverage_loss"] = P.coverage_loss;
  o.results["covariance"] = {{"per_cell", list_json(cov.per_cell)},
                             {"deviation", cov.deviation},
                             {"quad_error_bound", cov.quad_error_bound},
                             {"rotation_angle", cov.rotation_angle}};
  Table t{{"cell", "u0", "u1", "phi0", "phi1", "probability"}, {}};
  std::optional<TranslationReport> tr;
  if (translate_t) {
    const double h = c.numerics().fd_step.value_or(1e-4);
    tr = translated_distribution_check(c.rep, chart, c.fid, rho, c.H, partition, quad, *translate_t,
                                       c.numerics().dt, h);
    o.passed = o.passed && tr->within_budget;
    o.budget["translation"] = {{"total", tr->budget},
                               {"quad_error_bound", tr->quad_error_bound},
                               {"anchor_error", tr->anchor_error}};
    o.results["translation"] = {{"evolved", list_json(tr->evolved)},
                                {"translated", list_json(tr->translated)},
                                {"max_difference", tr->max_difference},
                                {"within_budget", tr->within_budget},
                                {"nodes_outside", tr->nodes_outside}};
    t.header.push_back("evolved");
    t.header.push_back("translated");
  }
  for (std::size_t k = 0; k < partition.size(); ++k) {
    std::vector<double> row{static_cast<double>(k), partition[k].u0, partition[k].u1, partition[k].phi0,
                            partition[k].phi1, meas.probabilities[k]};
    if (tr) {
      row.push_back(tr->evolved[k]);
      row.push_back(tr->translated[k]);
    }
    t.rows.push_back(std::move(row));
  }
  o.csv = std::move(t);
  char buf[160];
  if (tr)
    std::snprintf(buf, sizeof buf, "covariance deviation %.3e, translation difference %.3e (budget %.3e)",
                  cov.deviation, tr->max_difference, tr->budget);
  else
    std::snprintf(buf, sizeof buf, "covariance deviation %.3e (budget %.3e)", cov.deviation, cov_budget);
  o.headline = buf;
}

}  // namespace commands

inline const std::map<std::string, Command>& command_table() {
  static const std::map<std::string, Command> table = {
      {"rep-check", commands::rep_check}, {"identity", commands::identity},   {"evolve", commands::evolve_cmd},
      {"stability", commands::stability}, {"classical", commands::classical}, {"compare", commands::compare},
      {"povm", commands::povm}};
  return table;
}

/// Structured record of a numerical failure raised while running a command.
inline Json error_json(const Error& e) {
  Json j = {{"message", e.what()}};
  if (const auto* d = dynamic_cast<const DegenerateForm*>(&e)) {
    j["type"] = "DegenerateForm";
    j["rank"] = d->rank;
    j["null_directions"] = detail::matrix_json(d->null_directions);
  } else if (const auto* x = dynamic_cast<const DomainExit*>(&e)) {
    j["type"] = "DomainExit";
    j["time"] = x->time;
  } else if (const auto* t = dynamic_cast<const TruncationOverflow*>(&e)) {
    j["type"] = "TruncationOverflow";
    j["tail_mass"] = t->tail_mass;
  } else {
    j["type"] = "Error";
  }
  return j;
}

struct RunResult {
  int exit_code = exit_input_error;
  Json report;
  std::string csv;
};

/// Runs one command on a parsed scenario and assembles its report.
inline RunResult run_command(const std::string& name, const Scenario& scenario) {
  const auto it = command_table().find(name);
  if (it == command_table().end()) throw ScenarioError("unknown command '" + name + "'");
  Context ctx{scenario, build_representation(scenario.representation), {}, {}};
  ctx.fid = build_fiducial(scenario, ctx.rep);
  ctx.H = build_hamiltonian(scenario, ctx.rep);

  Outcome o;
  std::optional<Json> failure;
  try {
    it->second(ctx, o);
  } catch (const InvalidArgument&) {
    throw;
  } catch (const PartitionError&) {
    throw;
  } catch (const Error& e) {
    failure = error_json(e);
    o.passed = false;
    o.headline = std::string("numerical failure: ") + e.what();
  }
  const bool verdict = o.passed == (scenario.expect == "pass");
  RunResult out;
  out.exit_code = verdict ? exit_pass : exit_quantitative_failure;
  Json numerics = o.numerics;
  numerics["seed"] = scenario.seed;
  Json& r = out.report;
  r["command"] = name;
  r["verdict"] = verdict ? "pass" : "fail";
  r["check_passed"] = o.passed;
  r["expected"] = scenario.expect;
  r["summary"] = o.headline;
  r["scenario"] = resolved_json(scenario);
  r["numerics"] = numerics;
  r["tolerance_budget"] = o.budget;
  r["results"] = o.results;
  if (failure) r["error"] = *failure;
  if (o.csv) out.csv = to_csv(*o.csv);
  return out;
}

// ---------------------------------------------------------------------------
// Command line

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Generalized coherent state toolkit", "gcs_cli"};
  app.require_subcommand(1);
  std::string scenario_path, out_dir = ".";
  std::vector<std::string> overrides;
  bool quiet = false;
  for (const auto& [name, fn] : command_table()) {
    (void)fn;
    auto* sub = app.add_subcommand(name, "run the " + name + " check");
    sub->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    sub->add_option("--out-dir", out_dir, "directory for the JSON report and CSV data");
    sub->add_option("--override", overrides, "dotted-path override key=value (repeatable)")->take_all();
    sub->add_flag("--quiet", quiet, "suppress the summary line");
  }
  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_pass;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return exit_input_error;
  }
  const std::string name = app.get_subcommands().front()->get_name();

  try {
    Json raw = read_json_file(scenario_path);
    for (const auto& o : overrides) apply_override(raw, o);
    const Scenario scenario = parse_scenario(raw);
    RunResult result = run_command(name, scenario);

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw ScenarioError("cannot create output directory '" + out_dir + "': " + ec.message());
    const std::string stem = scenario.prefix.empty() ? name : scenario.prefix;
    Json outputs = {{"report", stem + ".json"}, {"csv", result.csv.empty() ? Json(nullptr) : Json(stem + ".csv")}};
    result.report["outputs"] = outputs;
    if (!result.csv.empty()) write_file(fs::path(out_dir) / (stem + ".csv"), result.csv);
    write_file(fs::path(out_dir) / (stem + ".json"), result.report.dump(2) + "\n");
    if (!quiet)
      out << name << ": " << result.report["verdict"].get<std::string>() << " ("
          << result.report["summary"].get<std::string>() << ")\n";
    return result.exit_code;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return exit_input_error;
  } catch (const PartitionError& e) {
    err << "error: " << e.what() << "\n";
    return exit_input_error;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_quantitative_failure;
  }
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, out, err);
}

}  // namespace gcs::cli
