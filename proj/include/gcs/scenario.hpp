#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcs/classical.hpp"

namespace gcs::cli {

using Json = nlohmann::ordered_json;

/// Bad scenario content: unknown fields, wrong types, out-of-range values.
class ScenarioError : public InvalidArgument {
public:
  using InvalidArgument::InvalidArgument;
};

// ---------------------------------------------------------------------------
// Reading and overriding raw JSON

inline std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline Json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text, nullptr, true, false);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    throw ScenarioError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON: " +
                        e.what());
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

/// Applies `a.b.c=value`; array elements are addressed as `a.0` or `a[0]`.
/// The value is read as JSON when it parses, else as a string.
inline void apply_override(Json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ScenarioError("override '" + assignment + "' is not key=value");
  std::string path;
  for (char ch : assignment.substr(0, eq)) {
    if (ch == '[') path += '.';
    else if (ch != ']') path += ch;
  }
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  Json* node = &root;
  std::stringstream ss(path);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) {
    if (key.empty()) throw ScenarioError("override path '" + path + "' has an empty component");
    keys.push_back(key);
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const bool last = i + 1 == keys.size();
    if (node->is_array()) {
      if (keys[i].find_first_not_of("0123456789") != std::string::npos)
        throw ScenarioError("override path '" + path + "': '" + keys[i] + "' is not an array index");
      const std::size_t idx = std::stoul(keys[i]);
      if (idx >= node->size()) throw ScenarioError("override path '" + path + "': index out of range");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = Json::object();
      if (!node->is_object()) throw ScenarioError("override path '" + path + "' descends into a non-object");
      node = &(*node)[keys[i]];
    }
    if (last) *node = value;
  }
}

// ---------------------------------------------------------------------------
// Strict field access

namespace detail {

inline const Json& require_object(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ScenarioError(where + " must be an object");
  return j;
}

inline void allow_keys(const Json& j, const std::string& where, std::initializer_list<const char*> keys) {
  require_object(j, where);
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ScenarioError("unknown field '" + where + "." + it.key() + "'");
}

inline double number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw ScenarioError(where + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ScenarioError(where + " must be finite");
  return v;
}

inline double positive(const Json& j, const std::string& where) {
  const double v = number(j, where);
  if (!(v > 0.0)) throw ScenarioError(where + " must be positive");
  return v;
}

inline int integer(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ScenarioError(where + " must be an integer");
  return j.get<int>();
}

inline std::string string(const Json& j, const std::string& where) {
  if (!j.is_string()) throw ScenarioError(where + " must be a string");
  return j.get<std::string>();
}

inline bool boolean(const Json& j, const std::string& where) {
  if (!j.is_boolean()) throw ScenarioError(where + " must be true or false");
  return j.get<bool>();
}

/// A complex number written as `x` or `[re, im]`.
inline cplx complex(const Json& j, const std::string& where) {
  if (j.is_number()) return {number(j, where), 0.0};
  if (j.is_array() && j.size() == 2) return {number(j[0], where + "[0]"), number(j[1], where + "[1]")};
  throw ScenarioError(where + " must be a number or [re, im]");
}

inline Json complex_json(cplx c) { return Json::array({c.real(), c.imag()}); }

inline std::vector<double> number_list(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ScenarioError(where + " must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<std::string> string_list(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ScenarioError(where + " must be an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(string(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::string one_of(const Json& j, const std::string& where, std::initializer_list<const char*> choices) {
  const std::string s = string(j, where);
  for (const char* c : choices)
    if (s == c) return s;
  std::string msg = where + " must be one of";
  for (const char* c : choices) msg += std::string(" ") + c;
  throw ScenarioError(msg + ", got '" + s + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Coefficient grammar
//
//   coef := number | [re, im]
//         | {"const": c} | {"poly": [c0, c1, ...]}
//         | {"trig": {"amplitude": c, "omega": w, "phase": p}}
//         | {"phasor": {"amplitude": A, "omega": w, "phase": p}}
//         | {"sum": [coef, ...]} | {"product": [coef, ...]}

inline Coefficient parse_coefficient(const Json& j, const std::string& where) {
  using namespace detail;
  if (j.is_number() || j.is_array()) return Coefficient::constant(complex(j, where));
  require_object(j, where);
  if (j.size() != 1) throw ScenarioError(where + " must have exactly one of const, poly, trig, phasor, sum, product");
  const std::string kind = j.begin().key();
  const Json& body = j.begin().value();
  const std::string at = where + "." + kind;
  if (kind == "const") return Coefficient::constant(complex(body, at));
  if (kind == "poly") {
    if (!body.is_array() || body.empty()) throw ScenarioError(at + " must be a non-empty array");
    std::vector<cplx> c;
    for (std::size_t i = 0; i < body.size(); ++i) c.push_back(complex(body[i], at + "[" + std::to_string(i) + "]"));
    return Coefficient::poly(std::move(c));
  }
  if (kind == "trig" || kind == "phasor") {
    allow_keys(body, at, {"amplitude", "omega", "phase"});
    if (!body.contains("amplitude") || !body.contains("omega"))
      throw ScenarioError(at + " needs amplitude and omega");
    const double omega = number(body["omega"], at + ".omega");
    const double phase = body.contains("phase") ? number(body["phase"], at + ".phase") : 0.0;
    if (kind == "trig") return Coefficient::trig(complex(body["amplitude"], at + ".amplitude"), omega, phase);
    return Coefficient::phasor(number(body["amplitude"], at + ".amplitude"), omega, phase);
  }
  if (kind == "sum" || kind == "product") {
    if (!body.is_array() || body.empty()) throw ScenarioError(at + " must be a non-empty array");
    std::vector<Coefficient> parts;
    for (std::size_t i = 0; i < body.size(); ++i)
      parts.push_back(parse_coefficient(body[i], at + "[" + std::to_string(i) + "]"));
    return kind == "sum" ? Coefficient::sum(std::move(parts)) : Coefficient::product(std::move(parts));
  }
  throw ScenarioError("unknown coefficient kind '" + kind + "' at " + where);
}

// ---------------------------------------------------------------------------
// Scenario

struct RepresentationSpec {
  std::string algebra;
  int two_j = 0;
  double k = 0.0;
  int n_trunc = 0;
};

struct HamiltonianTermSpec {
  std::string op;
  Json coefficient;
  bool hermitian_pair = false;
};

struct Numerics {
  double dt = 1e-3;
  double t_max = 1.0;
  int samples = 11;
  std::optional<double> tolerance;
  std::optional<double> fd_step;
  QuadratureSpec quadrature;
  std::optional<int> subspace_dim;
  std::optional<int> probe_dim;
};

struct Scenario {
  RepresentationSpec representation;
  std::string fiducial_kind = "ground";
  int fiducial_index = 0;
  ChartKind chart = ChartKind::Plane;
  std::vector<HamiltonianTermSpec> hamiltonian;
  cplx z0{0.0};
  Numerics numerics;
  Json task = Json::object();
  std::string expect = "pass";
  long long seed = 0;
  std::string prefix;
};

inline const char* chart_name(ChartKind k) {
  switch (k) {
    case ChartKind::Plane: return "plane";
    case ChartKind::Sphere: return "sphere";
    case ChartKind::Disk: return "disk";
  }
  return "plane";
}

inline ChartKind default_chart(const std::string& algebra) {
  if (algebra == "su2") return ChartKind::Sphere;
  if (algebra == "su11" || algebra == "two_photon_su11") return ChartKind::Disk;
  return ChartKind::Plane;
}

/// Validates a raw scenario and fills in defaults.
inline Scenario parse_scenario(const Json& root) {
  using namespace detail;
  allow_keys(root, "scenario",
             {"representation", "fiducial", "chart", "hamiltonian", "initial", "numerics", "task", "seed", "output"});
  Scenario s;

  if (!root.contains("representation")) throw ScenarioError("scenario.representation is required");
  const Json& rj = root["representation"];
  allow_keys(rj, "representation", {"algebra", "two_j", "k", "n_trunc"});
  if (!rj.contains("algebra")) throw ScenarioError("representation.algebra is required");
  auto& rep = s.representation;
  rep.algebra = one_of(rj["algebra"], "representation.algebra",
                       {"su2", "heisenberg_weyl", "oscillator", "su11", "two_photon_su11"});
  const bool spin = rep.algebra == "su2";
  if (spin) {
    if (!rj.contains("two_j")) throw ScenarioError("representation.two_j is required for su2");
    rep.two_j = integer(rj["two_j"], "representation.two_j");
    if (rep.two_j < 1) throw ScenarioError("representation.two_j must be >= 1");
    if (rj.contains("n_trunc")) throw ScenarioError("representation.n_trunc does not apply to su2");
  } else {
    if (rj.contains("two_j")) throw ScenarioError("representation.two_j applies only to su2");
    rep.n_trunc = rj.contains("n_trunc") ? integer(rj["n_trunc"], "representation.n_trunc") : 40;
    if (rep.n_trunc < 4) throw ScenarioError("representation.n_trunc must be >= 4");
  }
  if (rep.algebra == "su11") {
    if (!rj.contains("k")) throw ScenarioError("representation.k is required for su11");
    rep.k = number(rj["k"], "representation.k");
    if (!(rep.k >= 0.5)) throw ScenarioError("representation.k must be >= 0.5");
  } else if (rj.contains("k")) {
    throw ScenarioError("representation.k applies only to su11");
  }

  if (root.contains("fiducial")) {
    const Json& fj = root["fiducial"];
    allow_keys(fj, "fiducial", {"kind", "index"});
    if (fj.contains("kind")) s.fiducial_kind = one_of(fj["kind"], "fiducial.kind", {"ground", "basis"});
    if (fj.contains("index")) {
      if (s.fiducial_kind != "basis") throw ScenarioError("fiducial.index applies only to kind basis");
      s.fiducial_index = integer(fj["index"], "fiducial.index");
      if (s.fiducial_index < 0) throw ScenarioError("fiducial.index must be non-negative");
    }
  }

  s.chart = default_chart(rep.algebra);
  if (root.contains("chart")) {
    const Json& cj = root["chart"];
    allow_keys(cj, "chart", {"kind"});
    if (cj.contains("kind")) {
      const std::string k = one_of(cj["kind"], "chart.kind", {"plane", "sphere", "disk"});
      s.chart = k == "plane" ? ChartKind::Plane : k == "sphere" ? ChartKind::Sphere : ChartKind::Disk;
    }
  }

  if (root.contains("hamiltonian")) {
    const Json& hj = root["hamiltonian"];
    allow_keys(hj, "hamiltonian", {"terms"});
    if (hj.contains("terms")) {
      const Json& terms = hj["terms"];
      if (!terms.is_array()) throw ScenarioError("hamiltonian.terms must be an array");
      for (std::size_t i = 0; i < terms.size(); ++i) {
        const std::string at = "hamiltonian.terms[" + std::to_string(i) + "]";
        allow_keys(terms[i], at, {"operator", "coefficient", "hermitian_pair"});
        if (!terms[i].contains("operator")) throw ScenarioError(at + ".operator is required");
        HamiltonianTermSpec term;
        term.op = string(terms[i]["operator"], at + ".operator");
        term.coefficient = terms[i].contains("coefficient") ? terms[i]["coefficient"] : Json(1.0);
        parse_coefficient(term.coefficient, at + ".coefficient");
        if (terms[i].contains("hermitian_pair"))
          term.hermitian_pair = boolean(terms[i]["hermitian_pair"], at + ".hermitian_pair");
        s.hamiltonian.push_back(std::move(term));
      }
    }
  }

  if (root.contains("initial")) {
    const Json& ij = root["initial"];
    allow_keys(ij, "initial", {"z"});
    if (ij.contains("z")) s.z0 = complex(ij["z"], "initial.z");
  }

  auto& num = s.numerics;
  num.quadrature = default_quadrature(s.chart);
  if (root.contains("numerics")) {
    const Json& nj = root["numerics"];
    allow_keys(nj, "numerics",
               {"dt", "t_max", "samples", "tolerance", "fd_step", "quadrature", "subspace_dim", "probe_dim"});
    if (nj.contains("dt")) num.dt = positive(nj["dt"], "numerics.dt");
    if (nj.contains("t_max")) num.t_max = positive(nj["t_max"], "numerics.t_max");
    if (nj.contains("samples")) {
      num.samples = integer(nj["samples"], "numerics.samples");
      if (num.samples < 2) throw ScenarioError("numerics.samples must be >= 2");
    }
    if (nj.contains("tolerance")) num.tolerance = positive(nj["tolerance"], "numerics.tolerance");
    if (nj.contains("fd_step")) num.fd_step = positive(nj["fd_step"], "numerics.fd_step");
    if (nj.contains("subspace_dim")) {
      num.subspace_dim = integer(nj["subspace_dim"], "numerics.subspace_dim");
      if (*num.subspace_dim < 1) throw ScenarioError("numerics.subspace_dim must be positive");
    }
    if (nj.contains("probe_dim")) {
      num.probe_dim = integer(nj["probe_dim"], "numerics.probe_dim");
      if (*num.probe_dim < 1) throw ScenarioError("numerics.probe_dim must be positive");
    }
    if (nj.contains("quadrature")) {
      const Json& qj = nj["quadrature"];
      allow_keys(qj, "numerics.quadrature", {"radial_nodes", "angular_nodes", "u_min", "u_max"});
      auto& q = num.quadrature;
      if (qj.contains("radial_nodes")) q.radial_nodes = integer(qj["radial_nodes"], "numerics.quadrature.radial_nodes");
      if (qj.contains("angular_nodes"))
        q.angular_nodes = integer(qj["angular_nodes"], "numerics.quadrature.angular_nodes");
      if (qj.contains("u_min")) q.u_min = number(qj["u_min"], "numerics.quadrature.u_min");
      if (qj.contains("u_max")) q.u_max = positive(qj["u_max"], "numerics.quadrature.u_max");
      if (q.radial_nodes < 1 || q.angular_nodes < 1) throw ScenarioError("quadrature node counts must be positive");
      if (!(q.u_min >= 0.0) || !(q.u_max > q.u_min)) throw ScenarioError("quadrature needs 0 <= u_min < u_max");
    }
  }

  if (root.contains("task")) {
    s.task = root["task"];
    require_object(s.task, "task");
    if (s.task.contains("expect")) {
      s.expect = one_of(s.task["expect"], "task.expect", {"pass", "fail"});
      s.task.erase("expect");
    }
  }
  if (root.contains("seed")) {
    if (!root["seed"].is_number_integer()) throw ScenarioError("seed must be an integer");
    s.seed = root["seed"].get<long long>();
  }
  if (root.contains("output")) {
    const Json& oj = root["output"];
    allow_keys(oj, "output", {"prefix"});
    if (oj.contains("prefix")) {
      s.prefix = string(oj["prefix"], "output.prefix");
      if (s.prefix.empty() || s.prefix.find_first_of("/\\") != std::string::npos)
        throw ScenarioError("output.prefix must be a non-empty file name stem");
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Building library objects

inline Representation build_representation(const RepresentationSpec& r) {
  if (r.algebra == "su2") return build_su2(r.two_j);
  if (r.algebra == "heisenberg_weyl") return build_heisenberg_weyl(r.n_trunc);
  if (r.algebra == "oscillator") return build_oscillator_algebra(r.n_trunc);
  if (r.algebra == "su11") return build_su11(r.k, r.n_trunc);
  return build_two_photon_su11(r.n_trunc);
}

inline FiducialSpec build_fiducial(const Scenario& s, const Representation& rep) {
  if (s.fiducial_kind == "ground") return ground_fiducial(rep);
  if (s.fiducial_index >= rep.dim) throw ScenarioError("fiducial.index exceeds the representation dimension");
  return basis_fiducial(rep, s.fiducial_index, "basis " + std::to_string(s.fiducial_index));
}

inline HamiltonianSpec build_hamiltonian(const Scenario& s, const Representation& rep) {
  HamiltonianSpec H;
  for (std::size_t i = 0; i < s.hamiltonian.size(); ++i) {
    const auto& term = s.hamiltonian[i];
    const Coefficient c = parse_coefficient(term.coefficient, "hamiltonian.terms[" + std::to_string(i) + "]");
    if (term.hermitian_pair) {
      H.add_hermitian_pair(c, named_operator(rep, term.op), term.op);
    } else {
      bool generator = false;
      for (int a = 0; a < rep.size(); ++a)
        if (rep.algebra.basis_names[a] == term.op) {
          H.add_generator(c, a, term.op);
          generator = true;
        }
      if (!generator) H.add_matrix(c, named_operator(rep, term.op), term.op);
    }
  }
  return H;
}

inline std::vector<double> time_grid(const Numerics& n) {
  std::vector<double> t(static_cast<std::size_t>(n.samples));
  for (int k = 0; k < n.samples; ++k) t[static_cast<std::size_t>(k)] = n.t_max * k / (n.samples - 1);
  return t;
}

/// The scenario with every default made explicit.
inline Json resolved_json(const Scenario& s) {
  Json rep = {{"algebra", s.representation.algebra}};
  if (s.representation.algebra == "su2") rep["two_j"] = s.representation.two_j;
  if (s.representation.algebra == "su11") rep["k"] = s.representation.k;
  if (s.representation.algebra != "su2") rep["n_trunc"] = s.representation.n_trunc;
  Json fid = {{"kind", s.fiducial_kind}};
  if (s.fiducial_kind == "basis") fid["index"] = s.fiducial_index;
  Json terms = Json::array();
  for (const auto& t : s.hamiltonian)
    terms.push_back({{"operator", t.op}, {"coefficient", t.coefficient}, {"hermitian_pair", t.hermitian_pair}});
  Json out;
  out["representation"] = rep;
  out["fiducial"] = fid;
  out["chart"] = {{"kind", chart_name(s.chart)}};
  out["hamiltonian"] = {{"terms", terms}};
  out["initial"] = {{"z", detail::complex_json(s.z0)}};
  out["task"] = s.task;
  out["expect"] = s.expect;
  out["seed"] = s.seed;
  return out;
}

}  // namespace gcs::cli
