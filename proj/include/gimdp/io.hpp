#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gimdp/model.hpp"
#include "gimdp/simulator.hpp"
#include "gimdp/solver.hpp"
#include "gimdp/tilde.hpp"

namespace gimdp {

using Json = nlohmann::json;

/// Malformed document: bad syntax, wrong type, or wrong shape. The message
/// names the offending field (as a JSON pointer) or the line/column.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

inline double read_number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError("field " + path + ": expected a number, got " + std::string(j.type_name()));
  return j.get<double>();
}

inline const Json& field(const Json& doc, const char* name) {
  if (!doc.contains(name)) throw ParseError(std::string("missing field /") + name);
  return doc.at(name);
}

inline std::vector<std::string> read_names(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError("field " + path + ": expected a list of names");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) throw ParseError("field " + child(path, i) + ": expected a string");
    out.push_back(j[i].get<std::string>());
  }
  return out;
}

inline void expect_array(const Json& j, const std::string& path, std::size_t len) {
  if (!j.is_array()) throw ParseError("field " + path + ": expected an array");
  if (j.size() != len)
    throw ParseError("field " + path + ": expected " + std::to_string(len) + " entries, got " +
                     std::to_string(j.size()));
}

inline std::vector<double> read_vector(const Json& j, const std::string& path, std::size_t n) {
  expect_array(j, path, n);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = read_number(j[i], child(path, i));
  return out;
}

inline Array2<double> read_array2(const Json& j, const std::string& path, std::size_t d0, std::size_t d1) {
  expect_array(j, path, d0);
  Array2<double> out(d0, d1);
  for (std::size_t i = 0; i < d0; ++i) {
    const auto p = child(path, i);
    expect_array(j[i], p, d1);
    for (std::size_t k = 0; k < d1; ++k) out(i, k) = read_number(j[i][k], child(p, k));
  }
  return out;
}

inline Array3<double> read_array3(const Json& j, const std::string& path, std::size_t d0, std::size_t d1,
                                  std::size_t d2) {
  expect_array(j, path, d0);
  Array3<double> out(d0, d1, d2);
  for (std::size_t i = 0; i < d0; ++i) {
    const auto pi = child(path, i);
    expect_array(j[i], pi, d1);
    for (std::size_t k = 0; k < d1; ++k) {
      const auto pk = child(pi, k);
      expect_array(j[i][k], pk, d2);
      for (std::size_t l = 0; l < d2; ++l) out(i, k, l) = read_number(j[i][k][l], child(pk, l));
    }
  }
  return out;
}

inline Json to_json(const Array2<double>& a) {
  Json out = Json::array();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    Json row = Json::array();
    for (std::size_t k = 0; k < a.cols(); ++k) row.push_back(a(i, k));
    out.push_back(std::move(row));
  }
  return out;
}

inline Json to_json(const Array3<double>& a) {
  Json out = Json::array();
  for (std::size_t i = 0; i < a.dim0(); ++i) {
    Json mid = Json::array();
    for (std::size_t k = 0; k < a.dim1(); ++k) {
      Json row = Json::array();
      for (std::size_t l = 0; l < a.dim2(); ++l) row.push_back(a(i, k, l));
      mid.push_back(std::move(row));
    }
    out.push_back(std::move(mid));
  }
  return out;
}

inline Json parse_text(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(e.what());
  }
}

inline std::size_t read_count(const Json& doc, const char* name) {
  const Json& j = field(doc, name);
  if (!j.is_number_integer() || j.get<long long>() <= 0)
    throw ParseError(std::string("field /") + name + ": expected a positive integer");
  return j.get<std::size_t>();
}

}  // namespace detail

/**
 * Model document (JSON):
 *
 *   n_states          positive integer
 *   states            optional list of n_states names
 *   gradual_actions   list of names (A^G)
 *   impulse_actions   list of names (A^I)
 *   q                 [x][a][y] rates, diagonal = -q_x(a)
 *   Q                 [x][b][y] post-impulse probabilities
 *   c_gradual         [x][a] cost rates
 *   c_impulse         [x][b][y] impulse costs
 *   w                 optional [x]; default_bounding_function when absent
 */
inline CtmdpModel model_from_json(const Json& doc) {
  if (!doc.is_object()) throw ParseError("model document must be an object");
  if (doc.contains("tilde") && doc.at("tilde") == true)
    throw ParseError("document is a reduced (tilde) model, not a continuous-time model");
  CtmdpModel m;
  const std::size_t n = detail::read_count(doc, "n_states");
  if (doc.contains("states")) {
    m.state_names = detail::read_names(doc.at("states"), "/states");
    if (m.state_names.size() != n) throw ParseError("field /states: expected " + std::to_string(n) + " names");
  }
  m.gradual_names = detail::read_names(detail::field(doc, "gradual_actions"), "/gradual_actions");
  m.impulse_names = detail::read_names(detail::field(doc, "impulse_actions"), "/impulse_actions");
  if (m.gradual_names.empty()) throw ParseError("field /gradual_actions: at least one action required");
  if (m.impulse_names.empty()) throw ParseError("field /impulse_actions: at least one action required");
  const std::size_t na = m.gradual_names.size(), nb = m.impulse_names.size();
  m.q = detail::read_array3(detail::field(doc, "q"), "/q", n, na, n);
  m.Q = detail::read_array3(detail::field(doc, "Q"), "/Q", n, nb, n);
  m.c_gradual = detail::read_array2(detail::field(doc, "c_gradual"), "/c_gradual", n, na);
  m.c_impulse = detail::read_array3(detail::field(doc, "c_impulse"), "/c_impulse", n, nb, n);
  if (doc.contains("w"))
    m.w = detail::read_vector(doc.at("w"), "/w", n);
  else
    m.w = default_bounding_function(m);
  return m;
}

inline Json model_to_json(const CtmdpModel& m) {
  Json doc;
  doc["n_states"] = m.n_states();
  if (!m.state_names.empty()) doc["states"] = m.state_names;
  doc["gradual_actions"] = m.gradual_names;
  doc["impulse_actions"] = m.impulse_names;
  doc["q"] = detail::to_json(m.q);
  doc["Q"] = detail::to_json(m.Q);
  doc["c_gradual"] = detail::to_json(m.c_gradual);
  doc["c_impulse"] = detail::to_json(m.c_impulse);
  doc["w"] = m.w;
  return doc;
}

inline CtmdpModel parse_model(const std::string& text) { return model_from_json(detail::parse_text(text)); }

inline std::string serialize_model(const CtmdpModel& m) { return model_to_json(m).dump(2) + "\n"; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

inline CtmdpModel load_model(const std::string& path) { return parse_model(read_file(path)); }

// Reduced model documents carry "tilde": true.

inline Json tilde_to_json(const TildeModel& t) {
  Json doc;
  doc["tilde"] = true;
  doc["n_states"] = t.n_states;
  Json acts = Json::array();
  for (const auto& a : t.actions)
    acts.push_back({{"kind", a.kind == ActionKind::gradual ? "gradual" : "impulse"},
                    {"index", a.index},
                    {"name", a.name}});
  doc["actions"] = std::move(acts);
  doc["P"] = detail::to_json(t.P);
  doc["weight"] = detail::to_json(t.weight);
  return doc;
}

inline TildeModel tilde_from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("tilde") || doc.at("tilde") != true)
    throw ParseError("not a tilde document (missing \"tilde\": true)");
  TildeModel t;
  t.n_states = detail::read_count(doc, "n_states");
  const Json& acts = detail::field(doc, "actions");
  if (!acts.is_array() || acts.empty()) throw ParseError("field /actions: expected a non-empty list");
  bool impulse_seen = false;
  for (std::size_t i = 0; i < acts.size(); ++i) {
    const auto p = detail::child("/actions", i);
    const Json& a = acts[i];
    if (!a.is_object() || !a.contains("kind") || !a.contains("index") || !a.at("index").is_number_unsigned())
      throw ParseError("field " + p + ": expected {kind, index, name}");
    const std::string kind = a.at("kind").is_string() ? a.at("kind").get<std::string>() : "";
    if (kind != "gradual" && kind != "impulse") throw ParseError("field " + p + "/kind: gradual or impulse");
    if (kind == "gradual" && impulse_seen) throw ParseError("field " + p + ": gradual actions must come first");
    impulse_seen = impulse_seen || kind == "impulse";
    t.actions.push_back({kind == "gradual" ? ActionKind::gradual : ActionKind::impulse,
                         a.at("index").get<std::size_t>(), a.value("name", std::string{})});
  }
  t.P = detail::read_array3(detail::field(doc, "P"), "/P", t.n_states, t.n_actions(), t.n_states);
  t.weight = detail::read_array3(detail::field(doc, "weight"), "/weight", t.n_states, t.n_actions(), t.n_states);
  return t;
}

// Policies

inline Json policy_to_json(const CtmdpModel& m, const StationaryPolicy& pol) {
  Json arr = Json::array();
  for (std::size_t x = 0; x < pol.choice.size(); ++x) {
    const auto& c = pol.choice[x];
    const bool g = c.kind == ActionKind::gradual;
    arr.push_back({{"state", x},
                   {"kind", g ? "gradual" : "impulse"},
                   {"index", c.index},
                   {"action", g ? m.gradual_names[c.index] : m.impulse_names[c.index]}});
  }
  return arr;
}

/// Accepts either a bare list or a document with a "policy" field (such
/// as the structured output of `solve`). Entries name their action by
/// "action" (name) or "index".
inline StationaryPolicy policy_from_json(const CtmdpModel& m, const Json& doc) {
  const Json& arr = doc.is_object() ? detail::field(doc, "policy") : doc;
  detail::expect_array(arr, "/policy", m.n_states());
  StationaryPolicy pol;
  for (std::size_t x = 0; x < arr.size(); ++x) {
    const auto p = detail::child("/policy", x);
    const Json& e = arr[x];
    if (!e.is_object() || !e.contains("kind")) throw ParseError("field " + p + ": expected {kind, action|index}");
    const std::string kind = e.at("kind").is_string() ? e.at("kind").get<std::string>() : "";
    if (kind != "gradual" && kind != "impulse") throw ParseError("field " + p + "/kind: gradual or impulse");
    const auto& names = kind == "gradual" ? m.gradual_names : m.impulse_names;
    std::size_t idx = names.size();
    if (e.contains("action") && e.at("action").is_string()) {
      const auto name = e.at("action").get<std::string>();
      for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) idx = i;
      if (idx == names.size()) throw ParseError("field " + p + "/action: unknown " + kind + " action " + name);
    } else if (e.contains("index") && e.at("index").is_number_unsigned()) {
      idx = e.at("index").get<std::size_t>();
      if (idx >= names.size()) throw ParseError("field " + p + "/index: out of range");
    } else {
      throw ParseError("field " + p + ": expected action name or index");
    }
    pol.choice.push_back(kind == "gradual" ? PolicyChoice::gradual(idx) : PolicyChoice::impulse(idx));
  }
  return pol;
}

inline std::string describe(const CtmdpModel& m, PolicyChoice c) {
  return c.kind == ActionKind::gradual ? "Gradual(" + m.gradual_names[c.index] + ")"
                                       : "Impulse(" + m.impulse_names[c.index] + ")";
}

inline std::string state_label(const CtmdpModel& m, std::size_t x) {
  return m.state_names.empty() ? std::to_string(x) : std::to_string(x) + ":" + m.state_names[x];
}

// Solve reports

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json solve_report_json(const CtmdpModel& m, const ValueSolution& sol, const StationaryPolicy& pol,
                              const ResidualReport& res) {
  Json doc;
  doc["status"] = to_string(sol.status);
  doc["iterations"] = sol.iterations;
  doc["sup_norm_delta"] = sol.sup_norm_delta;
  doc["diverged_states"] = sol.diverged;
  Json states = Json::array(), xg = Json::array(), xi = Json::array();
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    const auto& r = res.states[x];
    Json s;
    s["state"] = x;
    if (!m.state_names.empty()) s["name"] = m.state_names[x];
    s["value"] = number_or_null(sol.values[x]);
    s["diverged"] = sol.is_diverged(x);
    s["action"] = describe(m, pol.choice[x]);
    s["residual_gradual"] = number_or_null(r.gradual);
    s["residual_impulse"] = number_or_null(r.impulse);
    s["in_XG"] = r.in_gradual_set;
    s["in_XI"] = r.in_impulse_set;
    states.push_back(std::move(s));
    if (r.in_gradual_set) xg.push_back(x);
    if (r.in_impulse_set) xi.push_back(x);
  }
  doc["states"] = std::move(states);
  doc["X_G"] = std::move(xg);
  doc["X_I"] = std::move(xi);
  doc["residual_tol"] = res.tol;
  doc["equations_hold"] = res.equations_hold();
  doc["complement_of_XI_in_XG"] = res.complement_in_gradual_set();
  doc["policy"] = policy_to_json(m, pol);
  return doc;
}

namespace detail {

inline std::string fmt_value(double v, int precision = 10) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace detail

/// One row per state: V, status, rA, rB, X^G/X^I membership, action.
inline void write_solve_table(std::ostream& os, const CtmdpModel& m, const ValueSolution& sol,
                              const StationaryPolicy& pol, const ResidualReport& res) {
  os << "status " << to_string(sol.status) << "  iterations " << sol.iterations << "  delta "
     << detail::fmt_value(sol.sup_norm_delta, 3) << "\n";
  os << std::left << std::setw(16) << "state" << std::setw(18) << "V" << std::setw(10) << "status"
     << std::setw(14) << "rA" << std::setw(14) << "rB" << std::setw(5) << "XG" << std::setw(5) << "XI"
     << "action\n";
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    const auto& r = res.states[x];
    os << std::left << std::setw(16) << state_label(m, x) << std::setw(18) << detail::fmt_value(sol.values[x])
       << std::setw(10) << (sol.is_diverged(x) ? "diverged" : "finite") << std::setw(14)
       << (r.finite ? detail::fmt_value(r.gradual, 3) : "-") << std::setw(14)
       << (r.finite ? detail::fmt_value(r.impulse, 3) : "-") << std::setw(5) << (r.in_gradual_set ? "yes" : "no")
       << std::setw(5) << (r.in_impulse_set ? "yes" : "no") << describe(m, pol.choice[x])
       << (sol.is_diverged(x) ? " (untrusted)" : "") << "\n";
  }
}

inline Json simulation_report_json(const SimulationReport& r) {
  Json doc;
  doc["estimate"] = number_or_null(r.estimate);
  doc["std_error"] = number_or_null(r.std_error);
  doc["n_paths"] = r.n_paths;
  Json hist;
  for (std::size_t k = 0; k < kTerminationKinds; ++k)
    hist[to_string(static_cast<Termination>(k))] = r.terminations[k];
  doc["terminations"] = std::move(hist);
  doc["truncation_bias_bound"] = r.truncation_bias_bound;
  return doc;
}

}  // namespace gimdp
