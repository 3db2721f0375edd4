#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gimdp/array.hpp"

namespace gimdp {

/// Absolute tolerance for the row-sum checks on q and Q. Inputs are user
/// data, not computed quantities.
inline constexpr double kStochasticTol = 1e-12;

/**
 * Finite gradual-impulse CTMDP.
 *
 * States are 0..n_states-1. Gradual actions shape the jump rates and cost
 * rate while the state is held; impulse actions are applied at a single
 * time instant and move the state according to Q.
 *
 *   q(x, a, y)          signed rate kernel, q(x, a, x) = -q_x(a)
 *   Q(x, b, y)          post-impulse distribution
 *   c_gradual(x, a)     cost rate
 *   c_impulse(x, b, y)  lump cost of impulse b taking x to y
 *   w(x)                bounding function, c_gradual + q_x + 1 <= w
 *
 * Treated as immutable once built.
 */
struct CtmdpModel {
  std::vector<std::string> state_names;  // optional, may be empty
  std::vector<std::string> gradual_names;
  std::vector<std::string> impulse_names;
  Array3<double> q;
  Array3<double> Q;
  Array2<double> c_gradual;
  Array3<double> c_impulse;
  std::vector<double> w;

  std::size_t n_states() const { return q.dim0(); }
  std::size_t n_gradual() const { return gradual_names.size(); }
  std::size_t n_impulse() const { return impulse_names.size(); }

  /// Total jump rate q_x(a) = -q(x|x,a).
  double exit_rate(std::size_t x, std::size_t a) const { return -q(x, a, x); }

  /// q̄_x = max_a q_x(a).
  double max_exit_rate(std::size_t x) const {
    double m = 0.0;
    for (std::size_t a = 0; a < n_gradual(); ++a) m = std::max(m, exit_rate(x, a));
    return m;
  }

  bool operator==(const CtmdpModel&) const = default;
};

enum class ViolationKind {
  structural,
  negative_off_diagonal_rate,
  rate_row_sum,
  impulse_probability_range,
  impulse_row_sum,
  invalid_gradual_cost,
  invalid_impulse_cost,
  bounding_function,
};

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::structural: return "structural";
    case ViolationKind::negative_off_diagonal_rate: return "negative_off_diagonal_rate";
    case ViolationKind::rate_row_sum: return "rate_row_sum";
    case ViolationKind::impulse_probability_range: return "impulse_probability_range";
    case ViolationKind::impulse_row_sum: return "impulse_row_sum";
    case ViolationKind::invalid_gradual_cost: return "invalid_gradual_cost";
    case ViolationKind::invalid_impulse_cost: return "invalid_impulse_cost";
    case ViolationKind::bounding_function: return "bounding_function";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  std::vector<std::size_t> index;  // (x), (x,a), (x,b) or (x,b,y) as applicable
  double magnitude = 0.0;          // size of the breach, 0 for structural
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool structural() const {
    return std::any_of(violations.begin(), violations.end(),
                       [](const Violation& v) { return v.kind == ViolationKind::structural; });
  }
  std::size_t count(ViolationKind k) const {
    return static_cast<std::size_t>(std::count_if(
        violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; }));
  }
};

/// Thrown by operations whose precondition is a valid model.
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string index_string(const std::vector<std::size_t>& idx) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < idx.size(); ++i) os << (i ? "," : "") << idx[i];
  os << ')';
  return os.str();
}

inline void add(ValidationReport& r, ViolationKind k, std::vector<std::size_t> idx, double mag,
                const std::string& what) {
  std::ostringstream os;
  os << what << " at " << index_string(idx);
  if (k != ViolationKind::structural) os << " (magnitude " << mag << ")";
  r.violations.push_back({k, std::move(idx), mag, os.str()});
}

}  // namespace detail

/// Structural (shape) check only.
inline ValidationReport check_structure(const CtmdpModel& m) {
  ValidationReport r;
  const std::size_t n = m.q.dim0();
  const std::size_t na = m.n_gradual();
  const std::size_t nb = m.n_impulse();
  auto fail = [&r](const std::string& what) {
    r.violations.push_back({ViolationKind::structural, {}, 0.0, what});
  };
  if (n == 0) fail("n_states must be positive");
  if (na == 0) fail("at least one gradual action is required");
  if (nb == 0) fail("at least one impulse action is required");
  if (m.q.dim1() != na || m.q.dim2() != n) fail("q must have shape [n_states][n_gradual][n_states]");
  if (m.Q.dim0() != n || m.Q.dim1() != nb || m.Q.dim2() != n)
    fail("Q must have shape [n_states][n_impulse][n_states]");
  if (m.c_gradual.rows() != n || m.c_gradual.cols() != na)
    fail("c_gradual must have shape [n_states][n_gradual]");
  if (m.c_impulse.dim0() != n || m.c_impulse.dim1() != nb || m.c_impulse.dim2() != n)
    fail("c_impulse must have shape [n_states][n_impulse][n_states]");
  if (m.w.size() != n) fail("w must have n_states entries");
  if (!m.state_names.empty() && m.state_names.size() != n)
    fail("state names must be empty or have n_states entries");
  return r;
}

/**
 * Checks every model invariant and reports each breach with its index
 * tuple. Shape errors are reported as `structural` and suppress the
 * numeric checks.
 */
inline ValidationReport validate_model(const CtmdpModel& m) {
  ValidationReport r = check_structure(m);
  if (!r.ok()) return r;

  const std::size_t n = m.n_states();
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t a = 0; a < m.n_gradual(); ++a) {
      double sum = 0.0;
      bool finite = true;
      for (std::size_t y = 0; y < n; ++y) {
        const double v = m.q(x, a, y);
        if (!std::isfinite(v)) {
          finite = false;
          detail::add(r, ViolationKind::rate_row_sum, {x, a, y}, INFINITY, "non-finite rate");
          continue;
        }
        if (y != x && v < 0.0)
          detail::add(r, ViolationKind::negative_off_diagonal_rate, {x, a, y}, -v,
                      "negative off-diagonal rate");
        sum += v;
      }
      if (finite && std::abs(sum) > kStochasticTol)
        detail::add(r, ViolationKind::rate_row_sum, {x, a}, std::abs(sum),
                    "rate row does not sum to zero");

      const double c = m.c_gradual(x, a);
      if (!std::isfinite(c) || c < 0.0)
        detail::add(r, ViolationKind::invalid_gradual_cost, {x, a}, std::isfinite(c) ? -c : INFINITY,
                    "gradual cost rate must be finite and nonnegative");
    }

    for (std::size_t b = 0; b < m.n_impulse(); ++b) {
      double sum = 0.0;
      bool in_range = true;
      for (std::size_t y = 0; y < n; ++y) {
        const double p = m.Q(x, b, y);
        if (!(p >= 0.0 && p <= 1.0)) {
          in_range = false;
          const double mag = std::isfinite(p) ? (p < 0.0 ? -p : p - 1.0) : INFINITY;
          detail::add(r, ViolationKind::impulse_probability_range, {x, b, y}, mag,
                      "impulse probability outside [0,1]");
        }
        sum += p;
        const double c = m.c_impulse(x, b, y);
        if (!std::isfinite(c) || c < 0.0)
          detail::add(r, ViolationKind::invalid_impulse_cost, {x, b, y},
                      std::isfinite(c) ? -c : INFINITY,
                      "impulse cost must be finite and nonnegative");
      }
      if (in_range && std::abs(sum - 1.0) > kStochasticTol)
        detail::add(r, ViolationKind::impulse_row_sum, {x, b}, std::abs(sum - 1.0),
                    "impulse row does not sum to one");
    }

    // Condition on the bounding function: c^G(x,a) + q_x(a) + 1 <= w(x).
    if (!std::isfinite(m.w[x])) {
      detail::add(r, ViolationKind::bounding_function, {x}, INFINITY, "w must be finite");
      continue;
    }
    double worst = -INFINITY;
    for (std::size_t a = 0; a < m.n_gradual(); ++a)
      worst = std::max(worst, m.c_gradual(x, a) + m.exit_rate(x, a) + 1.0 - m.w[x]);
    if (worst > 0.0)
      detail::add(r, ViolationKind::bounding_function, {x}, worst,
                  "bounding function below c_gradual + q_x + 1");
  }
  return r;
}

/// Tightest admissible bounding function: w(x) = 1 + max_a (c^G(x,a) + q_x(a)).
/// Only q and c_gradual are read.
inline std::vector<double> default_bounding_function(const CtmdpModel& m) {
  std::vector<double> w(m.q.dim0(), 1.0);
  for (std::size_t x = 0; x < w.size(); ++x) {
    double best = 0.0;
    for (std::size_t a = 0; a < m.q.dim1(); ++a)
      best = std::max(best, m.c_gradual(x, a) + (-m.q(x, a, x)));
    w[x] = 1.0 + best;
  }
  return w;
}

/// Throws ModelError listing the violations unless the model is valid.
inline void require_valid(const CtmdpModel& m) {
  const auto report = validate_model(m);
  if (report.ok()) return;
  std::string msg = "invalid model:";
  for (const auto& v : report.violations) msg += "\n  " + v.message;
  throw ModelError(msg);
}

/// Parameters of the kitchen-rat example.
struct RatParams {
  double mu = 2.0;   // departure rate of the rat
  double l = 1.0;    // cost rate while the rat is present
  double p = 0.5;    // hit probability of a shot
  double C = 0.1;    // cost per shot
};

/**
 * Two-state rat model: state 0 = rat present, state 1 = done (absorbing).
 * One gradual action ("wait"), impulses {"shoot", "idle"}. Idle leaves the
 * state unchanged at zero cost so that every state has impulse actions;
 * shooting in state 1 has nothing to hit and is also a free self-loop.
 */
inline CtmdpModel rat_example(const RatParams& prm) {
  if (!(prm.mu > 0.0) || !std::isfinite(prm.mu)) throw std::invalid_argument("rat: mu must be > 0");
  if (!(prm.l >= 0.0) || !std::isfinite(prm.l)) throw std::invalid_argument("rat: l must be >= 0");
  if (!(prm.p > 0.0 && prm.p < 1.0)) throw std::invalid_argument("rat: p must lie in (0,1)");
  if (!(prm.C > 0.0) || !std::isfinite(prm.C)) throw std::invalid_argument("rat: C must be > 0");

  constexpr std::size_t present = 0, done = 1, shoot = 0, idle = 1;
  CtmdpModel m;
  m.state_names = {"rat_present", "done"};
  m.gradual_names = {"wait"};
  m.impulse_names = {"shoot", "idle"};
  m.q = Array3<double>(2, 1, 2);
  m.q(present, 0, present) = -prm.mu;
  m.q(present, 0, done) = prm.mu;
  m.Q = Array3<double>(2, 2, 2);
  m.Q(present, shoot, done) = prm.p;
  m.Q(present, shoot, present) = 1.0 - prm.p;
  m.Q(present, idle, present) = 1.0;
  m.Q(done, shoot, done) = 1.0;
  m.Q(done, idle, done) = 1.0;
  m.c_gradual = Array2<double>(2, 1);
  m.c_gradual(present, 0) = prm.l;
  m.c_impulse = Array3<double>(2, 2, 2);
  m.c_impulse(present, shoot, present) = prm.C;
  m.c_impulse(present, shoot, done) = prm.C;
  m.w = default_bounding_function(m);
  return m;
}

}  // namespace gimdp
