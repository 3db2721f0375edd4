#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "gimdp/model.hpp"
#include "gimdp/tilde.hpp"

namespace gimdp {

/// Values are expectations of exp(cost) and live in [1, +inf]. A diverged
/// state holds +inf.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct SolverOptions {
  double abs_tol = 1e-10;
  long max_iter = 1'000'000;
  double divergence_cap = 1e12;
  double tie_tol = 1e-9;
};

enum class SolveStatus { converged, max_iterations, diverged_states };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::diverged_states: return "diverged_states";
  }
  return "unknown";
}

struct ValueSolution {
  std::vector<double> values;
  long iterations = 0;
  double sup_norm_delta = 0.0;  // over states that were finite in the last two iterates
  SolveStatus status = SolveStatus::max_iterations;
  std::vector<std::size_t> diverged;

  bool is_diverged(std::size_t x) const { return std::isinf(values[x]); }
};

/// Per-state choice of a deterministic stationary policy: either apply
/// impulse `index` immediately, or hold with gradual action `index` until
/// the next natural jump.
struct PolicyChoice {
  ActionKind kind = ActionKind::gradual;
  std::size_t index = 0;

  static PolicyChoice gradual(std::size_t a) { return {ActionKind::gradual, a}; }
  static PolicyChoice impulse(std::size_t b) { return {ActionKind::impulse, b}; }
  bool operator==(const PolicyChoice&) const = default;
};

struct StationaryPolicy {
  std::vector<PolicyChoice> choice;
  bool operator==(const StationaryPolicy&) const = default;
};

inline std::size_t n_gradual(const TildeModel& t) {
  return static_cast<std::size_t>(std::count_if(t.actions.begin(), t.actions.end(), [](const TildeAction& a) {
    return a.kind == ActionKind::gradual;
  }));
}

/// Position of a policy choice in the reduced model's action list.
inline std::size_t tilde_index(const TildeModel& t, PolicyChoice c) {
  const std::size_t na = n_gradual(t);
  const std::size_t idx = c.kind == ActionKind::gradual ? c.index : na + c.index;
  if ((c.kind == ActionKind::gradual && c.index >= na) || idx >= t.n_actions())
    throw std::out_of_range("policy action index out of range");
  return idx;
}

inline PolicyChoice choice_of(const TildeModel& t, std::size_t action) {
  return {t.actions[action].kind, t.actions[action].index};
}

/// Σ_y weight(x,ã,y) V(y), ascending y, with 0·inf = 0.
inline double action_value(const TildeModel& t, std::size_t x, std::size_t action,
                           const std::vector<double>& V) {
  const double* row = t.weight.row(x, action);
  double s = 0.0;
  for (std::size_t y = 0; y < t.n_states; ++y) {
    if (row[y] == 0.0) continue;
    if (std::isinf(V[y])) return kInfinity;
    s += row[y] * V[y];
  }
  return s;
}

/// (TV)(x) = min over non-degenerate actions of Σ_y weight V(y).
inline std::vector<double> bellman_apply(const TildeModel& t, const std::vector<double>& V) {
  std::vector<double> out(t.n_states, kInfinity);
  for (std::size_t x = 0; x < t.n_states; ++x) {
    double best = kInfinity;
    for (std::size_t act = 0; act < t.n_actions(); ++act) {
      if (is_degenerate_impulse(t, x, act)) continue;
      best = std::min(best, action_value(t, x, act, V));
    }
    // Exact value is >= 1 because weights dominate probabilities; the clamp
    // only removes rounding in row sums.
    out[x] = std::max(best, 1.0);
  }
  return out;
}

/// Called after every sweep with the iteration count and current iterate.
using IterationObserver = std::function<void(long, const std::vector<double>&)>;

namespace detail {

template <class Operator>
ValueSolution monotone_iterate(std::size_t n, Operator&& apply, const SolverOptions& opt,
                               const IterationObserver& observer) {
  if (!(opt.abs_tol > 0.0)) throw std::invalid_argument("abs_tol must be positive");
  if (!(opt.divergence_cap > 1.0)) throw std::invalid_argument("divergence_cap must exceed 1");

  ValueSolution sol;
  sol.values.assign(n, 1.0);
  if (observer) observer(0, sol.values);
  bool done = false;
  for (long it = 1; it <= opt.max_iter; ++it) {
    std::vector<double> next = apply(sol.values);
    bool newly_flagged = false;
    double delta = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      if (std::isinf(sol.values[x])) {
        next[x] = kInfinity;
        continue;
      }
      if (next[x] > opt.divergence_cap) {
        next[x] = kInfinity;
        newly_flagged = true;
        continue;
      }
      delta = std::max(delta, std::abs(next[x] - sol.values[x]));
    }
    sol.values = std::move(next);
    sol.iterations = it;
    sol.sup_norm_delta = delta;
    if (observer) observer(it, sol.values);
    if (!newly_flagged && delta < opt.abs_tol) {
      done = true;
      break;
    }
  }
  for (std::size_t x = 0; x < n; ++x)
    if (std::isinf(sol.values[x])) sol.diverged.push_back(x);
  if (!done)
    sol.status = SolveStatus::max_iterations;
  else
    sol.status = sol.diverged.empty() ? SolveStatus::converged : SolveStatus::diverged_states;
  return sol;
}

}  // namespace detail

/**
 * Value iteration from V ≡ 1. Iterates increase monotonically to the value
 * function. A state whose iterate exceeds `divergence_cap` is flagged as
 * +inf and iteration continues for the rest; the run stops when the
 * sup-norm change over unflagged states drops below `abs_tol`.
 */
inline ValueSolution value_iterate(const TildeModel& t, const SolverOptions& opt = {},
                                   const IterationObserver& observer = {}) {
  return detail::monotone_iterate(
      t.n_states, [&t](const std::vector<double>& V) { return bellman_apply(t, V); }, opt, observer);
}

/**
 * Conserving selector. Among actions within `tie_tol` of the minimum, any
 * impulse wins over gradual actions (lowest index first), so states where
 * an impulse is optimal apply it immediately. Diverged states get gradual
 * action 0.
 */
inline StationaryPolicy extract_policy(const TildeModel& t, const std::vector<double>& V,
                                       double tie_tol = SolverOptions{}.tie_tol) {
  StationaryPolicy pol;
  pol.choice.resize(t.n_states, PolicyChoice::gradual(0));
  for (std::size_t x = 0; x < t.n_states; ++x) {
    if (std::isinf(V[x])) continue;
    std::vector<double> vals(t.n_actions(), kInfinity);
    double best = kInfinity;
    for (std::size_t act = 0; act < t.n_actions(); ++act) {
      if (is_degenerate_impulse(t, x, act)) continue;
      vals[act] = action_value(t, x, act, V);
      best = std::min(best, vals[act]);
    }
    if (std::isinf(best)) continue;
    std::size_t chosen = t.n_actions();
    for (std::size_t act = 0; act < t.n_actions() && chosen == t.n_actions(); ++act)
      if (t.actions[act].kind == ActionKind::impulse && vals[act] <= best + tie_tol) chosen = act;
    for (std::size_t act = 0; act < t.n_actions() && chosen == t.n_actions(); ++act)
      if (t.actions[act].kind == ActionKind::gradual && vals[act] <= best + tie_tol) chosen = act;
    pol.choice[x] = choice_of(t, chosen);
  }
  return pol;
}

/**
 * Value of a fixed stationary policy: the minimal fixed point >= 1 of
 * V ↦ M V with M(x,y) = weight(x, policy(x), y), by monotone iteration
 * from V ≡ 1. Divergence handling matches value_iterate.
 */
inline ValueSolution evaluate_policy(const TildeModel& t, const StationaryPolicy& pol,
                                     const SolverOptions& opt = {},
                                     const IterationObserver& observer = {}) {
  if (pol.choice.size() != t.n_states) throw std::invalid_argument("policy size does not match model");
  std::vector<std::size_t> act(t.n_states);
  for (std::size_t x = 0; x < t.n_states; ++x) act[x] = tilde_index(t, pol.choice[x]);
  return detail::monotone_iterate(
      t.n_states,
      [&](const std::vector<double>& V) {
        std::vector<double> out(t.n_states);
        for (std::size_t x = 0; x < t.n_states; ++x) out[x] = std::max(action_value(t, x, act[x], V), 1.0);
        return out;
      },
      opt, observer);
}

/// Residuals of the continuous-time optimality relations at one state.
struct StateResidual {
  bool finite = true;
  double gradual = kInfinity;   // rA: min_a [Σ_{y≠x} V(y) q(y|x,a) - (q_x(a) - c^G(x,a)) V(x)]
  double impulse = kInfinity;   // rB: min_b [Σ_y e^{c^I} V(y) Q(y|x,b)] - V(x)
  std::size_t best_gradual = 0;
  std::size_t best_impulse = 0;
  bool in_gradual_set = false;  // X^G
  bool in_impulse_set = false;  // X^I
};

struct ResidualReport {
  double tol = 0.0;
  std::vector<StateResidual> states;
  double worst_gradual_violation = 0.0;  // max(0, -rA) over finite states
  double worst_impulse_violation = 0.0;  // max(0, -rB) over finite states
  double worst_attainment_gap = 0.0;     // max(0, min(rA, rB)) over finite states

  /// Both inequalities hold and one of them is tight at every finite state.
  bool equations_hold() const {
    return worst_gradual_violation <= tol && worst_impulse_violation <= tol && worst_attainment_gap <= tol;
  }
  /// Every state outside X^I lies in X^G.
  bool complement_in_gradual_set() const {
    return std::all_of(states.begin(), states.end(),
                       [](const StateResidual& s) { return s.in_impulse_set || s.in_gradual_set; });
  }
};

/**
 * Checks V against the continuous-time optimality relations, computed
 * directly from q, Q and the costs (not through the reduced model). All
 * impulses take part here, including free self-loops.
 */
inline ResidualReport verify_optimality(const CtmdpModel& m, const std::vector<double>& V, double tol) {
  if (V.size() != m.n_states()) throw std::invalid_argument("value vector size does not match model");
  ResidualReport rep;
  rep.tol = tol;
  const std::size_t n = m.n_states();
  rep.states.resize(n);
  for (std::size_t x = 0; x < n; ++x) {
    StateResidual& s = rep.states[x];
    s.finite = std::isfinite(V[x]);

    double impulse_min = kInfinity;
    for (std::size_t b = 0; b < m.n_impulse(); ++b) {
      double sum = 0.0;
      for (std::size_t y = 0; y < n && std::isfinite(sum); ++y) {
        const double p = m.Q(x, b, y);
        if (p == 0.0) continue;
        sum = std::isinf(V[y]) ? kInfinity : sum + std::exp(m.c_impulse(x, b, y)) * V[y] * p;
      }
      if (sum < impulse_min) {
        impulse_min = sum;
        s.best_impulse = b;
      }
    }

    if (!s.finite) {
      s.in_impulse_set = std::isinf(impulse_min);
      continue;
    }

    for (std::size_t a = 0; a < m.n_gradual(); ++a) {
      double sum = 0.0;
      for (std::size_t y = 0; y < n && std::isfinite(sum); ++y) {
        const double rate = m.q(x, a, y);
        if (y == x || rate == 0.0) continue;
        sum = std::isinf(V[y]) ? kInfinity : sum + V[y] * rate;
      }
      const double r = sum - (m.exit_rate(x, a) - m.c_gradual(x, a)) * V[x];
      if (r < s.gradual) {
        s.gradual = r;
        s.best_gradual = a;
      }
    }
    s.impulse = impulse_min - V[x];
    s.in_gradual_set = std::abs(s.gradual) <= tol;
    s.in_impulse_set = std::abs(s.impulse) <= tol;
    rep.worst_gradual_violation = std::max(rep.worst_gradual_violation, -s.gradual);
    rep.worst_impulse_violation = std::max(rep.worst_impulse_violation, -s.impulse);
    rep.worst_attainment_gap = std::max(rep.worst_attainment_gap, std::min(s.gradual, s.impulse));
  }
  return rep;
}

}  // namespace gimdp
