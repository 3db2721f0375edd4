#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gimdp/array.hpp"
#include "gimdp/model.hpp"

namespace gimdp {

enum class ActionKind { gradual, impulse };

/// One action of the reduced model, tagged with its origin.
struct TildeAction {
  ActionKind kind;
  std::size_t index;  // index within A^G or A^I
  std::string name;

  bool operator==(const TildeAction&) const = default;
};

/**
 * Discrete-time reduction of a CtmdpModel. Actions are ordered with all
 * gradual actions first, then all impulse actions; action index ã is
 * stable for a given model.
 *
 * For gradual a:  P(y|x,a) = q(y|x,a)/w(x) + 1{y=x}
 *                 weight   = w(x)/(w(x) - c^G(x,a)) * P
 * For impulse b:  P(y|x,b) = Q(y|x,b)
 *                 weight   = exp(c^I(x,b,y)) * P
 *
 * weight holds exp(cost) * P pre-multiplied; it is the only form the
 * Bellman operator needs.
 */
struct TildeModel {
  std::size_t n_states = 0;
  std::vector<TildeAction> actions;
  Array3<double> P;       // (x, ã, y)
  Array3<double> weight;  // (x, ã, y)

  std::size_t n_actions() const { return actions.size(); }

  bool operator==(const TildeModel&) const = default;
};

inline TildeModel build_tilde(const CtmdpModel& m) {
  require_valid(m);
  const std::size_t n = m.n_states();
  const std::size_t na = m.n_gradual();
  const std::size_t nb = m.n_impulse();

  TildeModel t;
  t.n_states = n;
  t.actions.reserve(na + nb);
  for (std::size_t a = 0; a < na; ++a) t.actions.push_back({ActionKind::gradual, a, m.gradual_names[a]});
  for (std::size_t b = 0; b < nb; ++b) t.actions.push_back({ActionKind::impulse, b, m.impulse_names[b]});
  t.P = Array3<double>(n, na + nb, n);
  t.weight = Array3<double>(n, na + nb, n);

  for (std::size_t x = 0; x < n; ++x) {
    const double w = m.w[x];
    for (std::size_t a = 0; a < na; ++a) {
      // w - c >= 1 + q_x(a) >= 1, so the factor is finite and >= 1.
      const double factor = w / (w - m.c_gradual(x, a));
      for (std::size_t y = 0; y < n; ++y) {
        double p = m.q(x, a, y) / w;
        if (y == x) p = 1.0 - m.exit_rate(x, a) / w;
        t.P(x, a, y) = p;
        t.weight(x, a, y) = factor * p;
      }
    }
    for (std::size_t b = 0; b < nb; ++b) {
      for (std::size_t y = 0; y < n; ++y) {
        const double p = m.Q(x, b, y);
        t.P(x, na + b, y) = p;
        t.weight(x, na + b, y) = p == 0.0 ? 0.0 : std::exp(m.c_impulse(x, b, y)) * p;
      }
    }
  }
  return t;
}

/// Σ_y weight(x, ã, y), the one-step expectation of exp(cost).
inline double row_weight_sum(const TildeModel& t, std::size_t x, std::size_t action) {
  double s = 0.0;
  const double* row = t.weight.row(x, action);
  for (std::size_t y = 0; y < t.n_states; ++y) s += row[y];
  return s;
}

/**
 * True when impulse ã at x is a free self-loop (P(x|x,ã) = 1, weight 1).
 * Applying it changes nothing and, repeated, accumulates infinitely many
 * impulses at one instant. Such actions are left out of every
 * minimization and policy enumeration.
 */
inline bool is_degenerate_impulse(const TildeModel& t, std::size_t x, std::size_t action) {
  return t.actions[action].kind == ActionKind::impulse && t.P(x, action, x) == 1.0 &&
         t.weight(x, action, x) == 1.0;
}

}  // namespace gimdp
