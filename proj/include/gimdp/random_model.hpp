#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "gimdp/model.hpp"
#include "gimdp/simulator.hpp"

namespace gimdp {

struct RandomModelSpec {
  std::size_t min_states = 2;
  std::size_t max_states = 4;
  std::size_t max_gradual = 3;
  std::size_t max_impulse = 3;
  double max_rate = 5.0;          // off-diagonal rates in [0, max_rate]
  double max_cost_rate = 2.0;     // c^G in [0, max_cost_rate]
  double max_impulse_cost = 1.0;  // c^I in [0, max_impulse_cost]
  double sparsity = 0.3;          // chance an off-diagonal rate or impulse target is zero
};

/**
 * Random valid model. The last state is absorbing at zero cost (no jumps,
 * only free self-impulses), and every gradual action of every other state
 * jumps to it at a positive rate, so it is reachable from everywhere.
 */
inline CtmdpModel random_model(std::uint64_t seed, const RandomModelSpec& spec = {}) {
  if (spec.min_states < 2 || spec.max_states < spec.min_states)
    throw std::invalid_argument("random model needs at least two states");
  PathRng rng(path_seed(seed, 0));
  auto pick = [&rng](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1));
  };
  const std::size_t n = pick(spec.min_states, spec.max_states);
  const std::size_t na = pick(1, spec.max_gradual);
  const std::size_t nb = pick(1, spec.max_impulse);
  const std::size_t sink = n - 1;

  CtmdpModel m;
  for (std::size_t a = 0; a < na; ++a) m.gradual_names.push_back("g" + std::to_string(a));
  for (std::size_t b = 0; b < nb; ++b) m.impulse_names.push_back("i" + std::to_string(b));
  m.q = Array3<double>(n, na, n);
  m.Q = Array3<double>(n, nb, n);
  m.c_gradual = Array2<double>(n, na);
  m.c_impulse = Array3<double>(n, nb, n);

  for (std::size_t x = 0; x < sink; ++x) {
    for (std::size_t a = 0; a < na; ++a) {
      double out = 0.0;
      for (std::size_t y = 0; y < n; ++y) {
        if (y == x) continue;
        double r = rng.uniform() < spec.sparsity ? 0.0 : rng.uniform() * spec.max_rate;
        if (y == sink && r == 0.0) r = (0.05 + 0.95 * rng.uniform()) * spec.max_rate;
        m.q(x, a, y) = r;
        out += r;
      }
      m.q(x, a, x) = -out;
      m.c_gradual(x, a) = rng.uniform() * spec.max_cost_rate;
    }
    for (std::size_t b = 0; b < nb; ++b) {
      double total = 0.0;
      for (std::size_t y = 0; y < n; ++y) {
        const double p = rng.uniform() < spec.sparsity ? 0.0 : rng.uniform();
        m.Q(x, b, y) = p;
        total += p;
        m.c_impulse(x, b, y) = rng.uniform() * spec.max_impulse_cost;
      }
      if (total == 0.0) {
        m.Q(x, b, sink) = 1.0;
        continue;
      }
      // Normalize; put the rounding residue on the largest entry.
      std::size_t largest = 0;
      double acc = 0.0;
      for (std::size_t y = 0; y < n; ++y) {
        m.Q(x, b, y) /= total;
        if (m.Q(x, b, y) > m.Q(x, b, largest)) largest = y;
      }
      for (std::size_t y = 0; y < n; ++y)
        if (y != largest) acc += m.Q(x, b, y);
      m.Q(x, b, largest) = 1.0 - acc;
    }
  }
  for (std::size_t b = 0; b < nb; ++b) m.Q(sink, b, sink) = 1.0;
  m.w = default_bounding_function(m);
  return m;
}

}  // namespace gimdp
