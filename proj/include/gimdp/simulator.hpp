#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "gimdp/model.hpp"
#include "gimdp/solver.hpp"

namespace gimdp {

// Random streams
//
// Path i of a run with master seed s uses the engine
//   std::mt19937_64(splitmix64_mix(s + (i + 1) * 0x9E3779B97F4A7C15))
// and draws uniforms as (engine() >> 11) * 2^-53 in [0, 1). Exponential
// variates are -log1p(-u) / rate; categorical draws scan the cumulative
// weights in ascending index order. No std:: distribution is used, so a
// seed produces the same path with any standard library.

inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t path_index) {
  return splitmix64_mix(master_seed + (path_index + 1) * 0x9E3779B97F4A7C15ULL);
}

class PathRng {
 public:
  explicit PathRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  /// Index drawn with probability weights[i] / total. Zero-weight entries
  /// are never returned.
  template <class Weights>
  std::size_t categorical(const Weights& weights, std::size_t size, double total) {
    const double target = uniform() * total;
    double acc = 0.0;
    std::size_t last = size;
    for (std::size_t i = 0; i < size; ++i) {
      if (weights(i) <= 0.0) continue;
      last = i;
      acc += weights(i);
      if (target < acc) return i;
    }
    return last;
  }

 private:
  std::mt19937_64 engine_;
};

enum class EventKind { natural_jump, impulse_block, censored };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::natural_jump: return "natural_jump";
    case EventKind::impulse_block: return "impulse_block";
    case EventKind::censored: return "censored";
  }
  return "unknown";
}

enum class Termination { absorbed_zero_cost, horizon_reached, impulse_cap_hit, jump_cap_hit };

inline constexpr std::size_t kTerminationKinds = 4;

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::absorbed_zero_cost: return "absorbed_zero_cost";
    case Termination::horizon_reached: return "horizon_reached";
    case Termination::impulse_cap_hit: return "impulse_cap_hit";
    case Termination::jump_cap_hit: return "jump_cap_hit";
  }
  return "unknown";
}

struct Intervention {
  std::size_t impulse;
  std::size_t post_state;
};

/**
 * One event of a path. A natural jump carries the gradual cost of the
 * sojourn that ended with it. An impulse block lists every impulse applied
 * at that instant. A censored event closes a sojourn cut off by the
 * horizon (or held forever at positive cost rate).
 */
struct PathEvent {
  double time = 0.0;
  EventKind kind = EventKind::natural_jump;
  std::size_t pre_state = 0;
  std::size_t gradual_action = 0;  // for natural_jump / censored
  std::vector<Intervention> interventions;
  std::size_t post_state = 0;
  double cost = 0.0;
};

struct PathRecord {
  std::vector<PathEvent> events;
  double total_cost = 0.0;
  Termination termination = Termination::absorbed_zero_cost;
};

struct SimulationOptions {
  double horizon = 50.0;
  std::size_t impulse_cap = 100'000;
  std::size_t jump_cap = 10'000'000;
};

namespace detail {

inline void check_policy(const CtmdpModel& m, const StationaryPolicy& pol) {
  if (pol.choice.size() != m.n_states()) throw std::invalid_argument("policy size does not match model");
  for (const auto& c : pol.choice) {
    const std::size_t limit = c.kind == ActionKind::gradual ? m.n_gradual() : m.n_impulse();
    if (c.index >= limit) throw std::out_of_range("policy action index out of range");
  }
}

template <bool Record>
PathRecord run_path(const CtmdpModel& m, const StationaryPolicy& pol, std::size_t x0, std::uint64_t seed,
                    const SimulationOptions& opt) {
  const std::size_t n = m.n_states();
  PathRng rng(seed);
  PathRecord rec;
  double t = 0.0;
  std::size_t x = x0;
  std::size_t n_events = 0;

  auto push = [&](PathEvent&& ev) {
    rec.total_cost += ev.cost;
    if constexpr (Record) rec.events.push_back(std::move(ev));
  };

  for (;;) {
    if (n_events >= opt.jump_cap) {
      rec.termination = Termination::jump_cap_hit;
      return rec;
    }
    const PolicyChoice c = pol.choice[x];
    if (c.kind == ActionKind::impulse) {
      PathEvent ev;
      ev.time = t;
      ev.kind = EventKind::impulse_block;
      ev.pre_state = x;
      std::size_t applied = 0;
      bool capped = false;
      while (pol.choice[x].kind == ActionKind::impulse) {
        if (applied == opt.impulse_cap) {
          capped = true;
          break;
        }
        const std::size_t b = pol.choice[x].index;
        const std::size_t y = rng.categorical([&](std::size_t i) { return m.Q(x, b, i); }, n, 1.0);
        ev.cost += m.c_impulse(x, b, y);
        if constexpr (Record) ev.interventions.push_back({b, y});
        x = y;
        ++applied;
      }
      ev.post_state = x;
      push(std::move(ev));
      ++n_events;
      if (capped) {
        rec.termination = Termination::impulse_cap_hit;
        return rec;
      }
      continue;
    }

    const std::size_t a = c.index;
    const double rate = m.exit_rate(x, a);
    const double cost_rate = m.c_gradual(x, a);
    const double sojourn = rate > 0.0 ? rng.exponential(rate) : kInfinity;
    if (t + sojourn >= opt.horizon) {
      if (rate == 0.0 && cost_rate == 0.0) {
        rec.termination = Termination::absorbed_zero_cost;
        return rec;
      }
      PathEvent ev;
      ev.time = opt.horizon;
      ev.kind = EventKind::censored;
      ev.pre_state = ev.post_state = x;
      ev.gradual_action = a;
      ev.cost = cost_rate * (opt.horizon - t);
      push(std::move(ev));
      rec.termination = Termination::horizon_reached;
      return rec;
    }
    const std::size_t y = rng.categorical(
        [&](std::size_t i) { return i == x ? 0.0 : m.q(x, a, i); }, n, rate);
    PathEvent ev;
    t += sojourn;
    ev.time = t;
    ev.kind = EventKind::natural_jump;
    ev.pre_state = x;
    ev.gradual_action = a;
    ev.post_state = y;
    ev.cost = cost_rate * sojourn;
    push(std::move(ev));
    ++n_events;
    x = y;
  }
}

}  // namespace detail

/**
 * Samples one trajectory under a deterministic stationary policy. An
 * impulse state triggers a block of simultaneous impulses that ends at the
 * first state whose choice is gradual; a gradual state is held for an
 * Exponential(q_x(a)) sojourn, accruing c^G per unit time.
 */
inline PathRecord simulate_path(const CtmdpModel& m, const StationaryPolicy& pol, std::size_t x0,
                                std::uint64_t seed, const SimulationOptions& opt = {}) {
  detail::check_policy(m, pol);
  if (x0 >= m.n_states()) throw std::out_of_range("initial state out of range");
  if (!(opt.horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  return detail::run_path<true>(m, pol, x0, seed, opt);
}

struct SimulationReport {
  double estimate = 0.0;   // mean of exp(total cost)
  double std_error = 0.0;  // sample sd / sqrt(n_paths)
  std::size_t n_paths = 0;
  std::array<std::size_t, kTerminationKinds> terminations{};
  /// Fraction of paths stopped by the horizon or a cap. Such paths
  /// contribute exp(cost so far) and bias the estimate downwards.
  double truncation_bias_bound = 0.0;

  std::size_t count(Termination t) const { return terminations[static_cast<std::size_t>(t)]; }
  bool operator==(const SimulationReport&) const = default;
};

/**
 * Monte Carlo estimate of E[exp(total cost)] from x0. Paths are seeded
 * from (master_seed, index) and reduced in index order, so the report is
 * bit-identical for any thread count.
 */
inline SimulationReport estimate_utility(const CtmdpModel& m, const StationaryPolicy& pol, std::size_t x0,
                                         std::size_t n_paths, std::uint64_t master_seed,
                                         const SimulationOptions& opt = {}, unsigned threads = 1) {
  detail::check_policy(m, pol);
  if (n_paths < 2) throw std::invalid_argument("n_paths must be at least 2");
  if (x0 >= m.n_states()) throw std::out_of_range("initial state out of range");
  if (!(opt.horizon > 0.0)) throw std::invalid_argument("horizon must be positive");

  std::vector<double> utility(n_paths);
  std::vector<Termination> term(n_paths);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const PathRecord r = detail::run_path<false>(m, pol, x0, path_seed(master_seed, i), opt);
      utility[i] = std::exp(r.total_cost);
      term[i] = r.termination;
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_paths)));
  if (threads == 1) {
    work(0, n_paths);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n_paths + threads - 1) / threads;
    for (std::size_t begin = 0; begin < n_paths; begin += chunk)
      pool.emplace_back(work, begin, std::min(n_paths, begin + chunk));
  }

  SimulationReport rep;
  rep.n_paths = n_paths;
  double sum = 0.0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    sum += utility[i];
    ++rep.terminations[static_cast<std::size_t>(term[i])];
  }
  rep.estimate = sum / static_cast<double>(n_paths);
  double ss = 0.0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    const double d = utility[i] - rep.estimate;
    ss += d * d;
  }
  rep.std_error = std::sqrt(ss / static_cast<double>(n_paths - 1)) / std::sqrt(static_cast<double>(n_paths));
  const std::size_t truncated = n_paths - rep.count(Termination::absorbed_zero_cost);
  rep.truncation_bias_bound = static_cast<double>(truncated) / static_cast<double>(n_paths);
  return rep;
}

/**
 * Horizon long enough that, for sojourns at the slowest positive exit
 * rate used by the policy, surviving n_states consecutive sojourns has
 * probability well under 1e-3. Never below 50.
 */
inline double default_horizon(const CtmdpModel& m, const StationaryPolicy& pol) {
  double slowest = kInfinity;
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    if (pol.choice[x].kind != ActionKind::gradual) continue;
    const double r = m.exit_rate(x, pol.choice[x].index);
    if (r > 0.0) slowest = std::min(slowest, r);
  }
  if (std::isinf(slowest)) return 50.0;
  return std::max(50.0, static_cast<double>(m.n_states()) * std::log(1000.0) * 2.0 / slowest);
}

/// One line per event: time kind pre_state action(s) post_state cost.
/// Impulse blocks list "name->state" pairs separated by ';'.
inline void write_trace(std::ostream& os, const CtmdpModel& m, const PathRecord& rec) {
  os << "# time kind pre_state actions post_state cost_increment\n";
  const auto old_precision = os.precision(17);
  for (const auto& ev : rec.events) {
    os << ev.time << ' ' << to_string(ev.kind) << ' ' << ev.pre_state << ' ';
    if (ev.kind == EventKind::impulse_block) {
      for (std::size_t i = 0; i < ev.interventions.size(); ++i)
        os << (i ? ";" : "") << m.impulse_names[ev.interventions[i].impulse] << "->"
           << ev.interventions[i].post_state;
      if (ev.interventions.empty()) os << '-';
    } else {
      os << m.gradual_names[ev.gradual_action];
    }
    os << ' ' << ev.post_state << ' ' << ev.cost << '\n';
  }
  os << "# termination " << to_string(rec.termination) << " total_cost " << rec.total_cost << '\n';
  os.precision(old_precision);
}

}  // namespace gimdp
