#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gimdp/solver.hpp"
#include "gimdp/tilde.hpp"

namespace gimdp {

inline constexpr double kDefaultEnumerationCap = 1e6;

/// Raised when the policy space is too large to enumerate.
class EnumerationCapExceeded : public std::runtime_error {
 public:
  EnumerationCapExceeded(double count, double cap)
      : std::runtime_error("policy enumeration refused: " + std::to_string(static_cast<long double>(count)) +
                           " policies exceed cap " + std::to_string(static_cast<long double>(cap))),
        count_(count) {}
  double count() const { return count_; }

 private:
  double count_;
};

/// Admissible reduced-model actions per state (free self-impulses removed).
inline std::vector<std::vector<std::size_t>> admissible_actions(const TildeModel& t) {
  std::vector<std::vector<std::size_t>> out(t.n_states);
  for (std::size_t x = 0; x < t.n_states; ++x)
    for (std::size_t act = 0; act < t.n_actions(); ++act)
      if (!is_degenerate_impulse(t, x, act)) out[x].push_back(act);
  return out;
}

inline double policy_count(const TildeModel& t) {
  double count = 1.0;
  for (const auto& acts : admissible_actions(t)) count *= static_cast<double>(acts.size());
  return count;
}

/**
 * Every deterministic stationary policy over the admissible actions, in
 * mixed-radix order: state 0 is the fastest digit, action indices ascend.
 */
inline std::vector<StationaryPolicy> enumerate_policies(const TildeModel& t,
                                                        double cap = kDefaultEnumerationCap) {
  const auto acts = admissible_actions(t);
  const double count = policy_count(t);
  if (count > cap) throw EnumerationCapExceeded(count, cap);

  std::vector<StationaryPolicy> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> digit(t.n_states, 0);
  for (;;) {
    StationaryPolicy p;
    p.choice.reserve(t.n_states);
    for (std::size_t x = 0; x < t.n_states; ++x) p.choice.push_back(choice_of(t, acts[x][digit[x]]));
    out.push_back(std::move(p));
    std::size_t x = 0;
    while (x < t.n_states && ++digit[x] == acts[x].size()) digit[x++] = 0;
    if (x == t.n_states) break;
  }
  return out;
}

struct OracleResult {
  std::vector<double> values;
  std::vector<std::size_t> witness;  // per state, index of a policy attaining the minimum
  std::size_t n_policies = 0;
  bool all_evaluations_settled = true;  // false if some evaluation hit max_iter
};

/**
 * Pointwise minimum of the values of all deterministic stationary
 * policies. Bypasses the Bellman minimization entirely.
 */
inline OracleResult brute_force_value(const TildeModel& t, const SolverOptions& opt = {},
                                      double cap = kDefaultEnumerationCap) {
  const auto policies = enumerate_policies(t, cap);
  OracleResult res;
  res.values.assign(t.n_states, kInfinity);
  res.witness.assign(t.n_states, 0);
  res.n_policies = policies.size();
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const ValueSolution v = evaluate_policy(t, policies[i], opt);
    if (v.status == SolveStatus::max_iterations) res.all_evaluations_settled = false;
    for (std::size_t x = 0; x < t.n_states; ++x) {
      if (v.values[x] < res.values[x]) {
        res.values[x] = v.values[x];
        res.witness[x] = i;
      }
    }
  }
  return res;
}

/**
 * Direct linear solve for a policy's value. States whose chosen row is a
 * free self-loop have value 1; for the rest, V_T = (I - M_TT)^{-1} M_TB 1.
 * Returns nullopt when the spectral radius of M_TT is not below 1, where
 * the Neumann series (and hence the expectation) is not represented by
 * the solve.
 */
inline std::optional<std::vector<double>> linear_policy_value(const TildeModel& t, const StationaryPolicy& pol) {
  const std::size_t n = t.n_states;
  std::vector<std::size_t> act(n);
  std::vector<bool> boundary(n, false);
  for (std::size_t x = 0; x < n; ++x) {
    act[x] = tilde_index(t, pol.choice[x]);
    bool self = t.weight(x, act[x], x) == 1.0;
    for (std::size_t y = 0; y < n && self; ++y)
      if (y != x && t.weight(x, act[x], y) != 0.0) self = false;
    boundary[x] = self;
  }
  std::vector<std::size_t> interior;
  for (std::size_t x = 0; x < n; ++x)
    if (!boundary[x]) interior.push_back(x);

  std::vector<double> V(n, 1.0);
  if (interior.empty()) return V;

  const auto k = static_cast<Eigen::Index>(interior.size());
  Eigen::MatrixXd M(k, k);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const std::size_t x = interior[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j) M(i, j) = t.weight(x, act[x], interior[static_cast<std::size_t>(j)]);
    for (std::size_t y = 0; y < n; ++y)
      if (boundary[y]) rhs(i) += t.weight(x, act[x], y);
  }
  const double radius = M.eigenvalues().cwiseAbs().maxCoeff();
  if (!(radius < 1.0)) return std::nullopt;

  const Eigen::VectorXd sol = (Eigen::MatrixXd::Identity(k, k) - M).partialPivLu().solve(rhs);
  for (Eigen::Index i = 0; i < k; ++i) V[interior[static_cast<std::size_t>(i)]] = sol(i);
  return V;
}

}  // namespace gimdp
