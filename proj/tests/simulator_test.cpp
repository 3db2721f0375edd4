#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gimdp/random_model.hpp"
#include "gimdp/simulator.hpp"
#include "test_models.hpp"

namespace gimdp {
namespace {

constexpr RatParams kRat{2.0, 1.0, 0.5, 0.1};
const StationaryPolicy kNeverShoot{{PolicyChoice::gradual(0), PolicyChoice::gradual(0)}};
const StationaryPolicy kAlwaysShoot{{PolicyChoice::impulse(0), PolicyChoice::gradual(0)}};

TEST(PathRng, UniformsInUnitInterval) {
  PathRng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(PathRng, StreamsArePortable) {
  // Pinned: mt19937_64 output is fixed by the standard, splitmix64 by its
  // published constants.
  EXPECT_EQ(splitmix64_mix(0), 0u);
  EXPECT_EQ(path_seed(0, 0), splitmix64_mix(0x9E3779B97F4A7C15ULL));
  EXPECT_EQ(splitmix64_mix(0x9E3779B97F4A7C15ULL), 0xE220A8397B1DCDAFULL);
  std::mt19937_64 ref(5489u);
  PathRng rng(5489u);
  ref.discard(9999);
  PathRng skip(5489u);
  for (int i = 0; i < 9999; ++i) skip.uniform();
  EXPECT_EQ(skip.uniform(), static_cast<double>(ref() >> 11) * 0x1.0p-53);
  EXPECT_EQ(rng.uniform(), static_cast<double>(std::mt19937_64(5489u)() >> 11) * 0x1.0p-53);
}

TEST(PathRng, CategoricalSkipsZeroWeights) {
  PathRng rng(3);
  const double w[] = {0.0, 0.25, 0.0, 0.75, 0.0};
  std::size_t counts[5] = {};
  for (int i = 0; i < 20000; ++i) ++counts[rng.categorical([&](std::size_t k) { return w[k]; }, 5, 1.0)];
  EXPECT_EQ(counts[0] + counts[2] + counts[4], 0u);
  EXPECT_NEAR(static_cast<double>(counts[3]) / 20000.0, 0.75, 0.02);
}

TEST(SimulatePath, NeverShootSingleJump) {
  const auto m = rat_example(kRat);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto r = simulate_path(m, kNeverShoot, 0, seed);
    ASSERT_EQ(r.termination, Termination::absorbed_zero_cost);
    ASSERT_EQ(r.events.size(), 1u);
    const auto& ev = r.events[0];
    EXPECT_EQ(ev.kind, EventKind::natural_jump);
    EXPECT_EQ(ev.pre_state, 0u);
    EXPECT_EQ(ev.post_state, 1u);
    EXPECT_GT(ev.time, 0.0);
    EXPECT_DOUBLE_EQ(r.total_cost, kRat.l * ev.time);
  }
}

TEST(SimulatePath, AlwaysShootGeometricBlock) {
  const auto m = rat_example(kRat);
  double shots = 0.0;
  const int n = 4000;
  for (int seed = 0; seed < n; ++seed) {
    const auto r = simulate_path(m, kAlwaysShoot, 0, static_cast<std::uint64_t>(seed));
    ASSERT_EQ(r.termination, Termination::absorbed_zero_cost);
    ASSERT_EQ(r.events.size(), 1u);
    const auto& ev = r.events[0];
    ASSERT_EQ(ev.kind, EventKind::impulse_block);
    EXPECT_EQ(ev.time, 0.0);
    ASSERT_GE(ev.interventions.size(), 1u);
    for (std::size_t k = 0; k + 1 < ev.interventions.size(); ++k) EXPECT_EQ(ev.interventions[k].post_state, 0u);
    EXPECT_EQ(ev.interventions.back().post_state, 1u);
    EXPECT_EQ(ev.post_state, 1u);
    EXPECT_NEAR(r.total_cost, kRat.C * static_cast<double>(ev.interventions.size()), 1e-12);
    shots += static_cast<double>(ev.interventions.size());
  }
  // Geometric(p): mean 1/p = 2, variance (1-p)/p^2 = 2.
  EXPECT_NEAR(shots / n, 2.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(SimulatePath, IdleImpulseHitsCap) {
  const auto m = rat_example(kRat);
  const StationaryPolicy idle{{PolicyChoice::impulse(1), PolicyChoice::gradual(0)}};
  const auto r = simulate_path(m, idle, 0, 1, {.horizon = 10.0, .impulse_cap = 500});
  EXPECT_EQ(r.termination, Termination::impulse_cap_hit);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].interventions.size(), 500u);
  EXPECT_EQ(r.total_cost, 0.0);
}

TEST(SimulatePath, HeldForeverAtPositiveCostRate) {
  auto m = rat_example(kRat);
  // Make "done" costly but still absorbing; w must grow accordingly.
  m.c_gradual(1, 0) = 0.5;
  m.w = default_bounding_function(m);
  const auto r = simulate_path(m, kNeverShoot, 1, 3, {.horizon = 8.0});
  EXPECT_EQ(r.termination, Termination::horizon_reached);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].kind, EventKind::censored);
  EXPECT_DOUBLE_EQ(r.total_cost, 4.0);
}

TEST(SimulatePath, HorizonCutsSojourn) {
  const auto m = rat_example({0.01, 1.0, 0.5, 0.1});
  const auto r = simulate_path(m, kNeverShoot, 0, 11, {.horizon = 1e-6});
  EXPECT_EQ(r.termination, Termination::horizon_reached);
  EXPECT_DOUBLE_EQ(r.total_cost, 1e-6);
}

TEST(SimulatePath, JumpCap) {
  const auto m = testing::ring_model(3, 1, 1);
  StationaryPolicy hold{{PolicyChoice::gradual(0), PolicyChoice::gradual(0), PolicyChoice::gradual(0)}};
  const auto r = simulate_path(m, hold, 0, 5, {.horizon = 1e9, .jump_cap = 25});
  EXPECT_EQ(r.termination, Termination::jump_cap_hit);
  EXPECT_EQ(r.events.size(), 25u);
}

TEST(SimulatePath, RejectsBadInputs) {
  const auto m = rat_example(kRat);
  EXPECT_THROW(simulate_path(m, kNeverShoot, 2, 0), std::out_of_range);
  EXPECT_THROW(simulate_path(m, kNeverShoot, 0, 0, {.horizon = 0.0}), std::invalid_argument);
  EXPECT_THROW(simulate_path(m, {{PolicyChoice::impulse(5), PolicyChoice::gradual(0)}}, 0, 0), std::out_of_range);
}

TEST(SimulatePath, EventOrderAndCostBookkeeping) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto m = random_model(seed);
    const auto t = build_tilde(m);
    const auto pol = extract_policy(t, value_iterate(t).values);
    for (std::uint64_t ps = 0; ps < 20; ++ps) {
      const auto r = simulate_path(m, pol, 0, ps);
      double sum = 0.0, last_time = 0.0;
      EventKind last_kind = EventKind::impulse_block;
      for (std::size_t i = 0; i < r.events.size(); ++i) {
        const auto& ev = r.events[i];
        sum += ev.cost;
        ASSERT_GE(ev.cost, 0.0);
        if (i > 0) {
          // Only an impulse block may share the instant of the preceding jump.
          if (ev.kind == EventKind::impulse_block)
            ASSERT_GE(ev.time, last_time);
          else
            ASSERT_GT(ev.time, last_time);
          ASSERT_FALSE(ev.kind == EventKind::impulse_block && last_kind == EventKind::impulse_block);
        }
        last_time = ev.time;
        last_kind = ev.kind;
      }
      EXPECT_NEAR(r.total_cost, sum, 1e-12 * std::max(1.0, sum));
    }
  }
}

TEST(EstimateUtility, ZeroCostModelExactlyOne) {
  const auto m = testing::zero_cost_model();
  for (const auto& pol : {StationaryPolicy{{PolicyChoice::gradual(1), PolicyChoice::gradual(0)}},
                          StationaryPolicy{{PolicyChoice::impulse(0), PolicyChoice::impulse(0)}}}) {
    const auto r = estimate_utility(m, pol, 0, 200, 1, {.horizon = 5.0, .impulse_cap = 50});
    EXPECT_EQ(r.estimate, 1.0);
    EXPECT_EQ(r.std_error, 0.0);
  }
}

TEST(EstimateUtility, RatRegimesWithinThreeStandardErrors) {
  const auto m = rat_example(kRat);
  const auto wait = estimate_utility(m, kNeverShoot, 0, 20000, 17, {.horizon = 50.0});
  EXPECT_LE(std::abs(wait.estimate - 2.0), 3.0 * wait.std_error + wait.truncation_bias_bound);
  EXPECT_GE(wait.estimate, 1.0);
  const auto shoot = estimate_utility(m, kAlwaysShoot, 0, 20000, 17);
  EXPECT_LE(std::abs(shoot.estimate - testing::rat_shoot_value(kRat)), 3.0 * shoot.std_error);
  EXPECT_EQ(shoot.count(Termination::absorbed_zero_cost), 20000u);
  EXPECT_EQ(shoot.truncation_bias_bound, 0.0);
}

TEST(EstimateUtility, BitIdenticalAcrossThreadCounts) {
  const auto m = random_model(4);
  const auto t = build_tilde(m);
  const auto pol = extract_policy(t, value_iterate(t).values);
  const auto one = estimate_utility(m, pol, 0, 3001, 99, {}, 1);
  EXPECT_EQ(one, estimate_utility(m, pol, 0, 3001, 99, {}, 1));
  EXPECT_EQ(one, estimate_utility(m, pol, 0, 3001, 99, {}, 3));
  EXPECT_EQ(one, estimate_utility(m, pol, 0, 3001, 99, {}, 8));
  EXPECT_NE(one.estimate, estimate_utility(m, pol, 0, 3001, 100, {}, 1).estimate);
}

TEST(EstimateUtility, TruncationFractionReported) {
  const auto m = rat_example({0.01, 1.0, 0.5, 0.1});
  const auto r = estimate_utility(m, kNeverShoot, 0, 1000, 5, {.horizon = 1.0});
  // P(tau > 1) = e^{-0.01} ~ 0.99.
  EXPECT_GT(r.truncation_bias_bound, 0.95);
  EXPECT_EQ(r.count(Termination::horizon_reached) + r.count(Termination::absorbed_zero_cost), 1000u);
}

TEST(EstimateUtility, RejectsTooFewPaths) {
  EXPECT_THROW(estimate_utility(rat_example(kRat), kNeverShoot, 0, 1, 0), std::invalid_argument);
}

TEST(SojournLaw, ExponentialKolmogorovSmirnov) {
  const auto m = rat_example(kRat);
  std::vector<double> sojourns;
  for (std::uint64_t i = 0; i < 10000; ++i) sojourns.push_back(simulate_path(m, kNeverShoot, 0, path_seed(2024, i)).events[0].time);
  const double d = testing::ks_statistic(sojourns, [](double t) { return 1.0 - std::exp(-kRat.mu * t); });
  EXPECT_LT(d, testing::ks_critical(0.001, sojourns.size()));
  // A wrong rate is rejected.
  const double wrong = testing::ks_statistic(sojourns, [](double t) { return 1.0 - std::exp(-1.8 * t); });
  EXPECT_GT(wrong, testing::ks_critical(0.001, sojourns.size()));
}

TEST(WriteTrace, OneLinePerEvent) {
  const auto m = rat_example(kRat);
  const auto r = simulate_path(m, kAlwaysShoot, 0, 8);
  std::ostringstream os;
  write_trace(os, m, r);
  const std::string s = os.str();
  EXPECT_NE(s.find("impulse_block 0 shoot->"), std::string::npos);
  EXPECT_NE(s.find("# termination absorbed_zero_cost"), std::string::npos);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), static_cast<long>(r.events.size() + 2));
}

TEST(DefaultHorizon, CoversSlowRates) {
  const auto m = rat_example({0.01, 0.0, 0.5, 0.1});
  EXPECT_GT(default_horizon(m, kNeverShoot), 1000.0);
  EXPECT_EQ(default_horizon(m, kAlwaysShoot), 50.0);
}

}  // namespace
}  // namespace gimdp
