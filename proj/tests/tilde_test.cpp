#include <gtest/gtest.h>

#include <cmath>

#include "gimdp/random_model.hpp"
#include "gimdp/tilde.hpp"
#include "test_models.hpp"

namespace gimdp {
namespace {

constexpr std::size_t kPresent = 0, kDone = 1;
constexpr std::size_t kWait = 0, kShoot = 1, kIdle = 2;  // reduced-model action indices

TEST(BuildTilde, ActionOrderGradualFirst) {
  const auto t = build_tilde(rat_example({2.0, 1.0, 0.5, 0.1}));
  ASSERT_EQ(t.n_actions(), 3u);
  EXPECT_EQ(t.actions[kWait].kind, ActionKind::gradual);
  EXPECT_EQ(t.actions[kShoot].kind, ActionKind::impulse);
  EXPECT_EQ(t.actions[kShoot].index, 0u);
  EXPECT_EQ(t.actions[kShoot].name, "shoot");
  EXPECT_EQ(t.actions[kIdle].index, 1u);
}

TEST(BuildTilde, RatGradualRow) {
  const auto t = build_tilde(rat_example({2.0, 1.0, 0.5, 0.1}));
  // w = 4: P(done) = 2/4, self-loop 1 - 2/4, cost factor 4/(4-1).
  EXPECT_DOUBLE_EQ(t.P(kPresent, kWait, kDone), 0.5);
  EXPECT_DOUBLE_EQ(t.P(kPresent, kWait, kPresent), 0.5);
  EXPECT_DOUBLE_EQ(t.weight(kPresent, kWait, kDone), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(t.weight(kPresent, kWait, kPresent), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(row_weight_sum(t, kPresent, kWait), 4.0 / 3.0);
}

TEST(BuildTilde, FreeAbsorbingStateIsIdentityRow) {
  const auto t = build_tilde(rat_example({2.0, 1.0, 0.5, 0.1}));
  EXPECT_EQ(t.P(kDone, kWait, kDone), 1.0);
  EXPECT_EQ(t.weight(kDone, kWait, kDone), 1.0);
  EXPECT_EQ(t.P(kDone, kWait, kPresent), 0.0);
  EXPECT_EQ(row_weight_sum(t, kDone, kWait), 1.0);
}

TEST(BuildTilde, RatShootRow) {
  const auto t = build_tilde(rat_example({2.0, 1.0, 0.5, 0.1}));
  EXPECT_DOUBLE_EQ(t.P(kPresent, kShoot, kDone), 0.5);
  EXPECT_NEAR(t.weight(kPresent, kShoot, kDone), 0.552585459, 1e-9);
  EXPECT_NEAR(row_weight_sum(t, kPresent, kShoot), 1.1051709181, 1e-10);
}

TEST(BuildTilde, DegenerateImpulses) {
  const auto t = build_tilde(rat_example({2.0, 1.0, 0.5, 0.1}));
  EXPECT_FALSE(is_degenerate_impulse(t, kPresent, kWait));
  EXPECT_FALSE(is_degenerate_impulse(t, kPresent, kShoot));
  EXPECT_TRUE(is_degenerate_impulse(t, kPresent, kIdle));
  EXPECT_TRUE(is_degenerate_impulse(t, kDone, kShoot));
  EXPECT_TRUE(is_degenerate_impulse(t, kDone, kIdle));
  // A free gradual self-loop is not an impulse and stays admissible.
  EXPECT_FALSE(is_degenerate_impulse(t, kDone, kWait));
}

TEST(BuildTilde, RejectsInvalidModel) {
  auto m = rat_example({2.0, 1.0, 0.5, 0.1});
  m.w[0] = 3.0;
  EXPECT_THROW(build_tilde(m), ModelError);
}

TEST(BuildTilde, Deterministic) {
  const auto m = random_model(9);
  EXPECT_EQ(build_tilde(m), build_tilde(m));
}

TEST(TildeProperties, InvariantsOnRandomModels) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto m = random_model(seed);
    if (seed % 2) {
      for (auto& w : m.w) w += 0.75 * static_cast<double>(seed % 5);
    }
    const auto t = build_tilde(m);
    const std::size_t na = m.n_gradual();
    for (std::size_t x = 0; x < t.n_states; ++x) {
      for (std::size_t act = 0; act < t.n_actions(); ++act) {
        double row = 0.0;
        for (std::size_t y = 0; y < t.n_states; ++y) {
          const double p = t.P(x, act, y);
          ASSERT_GE(p, 0.0);
          ASSERT_LE(p, 1.0);
          ASSERT_GE(t.weight(x, act, y), p);
          row += p;
        }
        ASSERT_NEAR(row, 1.0, 1e-12) << "seed " << seed;
        ASSERT_GE(row_weight_sum(t, x, act), 1.0 - 1e-12);

        if (act < na) {
          const double w = m.w[x], c = m.c_gradual(x, act);
          ASSERT_GE(w - c, 1.0 + m.exit_rate(x, act) - 1e-12);
          const double self = t.P(x, act, x);
          EXPECT_GT(self, 0.0);
          EXPECT_NEAR(self, 1.0 - m.exit_rate(x, act) / w, 1e-15);
          for (std::size_t y = 0; y < t.n_states; ++y) {
            if (y != x) {
              EXPECT_DOUBLE_EQ(t.P(x, act, y), m.q(x, act, y) / w);
            }
            EXPECT_NEAR(t.weight(x, act, y), w / (w - c) * t.P(x, act, y), 1e-14);
          }
        } else {
          const std::size_t b = act - na;
          for (std::size_t y = 0; y < t.n_states; ++y) {
            EXPECT_EQ(t.P(x, act, y), m.Q(x, b, y));
            EXPECT_NEAR(t.weight(x, act, y), std::exp(m.c_impulse(x, b, y)) * m.Q(x, b, y), 1e-14);
          }
        }
      }
    }
  }
}

}  // namespace
}  // namespace gimdp
