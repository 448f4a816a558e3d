#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "renormflow/chain.hpp"
#include "renormflow/stats.hpp"

using namespace renormflow;

TEST(Chain, ZeroSetIsFixed) {
  const auto g = make_fixed_point(0, 0, 1, 1);
  EXPECT_TRUE(in_zero_set(g, {3.0, 0.0}));
  EXPECT_FALSE(in_zero_set(g, {3.0, 1.0}));
  McParams mc;
  EXPECT_EQ(step_chain({3.0, 0.0}, 1.0, g, mc), (Vec2{3.0, 0.0}));
  RngStream rng(1, 0);
  EXPECT_EQ(step_h_chain({0.0, 2.0}, 1.0, g, mc, rng), (Vec2{0.0, 2.0}));
}

// The kernel has mean x, so the chain is a martingale: E X(1) = x0.
TEST(Chain, HomogeneousChainIsMartingale) {
  const auto g = make_fixed_point(1, 1, 1, 1);
  McParams mc;
  const int n = 1500;
  std::vector<double> a(n), b(n);
  for (int k = 0; k < n; ++k) {
    const auto path = run_homogeneous_chain({1.0, 2.0}, 1.0, g, 1, mc.with_stream(k));
    ASSERT_EQ(path.states.size(), 2u);
    a[k] = path.states[1].x1;
    b[k] = path.states[1].x2;
  }
  EXPECT_NEAR(mean(a), 1.0, 4 * std::sqrt(sample_variance(a) / n) + 0.01);
  EXPECT_NEAR(mean(b), 2.0, 4 * std::sqrt(sample_variance(b) / n) + 0.02);
}

// Independent branching with b = c = 1 at theta = (1,1): X_i ~ Exp(1)
// independently, so E^h X_1 = E[X_1 (1 + X_1)] / 2 = 3/2 and the tilted
// variance is E[X^2 (1+X)]/2 - 9/4 = 7/4.
TEST(HChain, DoobSamplerMatchesSizeBiasedMean) {
  const auto g = make_fixed_point(1, 1, 0, 0);
  McParams mc;
  const int n = 3000;
  std::vector<double> a(n), b(n);
  for (int k = 0; k < n; ++k) {
    RngStream rng(77, static_cast<std::uint64_t>(k));
    const Vec2 y = step_h_chain({1.0, 1.0}, 1.0, g, mc, rng);
    a[k] = y.x1;
    b[k] = y.x2;
  }
  const double se = std::sqrt(1.75 / n);
  EXPECT_NEAR(mean(a), 1.5, 4 * se + 0.01);
  EXPECT_NEAR(mean(b), 1.5, 4 * se + 0.01);
  EXPECT_NEAR(sample_variance(a), 1.75, 0.25);
}

TEST(HChain, ResampleSamplerMatchesSizeBiasedMean) {
  const auto g = make_fixed_point(1, 1, 0, 0);
  McParams mc;
  HChainParams hp;
  hp.sampler = HSampler::resample;
  hp.batch = 64;
  const int n = 600;
  std::vector<double> a(n);
  for (int k = 0; k < n; ++k) {
    RngStream rng(78, static_cast<std::uint64_t>(k));
    a[k] = step_h_chain({1.0, 1.0}, 1.0, g, mc, rng, hp).x1;
  }
  EXPECT_NEAR(mean(a), 1.5, 4 * std::sqrt(1.75 / n) + 0.03);
  hp.batch = 0;
  RngStream rng(1, 0);
  EXPECT_THROW(step_h_chain({1.0, 1.0}, 1.0, g, mc, rng, hp), DomainError);
}

TEST(HChain, SaturatedStatesAreFrozen) {
  const auto g = make_fixed_point(0, 0, 1, 1);
  McParams mc;
  const auto path = run_h_chain({2e12, 3e12}, 1.0, g, 3, mc);
  for (const Vec2& x : path.states) EXPECT_EQ(x, (Vec2{2e12, 3e12}));
}

TEST(Trap, Classification) {
  const TrapThresholds t{1e3, 1e-3, 1e12};
  using B = EffectiveBoundary;
  EXPECT_EQ(classify({2e3, 5e3}, B::A1uA2, t), TrapClass::inf_inf);
  EXPECT_EQ(classify({2e3, 1e-4}, B::Origin, t), TrapClass::inf_0);
  EXPECT_EQ(classify({0.0, 5e3}, B::A1uA2, t), TrapClass::zero_inf);
  EXPECT_EQ(classify({4.0, 0.0}, B::A1uA2, t), TrapClass::boundary);
  EXPECT_EQ(classify({4.0, 0.0}, B::A2, t), TrapClass::unresolved);
  EXPECT_EQ(classify({0.0, 4.0}, B::A2, t), TrapClass::boundary);
  EXPECT_EQ(classify({0.0, 0.0}, B::Origin, t), TrapClass::boundary);
  EXPECT_EQ(classify({1.0, 1.0}, B::Origin, t), TrapClass::unresolved);
}

TEST(Trap, DistanceToZeroSet) {
  using B = EffectiveBoundary;
  const Vec2 x{2.0, 3.0};
  EXPECT_EQ(distance_to_zero_set(B::Origin, x), 3.0);
  EXPECT_EQ(distance_to_zero_set(B::A1, x), 3.0);
  EXPECT_EQ(distance_to_zero_set(B::A2, x), 2.0);
  EXPECT_EQ(distance_to_zero_set(B::A1uA2, x), 2.0);
}

TEST(Trap, ThresholdPreconditions) {
  const auto g = make_fixed_point(0, 0, 1, 1);
  McParams mc;
  EXPECT_THROW(trapping_probabilities({1, 1}, 1.0, g, 2, 2, {10.0, 1e-3, 1e12}, mc), DomainError);
  EXPECT_THROW(trapping_probabilities({1, 1}, 1.0, g, 2, 2, {1e3, 1e-3, 10.0}, mc), DomainError);
  EXPECT_THROW(trapping_probabilities({1, 1}, 1.0, g, 2, 0, {}, mc), DomainError);
}

TEST(Trap, ProbabilitiesSumToOneAndAreDeterministic) {
  const auto g = make_fixed_point(0, 0, 1, 1);
  McParams mc;
  mc.dt = 2e-3;
  const auto a = trapping_probabilities({1, 1}, 1.0, g, 4, 40, {}, mc, 1);
  const auto b = trapping_probabilities({1, 1}, 1.0, g, 4, 40, {}, mc, 3);
  EXPECT_NEAR(a.p_inf_inf + a.p_inf_0 + a.p_0_inf + a.p_boundary_g + a.p_unresolved, 1.0, 1e-12);
  EXPECT_EQ(a.p_inf_inf, b.p_inf_inf);
  EXPECT_EQ(a.p_unresolved, b.p_unresolved);
  EXPECT_EQ(a.n_chains, 40u);
  EXPECT_NEAR(a.se(0.25), std::sqrt(0.25 * 0.75 / 40), 1e-15);
}

TEST(BackwardChain, RunsFromCoarseToFine) {
  const auto g = make_fixed_point(1, 1, 1, 1);
  const std::vector<DiffusionPair> iterates{g, g, g};
  McParams mc;
  const auto path = run_backward_chain({1.0, 1.0}, CoefficientSequence({1.0, 2.0, 3.0}), iterates, mc);
  ASSERT_EQ(path.states.size(), 4u);
  EXPECT_EQ(path.states[0], (Vec2{1.0, 1.0}));
  ASSERT_EQ(path.coeffs.size(), 3u);
  EXPECT_EQ(path.coeffs[0], 3.0);
  EXPECT_EQ(path.coeffs[2], 1.0);
  for (const Vec2& x : path.states) EXPECT_TRUE(in_quadrant(x));
}
