#include <gtest/gtest.h>

#include <cmath>

#include "renormflow/chart.hpp"
#include "renormflow/diffusion.hpp"

using namespace renormflow;

TEST(FixedPoint, EvaluatesMixture) {
  const auto g = make_fixed_point(1.0, 2.0, 0.5, 3.0);
  const Values v = g.eval({2.0, 3.0});
  EXPECT_DOUBLE_EQ(v[0], 1.0 * 2.0 + 0.5 * 6.0);
  EXPECT_DOUBLE_EQ(v[1], 2.0 * 3.0 + 3.0 * 6.0);
}

TEST(FixedPoint, DegenerateCoefficientsRejected) {
  EXPECT_THROW(make_fixed_point(1, 0, 0, 0), DegeneratePair);
  EXPECT_THROW(make_fixed_point(0, 1, 0, 0), DegeneratePair);
  EXPECT_THROW(make_fixed_point(0, 0, 0, 0), DegeneratePair);
  EXPECT_THROW(make_fixed_point(-1, 1, 0, 0), MalformedFunction);
  EXPECT_NO_THROW(make_fixed_point(1, 0, 0, 1));
}

TEST(FixedPoint, EffectiveBoundaryOfExtremalCases) {
  EXPECT_EQ(make_fixed_point(1, 1, 0, 0).boundary(), EffectiveBoundary::Origin);
  EXPECT_EQ(make_fixed_point(1, 0, 0, 1).boundary(), EffectiveBoundary::A2);
  EXPECT_EQ(make_fixed_point(0, 1, 1, 0).boundary(), EffectiveBoundary::A1);
  EXPECT_EQ(make_fixed_point(0, 0, 1, 1).boundary(), EffectiveBoundary::A1uA2);
  EXPECT_EQ(make_fixed_point(1, 1, 1, 1).boundary(), EffectiveBoundary::Origin);
}

// The tags follow from where g vanishes: compare with direct evaluation.
TEST(FixedPoint, BoundaryMatchesZeroSet) {
  for (int mask = 0; mask < 16; ++mask) {
    const double b1 = mask & 1, b2 = (mask >> 1) & 1, c1 = (mask >> 2) & 1, c2 = (mask >> 3) & 1;
    if ((b1 + c1) * (b2 + c2) == 0) continue;
    const auto g = make_fixed_point(b1, b2, c1, c2);
    const Values on_a1 = g.eval({2.0, 0.0});
    const Values on_a2 = g.eval({0.0, 2.0});
    const bool zero_a1 = on_a1[0] == 0 && on_a1[1] == 0;
    const bool zero_a2 = on_a2[0] == 0 && on_a2[1] == 0;
    EffectiveBoundary expect = EffectiveBoundary::Origin;
    if (zero_a1 && zero_a2) expect = EffectiveBoundary::A1uA2;
    else if (zero_a1) expect = EffectiveBoundary::A1;
    else if (zero_a2) expect = EffectiveBoundary::A2;
    EXPECT_EQ(g.boundary(), expect) << mask;
  }
}

TEST(FixedPoint, SlopesReproduceTheFunction) {
  const auto g = make_fixed_point(1.5, 0.5, 2.0, 0.25);
  ASSERT_TRUE(g.slopes());
  for (const Vec2 x : {Vec2{0.3, 7.0}, Vec2{4.0, 0.0}, Vec2{11.0, 2.0}}) {
    const Values v = g.eval(x);
    const auto w = g.slopes()->mixture(x);
    EXPECT_DOUBLE_EQ(v[0], w[0]);
    EXPECT_DOUBLE_EQ(v[1], w[1]);
  }
}

TEST(DiffusionPair, RejectsBadTags) {
  auto fn = [](const Vec2& x) { return Values{x.x1, x.x2}; };
  EXPECT_THROW(DiffusionPair(fn, BoundaryProperty::D2, BoundaryProperty::D2, "bad"), MalformedFunction);
  EXPECT_THROW(DiffusionPair(fn, BoundaryProperty::D1, BoundaryProperty::D1, "bad"), MalformedFunction);
}

TEST(DiffusionPair, SpotCheckFindsBoundaryViolations) {
  // g1 does not vanish on {x1 = 0}
  EXPECT_THROW(DiffusionPair([](const Vec2& x) { return Values{1.0 + x.x1, x.x2}; }, BoundaryProperty::D1,
                             BoundaryProperty::D2, "g1 offset"),
               MalformedFunction);
  // tagged D12 but g1 = x1 is nonzero on {x2 = 0}
  EXPECT_THROW(DiffusionPair([](const Vec2& x) { return Values{x.x1, x.x2}; }, BoundaryProperty::D12,
                             BoundaryProperty::D2, "wrong tag"),
               MalformedFunction);
  // negative values
  EXPECT_THROW(DiffusionPair([](const Vec2& x) { return Values{-x.x1, x.x2}; }, BoundaryProperty::D1,
                             BoundaryProperty::D2, "negative"),
               MalformedFunction);
  // vanishes inside the quadrant
  EXPECT_THROW(DiffusionPair([](const Vec2& x) { return Values{x.x1 * (x.x2 > 5.0), x.x2}; },
                             BoundaryProperty::D1, BoundaryProperty::D2, "not positive"),
               MalformedFunction);
}

TEST(DiffusionPair, EvalRejectsNonFiniteValues) {
  const auto g = DiffusionPair::unchecked([](const Vec2& x) { return Values{x.x1 / 0.0, x.x2}; },
                                          BoundaryProperty::D1, BoundaryProperty::D2, "nan");
  EXPECT_THROW(g.eval({1.0, 1.0}), MalformedFunction);
}

TEST(Polynomial, TagsAndGrowth) {
  PolynomialDiffusion p;
  p.alpha = {0.5, 0.0};
  p.beta = {1.0, 1.0};
  const auto g = make_polynomial(p);
  EXPECT_EQ(g.bp1(), BoundaryProperty::D1);
  EXPECT_EQ(g.bp2(), BoundaryProperty::D2);
  ASSERT_TRUE(g.growth());
  EXPECT_EQ(g.growth()->a, 0.5);
  EXPECT_FALSE(g.slopes());
  const auto rep = check_growth(g, g.growth()->a, g.growth()->C, 2000, 1);
  EXPECT_TRUE(rep.passed) << rep.max_ratio;

  PolynomialDiffusion q;
  q.gamma = {1.0, 1.0};
  const auto mut = make_polynomial(q);
  EXPECT_EQ(mut.bp1(), BoundaryProperty::D12);
  EXPECT_EQ(mut.bp2(), BoundaryProperty::D12);
  EXPECT_THROW(make_polynomial(PolynomialDiffusion{{1, 0}, {1, 0}, {0, 0}}), DegeneratePair);
}

TEST(GrowthCheck, DetectsViolation) {
  const auto g = make_fixed_point(1, 1, 1, 1);
  EXPECT_TRUE(check_growth(g, 0.0, g.growth()->C, 1000, 3).passed);
  // C = 0.5 is too small: g1 + g2 = x1 + x2 + 2 x1 x2 exceeds 0.5 h at (1,1).
  EXPECT_FALSE(check_growth(g, 0.0, 0.5, 1000, 3).passed);
}

TEST(PerturbedFixedPoint, ValueAndSlopes) {
  const auto g = make_perturbed_fixed_point(1, 1, 1, 1, 1, 1);
  const Values v = g.eval({1.0, 1.0});
  EXPECT_DOUBLE_EQ(v[0], 1.0 + 1.0 + 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(v[1], 1.0 + 1.0 + 1.0 / 3.0);
  ASSERT_TRUE(g.slopes());
  EXPECT_EQ(g.slopes()->inf_inf.g1, 1.0);
  // The bump is o(x1 x2) along the diagonal.
  const double t = 1e6;
  EXPECT_NEAR(g.eval({t, t})[0] / (t * t), 1.0, 1e-5);
  EXPECT_TRUE(check_growth(g, 0.0, g.growth()->C, 2000, 5).passed);
  EXPECT_THROW(make_perturbed_fixed_point(1, 1, 1, 1, -2, 0), MalformedFunction);
}

TEST(Chart, RoundTrip) {
  for (const Vec2 x : {Vec2{0, 0}, Vec2{1, 3}, Vec2{1e-9, 1e6}, Vec2{0.25, 0.0}}) {
    const Vec2 y = phi(x);
    EXPECT_GE(y.x1, 0.0);
    EXPECT_LT(y.x1, 1.0);
    const Vec2 back = phi_inv(y);
    EXPECT_NEAR(back.x1, x.x1, 1e-9 * (1 + x.x1));
    EXPECT_NEAR(back.x2, x.x2, 1e-9 * (1 + x.x2));
  }
  EXPECT_EQ(phi({1.0, 3.0}), (Vec2{0.5, 0.75}));
  EXPECT_THROW(phi_inv({1.0, 0.5}), AnchorError);
  EXPECT_THROW(phi_inv({0.5, -0.1}), AnchorError);
}

TEST(Chart, HWeight) { EXPECT_EQ(h_weight({1.0, 2.0}), 6.0); }
