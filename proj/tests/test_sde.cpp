#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "renormflow/sde.hpp"
#include "renormflow/stats.hpp"

using namespace renormflow;

namespace {

// Square-root diffusion dX = c (theta - X) dt + sqrt(2 b X) dB: exact mean
// and variance at time t from x0.
double cir_mean(double x0, double c, double theta, double t) {
  return theta + (x0 - theta) * std::exp(-c * t);
}
double cir_var(double x0, double c, double theta, double b, double t) {
  const double e = std::exp(-c * t);
  const double s2 = 2.0 * b;
  return x0 * s2 / c * (e - e * e) + theta * s2 / (2.0 * c) * (1 - e) * (1 - e);
}

void check_cir(Scheme scheme, double tol_mean, double tol_var) {
  const double c = 1.0, b = 1.0, T = 1.0;
  const Vec2 theta{1.0, 2.0};
  const Vec2 x0{0.5, 3.0};
  const SdeParams p(c, theta, 1e-3, make_fixed_point(b, b, 0, 0), scheme);
  const int paths = 4000;
  std::vector<double> a(paths), bb(paths);
  for (int k = 0; k < paths; ++k) {
    RngStream rng(9, static_cast<std::uint64_t>(k));
    const auto path = simulate_path(x0, p, T, rng);
    a[k] = path.back().x1;
    bb[k] = path.back().x2;
  }
  const double v1 = cir_var(x0.x1, c, theta.x1, b, T);
  const double v2 = cir_var(x0.x2, c, theta.x2, b, T);
  EXPECT_NEAR(mean(a), cir_mean(x0.x1, c, theta.x1, T), tol_mean * std::sqrt(v1 / paths));
  EXPECT_NEAR(mean(bb), cir_mean(x0.x2, c, theta.x2, T), tol_mean * std::sqrt(v2 / paths));
  EXPECT_NEAR(sample_variance(a) / v1, 1.0, tol_var);
  EXPECT_NEAR(sample_variance(bb) / v2, 1.0, tol_var);
}

}  // namespace

TEST(Sde, MomentMatchedReproducesCirMoments) { check_cir(Scheme::moment_matched, 4.0, 0.1); }

TEST(Sde, EulerReproducesCirMoments) { check_cir(Scheme::euler, 4.0, 0.12); }

TEST(Sde, QeDrawHasTheMatchedMoments) {
  RngStream r(4, 0);
  for (const auto& [m, s2] : {std::pair{1.0, 0.5}, std::pair{1.0, 4.0}, std::pair{0.01, 1e-4}}) {
    const int n = 200000;
    std::vector<double> xs(n);
    for (double& x : xs) {
      x = detail::qe_draw(m, s2, r.normal());
      ASSERT_GE(x, 0.0);
    }
    EXPECT_NEAR(mean(xs) / m, 1.0, 0.02) << m << " " << s2;
    EXPECT_NEAR(sample_variance(xs) / s2, 1.0, 0.06) << m << " " << s2;
  }
  EXPECT_EQ(detail::qe_draw(0.0, 1.0, 0.3), 0.0);
  EXPECT_EQ(detail::qe_draw(2.0, 0.0, 0.3), 2.0);
  EXPECT_TRUE(std::isfinite(detail::qe_draw(1e-300, 1e-300, 0.5)));
}

TEST(Sde, QeAffineIsContinuousInTheRate) {
  const double z = 0.4;
  const double at0 = detail::qe_affine(1.0, 0.5, 0.0, 0.8, z, 1e-3);
  const double near = detail::qe_affine(1.0, 0.5, 1e-10, 0.8, z, 1e-3);
  EXPECT_NEAR(at0, near, 1e-12);
  EXPECT_GT(detail::qe_affine(1.0, 0.5, -2.0, 0.8, z, 1e-3), 0.0);
}

TEST(Sde, AxesAreAbsorbing) {
  // theta_2 = 0 with g2 vanishing on {x2 = 0}: X2 stays at 0.
  const SdeParams p(1.0, {1.0, 0.0}, 1e-3, make_fixed_point(1, 1, 1, 1));
  RngStream rng(1, 0);
  const auto path = simulate_path({2.0, 0.0}, p, 2.0, rng);
  for (const Vec2& x : path) {
    ASSERT_EQ(x.x2, 0.0);
    ASSERT_GE(x.x1, 0.0);
  }
}

TEST(Sde, PathLengthAndStart) {
  const SdeParams p(1.0, {1.0, 1.0}, 0.01, make_fixed_point(1, 1, 0, 0));
  RngStream rng(1, 0);
  const auto path = simulate_path({1.0, 1.0}, p, 0.5, rng);
  EXPECT_EQ(path.size(), 51u);
  EXPECT_EQ(path.front(), (Vec2{1.0, 1.0}));
  EXPECT_THROW(simulate_path({1.0, 1.0}, p, 0.001, rng), DomainError);
  EXPECT_THROW(simulate_path({-1.0, 1.0}, p, 1.0, rng), DomainError);
}

TEST(Sde, ForbiddenOriginStart) {
  const SdeParams mut(1.0, {1.0, 1.0}, 1e-3, make_fixed_point(0, 0, 1, 1));
  RngStream rng(1, 0);
  EXPECT_THROW(simulate_path({0.0, 0.0}, mut, 1.0, rng), ForbiddenStart);
  const SdeParams ind(1.0, {1.0, 1.0}, 1e-3, make_fixed_point(1, 1, 0, 0));
  EXPECT_NO_THROW(simulate_path({0.0, 0.0}, ind, 0.1, rng));
}

TEST(Sde, ParameterValidation) {
  const auto g = make_fixed_point(1, 1, 0, 0);
  EXPECT_THROW(SdeParams(0.0, {1, 1}, 1e-3, g), DomainError);
  EXPECT_THROW(SdeParams(1.0, {1, 1}, 0.0, g), DomainError);
  EXPECT_THROW(SdeParams(1.0, {-1, 1}, 1e-3, g), DomainError);
  PolynomialDiffusion q;
  q.alpha = {1.0, 0.0};
  q.beta = {1.0, 1.0};
  EXPECT_THROW(SdeParams(1.0, {1, 1}, 1e-3, make_polynomial(q)), DomainError);
}

TEST(Sde, EquilibriumSamplerIsDeterministic) {
  const SdeParams p(1.0, {1.0, 2.0}, 1e-3, make_fixed_point(1, 1, 1, 1));
  RngStream a(3, 5);
  RngStream b(3, 5);
  const auto ma = sample_equilibrium(p, 50, 1.0, 0.5, a);
  const auto mb = sample_equilibrium(p, 50, 1.0, 0.5, b);
  EXPECT_EQ(ma.points, mb.points);
  EXPECT_EQ(ma.seed, 3u);
  EXPECT_EQ(ma.stream, 5u);
  EXPECT_EQ(ma.n(), 50u);
}

TEST(Sde, EquilibriumStartInZeroSet) {
  const SdeParams p(1.0, {2.0, 0.0}, 1e-3, make_fixed_point(0, 0, 1, 1));
  EXPECT_EQ(equilibrium_start(p), (Vec2{2.0, 0.0}));
  RngStream rng(1, 0);
  const auto m = sample_equilibrium(p, 10, 1.0, 1.0, rng);
  for (const Vec2& x : m.points) EXPECT_EQ(x, (Vec2{2.0, 0.0}));
}

TEST(Sde, DefaultBurnIn) {
  EXPECT_NEAR(default_burn_in(2.0), 3.0, 1e-12);
  EXPECT_THROW(default_burn_in(1.0, 1.5), DomainError);
}
