#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "renormflow/diffusion.hpp"
#include "renormflow/error.hpp"
#include "renormflow/rng.hpp"
#include "renormflow/vec2.hpp"

namespace renormflow {

// Time discretization used by advance().
//  moment_matched: per component, the quadratic-exponential transition of a
//    square-root diffusion with the coefficient g_i(x)/x_i frozen over the
//    step. Conditional means are exact for the linear drift and conditional
//    variances match to O(dt^2); mass near the axes is handled by an atom at 0.
//  euler: full-truncation Euler-Maruyama with adaptive Brownian-bridge
//    refinement of large moves.
enum class Scheme { moment_matched, euler };

// dX_i = c (theta_i - X_i) dt + sqrt(2 g_i(X)) dB_i on [0,inf)^2.
struct SdeParams {
  double c = 1.0;
  Vec2 theta{};
  double dt = 1e-3;
  DiffusionPair g;
  Scheme scheme = Scheme::moment_matched;

  SdeParams(double c_, Vec2 theta_, double dt_, DiffusionPair g_,
            Scheme scheme_ = Scheme::moment_matched)
      : c(c_), theta(theta_), dt(dt_), g(std::move(g_)), scheme(scheme_) {
    if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("SDE drift rate c must be > 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("time step must be > 0");
    if (!in_quadrant(theta)) throw DomainError("theta must lie in the quadrant");
    if (g.growth() && !(g.growth()->a < c)) {
      throw DomainError("growth coefficient a must be below c for the equilibrium to have "
                        "finite second moments");
    }
  }
};

// Sample cloud approximating the equilibrium of the SDE, with what is needed
// to regenerate it bit-for-bit.
struct EmpiricalMeasure {
  std::vector<Vec2> points;
  SdeParams params;
  double burn_in = 0.0;
  double thin = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::size_t n() const { return points.size(); }
};

// Burn-in after which the mean-reversion bound |E X_i(t) - theta_i| <=
// |x_i - theta_i| e^{-ct} has dropped below tol times the initial offset.
inline double default_burn_in(double c, double tol = std::exp(-6.0)) {
  if (!(tol > 0.0 && tol < 1.0)) throw DomainError("burn-in tolerance must lie in (0,1)");
  return std::log(1.0 / tol) / c;
}

namespace detail {

inline Vec2 euler(const Vec2& x, const SdeParams& p, const Values& gx, double h, double dw1,
                  double dw2) {
  return {std::max(0.0, x.x1 + p.c * (p.theta.x1 - x.x1) * h + std::sqrt(2.0 * gx[0]) * dw1),
          std::max(0.0, x.x2 + p.c * (p.theta.x2 - x.x2) * h + std::sqrt(2.0 * gx[1]) * dw2)};
}

inline Values checked(const SdeParams& p, const Vec2& x) {
  const Values v = p.g(x);
  if (!(v[0] >= 0.0 && v[1] >= 0.0 && std::isfinite(v[0]) && std::isfinite(v[1]))) {
    return p.g.eval(x);  // throws with a descriptive message
  }
  return v;
}

inline constexpr double kMaxRelativeMove = 0.5;
inline constexpr int kMaxRefinements = 6;

// Euler step over [t, t+h] driven by Brownian increments (dw1, dw2). When a
// component moves by more than half of (1 + x_i) the interval is split and
// the increments are refined by a Brownian bridge, so the path law is
// unchanged and consumption of the stream stays deterministic.
inline Vec2 refine(const Vec2& x, const SdeParams& p, double h, double dw1, double dw2,
                   RngStream& rng, int depth) {
  const Values gx = checked(p, x);
  const Vec2 y = euler(x, p, gx, h, dw1, dw2);
  const bool big_move = std::abs(y.x1 - x.x1) > kMaxRelativeMove * (1.0 + x.x1) ||
                        std::abs(y.x2 - x.x2) > kMaxRelativeMove * (1.0 + x.x2);
  if (!big_move || depth >= kMaxRefinements) return y;
  const auto [z1, z2] = rng.normal_pair();
  const double s = std::sqrt(h / 4.0);
  const double a1 = 0.5 * dw1 + s * z1;
  const double a2 = 0.5 * dw2 + s * z2;
  const Vec2 mid = refine(x, p, 0.5 * h, a1, a2, rng, depth + 1);
  return refine(mid, p, 0.5 * h, dw1 - a1, dw2 - a2, rng, depth + 1);
}

// Draw from the two-moment-matched quadratic-exponential law with mean m
// and variance s2 on [0, inf); z is a standard normal and the exponential
// branch uses 1 - Phi(z).
inline double qe_draw(double m, double s2, double z) {
  if (!(s2 > 0.0) || !(m > 0.0)) return std::max(0.0, m);
  const double ratio = std::sqrt(s2) / m;
  const double psi = ratio * ratio;
  if (!(psi < 1e300)) return 0.0;
  // Small-variance limit of the quadratic branch; avoids overflow in b2.
  if (psi < 1e-10) return std::max(0.0, m + std::sqrt(s2) * z);
  if (psi <= 1.5) {
    const double inv = 2.0 / psi;
    const double b2 = inv - 1.0 + std::sqrt(inv * (inv - 1.0));
    const double w = std::sqrt(b2) + z;
    return m / (1.0 + b2) * w * w;
  }
  const double p = (psi - 1.0) / (psi + 1.0);
  const double tail = 0.5 * std::erfc(z * (std::numbers::sqrt2 / 2.0));
  if (tail >= 1.0 - p) return 0.0;
  return m / (1.0 - p) * std::log((1.0 - p) / tail);
}

// Constants of the quadratic-exponential transition over one step of length
// h for dX = k (mu - X) dt + sqrt(2 g) dB, with g(x)/x frozen over the step.
struct QeStep {
  double decay;      // exp(-k h)
  double var_lin;    // 2 e (1-e) / k, multiplies g(x)
  double var_const;  // (1-e)^2 / k, multiplies mu g(x)/x

  QeStep(double k, double h)
      : decay(std::exp(-k * h)),
        var_lin(2.0 * decay * (1.0 - decay) / k),
        var_const((1.0 - decay) * (1.0 - decay) / k) {}

  double operator()(double x, double mu, double gx, double z) const {
    const double m = mu + (x - mu) * decay;
    double s2 = gx * var_lin;
    if (x > 0.0 && mu > 0.0) s2 += mu * (gx / x) * var_const;
    return qe_draw(m, s2, z);
  }
};

// Same transition for the drift a - k X with any real k (k <= 0 allowed).
inline double qe_affine(double x, double a, double k, double gx, double z, double h) {
  const double kh = k * h;
  const double e = std::exp(-kh);
  // (1 - e) / k, continuous at k = 0.
  const double one_minus_e_over_k = std::abs(kh) < 1e-12 ? h : -std::expm1(-kh) / k;
  const double m = x * e + a * one_minus_e_over_k;
  double s2 = 2.0 * gx * e * one_minus_e_over_k;
  if (x > 0.0 && a > 0.0) s2 += a * (gx / x) * one_minus_e_over_k * one_minus_e_over_k;
  return qe_draw(m, s2, z);
}

// Advances states of one SdeParams; caches the per-step constants.
class Stepper {
 public:
  explicit Stepper(const SdeParams& p) : p_(p), qe_(p.c, p.dt), rt_(std::sqrt(p.dt)) {}

  Vec2 operator()(const Vec2& x, RngStream& rng) const {
    if (p_.scheme == Scheme::moment_matched) {
      const Values gx = checked(p_, x);
      const auto [z1, z2] = rng.normal_pair();
      return {qe_(x.x1, p_.theta.x1, gx[0], z1), qe_(x.x2, p_.theta.x2, gx[1], z2)};
    }
    const auto [z1, z2] = rng.normal_pair();
    return refine(x, p_, p_.dt, z1 * rt_, z2 * rt_, rng, 0);
  }

 private:
  const SdeParams& p_;
  QeStep qe_;
  double rt_;
};

}  // namespace detail

// Single full-truncation Euler-Maruyama step with the given standard normals.
inline Vec2 step(const Vec2& x, const SdeParams& p, std::pair<double, double> noise) {
  const Values gx = p.g.eval(x);
  const double rt = std::sqrt(p.dt);
  return detail::euler(x, p, gx, p.dt, noise.first * rt, noise.second * rt);
}

// One step of length dt using the stream and the scheme of p.
inline Vec2 advance(const Vec2& x, const SdeParams& p, RngStream& rng) {
  return detail::Stepper(p)(x, rng);
}

// Starting at the origin is excluded when theta is interior and a component
// vanishes on both axes.
inline bool forbidden_start(const Vec2& x0, const SdeParams& p) {
  const bool interior_theta = p.theta.x1 > 0.0 && p.theta.x2 > 0.0;
  const bool d12 = p.g.bp1() == BoundaryProperty::D12 || p.g.bp2() == BoundaryProperty::D12;
  return x0.x1 == 0.0 && x0.x2 == 0.0 && interior_theta && d12;
}

inline std::size_t step_count(double T, double dt) {
  return static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
}

// States at times 0, dt, 2dt, ..., ceil(T/dt) dt.
inline std::vector<Vec2> simulate_path(const Vec2& x0, const SdeParams& p, double T, RngStream& rng) {
  if (!in_quadrant(x0)) throw DomainError("start point must lie in the quadrant");
  if (T < p.dt * (1.0 - 1e-9)) throw DomainError("path length T must be at least dt");
  if (forbidden_start(x0, p)) {
    throw ForbiddenStart("start at (0,0) with interior theta and a D12 component is not well posed");
  }
  const std::size_t n = step_count(T, p.dt);
  std::vector<Vec2> path;
  path.reserve(n + 1);
  path.push_back(x0);
  const detail::Stepper next(p);
  Vec2 x = x0;
  for (std::size_t k = 0; k < n; ++k) {
    x = next(x, rng);
    path.push_back(x);
  }
  return path;
}

// Start point for equilibrium sampling. If theta lies in the zero set of g
// the equilibrium is the point mass at theta. Otherwise each component with
// theta_i > 0 starts at theta_i + 1 and each with theta_i = 0 at 0, which
// keeps the absorbing axes exact and never hits the excluded origin start.
inline Vec2 equilibrium_start(const SdeParams& p) {
  const Values gt = p.g.eval(p.theta);
  if (gt[0] == 0.0 && gt[1] == 0.0) return p.theta;
  return {p.theta.x1 > 0.0 ? p.theta.x1 + 1.0 : 0.0, p.theta.x2 > 0.0 ? p.theta.x2 + 1.0 : 0.0};
}

// One long chain: discard burn_in, then record every thin time units.
inline EmpiricalMeasure sample_equilibrium(const SdeParams& p, std::size_t n, double burn_in,
                                           double thin, RngStream& rng,
                                           std::optional<Vec2> start = std::nullopt) {
  if (n < 1) throw DomainError("need at least one sample");
  if (!(burn_in >= 0.0)) throw DomainError("burn-in must be >= 0");
  if (!(thin > 0.0)) throw DomainError("thinning interval must be > 0");
  const Vec2 x0 = start.value_or(equilibrium_start(p));
  if (!in_quadrant(x0)) throw DomainError("start point must lie in the quadrant");
  if (forbidden_start(x0, p)) {
    throw ForbiddenStart("start at (0,0) with interior theta and a D12 component is not well posed");
  }
  EmpiricalMeasure m{{}, p, burn_in, thin, rng.master_seed(), rng.stream_id()};
  m.points.reserve(n);
  const auto burn_steps = static_cast<std::size_t>(std::llround(burn_in / p.dt));
  const auto thin_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(thin / p.dt)));
  const detail::Stepper next(p);
  Vec2 x = x0;
  for (std::size_t k = 0; k < burn_steps; ++k) x = next(x, rng);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t k = 0; k < thin_steps; ++k) x = next(x, rng);
    m.points.push_back(x);
  }
  return m;
}

}  // namespace renormflow
