#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "renormflow/diffusion.hpp"
#include "renormflow/error.hpp"
#include "renormflow/parallel.hpp"
#include "renormflow/renorm.hpp"
#include "renormflow/rng.hpp"
#include "renormflow/sde.hpp"

namespace renormflow {

struct ChainPath {
  // Homogeneous and h-chains: states[n] = X(n), n = 0..depth.
  // Backward chain: states[0] = M(-k), ..., states[k] = M(0).
  std::vector<Vec2> states;
  std::vector<double> coeffs;
  std::string g_source;
};

struct TrapThresholds {
  double big = 1e3;
  double small = 1e-3;
  // A chain with both coordinates beyond this is frozen; from there the
  // probability of leaving the (inf,inf) class is below 2/saturation.
  double saturation = 1e12;
};

struct TrapReport {
  double p_inf_inf = 0.0;
  double p_inf_0 = 0.0;
  double p_0_inf = 0.0;
  double p_boundary_g = 0.0;
  double p_unresolved = 0.0;
  std::size_t depth = 0;
  std::size_t n_chains = 0;
  TrapThresholds thresholds;

  // Binomial standard error of an estimated class probability.
  double se(double p) const {
    return n_chains ? std::sqrt(p * (1.0 - p) / static_cast<double>(n_chains)) : 0.0;
  }
};

inline bool in_zero_set(const DiffusionPair& g, const Vec2& x) {
  const Values v = g(x);
  return v[0] == 0.0 && v[1] == 0.0;
}

// One draw from Gamma^{c,g}_x: the last state of a burn-in run started at
// the equilibrium start point for attraction point x.
inline Vec2 step_chain(const Vec2& x, double c, const DiffusionPair& g, const McParams& mc,
                       RngStream& rng) {
  if (in_zero_set(g, x)) return x;
  const SdeParams p(c, x, mc.dt, g, mc.scheme);
  const auto m = sample_equilibrium(p, 1, mc.burn_in_for(c), mc.thin_for(c), rng);
  return m.points.front();
}

inline Vec2 step_chain(const Vec2& x, double c, const DiffusionPair& g, const McParams& mc) {
  RngStream rng(mc.seed, mc.stream);
  return step_chain(x, c, g, mc, rng);
}

// X(0) = x0, X(n+1) ~ Gamma^{c,g}_{X(n)}.
inline ChainPath run_homogeneous_chain(const Vec2& x0, double c, const DiffusionPair& g,
                                       std::size_t depth, const McParams& mc) {
  if (!in_quadrant(x0)) throw DomainError("chain start must lie in the quadrant");
  require_operator_domain(c, g);
  RngStream rng(mc.seed, mc.stream);
  ChainPath path{{x0}, std::vector<double>(depth, c), g.label()};
  path.states.reserve(depth + 1);
  Vec2 x = x0;
  for (std::size_t n = 0; n < depth; ++n) {
    x = step_chain(x, c, g, mc, rng);
    path.states.push_back(x);
  }
  return path;
}

inline constexpr std::size_t kDefaultHBatch = 64;

// Sampler for the size-biased kernel h(y) Gamma^{c,g}_x(dy) / h(x).
//  doob:     the SDE run for the burn-in time T under the Doob transform by
//            u(t,y) = E[h(X_T) | X_t = y] = (1 + m_1)(1 + m_2), where
//            m_i = theta_i + (y_i - theta_i) e^{-c(T-t)}. The transformed
//            process has the extra drift 2 g_i(y) d_i log u, and its time-T
//            law is h(y) P[X_T in dy] / u(0, x0), with no weights.
//  resample: a batch from Gamma^{c,g}_x (thinned states of one chain), one
//            kept with probability proportional to h.
enum class HSampler { doob, resample };

inline const char* to_string(HSampler s) { return s == HSampler::doob ? "doob" : "resample"; }

struct HChainParams {
  HSampler sampler = HSampler::doob;
  std::size_t batch = kDefaultHBatch;
};

namespace detail {

// With the moment-matched scheme the extra drift D_i(y) = 2 g_i(y) kappa_i(y),
// kappa_i = d_i log u, is replaced over each step by its tangent at the
// current state in y_i (with g_i / y_i frozen), so each step is an affine
// drift transition. The tangent of this concave function has a nonnegative
// intercept. The Euler scheme adds D explicitly.
inline Vec2 h_step_doob(const SdeParams& p, double T, RngStream& rng) {
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(T / p.dt)));
  const double c = p.c;
  const double h = p.dt;
  const double grow = std::exp(c * h);
  const double rt = std::sqrt(h);
  // e^{-c s}, s the time remaining at the start of the current step.
  double es = std::exp(-c * static_cast<double>(n) * h);
  Vec2 y = equilibrium_start(p);
  for (std::size_t k = 0; k < n; ++k) {
    const Values gy = checked(p, y);
    const auto [z1, z2] = rng.normal_pair();
    const double z[2] = {z1, z2};
    Vec2 out;
    for (int i = 0; i < 2; ++i) {
      const double A = 1.0 + p.theta[i] * (1.0 - es);
      const double denom = A + y[i] * es;
      const double kappa = es / denom;
      if (p.scheme == Scheme::moment_matched) {
        if (!(y[i] > 0.0)) {
          out[i] = qe_affine(y[i], c * p.theta[i], c, gy[i], z[i], h);
          continue;
        }
        const double beta = gy[i] / y[i];
        const double slope = 2.0 * beta * kappa * A / denom;
        const double intercept = 2.0 * beta * y[i] * kappa * (y[i] * es) / denom;
        out[i] = qe_affine(y[i], c * p.theta[i] + intercept, c - slope, gy[i], z[i], h);
      } else {
        const double drift = c * (p.theta[i] - y[i]) + 2.0 * gy[i] * kappa;
        out[i] = std::max(0.0, y[i] + drift * h + std::sqrt(2.0 * gy[i]) * z[i] * rt);
      }
    }
    y = out;
    es *= grow;
  }
  return y;
}

inline Vec2 h_step_resample(const SdeParams& p, const McParams& mc, std::size_t batch,
                            RngStream& rng) {
  const auto m = sample_equilibrium(p, batch, mc.burn_in_for(p.c), mc.thin_for(p.c), rng);
  double total = 0.0;
  for (const Vec2& y : m.points) total += h_weight(y);
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (const Vec2& y : m.points) {
    acc += h_weight(y);
    if (u < acc) return y;
  }
  return m.points.back();
}

}  // namespace detail

// One step of the h-transformed chain from x.
inline Vec2 step_h_chain(const Vec2& x, double c, const DiffusionPair& g, const McParams& mc,
                         RngStream& rng, const HChainParams& hp = {}) {
  if (hp.batch < 1) throw DomainError("h-chain batch must be >= 1");
  if (in_zero_set(g, x)) return x;
  const SdeParams p(c, x, mc.dt, g, mc.scheme);
  if (hp.sampler == HSampler::doob) return detail::h_step_doob(p, mc.burn_in_for(c), rng);
  return detail::h_step_resample(p, mc, hp.batch, rng);
}

// States with both coordinates at or beyond `saturation` are held fixed.
inline ChainPath run_h_chain(const Vec2& x0, double c, const DiffusionPair& g, std::size_t depth,
                             const McParams& mc, const HChainParams& hp = {},
                             double saturation = TrapThresholds{}.saturation) {
  if (!in_quadrant(x0)) throw DomainError("chain start must lie in the quadrant");
  require_operator_domain(c, g);
  RngStream rng(mc.seed, mc.stream);
  ChainPath path{{x0}, std::vector<double>(depth, c), g.label() + " h-transform"};
  path.states.reserve(depth + 1);
  Vec2 x = x0;
  for (std::size_t n = 0; n < depth; ++n) {
    if (!(x.x1 >= saturation && x.x2 >= saturation)) x = step_h_chain(x, c, g, mc, rng, hp);
    path.states.push_back(x);
  }
  return path;
}

enum class TrapClass { inf_inf, inf_0, zero_inf, boundary, unresolved };

inline double distance_to_zero_set(EffectiveBoundary b, const Vec2& x) {
  switch (b) {
    case EffectiveBoundary::Origin: return std::max(x.x1, x.x2);
    case EffectiveBoundary::A1: return x.x2;
    case EffectiveBoundary::A2: return x.x1;
    case EffectiveBoundary::A1uA2: return std::min(x.x1, x.x2);
  }
  return x.x1 + x.x2;
}

inline TrapClass classify(const Vec2& x, EffectiveBoundary b, const TrapThresholds& t) {
  if (x.x1 > t.big && x.x2 > t.big) return TrapClass::inf_inf;
  if (x.x1 > t.big && x.x2 < t.small) return TrapClass::inf_0;
  if (x.x2 > t.big && x.x1 < t.small) return TrapClass::zero_inf;
  if (distance_to_zero_set(b, x) < t.small) return TrapClass::boundary;
  return TrapClass::unresolved;
}

// Runs n_chains independent h-chains (chain k on stream mc.stream + k) and
// classifies each final state.
inline TrapReport trapping_probabilities(const Vec2& x0, double c, const DiffusionPair& g,
                                         std::size_t depth, std::size_t n_chains,
                                         const TrapThresholds& t, const McParams& mc,
                                         int workers = 1, const HChainParams& hp = {}) {
  if (!(t.small > 0.0 && t.small < 1.0 && t.big >= 1.0 / t.small)) {
    throw DomainError("trap thresholds need big >= 1/small > 1");
  }
  if (!(t.saturation > t.big)) throw DomainError("saturation level must exceed big");
  if (n_chains < 1) throw DomainError("need at least one chain");
  if (!in_quadrant(x0)) throw DomainError("chain start must lie in the quadrant");
  require_operator_domain(c, g);
  std::vector<TrapClass> cls(n_chains, TrapClass::unresolved);
  parallel_for(n_chains, workers, [&](std::size_t k) {
    const ChainPath path =
        run_h_chain(x0, c, g, depth, mc.with_stream(mc.stream + k), hp, t.saturation);
    cls[k] = classify(path.states.back(), g.boundary(), t);
  });
  std::size_t counts[5] = {0, 0, 0, 0, 0};
  for (TrapClass k : cls) ++counts[static_cast<int>(k)];
  const auto n = static_cast<double>(n_chains);
  TrapReport rep;
  rep.p_inf_inf = counts[0] / n;
  rep.p_inf_0 = counts[1] / n;
  rep.p_0_inf = counts[2] / n;
  rep.p_boundary_g = counts[3] / n;
  rep.p_unresolved = counts[4] / n;
  rep.depth = depth;
  rep.n_chains = n_chains;
  rep.thresholds = t;
  return rep;
}

// Interaction chain M(-k), ..., M(0) with M(-k) = theta and
// M(-j) ~ Gamma^{c_j, F^[j] g}_{M(-j-1)}; iterates[j] = F^[j] g, j < k.
inline ChainPath run_backward_chain(const Vec2& theta, const CoefficientSequence& cs,
                                    std::span<const DiffusionPair> iterates, const McParams& mc) {
  if (!in_quadrant(theta)) throw DomainError("chain start must lie in the quadrant");
  const std::size_t k = iterates.size();
  RngStream rng(mc.seed, mc.stream);
  ChainPath path;
  path.states.reserve(k + 1);
  path.states.push_back(theta);
  path.g_source = k ? iterates[0].label() + " iterates" : std::string("none");
  Vec2 x = theta;
  for (std::size_t s = k; s-- > 0;) {
    const double c = cs.at(s);
    require_operator_domain(c, iterates[s]);
    x = step_chain(x, c, iterates[s], mc, rng);
    path.states.push_back(x);
    path.coeffs.push_back(c);
  }
  return path;
}

}  // namespace renormflow
