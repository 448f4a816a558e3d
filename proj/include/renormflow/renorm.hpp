#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "renormflow/diffusion.hpp"
#include "renormflow/error.hpp"
#include "renormflow/parallel.hpp"
#include "renormflow/rng.hpp"
#include "renormflow/sde.hpp"
#include "renormflow/stats.hpp"

namespace renormflow {

// Drift rates (c_0, c_1, ...). Entries past the end repeat the last value.
struct CoefficientSequence {
  std::vector<double> values;
  bool inf_positive = true;  // inf_n c_n > 0
  bool recurrent = true;     // sum_n 1/c_n treated as divergent

  CoefficientSequence() = default;
  explicit CoefficientSequence(std::vector<double> v) : values(std::move(v)) {
    if (values.empty()) throw DomainError("coefficient sequence must not be empty");
    for (double c : values) {
      if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("coefficients c_n must be > 0");
    }
  }
  static CoefficientSequence constant(double c) { return CoefficientSequence({c}); }

  double at(std::size_t k) const { return k < values.size() ? values[k] : values.back(); }
};

// Monte Carlo budget for one equilibrium estimate. burn_in and thin default
// to ln(1/e^-6)/c and 1/c.
struct McParams {
  std::size_t n_samples = 10000;
  std::optional<double> burn_in;
  std::optional<double> thin;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  Scheme scheme = Scheme::moment_matched;

  double burn_in_for(double c) const { return burn_in.value_or(default_burn_in(c)); }
  double thin_for(double c) const { return thin.value_or(1.0 / c); }
  McParams with_stream(std::uint64_t s) const {
    McParams out = *this;
    out.stream = s;
    return out;
  }
};

struct FcEstimate {
  Values value{0.0, 0.0};
  Values se{0.0, 0.0};
};

// F_c g is finite only on H_a with a < c.
inline void require_operator_domain(double c, const DiffusionPair& g) {
  if (!(c > 0.0)) throw DomainError("c must be > 0");
  if (!g.growth()) {
    throw DomainError("a growth certificate is required before applying F_c to " + g.label());
  }
  if (!(g.growth()->a < c)) {
    std::ostringstream os;
    os << "F_c diverges: growth coefficient a = " << g.growth()->a << " >= c = " << c;
    throw DomainError(os.str());
  }
}

inline EmpiricalMeasure sample_for(double c, const DiffusionPair& g, const Vec2& theta,
                                   const McParams& mc) {
  const SdeParams p(c, theta, mc.dt, g, mc.scheme);
  RngStream rng(mc.seed, mc.stream);
  return sample_equilibrium(p, mc.n_samples, mc.burn_in_for(c), mc.thin_for(c), rng);
}

// (F_c g)_i(theta) = E g_i(X) under the equilibrium with attraction point
// theta, estimated along one chain; standard errors by batch means.
inline FcEstimate apply_fc_at(double c, const DiffusionPair& g, const Vec2& theta,
                              const McParams& mc) {
  require_operator_domain(c, g);
  const EmpiricalMeasure m = sample_for(c, g, theta, mc);
  std::vector<double> g1;
  std::vector<double> g2;
  g1.reserve(m.n());
  g2.reserve(m.n());
  for (const Vec2& x : m.points) {
    const Values v = g(x);
    g1.push_back(v[0]);
    g2.push_back(v[1]);
  }
  return {{mean(g1), mean(g2)}, {batch_means_se(g1), batch_means_se(g2)}};
}

// Exact image of the polynomial family: component i is scaled by
// c / (c - alpha_i).
inline PolynomialDiffusion closed_form_fc(double c, const PolynomialDiffusion& p) {
  if (!(c > 0.0)) throw DomainError("c must be > 0");
  for (int i = 0; i < 2; ++i) {
    if (!(p.alpha[i] < c)) {
      std::ostringstream os;
      os << "F_c diverges: alpha_" << i + 1 << " = " << p.alpha[i] << " >= c = " << c;
      throw DomainError(os.str());
    }
  }
  PolynomialDiffusion out = p;
  for (int i = 0; i < 2; ++i) {
    const double lambda = c / (c - p.alpha[i]);
    out.alpha[i] *= lambda;
    out.beta[i] *= lambda;
    out.gamma[i] *= lambda;
  }
  return out;
}

struct ClosedFormIteration {
  // iterates[k] = F^[k+1] p.
  std::vector<PolynomialDiffusion> iterates;
  // n_0 = min{n >= 1 : max(alpha) sum_{i<n} 1/c_i >= 1}; absent when alpha = 0.
  std::optional<std::size_t> blowup_index;
};

// Iterates F^[k] = F_{c_{k-1}} o ... o F_{c_0} on the polynomial family for
// k = 1..n, stopping at the blow-up index n_0 when it is reached. n_0 is
// reported even when it lies beyond n.
inline ClosedFormIteration iterate_closed_form(const CoefficientSequence& cs,
                                               const PolynomialDiffusion& p, std::size_t n) {
  if (n < 1) throw DomainError("need at least one iterate");
  const double amax = std::max(p.alpha[0], p.alpha[1]);
  ClosedFormIteration out;
  PolynomialDiffusion cur = p;
  double sum_inv = 0.0;
  std::size_t k = 1;
  for (; k <= n; ++k) {
    sum_inv += 1.0 / cs.at(k - 1);
    if (amax * sum_inv >= 1.0) {
      out.blowup_index = k;
      return out;
    }
    cur = closed_form_fc(cs.at(k - 1), cur);
    out.iterates.push_back(cur);
  }
  if (amax > 0.0) {
    // Continue the partial sums only; bounded because c_n is eventually constant.
    const std::size_t cap = cs.values.size() + static_cast<std::size_t>(
        std::min(1e9, std::ceil(cs.values.back() / amax)) + 2.0);
    for (; k <= cap + n; ++k) {
      sum_inv += 1.0 / cs.at(k - 1);
      if (amax * sum_inv >= 1.0) {
        out.blowup_index = k;
        break;
      }
    }
  }
  return out;
}

struct MomentResidual {
  std::string name;
  double estimate = 0.0;
  double reference = 0.0;
  double residual = 0.0;
  double se = 0.0;
  double z = 0.0;
  double scale = 0.0;  // magnitude used for the relative discretization allowance

  bool within(double z_max, double rel_allowance) const {
    return std::abs(residual) <= z_max * se + rel_allowance * scale;
  }
};

struct MomentReport {
  std::vector<MomentResidual> rows;

  bool passes(double z_max = 3.0, double rel_allowance = 0.02) const {
    return std::all_of(rows.begin(), rows.end(),
                       [&](const MomentResidual& r) { return r.within(z_max, rel_allowance); });
  }
};

namespace detail {

inline MomentResidual moment_row(std::string name, std::span<const double> series, double reference,
                                 double scale) {
  MomentResidual r;
  r.name = std::move(name);
  r.estimate = mean(series);
  r.reference = reference;
  r.residual = r.estimate - reference;
  r.se = batch_means_se(series);
  r.scale = scale;
  if (r.se > 0.0) {
    r.z = r.residual / r.se;
  } else {
    r.z = r.residual == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.residual);
  }
  return r;
}

}  // namespace detail

// Residuals of the equilibrium identities E X_i = theta_i,
// E X1 X2 = theta1 theta2 and E X_i^2 = theta_i^2 + E g_i(X) / c. The second
// moment check uses the per-sample series X_i^2 - g_i(X)/c from the same
// sample, so both sides share one estimate of E g_i.
inline MomentReport validate_moments(const EmpiricalMeasure& m) {
  if (m.points.empty()) throw DomainError("empty sample");
  const Vec2 th = m.params.theta;
  const double c = m.params.c;
  const std::size_t n = m.n();
  std::vector<double> x1(n), x2(n), x12(n), q1(n), q2(n), g1(n), g2(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2& x = m.points[k];
    const Values g = m.params.g(x);
    x1[k] = x.x1;
    x2[k] = x.x2;
    x12[k] = x.x1 * x.x2;
    g1[k] = g[0];
    g2[k] = g[1];
    q1[k] = x.x1 * x.x1 - g[0] / c;
    q2[k] = x.x2 * x.x2 - g[1] / c;
  }
  MomentReport rep;
  rep.rows.push_back(detail::moment_row("mean_x1", x1, th.x1, th.x1));
  rep.rows.push_back(detail::moment_row("mean_x2", x2, th.x2, th.x2));
  rep.rows.push_back(detail::moment_row("mean_x1x2", x12, th.x1 * th.x2, th.x1 * th.x2));
  rep.rows.push_back(detail::moment_row("second_x1", q1, th.x1 * th.x1, th.x1 * th.x1 + mean(g1) / c));
  rep.rows.push_back(detail::moment_row("second_x2", q2, th.x2 * th.x2, th.x2 * th.x2 + mean(g2) / c));
  return rep;
}

struct FixedPointProbe {
  Vec2 theta{};
  FcEstimate fc;
  Values g{0.0, 0.0};
  Values residual{0.0, 0.0};  // |F_c g - g| / h(theta)
};

struct FixedPointReport {
  std::vector<FixedPointProbe> probes;
  double residual = 0.0;  // max over probes and components
  double max_weighted_se = 0.0;
};

// h-weighted sup distance between F_c g and g over the probes. Probe k uses
// stream mc.stream + k.
inline FixedPointReport fixed_point_report(double c, const DiffusionPair& g,
                                           std::span<const Vec2> probes, const McParams& mc,
                                           int workers = 1) {
  if (probes.empty()) throw DomainError("fixed-point residual needs at least one probe");
  for (const Vec2& t : probes) {
    if (!in_quadrant(t)) throw DomainError("probe outside the quadrant");
  }
  require_operator_domain(c, g);
  FixedPointReport rep;
  rep.probes.resize(probes.size());
  parallel_for(probes.size(), workers, [&](std::size_t k) {
    FixedPointProbe& out = rep.probes[k];
    out.theta = probes[k];
    out.fc = apply_fc_at(c, g, probes[k], mc.with_stream(mc.stream + k));
    out.g = g.eval(probes[k]);
    const double h = h_weight(probes[k]);
    for (int i = 0; i < 2; ++i) out.residual[i] = std::abs(out.fc.value[i] - out.g[i]) / h;
  });
  for (const auto& p : rep.probes) {
    const double h = h_weight(p.theta);
    rep.residual = std::max({rep.residual, p.residual[0], p.residual[1]});
    rep.max_weighted_se = std::max({rep.max_weighted_se, p.fc.se[0] / h, p.fc.se[1] / h});
  }
  return rep;
}

inline double fixed_point_residual(double c, const DiffusionPair& g, std::span<const Vec2> probes,
                                   const McParams& mc, int workers = 1) {
  return fixed_point_report(c, g, probes, mc, workers).residual;
}

}  // namespace renormflow
