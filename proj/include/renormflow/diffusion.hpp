#pragma once

#include <array>
#include <cmath>
#include <algorithm>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "renormflow/error.hpp"
#include "renormflow/rng.hpp"
#include "renormflow/vec2.hpp"

namespace renormflow {

// Behaviour of a component near the axes: g/x1, g/x2 or g/(x1 x2) extends
// continuously and positively to A1 u A2.
enum class BoundaryProperty { D1, D2, D12 };

// Zero set of the pair: A1 n A2, A1 = [0,inf)x{0}, A2 = {0}x[0,inf), A1 u A2.
enum class EffectiveBoundary { Origin, A1, A2, A1uA2 };

inline const char* to_string(BoundaryProperty b) {
  switch (b) {
    case BoundaryProperty::D1: return "D1";
    case BoundaryProperty::D2: return "D2";
    case BoundaryProperty::D12: return "D12";
  }
  return "?";
}

inline const char* to_string(EffectiveBoundary b) {
  switch (b) {
    case EffectiveBoundary::Origin: return "Origin";
    case EffectiveBoundary::A1: return "A1";
    case EffectiveBoundary::A2: return "A2";
    case EffectiveBoundary::A1uA2: return "A1uA2";
  }
  return "?";
}

inline std::optional<EffectiveBoundary> parse_effective_boundary(const std::string& s) {
  if (s == "Origin") return EffectiveBoundary::Origin;
  if (s == "A1") return EffectiveBoundary::A1;
  if (s == "A2") return EffectiveBoundary::A2;
  if (s == "A1uA2") return EffectiveBoundary::A1uA2;
  return std::nullopt;
}

constexpr EffectiveBoundary effective_boundary(BoundaryProperty bp1, BoundaryProperty bp2) {
  const bool zero_on_a1 = bp1 == BoundaryProperty::D12;  // g2 always vanishes on A1
  const bool zero_on_a2 = bp2 == BoundaryProperty::D12;  // g1 always vanishes on A2
  if (zero_on_a1 && zero_on_a2) return EffectiveBoundary::A1uA2;
  if (zero_on_a1) return EffectiveBoundary::A1;
  if (zero_on_a2) return EffectiveBoundary::A2;
  return EffectiveBoundary::Origin;
}

constexpr std::pair<BoundaryProperty, BoundaryProperty> boundary_tags(EffectiveBoundary b) {
  using BP = BoundaryProperty;
  switch (b) {
    case EffectiveBoundary::Origin: return {BP::D1, BP::D2};
    case EffectiveBoundary::A1: return {BP::D12, BP::D2};
    case EffectiveBoundary::A2: return {BP::D1, BP::D12};
    case EffectiveBoundary::A1uA2: return {BP::D12, BP::D12};
  }
  return {BP::D1, BP::D2};
}

// Certified bound g1 + g2 <= C (1+x1)(1+x2) + a (x1^2 + x2^2).
struct GrowthCertificate {
  double a = 0.0;
  double C = 1.0;
};

// Limits lambda_{i,z} = lim_{x->z} g_i(x) / h_z(x) at the three points at
// infinity, with h_(inf,0) = x1, h_(0,inf) = x2, h_(inf,inf) = x1 x2.
struct SlopePair {
  double g1 = 0.0;
  double g2 = 0.0;
  friend bool operator==(const SlopePair&, const SlopePair&) = default;
};

struct InfinitySlopes {
  SlopePair zero_inf;
  SlopePair inf_zero;
  SlopePair inf_inf;
  friend bool operator==(const InfinitySlopes&, const InfinitySlopes&) = default;

  // sum_z lambda_{i,z} h_z(x): the mixture fixed point with these slopes.
  std::array<double, 2> mixture(const Vec2& x) const {
    const double cross = x.x1 * x.x2;
    return {inf_zero.g1 * x.x1 + zero_inf.g1 * x.x2 + inf_inf.g1 * cross,
            inf_zero.g2 * x.x1 + zero_inf.g2 * x.x2 + inf_inf.g2 * cross};
  }
};

// g_i = alpha_i x_i^2 + beta_i x_i + gamma_i x1 x2.
struct PolynomialDiffusion {
  std::array<double, 2> alpha{0.0, 0.0};
  std::array<double, 2> beta{0.0, 0.0};
  std::array<double, 2> gamma{0.0, 0.0};

  friend bool operator==(const PolynomialDiffusion&, const PolynomialDiffusion&) = default;

  std::array<double, 2> operator()(const Vec2& x) const {
    const double cross = x.x1 * x.x2;
    return {alpha[0] * x.x1 * x.x1 + beta[0] * x.x1 + gamma[0] * cross,
            alpha[1] * x.x2 * x.x2 + beta[1] * x.x2 + gamma[1] * cross};
  }

  bool degenerate() const { return (beta[0] + gamma[0]) * (beta[1] + gamma[1]) <= 0.0; }
};

using Values = std::array<double, 2>;

// A pair g = (g1, g2) of diffusion functions with declared metadata.
// Values are immutable and cheap to copy (the callable is shared).
class DiffusionPair {
 public:
  using Fn = std::function<Values(const Vec2&)>;

  // Validates the declaration: tags must be admissible, g1 must vanish on
  // {x1 = 0}, g2 on {x2 = 0}, a D12 component on both axes, and both
  // components must be positive at sampled interior points.
  DiffusionPair(Fn fn, BoundaryProperty bp1, BoundaryProperty bp2, std::string label)
      : DiffusionPair(std::move(fn), bp1, bp2, std::move(label), true) {}

  // No spot checks; used for deliberately degenerate instances.
  static DiffusionPair unchecked(Fn fn, BoundaryProperty bp1, BoundaryProperty bp2,
                                 std::string label) {
    return DiffusionPair(std::move(fn), bp1, bp2, std::move(label), false);
  }

  // Raw evaluation, no checks. Hot path of the SDE integrator.
  Values operator()(const Vec2& x) const { return (*fn_)(x); }

  // Checked evaluation: both values finite and nonnegative.
  Values eval(const Vec2& x) const {
    const Values v = (*fn_)(x);
    if (!(std::isfinite(v[0]) && std::isfinite(v[1]) && v[0] >= 0.0 && v[1] >= 0.0)) {
      std::ostringstream os;
      os << "diffusion function " << label_ << " returned (" << v[0] << ", " << v[1]
         << ") at (" << x.x1 << ", " << x.x2 << ")";
      throw MalformedFunction(os.str());
    }
    return v;
  }

  BoundaryProperty bp1() const { return bp1_; }
  BoundaryProperty bp2() const { return bp2_; }
  EffectiveBoundary boundary() const { return effective_boundary(bp1_, bp2_); }
  const std::optional<GrowthCertificate>& growth() const { return growth_; }
  const std::optional<InfinitySlopes>& slopes() const { return slopes_; }
  const std::optional<PolynomialDiffusion>& polynomial() const { return polynomial_; }
  const std::string& label() const { return label_; }

  DiffusionPair with_growth(GrowthCertificate g) const {
    DiffusionPair out = *this;
    out.growth_ = g;
    return out;
  }
  DiffusionPair with_slopes(InfinitySlopes s) const {
    DiffusionPair out = *this;
    out.slopes_ = s;
    return out;
  }
  DiffusionPair with_polynomial(PolynomialDiffusion p) const {
    DiffusionPair out = *this;
    out.polynomial_ = p;
    return out;
  }

 private:
  DiffusionPair(Fn fn, BoundaryProperty bp1, BoundaryProperty bp2, std::string label,
                bool check)
      : fn_(std::make_shared<const Fn>(std::move(fn))),
        bp1_(bp1),
        bp2_(bp2),
        label_(std::move(label)) {
    if (bp1_ == BoundaryProperty::D2 || bp2_ == BoundaryProperty::D1) {
      throw MalformedFunction("boundary tags must be (D1|D12, D2|D12) for " + label_);
    }
    if (check) spot_check();
  }

  void spot_check() const {
    static constexpr double kAxis[] = {0.0, 1e-3, 0.1, 0.5, 1.0, 3.0, 10.0, 1e3};
    for (double t : kAxis) {
      const Values on_a2 = eval({0.0, t});
      const Values on_a1 = eval({t, 0.0});
      if (on_a2[0] != 0.0) throw MalformedFunction(label_ + ": g1 must vanish on {x1=0}");
      if (on_a1[1] != 0.0) throw MalformedFunction(label_ + ": g2 must vanish on {x2=0}");
      if (bp1_ == BoundaryProperty::D12 && on_a1[0] != 0.0) {
        throw MalformedFunction(label_ + ": g1 tagged D12 but nonzero on {x2=0}");
      }
      if (bp2_ == BoundaryProperty::D12 && on_a2[1] != 0.0) {
        throw MalformedFunction(label_ + ": g2 tagged D12 but nonzero on {x1=0}");
      }
    }
    RngStream rng(0x5eed5eedull, 0);
    for (int k = 0; k < 32; ++k) {
      const Vec2 x{std::pow(10.0, -2.0 + 5.0 * rng.uniform()),
                   std::pow(10.0, -2.0 + 5.0 * rng.uniform())};
      const Values v = eval(x);
      if (!(v[0] > 0.0 && v[1] > 0.0)) {
        throw MalformedFunction(label_ + ": not positive on the open quadrant");
      }
    }
  }

  std::shared_ptr<const Fn> fn_;
  BoundaryProperty bp1_;
  BoundaryProperty bp2_;
  std::optional<GrowthCertificate> growth_;
  std::optional<InfinitySlopes> slopes_;
  std::optional<PolynomialDiffusion> polynomial_;
  std::string label_;
};

inline Values eval(const DiffusionPair& g, const Vec2& x) { return g.eval(x); }

inline EffectiveBoundary effective_boundary(const DiffusionPair& g) { return g.boundary(); }

namespace detail {

inline std::string format_coeffs(const char* kind, std::initializer_list<std::pair<const char*, double>> kv) {
  std::ostringstream os;
  os.precision(17);
  os << kind << '(';
  bool first = true;
  for (const auto& [k, v] : kv) {
    if (!first) os << ',';
    os << k << '=' << v;
    first = false;
  }
  os << ')';
  return os.str();
}

inline void require_nonnegative(std::initializer_list<double> xs, const char* what) {
  for (double x : xs) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw MalformedFunction(std::string(what) + ": coefficients must be finite and >= 0");
    }
  }
}

}  // namespace detail

// The mixture fixed point g = (b1 x1 + c1 x1 x2, b2 x2 + c2 x1 x2).
inline DiffusionPair make_fixed_point(double b1, double b2, double c1, double c2) {
  detail::require_nonnegative({b1, b2, c1, c2}, "fixed point");
  if (!((b1 + c1) * (b2 + c2) > 0.0)) {
    throw DegeneratePair("fixed point needs (b1+c1)(b2+c2) > 0");
  }
  const PolynomialDiffusion p{{0.0, 0.0}, {b1, b2}, {c1, c2}};
  const auto bp1 = b1 > 0.0 ? BoundaryProperty::D1 : BoundaryProperty::D12;
  const auto bp2 = b2 > 0.0 ? BoundaryProperty::D2 : BoundaryProperty::D12;
  DiffusionPair g([p](const Vec2& x) { return p(x); }, bp1, bp2,
                  detail::format_coeffs("fixed_point", {{"b1", b1}, {"b2", b2}, {"c1", c1}, {"c2", c2}}));
  return g.with_growth({0.0, std::max({b1, b2, c1 + c2})})
      .with_slopes({{0.0, b2}, {b1, 0.0}, {c1, c2}})
      .with_polynomial(p);
}

enum class Admissibility { strict, allow_degenerate };

// g_i = alpha_i x_i^2 + beta_i x_i + gamma_i x1 x2. A component is tagged D12
// exactly when it vanishes on both axes (alpha_i = beta_i = 0).
inline DiffusionPair make_polynomial(const PolynomialDiffusion& p,
                                     Admissibility mode = Admissibility::strict) {
  detail::require_nonnegative({p.alpha[0], p.alpha[1], p.beta[0], p.beta[1], p.gamma[0], p.gamma[1]},
                              "polynomial");
  if (mode == Admissibility::strict && p.degenerate()) {
    throw DegeneratePair("polynomial needs (beta1+gamma1)(beta2+gamma2) > 0");
  }
  const auto bp1 = (p.alpha[0] > 0.0 || p.beta[0] > 0.0) ? BoundaryProperty::D1 : BoundaryProperty::D12;
  const auto bp2 = (p.alpha[1] > 0.0 || p.beta[1] > 0.0) ? BoundaryProperty::D2 : BoundaryProperty::D12;
  auto label = detail::format_coeffs(
      "polynomial", {{"alpha1", p.alpha[0]}, {"alpha2", p.alpha[1]}, {"beta1", p.beta[0]},
                     {"beta2", p.beta[1]}, {"gamma1", p.gamma[0]}, {"gamma2", p.gamma[1]}});
  auto fn = [p](const Vec2& x) { return p(x); };
  DiffusionPair g = mode == Admissibility::strict
                        ? DiffusionPair(fn, bp1, bp2, label)
                        : DiffusionPair::unchecked(fn, bp1, bp2, label);
  // beta1 x1 + beta2 x2 + (gamma1+gamma2) x1 x2 <= C (1+x1)(1+x2) needs C above
  // each of beta1, beta2 and gamma1+gamma2.
  g = g.with_growth({std::max(p.alpha[0], p.alpha[1]),
                     std::max({p.beta[0], p.beta[1], p.gamma[0] + p.gamma[1]}) + 1.0})
          .with_polynomial(p);
  if (p.alpha[0] == 0.0 && p.alpha[1] == 0.0) {
    g = g.with_slopes({{0.0, p.beta[1]}, {p.beta[0], 0.0}, {p.gamma[0], p.gamma[1]}});
  }
  return g;
}

// Mixture fixed point plus w_i x1 x2 / (1 + x1 + x2) in component i. The
// perturbation vanishes on both axes and is o(h_z) at every point at
// infinity, so the slopes are those of the unperturbed mixture.
inline DiffusionPair make_perturbed_fixed_point(double b1, double b2, double c1, double c2,
                                                double w1, double w2) {
  detail::require_nonnegative({b1, b2, c1, c2}, "perturbed fixed point");
  if (!std::isfinite(w1) || !std::isfinite(w2) || w1 < -c1 || w2 < -c2) {
    throw MalformedFunction("perturbation weights must satisfy w_i >= -c_i");
  }
  if (!((b1 + c1 + std::min(w1, 0.0)) > 0.0 && (b2 + c2 + std::min(w2, 0.0)) > 0.0)) {
    throw DegeneratePair("perturbed fixed point needs a positive minorant in each component");
  }
  const auto bp1 = b1 > 0.0 ? BoundaryProperty::D1 : BoundaryProperty::D12;
  const auto bp2 = b2 > 0.0 ? BoundaryProperty::D2 : BoundaryProperty::D12;
  auto fn = [=](const Vec2& x) -> Values {
    const double cross = x.x1 * x.x2;
    const double bump = cross / (1.0 + x.x1 + x.x2);
    return {b1 * x.x1 + c1 * cross + w1 * bump, b2 * x.x2 + c2 * cross + w2 * bump};
  };
  DiffusionPair g(fn, bp1, bp2,
                  detail::format_coeffs("perturbed_fixed_point", {{"b1", b1}, {"b2", b2}, {"c1", c1},
                                                                  {"c2", c2}, {"w1", w1}, {"w2", w2}}));
  const double cross_bound = c1 + c2 + std::max(w1, 0.0) + std::max(w2, 0.0);
  return g.with_growth({0.0, std::max({b1, b2, cross_bound})})
      .with_slopes({{0.0, b2}, {b1, 0.0}, {c1, c2}});
}

struct GrowthReport {
  bool passed = true;
  double max_ratio = 0.0;
  Vec2 worst{};
  std::size_t n_checked = 0;
};

// Checks g1 + g2 <= C (1+x1)(1+x2) + a (x1^2 + x2^2) on the product grid
// {0} u {10^(k/4) : k = -12..24} plus n_samples log-uniform random points.
inline GrowthReport check_growth(const DiffusionPair& g, double a, double C, std::size_t n_samples,
                                 std::uint64_t seed) {
  GrowthReport rep;
  auto probe = [&](const Vec2& x) {
    const Values v = g.eval(x);
    const double bound = C * h_weight(x) + a * (x.x1 * x.x1 + x.x2 * x.x2);
    const double ratio = (v[0] + v[1]) / bound;
    ++rep.n_checked;
    if (ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.worst = x;
    }
  };
  std::vector<double> axis{0.0};
  for (int k = -12; k <= 24; ++k) axis.push_back(std::pow(10.0, k / 4.0));
  for (double s : axis) {
    for (double t : axis) probe({s, t});
  }
  RngStream rng(seed, 0);
  for (std::size_t k = 0; k < n_samples; ++k) {
    probe({std::pow(10.0, -3.0 + 9.0 * rng.uniform()), std::pow(10.0, -3.0 + 9.0 * rng.uniform())});
  }
  rep.passed = rep.max_ratio <= 1.0 + 1e-12;
  return rep;
}

}  // namespace renormflow
