#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "renormflow/diffusion.hpp"
#include "renormflow/error.hpp"
#include "renormflow/parallel.hpp"
#include "renormflow/renorm.hpp"
#include "renormflow/rng.hpp"
#include "renormflow/sde.hpp"
#include "renormflow/stats.hpp"

namespace renormflow {

// Site of the hierarchical group truncated at depth K; digits[0] = eta_1.
struct HierarchicalSite {
  std::vector<int> digits;
  friend bool operator==(const HierarchicalSite&, const HierarchicalSite&) = default;
};

inline std::size_t ipow(std::size_t base, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

// index = sum_i d_i N^{i-1}: sites of one k-block share index / N^k.
inline std::size_t site_index(const HierarchicalSite& s, int N) {
  std::size_t idx = 0;
  for (std::size_t i = s.digits.size(); i-- > 0;) {
    const int d = s.digits[i];
    if (d < 0 || d >= N) throw DomainError("site digit outside {0,...,N-1}");
    idx = idx * static_cast<std::size_t>(N) + static_cast<std::size_t>(d);
  }
  return idx;
}

inline HierarchicalSite site_from_index(std::size_t idx, int N, int K) {
  if (N < 2 || K < 1) throw DomainError("need N >= 2 and K >= 1");
  if (idx >= ipow(static_cast<std::size_t>(N), K)) throw DomainError("site index out of range");
  HierarchicalSite s;
  s.digits.resize(static_cast<std::size_t>(K));
  for (int i = 0; i < K; ++i) {
    s.digits[static_cast<std::size_t>(i)] = static_cast<int>(idx % static_cast<std::size_t>(N));
    idx /= static_cast<std::size_t>(N);
  }
  return s;
}

// Hierarchical distance: the smallest k such that the digits agree from
// position k+1 on, i.e. the highest (1-indexed) position where they differ.
inline int distance(const HierarchicalSite& a, const HierarchicalSite& b) {
  if (a.digits.size() != b.digits.size()) throw DomainError("sites of different depth");
  for (std::size_t i = a.digits.size(); i-- > 0;) {
    if (a.digits[i] != b.digits[i]) return static_cast<int>(i) + 1;
  }
  return 0;
}

struct LatticeConfig {
  int N = 2;
  int K = 1;
  CoefficientSequence coeffs = CoefficientSequence::constant(1.0);
  DiffusionPair g = make_fixed_point(1.0, 1.0, 1.0, 1.0);
  double dt = 1e-3;
  Scheme scheme = Scheme::moment_matched;

  void validate() const {
    if (N < 2) throw DomainError("lattice order N must be >= 2");
    if (K < 1) throw DomainError("lattice depth K must be >= 1");
    if (coeffs.values.size() < static_cast<std::size_t>(K)) {
      throw DomainError("need at least K coefficients c_0..c_{K-1}");
    }
    if (!(dt > 0.0)) throw DomainError("dt must be > 0");
    if (!(total_rate() * dt < 1.0)) throw DomainError("total drift rate * dt must be < 1");
  }

  std::size_t sites() const { return ipow(static_cast<std::size_t>(N), K); }

  // Rate c_{k-1} / N^{k-1} of the pull toward the k-block average.
  double level_rate(int k) const {
    return coeffs.at(static_cast<std::size_t>(k - 1)) / std::pow(static_cast<double>(N), k - 1);
  }

  double total_rate() const {
    double s = 0.0;
    for (int k = 1; k <= K; ++k) s += level_rate(k);
    return s;
  }
};

// a_N(xi, eta) = sum_{k=d}^{K} c_{k-1} N^{1-2k} for d = d(xi, eta).
inline double migration_rate(const LatticeConfig& cfg, int d) {
  if (d < 1 || d > cfg.K) throw DomainError("migration distance must lie in 1..K");
  double s = 0.0;
  for (int k = d; k <= cfg.K; ++k) {
    s += cfg.coeffs.at(static_cast<std::size_t>(k - 1)) * std::pow(static_cast<double>(cfg.N), 1 - 2 * k);
  }
  return s;
}

struct LatticeState {
  std::vector<Vec2> values;  // by site index
  double time = 0.0;
  std::uint64_t steps = 0;
  std::vector<RngStream> rngs;  // one noise stream per site
};

// X_eta(0) = theta at every site; site eta draws from stream
// stream_base + index(eta).
inline LatticeState uniform_state(const LatticeConfig& cfg, const Vec2& theta, std::uint64_t seed,
                                  std::uint64_t stream_base = 0) {
  cfg.validate();
  if (!in_quadrant(theta)) throw DomainError("theta must lie in the quadrant");
  LatticeState s;
  s.values.assign(cfg.sites(), theta);
  s.rngs.reserve(cfg.sites());
  for (std::size_t i = 0; i < cfg.sites(); ++i) s.rngs.emplace_back(seed, stream_base + i);
  return s;
}

// levels[k][b] = average over the k-block b (sites with index / N^k = b),
// k = 0..K, computed bottom-up.
inline std::vector<std::vector<Vec2>> block_averages(const LatticeState& s, const LatticeConfig& cfg) {
  if (s.values.size() != cfg.sites()) throw DomainError("state size does not match N^K");
  std::vector<std::vector<Vec2>> levels(static_cast<std::size_t>(cfg.K) + 1);
  levels[0] = s.values;
  const auto n = static_cast<std::size_t>(cfg.N);
  const double inv = 1.0 / static_cast<double>(cfg.N);
  for (int k = 1; k <= cfg.K; ++k) {
    const auto& below = levels[static_cast<std::size_t>(k - 1)];
    auto& cur = levels[static_cast<std::size_t>(k)];
    cur.resize(below.size() / n);
    for (std::size_t b = 0; b < cur.size(); ++b) {
      Vec2 acc{0.0, 0.0};
      for (std::size_t j = 0; j < n; ++j) {
        acc.x1 += below[b * n + j].x1;
        acc.x2 += below[b * n + j].x2;
      }
      cur[b] = {acc.x1 * inv, acc.x2 * inv};
    }
  }
  return levels;
}

inline Vec2 block_average(const LatticeState& s, const LatticeConfig& cfg, int k,
                          const HierarchicalSite& site) {
  if (k < 0 || k > cfg.K) throw DomainError("block level must lie in 0..K");
  const std::size_t idx = site_index(site, cfg.N);
  const auto levels = block_averages(s, cfg);
  return levels[static_cast<std::size_t>(k)][idx / ipow(static_cast<std::size_t>(cfg.N), k)];
}

inline constexpr double kLatticeOverflow = 1e12;

enum class Noise { on, off };

// One step of length dt. Every site is pulled toward its block averages with
// drift sum_k (c_{k-1}/N^{k-1}) (Y^[k] - X), i.e. at total rate kappa toward
// mu = sum_k rate_k Y^[k] / kappa. With noise the moment-matched transition
// (or full-truncation Euler) of the single-site SDE with these constants is
// used; without noise the update is the explicit drift step.
inline void step_lattice(LatticeState& s, const LatticeConfig& cfg, Noise noise = Noise::on,
                         int workers = 1) {
  cfg.validate();
  const auto levels = block_averages(s, cfg);
  std::vector<double> rate(static_cast<std::size_t>(cfg.K) + 1, 0.0);
  for (int k = 1; k <= cfg.K; ++k) rate[static_cast<std::size_t>(k)] = cfg.level_rate(k);
  const double kappa = cfg.total_rate();
  const detail::QeStep qe(kappa, cfg.dt);
  const double rt = std::sqrt(cfg.dt);
  const auto n = static_cast<std::size_t>(cfg.N);
  std::vector<Vec2> next(s.values.size());
  parallel_for(s.values.size(), workers, [&](std::size_t i) {
    const Vec2 x = s.values[i];
    Vec2 pull{0.0, 0.0};
    std::size_t b = i;
    for (int k = 1; k <= cfg.K; ++k) {
      b /= n;
      const Vec2& y = levels[static_cast<std::size_t>(k)][b];
      const double r = rate[static_cast<std::size_t>(k)];
      pull.x1 += r * (y.x1 - x.x1);
      pull.x2 += r * (y.x2 - x.x2);
    }
    if (noise == Noise::off) {
      next[i] = {x.x1 + pull.x1 * cfg.dt, x.x2 + pull.x2 * cfg.dt};
      return;
    }
    const Values gx = cfg.g.eval(x);
    const Vec2 mu{x.x1 + pull.x1 / kappa, x.x2 + pull.x2 / kappa};
    const auto [z1, z2] = s.rngs[i].normal_pair();
    if (cfg.scheme == Scheme::moment_matched) {
      next[i] = {qe(x.x1, mu.x1, gx[0], z1), qe(x.x2, mu.x2, gx[1], z2)};
    } else {
      next[i] = {std::max(0.0, x.x1 + pull.x1 * cfg.dt + std::sqrt(2.0 * gx[0]) * z1 * rt),
                 std::max(0.0, x.x2 + pull.x2 * cfg.dt + std::sqrt(2.0 * gx[1]) * z2 * rt)};
    }
  });
  for (std::size_t i = 0; i < next.size(); ++i) {
    const Vec2& v = next[i];
    if (!(v.x1 <= kLatticeOverflow && v.x2 <= kLatticeOverflow)) {
      std::ostringstream os;
      os << "lattice blow-up at site " << i << " at time " << s.time + cfg.dt;
      throw BlowUp(os.str());
    }
  }
  s.values = std::move(next);
  s.time += cfg.dt;
  ++s.steps;
}

// Runs to time T; `observe` (if given) is called with the state at time 0
// and after every `every` steps.
inline void run_lattice(LatticeState& s, const LatticeConfig& cfg, double T, Noise noise = Noise::on,
                        int workers = 1, std::size_t every = 0,
                        const std::function<void(const LatticeState&)>& observe = {}) {
  const std::size_t n = T > 0.0 ? step_count(T, cfg.dt) : 0;
  if (observe) observe(s);
  for (std::size_t k = 0; k < n; ++k) {
    step_lattice(s, cfg, noise, workers);
    if (observe && every > 0 && (k + 1) % every == 0) observe(s);
  }
}

struct MomentComparison {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double reference = 0.0;
  double z = 0.0;
  double rel = 0.0;  // |estimate - reference| / |reference|
};

struct McKeanVlasovReport {
  std::size_t replicas = 0;
  double T = 0.0;
  // Rows: mean_x1, mean_x2, mean_x1x2, var_x1, var_x2, cov_x1x2, and
  // var_x1_plain, var_x2_plain when a control variate is used.
  std::vector<MomentComparison> rows;
  // Single-site equilibrium of dX = c_0 (theta - X) dt + sqrt(2 g) dB:
  // E g_i and Var X_i = E g_i / c_0 estimated from one long chain.
  Values single_site_mean_g{0.0, 0.0};
  Values single_site_var{0.0, 0.0};
  Values single_site_var_se{0.0, 0.0};

  const MomentComparison& row(const std::string& name) const {
    for (const auto& r : rows) {
      if (r.name == name) return r;
    }
    throw DomainError("no row " + name);
  }
};

struct McKeanVlasovParams {
  std::size_t replicas = 100;
  std::uint64_t seed = 1;
  int workers = 1;
  // Single-site reference chain.
  McParams reference{};
};

// Simulates `replicas` independent lattices from X(0) = theta to time T and
// compares cross-site statistics with the single-site equilibrium at theta.
// Means are over all sites; variances and covariance are pooled within the
// 1-blocks (denominator N - 1), whose sites share the slowly moving average
// Y^[1] that plays the role of the frozen attraction point. Standard errors
// are across replicas. Replica r uses site streams r N^K + index.
//
// Pooled variances are heavy tailed when g grows like x1 x2, and their plain
// replica mean sits well below its expectation at desk-scale replica counts.
// If g_i is linear in x_i and x1 x2, the site mean of g_i has expectation
// g_i(theta) at all times (first and mixed moments are conserved from the
// uniform start), and var_x* use it as a control variate:
// V - beta (G - g_i(theta)), beta fitted across replicas. The plain means are
// kept as var_x*_plain.
inline McKeanVlasovReport mckean_vlasov_check(const LatticeConfig& cfg, const Vec2& theta, double T,
                                              const McKeanVlasovParams& mp) {
  cfg.validate();
  if (mp.replicas < 2) throw DomainError("need at least two replicas");
  if (!(T >= 0.0)) throw DomainError("T must be >= 0");
  const std::size_t sites = cfg.sites();
  const auto n = static_cast<std::size_t>(cfg.N);
  std::vector<std::array<double, 8>> stats(mp.replicas);
  parallel_for(mp.replicas, mp.workers, [&](std::size_t r) {
    LatticeState s = uniform_state(cfg, theta, mp.seed, r * sites);
    run_lattice(s, cfg, T);
    std::array<double, 8> acc{};
    for (const Vec2& x : s.values) {
      acc[0] += x.x1;
      acc[1] += x.x2;
      acc[2] += x.x1 * x.x2;
      const Values gx = cfg.g(x);
      acc[6] += gx[0];
      acc[7] += gx[1];
    }
    for (std::size_t b = 0; b < sites / n; ++b) {
      double m1 = 0.0;
      double m2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        m1 += s.values[b * n + j].x1;
        m2 += s.values[b * n + j].x2;
      }
      m1 /= static_cast<double>(n);
      m2 /= static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j) {
        const double d1 = s.values[b * n + j].x1 - m1;
        const double d2 = s.values[b * n + j].x2 - m2;
        acc[3] += d1 * d1;
        acc[4] += d2 * d2;
        acc[5] += d1 * d2;
      }
    }
    for (int k : {0, 1, 2, 6, 7}) acc[static_cast<std::size_t>(k)] /= static_cast<double>(sites);
    const double dof = static_cast<double>(sites / n) * static_cast<double>(n - 1);
    for (int k = 3; k < 6; ++k) acc[static_cast<std::size_t>(k)] /= dof;
    stats[r] = acc;
  });

  McKeanVlasovReport rep;
  rep.replicas = mp.replicas;
  rep.T = T;
  const double c0 = cfg.coeffs.at(0);
  bool degenerate_reference = false;
  if (T > 0.0) {
    const Values gt = cfg.g.eval(theta);
    degenerate_reference = gt[0] == 0.0 && gt[1] == 0.0;
  }
  if (T > 0.0 && !degenerate_reference) {
    McParams ref = mp.reference;
    const SdeParams p(c0, theta, ref.dt, cfg.g, ref.scheme);
    RngStream rng(ref.seed, ref.stream);
    const auto m = sample_equilibrium(p, ref.n_samples, ref.burn_in_for(c0), ref.thin_for(c0), rng);
    for (int i = 0; i < 2; ++i) {
      std::vector<double> gi;
      gi.reserve(m.n());
      for (const Vec2& x : m.points) gi.push_back(cfg.g(x)[static_cast<std::size_t>(i)]);
      rep.single_site_mean_g[static_cast<std::size_t>(i)] = mean(gi);
      rep.single_site_var[static_cast<std::size_t>(i)] = mean(gi) / c0;
      rep.single_site_var_se[static_cast<std::size_t>(i)] = batch_means_se(gi) / c0;
    }
  }
  const char* names[6] = {"mean_x1", "mean_x2", "mean_x1x2", "var_x1", "var_x2", "cov_x1x2"};
  const double refs[6] = {theta.x1,
                          theta.x2,
                          theta.x1 * theta.x2,
                          T > 0.0 ? rep.single_site_var[0] : 0.0,
                          T > 0.0 ? rep.single_site_var[1] : 0.0,
                          0.0};
  for (int k = 0; k < 6; ++k) {
    std::vector<double> col(mp.replicas);
    for (std::size_t r = 0; r < mp.replicas; ++r) col[r] = stats[r][static_cast<std::size_t>(k)];
    MomentComparison mc;
    mc.name = names[k];
    mc.estimate = mean(col);
    mc.se = std::sqrt(sample_variance(col) / static_cast<double>(mp.replicas));
    mc.reference = refs[k];
    const double diff = mc.estimate - mc.reference;
    mc.z = mc.se > 0.0 ? diff / mc.se : (diff == 0.0 ? 0.0 : std::copysign(HUGE_VAL, diff));
    mc.rel = mc.reference != 0.0 ? std::abs(diff) / std::abs(mc.reference) : std::abs(diff);
    rep.rows.push_back(mc);
  }

  const auto& poly = cfg.g.polynomial();
  const bool exact_control = T > 0.0 && poly && poly->alpha[0] == 0.0 && poly->alpha[1] == 0.0;
  if (exact_control) {
    const Values g_theta = cfg.g(theta);
    const auto R = static_cast<double>(mp.replicas);
    for (int i = 0; i < 2; ++i) {
      MomentComparison& row = rep.rows[static_cast<std::size_t>(3 + i)];
      MomentComparison plain = row;
      plain.name += "_plain";
      const auto vk = static_cast<std::size_t>(3 + i);
      const auto gk = static_cast<std::size_t>(6 + i);
      double mg = 0.0;
      for (const auto& st : stats) mg += st[gk];
      mg /= R;
      double sxy = 0.0;
      double sxx = 0.0;
      for (const auto& st : stats) {
        sxy += (st[vk] - plain.estimate) * (st[gk] - mg);
        sxx += (st[gk] - mg) * (st[gk] - mg);
      }
      const double beta = sxx > 0.0 ? sxy / sxx : 0.0;
      row.estimate = plain.estimate - beta * (mg - g_theta[static_cast<std::size_t>(i)]);
      double ss = 0.0;
      for (const auto& st : stats) {
        const double e = st[vk] - beta * (st[gk] - g_theta[static_cast<std::size_t>(i)]) - row.estimate;
        ss += e * e;
      }
      row.se = std::sqrt(ss / std::max(1.0, R - 2.0) / R);
      const double diff = row.estimate - row.reference;
      row.z = row.se > 0.0 ? diff / row.se : (diff == 0.0 ? 0.0 : std::copysign(HUGE_VAL, diff));
      row.rel = row.reference != 0.0 ? std::abs(diff) / std::abs(row.reference) : std::abs(diff);
      rep.rows.push_back(plain);
    }
  }
  return rep;
}

}  // namespace renormflow
