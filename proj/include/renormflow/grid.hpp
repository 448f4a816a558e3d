#pragma once

#include <algorithm>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "renormflow/chart.hpp"
#include "renormflow/csv.hpp"
#include "renormflow/diffusion.hpp"
#include "renormflow/parallel.hpp"
#include "renormflow/renorm.hpp"

namespace renormflow {

// Diffusion pair stored on the m x m chart nodes (i/m, j/m), i, j < m, of
// phi([0,inf)^2) = [0,1)^2 together with the slopes at the three points at
// infinity. Evaluation interpolates g_i / h bilinearly in chart coordinates,
// treating the edges u = 1 and v = 1 as phantom nodes whose values are those
// of the slope mixture sum_z lambda_{i,z} h_z / h. Mixture fixed points are
// therefore represented exactly, and the tail beyond the last node blends
// into the slope model over one cell.
class GridFunction {
 public:
  GridFunction(int m, EffectiveBoundary boundary, InfinitySlopes slopes)
      : m_(m), boundary_(boundary), slopes_(slopes) {
    if (m < 2) throw DomainError("grid needs m >= 2");
    const auto [bp1, bp2] = boundary_tags(boundary);
    if (slopes.zero_inf.g1 != 0.0 || slopes.inf_zero.g2 != 0.0) {
      throw MalformedFunction("slopes lambda_{1,(0,inf)} and lambda_{2,(inf,0)} must vanish");
    }
    if ((bp1 == BoundaryProperty::D12 && slopes.inf_zero.g1 != 0.0) ||
        (bp2 == BoundaryProperty::D12 && slopes.zero_inf.g2 != 0.0)) {
      throw MalformedFunction("a component vanishing on both axes has zero axis slope");
    }
    const auto n = static_cast<std::size_t>(m) * static_cast<std::size_t>(m);
    values_.assign(n, Values{0.0, 0.0});
    se_.assign(n, Values{0.0, 0.0});
    const auto side = static_cast<std::size_t>(m + 1);
    ratio_.assign(side * side, Values{0.0, 0.0});
    for (int i = 0; i <= m; ++i) {
      for (int j = 0; j <= m; ++j) {
        if (i == m || j == m) ratio_[table_index(i, j)] = slope_ratio(i, j);
      }
    }
  }

  // Grid of g at the nodes (standard errors 0). Requires declared slopes.
  static GridFunction sample(const DiffusionPair& g, int m) {
    if (!g.slopes()) throw DomainError("gridding " + g.label() + " needs its slopes at infinity");
    GridFunction out(m, g.boundary(), *g.slopes());
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) out.set(i, j, g.eval(out.node_point(i, j)), {0.0, 0.0});
    }
    return out;
  }

  int m() const { return m_; }
  EffectiveBoundary boundary() const { return boundary_; }
  const InfinitySlopes& slopes() const { return slopes_; }

  Vec2 node_chart(int i, int j) const {
    return {static_cast<double>(i) / m_, static_cast<double>(j) / m_};
  }
  Vec2 node_point(int i, int j) const { return phi_inv(node_chart(i, j)); }
  std::size_t node_index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(m_) + static_cast<std::size_t>(j);
  }

  const Values& value(int i, int j) const { return values_[node_index(i, j)]; }
  const Values& se(int i, int j) const { return se_[node_index(i, j)]; }

  // Component comp (0 or 1) is forced to 0 at node (i,j): g1 on the column
  // u = 0, g2 on the row v = 0, and a D12 component on both.
  bool structural_zero(int comp, int i, int j) const {
    const auto [bp1, bp2] = boundary_tags(boundary_);
    if (comp == 0) return i == 0 || (j == 0 && bp1 == BoundaryProperty::D12);
    return j == 0 || (i == 0 && bp2 == BoundaryProperty::D12);
  }

  void set(int i, int j, Values v, Values se) {
    for (int c = 0; c < 2; ++c) {
      if (structural_zero(c, i, j)) {
        v[c] = 0.0;
        se[c] = 0.0;
      }
    }
    values_[node_index(i, j)] = v;
    se_[node_index(i, j)] = se;
    const double h = h_weight(node_point(i, j));
    ratio_[table_index(i, j)] = {v[0] / h, v[1] / h};
  }

  Values operator()(const Vec2& x) const { return interpolate(ratio_, m_, x); }

  // View as a diffusion pair. The pair holds its own snapshot of the table;
  // later set() calls do not affect it.
  DiffusionPair as_pair(const std::string& label = "grid") const {
    auto table = std::make_shared<const std::vector<Values>>(ratio_);
    const int m = m_;
    double cmax = 0.0;
    for (const Values& r : *table) cmax = std::max(cmax, r[0] + r[1]);
    const auto [bp1, bp2] = boundary_tags(boundary_);
    std::ostringstream name;
    name << label << "(m=" << m_ << ')';
    DiffusionPair g([table, m](const Vec2& x) { return interpolate(*table, m, x); }, bp1, bp2,
                    name.str());
    return g.with_growth({0.0, cmax * (1.0 + 1e-12) + 1e-300}).with_slopes(slopes_);
  }

  // Text table: header lines, a column line, then m^2 rows i,j,g1,g2,se1,se2.
  void write(std::ostream& os) const {
    os << "renormflow-grid 1\n"
       << "m " << m_ << '\n'
       << "boundary " << to_string(boundary_) << '\n'
       << "slope_zero_inf " << format_double(slopes_.zero_inf.g1) << ' ' << format_double(slopes_.zero_inf.g2) << '\n'
       << "slope_inf_zero " << format_double(slopes_.inf_zero.g1) << ' ' << format_double(slopes_.inf_zero.g2) << '\n'
       << "slope_inf_inf " << format_double(slopes_.inf_inf.g1) << ' ' << format_double(slopes_.inf_inf.g2) << '\n'
       << "i,j,g1,g2,se1,se2\n";
    for (int i = 0; i < m_; ++i) {
      for (int j = 0; j < m_; ++j) {
        const Values& v = value(i, j);
        const Values& s = se(i, j);
        os << i << ',' << j << ',' << format_double(v[0]) << ',' << format_double(v[1]) << ','
           << format_double(s[0]) << ',' << format_double(s[1]) << '\n';
      }
    }
  }

  static GridFunction read(std::istream& is) {
    auto fail = [](const std::string& what) -> GridFunction {
      throw ConfigError("grid file: " + what);
    };
    std::string line;
    auto next = [&]() -> std::string {
      if (!std::getline(is, line)) fail("unexpected end of input");
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    };
    if (next() != "renormflow-grid 1") return fail("bad magic line");
    auto keyed = [&](const std::string& key) {
      const std::string l = next();
      if (l.rfind(key + " ", 0) != 0) fail("expected '" + key + "'");
      return l.substr(key.size() + 1);
    };
    const auto m = parse_double(keyed("m"));
    if (!m || *m < 2 || *m != static_cast<int>(*m)) return fail("bad m");
    const auto boundary = parse_effective_boundary(keyed("boundary"));
    if (!boundary) return fail("bad boundary tag");
    auto pair = [&](const std::string& key) {
      const std::string text = keyed(key);
      const auto parts = split(text, ' ');
      if (parts.size() != 2) fail("bad " + key);
      const auto a = parse_double(parts[0]);
      const auto b = parse_double(parts[1]);
      if (!a || !b) fail("bad " + key);
      return SlopePair{*a, *b};
    };
    InfinitySlopes s;
    s.zero_inf = pair("slope_zero_inf");
    s.inf_zero = pair("slope_inf_zero");
    s.inf_inf = pair("slope_inf_inf");
    GridFunction out(static_cast<int>(*m), *boundary, s);
    if (next() != "i,j,g1,g2,se1,se2") return fail("bad column line");
    std::vector<bool> seen(static_cast<std::size_t>(out.m_ * out.m_), false);
    for (int r = 0; r < out.m_ * out.m_; ++r) {
      const std::string row = next();
      const auto f = split(row, ',');
      if (f.size() != 6) return fail("bad row");
      double v[6];
      for (int k = 0; k < 6; ++k) {
        const auto d = parse_double(f[static_cast<std::size_t>(k)]);
        if (!d) return fail("bad number in row");
        v[k] = *d;
      }
      const int i = static_cast<int>(v[0]);
      const int j = static_cast<int>(v[1]);
      if (i < 0 || j < 0 || i >= out.m_ || j >= out.m_ || seen[out.node_index(i, j)]) {
        return fail("bad node index");
      }
      seen[out.node_index(i, j)] = true;
      out.set(i, j, {v[2], v[3]}, {v[4], v[5]});
    }
    return out;
  }

  friend bool operator==(const GridFunction& a, const GridFunction& b) {
    return a.m_ == b.m_ && a.boundary_ == b.boundary_ && a.slopes_ == b.slopes_ &&
           a.values_ == b.values_ && a.se_ == b.se_;
  }

 private:
  std::size_t table_index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(m_ + 1) + static_cast<std::size_t>(j);
  }

  Values slope_ratio(int i, int j) const {
    const double u = static_cast<double>(i) / m_;
    const double v = static_cast<double>(j) / m_;
    const double w10 = u * (1.0 - v);
    const double w01 = (1.0 - u) * v;
    const double w11 = u * v;
    return {slopes_.inf_zero.g1 * w10 + slopes_.zero_inf.g1 * w01 + slopes_.inf_inf.g1 * w11,
            slopes_.inf_zero.g2 * w10 + slopes_.zero_inf.g2 * w01 + slopes_.inf_inf.g2 * w11};
  }

  static Values interpolate(const std::vector<Values>& table, int m, const Vec2& x) {
    const Vec2 y = phi(x);
    const double s = y.x1 * m;
    const double t = y.x2 * m;
    const int i = std::min(static_cast<int>(s), m - 1);
    const int j = std::min(static_cast<int>(t), m - 1);
    const double fu = s - i;
    const double fv = t - j;
    const auto side = static_cast<std::size_t>(m + 1);
    const std::size_t base = static_cast<std::size_t>(i) * side + static_cast<std::size_t>(j);
    const Values& r00 = table[base];
    const Values& r01 = table[base + 1];
    const Values& r10 = table[base + side];
    const Values& r11 = table[base + side + 1];
    const double h = h_weight(x);
    Values out;
    for (int c = 0; c < 2; ++c) {
      const double lo = r00[c] + fv * (r01[c] - r00[c]);
      const double hi = r10[c] + fv * (r11[c] - r10[c]);
      out[c] = h * (lo + fu * (hi - lo));
    }
    return out;
  }

  int m_;
  EffectiveBoundary boundary_;
  InfinitySlopes slopes_;
  std::vector<Values> values_;
  std::vector<Values> se_;
  std::vector<Values> ratio_;
};

// One application of F_c on a grid. Interior nodes are Monte Carlo estimates
// at phi^{-1}(node) with stream mc.stream + node index; structural zeros are
// kept; slopes and boundary tag are carried over unchanged.
inline GridFunction apply_fc_grid(double c, const GridFunction& gf, const McParams& mc, int workers = 1) {
  const DiffusionPair g = gf.as_pair();
  require_operator_domain(c, g);
  GridFunction out(gf.m(), gf.boundary(), gf.slopes());
  const int m = gf.m();
  std::vector<FcEstimate> est(static_cast<std::size_t>(m) * static_cast<std::size_t>(m));
  parallel_for(est.size(), workers, [&](std::size_t k) {
    const int i = static_cast<int>(k) / m;
    const int j = static_cast<int>(k) % m;
    if (gf.structural_zero(0, i, j) && gf.structural_zero(1, i, j)) return;
    est[k] = apply_fc_at(c, g, gf.node_point(i, j), mc.with_stream(mc.stream + k));
  });
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const FcEstimate& e = est[gf.node_index(i, j)];
      out.set(i, j, e.value, e.se);
    }
  }
  return out;
}

// F^[1] g, ..., F^[n] g with F^[k] = F_{c_{k-1}} o F^[k-1]. Iteration k
// draws from streams mc.stream + k m^2 + node.
inline std::vector<GridFunction> iterate_grid(const CoefficientSequence& cs, const GridFunction& gf,
                                              std::size_t n, const McParams& mc, int workers = 1) {
  if (n < 1) throw DomainError("need at least one iterate");
  std::vector<GridFunction> out;
  out.reserve(n);
  const auto nodes = static_cast<std::uint64_t>(gf.m()) * static_cast<std::uint64_t>(gf.m());
  const GridFunction* prev = &gf;
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back(apply_fc_grid(cs.at(k), *prev, mc.with_stream(mc.stream + k * nodes), workers));
    prev = &out.back();
  }
  return out;
}

}  // namespace renormflow
