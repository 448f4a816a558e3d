#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "renormflow/chain.hpp"
#include "renormflow/config.hpp"
#include "renormflow/csv.hpp"
#include "renormflow/diffusion.hpp"
#include "renormflow/grid.hpp"
#include "renormflow/lattice.hpp"
#include "renormflow/renorm.hpp"

namespace renormflow::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kPass = 0, kToleranceFail = 1, kConfigError = 2, kDomainError = 3 };

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  int workers = 0;
};

// What a command hands back to the runner: files written (relative to the
// output directory), the pass flag, and a summary for the metadata record.
struct CommandResult {
  bool pass = true;
  std::vector<std::string> outputs;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
};

struct Context {
  const Config& cfg;
  std::uint64_t seed;
  int workers;
  std::filesystem::path out;
  std::ostream& log;

  McParams mc() const { return mc_from_config(cfg, seed); }

  void write_file(const std::string& name, const std::string& content, CommandResult& r) const {
    std::ofstream os(out / name, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + (out / name).string());
    os << content;
    r.outputs.push_back(name);
  }
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string experiment_id(const std::string& command, const Config& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(command + "\n" + cfg.canonical())));
  return buf;
}

// UTC time, taken from SOURCE_DATE_EPOCH when set so reruns are identical.
inline std::string timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      t = static_cast<std::time_t>(std::stoll(env));
    } catch (const std::exception&) {
      throw ConfigError("SOURCE_DATE_EPOCH is not an integer");
    }
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::ordered_json config_echo(const Config& cfg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [s, sec] : cfg.sections()) {
    nlohmann::ordered_json o = nlohmann::ordered_json::object();
    for (const auto& [k, v] : sec) o[k] = v;
    j[s] = o;
  }
  return j;
}

inline CoefficientSequence coeffs_from(const Config& cfg, const std::string& sec, std::size_t min_len = 1) {
  if (cfg.has(sec, "coeffs")) {
    auto v = cfg.numbers(sec, "coeffs");
    if (v.size() < min_len) {
      throw ConfigError(sec + ".coeffs needs at least " + std::to_string(min_len) + " values");
    }
    return CoefficientSequence(std::move(v));
  }
  return CoefficientSequence::constant(cfg.number(sec, "c", 1.0));
}

inline std::vector<Vec2> probes_from(const Config& cfg, const std::string& sec, const std::string& key) {
  auto ps = cfg.points(sec, key);
  if (ps.empty()) throw ConfigError(sec + "." + key + ": empty probe list");
  for (const Vec2& p : ps) {
    if (!in_quadrant(p)) throw ConfigError(sec + "." + key + ": probe outside the quadrant");
  }
  return ps;
}

inline void require_section(const Config& cfg, const std::string& sec) {
  if (!cfg.has_section(sec)) throw ConfigError("missing section [" + sec + "]");
}

// ---------------------------------------------------------------- fc-eval

inline CommandResult cmd_fc_eval(const Context& ctx) {
  const Config& cfg = ctx.cfg;
  const std::string sec = "fc-eval";
  require_section(cfg, sec);
  cfg.require_known(sec, {"c", "probes"});
  const DiffusionPair g = diffusion_from_config(cfg);
  const double c = cfg.number(sec, "c");
  const auto probes = probes_from(cfg, sec, "probes");
  const McParams mc = ctx.mc();
  require_operator_domain(c, g);
  std::vector<FcEstimate> est(probes.size());
  parallel_for(probes.size(), ctx.workers, [&](std::size_t k) {
    est[k] = apply_fc_at(c, g, probes[k], mc.with_stream(mc.stream + k));
  });
  std::ostringstream os;
  CsvWriter w(os);
  w.row("theta1", "theta2", "fc1", "fc2", "se1", "se2");
  for (std::size_t k = 0; k < probes.size(); ++k) {
    w.row(probes[k].x1, probes[k].x2, est[k].value[0], est[k].value[1], est[k].se[0], est[k].se[1]);
  }
  CommandResult r;
  ctx.write_file("fc-eval.csv", os.str(), r);
  r.summary["n_probes"] = probes.size();
  r.summary["g"] = g.label();
  return r;
}

// ---------------------------------------------------------------- moments

inline CommandResult cmd_moments(const Context& ctx) {
  const Config& cfg = ctx.cfg;
  const std::string sec = "moments";
  require_section(cfg, sec);
  cfg.require_known(sec, {"c", "theta", "z_max", "rel_tol"});
  const DiffusionPair g = diffusion_from_config(cfg);
  const double c = cfg.number(sec, "c");
  const Vec2 theta = cfg.point(sec, "theta");
  const double z_max = cfg.number(sec, "z_max", 3.0);
  const double rel = cfg.number(sec, "rel_tol", 0.02);
  const McParams mc = ctx.mc();
  require_operator_domain(c, g);
  const EmpiricalMeasure m = sample_for(c, g, theta, mc);
  const MomentReport rep = validate_moments(m);
  std::ostringstream os;
  CsvWriter w(os);
  w.row("quantity", "estimate", "reference", "residual", "se", "z", "scale", "pass");
  for (const auto& row : rep.rows) {
    w.row(row.name, row.estimate, row.reference, row.residual, row.se, row.z, row.scale,
          row.within(z_max, rel));
  }
  CommandResult r;
  r.pass = rep.passes(z_max, rel);
  ctx.write_file("moments.csv", os.str(), r);
  double worst = 0.0;
  for (const auto& row : rep.rows) {
    if (row.se > 0.0) worst = std::max(worst, std::abs(row.z));
  }
  r.summary["n_samples"] = m.n();
  r.summary["max_abs_z"] = worst;
  r.summary["g"] = g.label();
  return r;
}

// ---------------------------------------------------------------- fixed-point-test

inline CommandResult cmd_fixed_point_test(const Context& ctx) {
  const Config& cfg = ctx.cfg;
  const std::string sec = "fixed-point-test";
  require_section(cfg, sec);
  cfg.require_known(sec, {"c", "probes", "tolerance"});
  const DiffusionPair g = diffusion_from_config(cfg);
  const double c = cfg.number(sec, "c");
  const auto probes = probes_from(cfg, sec, "probes");
  const double tol = cfg.number(sec, "tolerance", 0.05);
  const McParams mc = ctx.mc();
  const FixedPointReport rep = fixed_point_report(c, g, probes, mc, ctx.workers);
  std::ostringstream os;
  CsvWriter w(os);
  w.row("theta1", "theta2", "g1", "g2", "fc1", "fc2", "se1", "se2", "residual1", "residual2");
  for (const auto& p : rep.probes) {
    w.row(p.theta.x1, p.theta.x2, p.g[0], p.g[1], p.fc.value[0], p.fc.value[1], p.fc.se[0], p.fc.se[1],
          p.residual[0], p.residual[1]);
  }
  CommandResult r;
  r.pass = rep.residual <= tol;
  ctx.write_file("fixed-point-test.csv", os.str(), r);
  r.summary["residual"] = rep.residual;
  r.summary["max_weighted_se"] = rep.max_weighted_se;
  r.summary["tolerance"] = tol;
  r.summary["g"] = g.label();
  return r;
}

// ---------------------------------------------------------------- convergence

inline CommandResult cmd_convergence(const Context& ctx) {
  const Config& cfg = ctx.cfg;
  const std::string sec = "convergence";
  require_section(cfg, sec);
  cfg.require_known(sec, {"c", "coeffs", "m", "iterations", "theta", "tolerance", "write_grids"});
  if (cfg.str("diffusion", "kind", "") != "perturbed_fixed_point") {
    throw ConfigError("convergence needs diffusion.kind = perturbed_fixed_point");
  }
  const DiffusionPair g = diffusion_from_config(cfg);
  const CoefficientSequence cs = coeffs_from(cfg, sec);
  const int m = static_cast<int>(cfg.count(sec, "m", 17));
  const std::size_t n = cfg.count(sec, "iterations", 5);
  const double tol = cfg.number(sec, "tolerance", 0.1);
  const bool write_grids = cfg.flag(sec, "write_grids", true);
  const auto probes = cfg.has(sec, "theta") ? probes_from(cfg, sec, "theta") : std::vector<Vec2>{{1.0, 1.0}};
  if (m < 2) throw ConfigError(sec + ".m must be >= 2");
  if (n < 1) throw ConfigError(sec + ".iterations must be >= 1");
  const McParams mc = ctx.mc();

  const GridFunction g0 = GridFunction::sample(g, m);
  std::vector<GridFunction> iterates;
  iterates.reserve(n);
  const auto nodes = static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(m);
  for (std::size_t k = 0; k < n; ++k) {
    const GridFunction& prev = k == 0 ? g0 : iterates.back();
    iterates.push_back(apply_fc_grid(cs.at(k), prev, mc.with_stream(mc.stream + k * nodes), ctx.workers));
    ctx.log << "convergence: iterate " << k + 1 << "/" << n << " done\n" << std::flush;
  }

  const InfinitySlopes& sl = *g.slopes();
  std::ostringstream os;
  CsvWriter w(os);
  w.row("n", "theta1", "theta2", "err1", "err2", "herr1", "herr2", "value1", "value2", "limit1", "limit2");
  CommandResult r;
  r.pass = true;
  nlohmann::ordered_json per_probe = nlohmann::ordered_json::array();
  for (const Vec2& th : probes) {
    const Values limit = sl.mixture(th);
    const double h = h_weight(th);
    Values first{0.0, 0.0};
    Values last{0.0, 0.0};
    for (std::size_t k = 0; k <= n; ++k) {
      const Values v = k == 0 ? g.eval(th) : iterates[k - 1](th);
      const Values err{std::abs(v[0] - limit[0]), std::abs(v[1] - limit[1])};
      if (k == 0) first = err;
      last = err;
      w.row(static_cast<std::int64_t>(k), th.x1, th.x2, err[0], err[1], err[0] / h, err[1] / h, v[0], v[1],
            limit[0], limit[1]);
    }
    bool ok = true;
    for (int i = 0; i < 2; ++i) {
      // A component that starts on its limit only has to stay within tolerance.
      const bool decreased = first[i] == 0.0 ? true : last[i] < first[i];
      ok = ok && decreased && last[i] < tol;
    }
    r.pass = r.pass && ok;
    per_probe.push_back({{"theta", {th.x1, th.x2}},
                         {"initial_error", {first[0], first[1]}},
                         {"final_error", {last[0], last[1]}},
                         {"pass", ok}});
  }
  ctx.write_file("convergence.csv", os.str(), r);
  if (write_grids) {
    for (std::size_t k = 0; k < n; ++k) {
      std::ostringstream gs;
      iterates[k].write(gs);
      char name[64];
      std::snprintf(name, sizeof(name), "convergence-grid-%02zu.txt", k + 1);
      ctx.write_file(name, gs.str(), r);
    }
  }
  r.summary["tolerance"] = tol;
  r.summary["m"] = m;
  r.summary["iterations"] = n;
  r.summary["probes"] = per_probe;
  r.summary["g"] = g.label();
  return r;
}

// ---------------------------------------------------------------- chain-trap

inline CommandResult cmd_chain_trap(const Context& ctx) {
  const Config& cfg = ctx.cfg;
  const std::string sec = "chain-trap";
  require_section(cfg, sec);
  cfg.require_known(sec, {"c", "x0", "depth", "n_chains", "big", "small", "saturation", "sampler", "batch",
                          "tolerance", "max_unresolved", "check"});
  const DiffusionPair g = diffusion_from_config(cfg);
  const double c = cfg.number(sec, "c");
  const Vec2 x0 = cfg.point(sec, "x0");
  const std::size_t depth = cfg.count(sec, "depth", 30);
  const std::size_t n_chains = cfg.count(sec, "n_chains", 2000);
  TrapThresholds t;
  t.big = cfg.number(sec, "big", t.big);
  t.small = cfg.number(sec, "small", t.small);
  t.saturation = cfg.number(sec, "saturation", t.saturation);
  HChainParams hp;
  const std::string sampler = cfg.str(sec, "sampler", "doob");
  if (sampler == "doob") {
    hp.sampler = HSampler::doob;
  } else if (sampler == "resample") {
    hp.sampler = HSampler::resample;
  } else {
    throw ConfigError(sec + ".sampler: expected doob or resample");
  }
  hp.batch = cfg.count(sec, "batch", kDefaultHBatch);
  const double tol = cfg.number(sec, "tolerance", 0.03);
  const double max_unresolved = cfg.number(sec, "max_unresolved", 0.05);
  if (!in_quadrant(x0)) throw ConfigError(sec + ".x0 outside the quadrant");

  // Closed forms for the points at infinity not contained in the zero set.
  const double h0 = h_weight(x0);
  const EffectiveBoundary b = g.boundary();
  const bool a1_in = b == EffectiveBoundary::A1 || b == EffectiveBoundary::A1uA2;
  const bool a2_in = b == EffectiveBoundary::A2 || b == EffectiveBoundary::A1uA2;
  std::map<std::string, std::optional<double>> expected = {
      {"inf_inf", x0.x1 * x0.x2 / h0},
      {"inf_0", a1_in ? std::nullopt : std::optional<double>(x0.x1 / h0)},
      {"0_inf", a2_in ? std::nullopt : std::optional<double>(x0.x2 / h0)}};
  std::vector<std::string> checks;
  if (cfg.has(sec, "check")) {
    std::istringstream is(cfg.str(sec, "check"));
    std::string tok;
    while (is >> tok) {
      if (!expected.count(tok)) throw ConfigError(sec + ".check: unknown class '" + tok + "'");
      if (!expected[tok]) throw ConfigError(sec + ".check: no closed form for '" + tok + "' with this g");
      checks.push_back(tok);
    }
  } else {
    for (const char* k : {"inf_inf", "inf_0", "0_inf"}) {
      if (expected[k]) checks.emplace_back(k);
    }
  }

  const McParams mc = ctx.mc();
  const TrapReport rep = trapping_probabilities(x0, c, g, depth, n_chains, t, mc, ctx.workers, hp);
  const std::map<std::string, double> got = {
      {"inf_inf", rep.p_inf_inf}, {"inf_0", rep.p_inf_0}, {"0_inf", rep.p_0_inf}};
  CommandResult r;
  r.pass = rep.p_unresolved <= max_unresolved;
  nlohmann::ordered_json checked = nlohmann::ordered_json::object();
  for (const auto& k : checks) {
    const double diff = std::abs(got.at(k) - *expected.at(k));
    const bool ok = diff <= tol;
    r.pass = r.pass && ok;
    checked[k] = {{"estimate", got.at(k)}, {"expected", *expected.at(k)}, {"pass", ok}};
  }

  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::ostringstream os;
  CsvWriter w(os);
  w.row("x0_1", "x0_2", "c", "depth", "n_chains", "big", "small", "sampler", "p_inf_inf", "p_inf_0", "p_0_inf",
        "p_boundary_g", "p_unresolved", "expected_inf_inf", "expected_inf_0", "expected_0_inf", "se_inf_inf",
        "se_inf_0", "se_0_inf", "pass");
  w.row(x0.x1, x0.x2, c, static_cast<std::uint64_t>(depth), static_cast<std::uint64_t>(n_chains), t.big, t.small,
        to_string(hp.sampler), rep.p_inf_inf, rep.p_inf_0, rep.p_0_inf, rep.p_boundary_g, rep.p_unresolved,
        opt(expected["inf_inf"]), opt(expected["inf_0"]), opt(expected["0_inf"]), rep.se(rep.p_inf_inf),
        rep.se(rep.p_inf_0), rep.se(rep.p_0_inf), r.pass);
  ctx.write_file("chain-trap.csv", os.str(), r);
  r.summary["checks"] = checked;
  r.summary["p_unresolved"] = rep.p_unresolved;
  r.summary["p_boundary_g"] = rep.p_boundary_g;
  r.summary["tolerance"] = tol;
  r.summary["g"] = g.label();
  return r;
}

// ---------------------------------------------------------------- lattice-sim

inline CommandResult cmd_lattice_sim(const Context& ctx) {
  const Config& cfg = ctx.cfg;
  const std::string sec = "lattice-sim";
  require_section(cfg, sec);
  cfg.require_known(sec, {"N", "K", "c", "coeffs", "theta", "T", "dt", "replicas", "z_max", "var_tol",
                          "var_reference", "conservation_steps", "conservation_tol", "record_every"});
  LatticeConfig lc;
  lc.N = static_cast<int>(cfg.count(sec, "N"));
  lc.K = static_cast<int>(cfg.count(sec, "K"));
  lc.g = diffusion_from_config(cfg);
  const McParams mc = ctx.mc();
  lc.dt = cfg.number(sec, "dt", mc.dt);
  lc.scheme = mc.scheme;
  if (cfg.has(sec, "coeffs")) {
    lc.coeffs = coeffs_from(cfg, sec, static_cast<std::size_t>(std::max(lc.K, 1)));
  } else {
    lc.coeffs = CoefficientSequence(std::vector<double>(static_cast<std::size_t>(std::max(lc.K, 1)),
                                                        cfg.number(sec, "c", 1.0)));
  }
  const Vec2 theta = cfg.point(sec, "theta");
  const double T = cfg.number(sec, "T");
  const double z_max = cfg.number(sec, "z_max", 3.0);
  const double var_tol = cfg.number(sec, "var_tol", 0.15);
  const auto var_ref = cfg.optional_number(sec, "var_reference");
  const std::size_t cons_steps = cfg.count(sec, "conservation_steps", 100);
  const double cons_tol = cfg.number(sec, "conservation_tol", 1e-10);
  const std::size_t record_every = cfg.count(sec, "record_every", 0);
  lc.validate();

  McKeanVlasovParams mp;
  mp.replicas = cfg.count(sec, "replicas", 100);
  mp.seed = ctx.seed;
  mp.workers = ctx.workers;
  mp.reference = mc;
  // The single-site reference chain uses the stream after all lattice sites.
  mp.reference.stream = mp.replicas * lc.sites();
  const McKeanVlasovReport rep = mckean_vlasov_check(lc, theta, T, mp);

  CommandResult r;
  r.pass = true;
  std::ostringstream os;
  CsvWriter w(os);
  w.row("quantity", "estimate", "se", "reference", "z", "rel", "pass");
  nlohmann::ordered_json rows = nlohmann::ordered_json::object();
  for (const auto& row : rep.rows) {
    bool ok = true;
    double reference = row.reference;
    double z = row.z;
    double rel = row.rel;
    const bool is_var = row.name == "var_x1" || row.name == "var_x2";
    if (is_var && var_ref && T > 0.0) {
      reference = *var_ref;
      const double diff = row.estimate - reference;
      z = row.se > 0.0 ? diff / row.se : 0.0;
      rel = std::abs(diff) / std::abs(reference);
    }
    if (row.name.rfind("mean_", 0) == 0) ok = std::abs(z) <= z_max;
    if (is_var) ok = T > 0.0 ? rel <= var_tol : row.estimate == 0.0;
    r.pass = r.pass && ok;
    w.row(row.name, row.estimate, row.se, reference, z, rel, ok);
    rows[row.name] = {{"estimate", row.estimate}, {"se", row.se}, {"reference", reference}, {"pass", ok}};
  }
  if (T > 0.0 && var_ref) {
    for (int i = 0; i < 2; ++i) {
      const double est = rep.single_site_var[static_cast<std::size_t>(i)];
      const double se = rep.single_site_var_se[static_cast<std::size_t>(i)];
      const double z = se > 0.0 ? (est - *var_ref) / se : 0.0;
      const bool ok = std::abs(z) <= z_max || std::abs(est - *var_ref) <= 0.02 * std::abs(*var_ref);
      r.pass = r.pass && ok;
      const std::string name = i == 0 ? "single_site_var_x1" : "single_site_var_x2";
      w.row(name, est, se, *var_ref, z, std::abs(est - *var_ref) / std::abs(*var_ref), ok);
      rows[name] = {{"estimate", est}, {"se", se}, {"reference", *var_ref}, {"pass", ok}};
    }
  }

  // Zero-noise run from a non-uniform start: lattice sums are invariant.
  double cons_err = 0.0;
  if (cons_steps > 0) {
    LatticeState s = uniform_state(lc, theta, ctx.seed, 0);
    RngStream init(ctx.seed, mp.reference.stream + 1);
    for (Vec2& v : s.values) v = {2.0 * (theta.x1 + 1.0) * init.uniform(), 2.0 * (theta.x2 + 1.0) * init.uniform()};
    auto sums = [](const LatticeState& st) {
      Vec2 acc{0.0, 0.0};
      for (const Vec2& v : st.values) {
        acc.x1 += v.x1;
        acc.x2 += v.x2;
      }
      return acc;
    };
    const Vec2 before = sums(s);
    for (std::size_t k = 0; k < cons_steps; ++k) step_lattice(s, lc, Noise::off, 1);
    const Vec2 after = sums(s);
    cons_err = std::max(std::abs(after.x1 - before.x1) / std::abs(before.x1),
                        std::abs(after.x2 - before.x2) / std::abs(before.x2));
    const bool ok = cons_err <= cons_tol;
    r.pass = r.pass && ok;
    w.row("drift_conservation", cons_err, 0.0, 0.0, 0.0, cons_err, ok);
    rows["drift_conservation"] = {{"relative_change", cons_err}, {"pass", ok}};
  }
  ctx.write_file("lattice-sim.csv", os.str(), r);

  if (record_every > 0) {
    // Replica 0 again, with the same streams, recording its trajectory and
    // the block-average series.
    LatticeState s = uniform_state(lc, theta, ctx.seed, 0);
    std::ostringstream ts;
    std::ostringstream bs;
    CsvWriter tw(ts);
    CsvWriter bw(bs);
    tw.row("t", "site_index", "x1", "x2");
    bw.row("t", "level", "block", "y1", "y2");
    run_lattice(s, lc, T, Noise::on, 1, record_every, [&](const LatticeState& st) {
      for (std::size_t i = 0; i < st.values.size(); ++i) {
        tw.row(st.time, static_cast<std::uint64_t>(i), st.values[i].x1, st.values[i].x2);
      }
      const auto levels = block_averages(st, lc);
      for (std::size_t k = 1; k < levels.size(); ++k) {
        for (std::size_t b = 0; b < levels[k].size(); ++b) {
          bw.row(st.time, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(b), levels[k][b].x1,
                 levels[k][b].x2);
        }
      }
    });
    ctx.write_file("lattice-trajectory.csv", ts.str(), r);
    ctx.write_file("lattice-blocks.csv", bs.str(), r);
  }
  r.summary["rows"] = rows;
  r.summary["replicas"] = mp.replicas;
  r.summary["sites"] = lc.sites();
  r.summary["g"] = lc.g.label();
  return r;
}

// ---------------------------------------------------------------- runner

struct CommandInfo {
  const char* name;
  const char* anchor;
  std::function<CommandResult(const Context&)> fn;
};

inline const std::vector<CommandInfo>& commands() {
  static const std::vector<CommandInfo> list = {
      {"fc-eval", "renormalization transformation: F_c g(theta) = E g(X) under the equilibrium with "
                  "attraction point theta", cmd_fc_eval},
      {"convergence", "domain of attraction: F^[n] g(theta) tends to sum_z lambda_{i,z} h_z(theta) for "
                      "perturbed fixed points", cmd_convergence},
      {"moments", "equilibrium moment identities: E X_i = theta_i, E X1X2 = theta1 theta2, "
                  "E X_i^2 = theta_i^2 + E g_i(X)/c", cmd_moments},
      {"fixed-point-test", "fixed points of F_c: g_i = b_i x_i + c_i x1 x2 satisfy F_c g = g",
       cmd_fixed_point_test},
      {"chain-trap", "trapping probabilities of the h-transformed chain: x1x2/h, x1/h, x2/h",
       cmd_chain_trap},
      {"lattice-sim", "mean-field limit of the hierarchical lattice: sites approach the single-colony "
                      "equilibrium with attraction point theta", cmd_lattice_sim},
  };
  return list;
}

// Runs one command and writes <command>.meta.jsonl next to its outputs.
// Returns the process exit code; messages go to `err`.
inline int run(const std::string& command, const RunOptions& opt, std::ostream& log, std::ostream& err) {
  const CommandInfo* info = nullptr;
  for (const auto& c : commands()) {
    if (command == c.name) info = &c;
  }
  if (!info) {
    err << "unknown command: " << command << "\n";
    return kConfigError;
  }
  try {
    Config cfg = Config::load(opt.config_path);
    cfg.require_known("experiment", {"seed", "label"});
    if (opt.seed) cfg.set("experiment", "seed", std::to_string(*opt.seed));
    const std::uint64_t seed = cfg.count("experiment", "seed", 1);
    const int workers = resolve_workers(opt.workers);
    std::filesystem::path out(opt.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw ConfigError("cannot create output directory " + out.string());
    const Context ctx{cfg, seed, workers, out, log};
    CommandResult res;
    int code = kPass;
    std::string error;
    try {
      res = info->fn(ctx);
      code = res.pass ? kPass : kToleranceFail;
    } catch (const ConfigError&) {
      throw;
    } catch (const MalformedFunction& e) {
      throw ConfigError(e.what());
    } catch (const DegeneratePair& e) {
      throw ConfigError(e.what());
    } catch (const Error& e) {
      code = kDomainError;
      error = e.what();
      err << "domain error: " << error << "\n";
    }
    nlohmann::ordered_json meta;
    meta["tool"] = "renormflow";
    meta["version"] = kVersion;
    meta["experiment_id"] = experiment_id(command, cfg);
    meta["command"] = command;
    meta["timestamp"] = timestamp();
    meta["seed"] = seed;
    meta["anchor"] = info->anchor;
    meta["config"] = config_echo(cfg);
    meta["outputs"] = res.outputs;
    meta["pass"] = code == kPass;
    meta["exit_code"] = code;
    if (!error.empty()) meta["error"] = error;
    meta["results"] = res.summary;
    std::ofstream ms(out / (command + ".meta.jsonl"), std::ios::binary | std::ios::trunc);
    ms << meta.dump() << "\n";
    log << command << ": " << (code == kPass ? "pass" : code == kToleranceFail ? "tolerance fail" : "domain error")
        << " (exit " << code << ")\n";
    return code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    err << "domain error: " << e.what() << "\n";
    return kDomainError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

inline int main(int argc, char** argv) {
  CLI::App app{"renormflow: renormalization transformations of two-type diffusion functions"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  RunOptions opt;
  std::uint64_t seed = 0;
  for (const auto& c : commands()) {
    CLI::App* sub = app.add_subcommand(c.name, c.anchor);
    sub->add_option("--config", opt.config_path, "experiment config file")->required();
    sub->add_option("--seed", seed, "master seed, overrides experiment.seed");
    sub->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
    sub->add_option("--workers", opt.workers, "worker threads (default: RENORMFLOW_WORKERS or all cores)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opt.seed = seed;
  return run(sub->get_name(), opt, std::cout, std::cerr);
}

}  // namespace renormflow::cli
