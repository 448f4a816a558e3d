#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "renormflow/csv.hpp"
#include "renormflow/diffusion.hpp"
#include "renormflow/error.hpp"
#include "renormflow/renorm.hpp"
#include "renormflow/vec2.hpp"

namespace renormflow {

// Flat INI-style configuration: [section] headers, key = value lines,
// comment lines starting with ';' or '#'. Values are kept as text; typed
// accessors raise ConfigError naming section.key.
class Config {
 public:
  using Section = std::map<std::string, std::string>;

  static Config parse(std::istream& is, const std::string& source = "<config>") {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    Config cfg;
    for (const auto& [name, sec] : tree) {
      if (sec.empty() && !sec.data().empty()) {
        throw ConfigError(source + ": key '" + name + "' outside any section");
      }
      Section& out = cfg.sections_[name];
      for (const auto& [key, val] : sec) out[key] = trim(val.data());
    }
    return cfg;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  static Config load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    return parse(is, path);
  }

  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }
  bool has(const std::string& s, const std::string& k) const {
    const auto it = sections_.find(s);
    return it != sections_.end() && it->second.count(k) > 0;
  }

  const std::map<std::string, Section>& sections() const { return sections_; }

  void set(const std::string& s, const std::string& k, const std::string& v) { sections_[s][k] = v; }

  std::optional<std::string> find(const std::string& s, const std::string& k) const {
    if (!has(s, k)) return std::nullopt;
    return sections_.at(s).at(k);
  }

  std::string str(const std::string& s, const std::string& k) const {
    if (auto v = find(s, k)) return *v;
    throw ConfigError("missing key " + s + "." + k);
  }
  std::string str(const std::string& s, const std::string& k, const std::string& def) const {
    return find(s, k).value_or(def);
  }

  double number(const std::string& s, const std::string& k) const {
    const std::string v = str(s, k);
    const auto d = parse_double(v);
    if (!d) throw ConfigError(s + "." + k + ": not a number: '" + v + "'");
    return *d;
  }
  double number(const std::string& s, const std::string& k, double def) const {
    return has(s, k) ? number(s, k) : def;
  }
  std::optional<double> optional_number(const std::string& s, const std::string& k) const {
    if (!has(s, k)) return std::nullopt;
    return number(s, k);
  }

  std::uint64_t count(const std::string& s, const std::string& k) const {
    const std::string v = str(s, k);
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size() || v.empty()) {
      // Accept integral values written in floating notation such as 1e5.
      const auto d = parse_double(v);
      if (!d || *d < 0.0 || *d != std::floor(*d) || *d > 1.8e19) {
        throw ConfigError(s + "." + k + ": not a nonnegative integer: '" + v + "'");
      }
      return static_cast<std::uint64_t>(*d);
    }
    return out;
  }
  std::uint64_t count(const std::string& s, const std::string& k, std::uint64_t def) const {
    return has(s, k) ? count(s, k) : def;
  }

  bool flag(const std::string& s, const std::string& k, bool def) const {
    if (!has(s, k)) return def;
    const std::string v = str(s, k);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(s + "." + k + ": expected true or false");
  }

  // Whitespace- or comma-separated numbers.
  std::vector<double> numbers(const std::string& s, const std::string& k) const {
    std::vector<double> out;
    std::string v = str(s, k);
    for (char& ch : v) {
      if (ch == ',') ch = ' ';
    }
    std::istringstream is(v);
    std::string tok;
    while (is >> tok) {
      const auto d = parse_double(tok);
      if (!d) throw ConfigError(s + "." + k + ": not a number: '" + tok + "'");
      out.push_back(*d);
    }
    return out;
  }

  // Points "x1 x2; x1 x2; ...". An empty value is an empty list.
  std::vector<Vec2> points(const std::string& s, const std::string& k) const {
    std::vector<Vec2> out;
    const std::string v = str(s, k);
    for (std::string_view part : split(v, ';')) {
      std::string p(part);
      for (char& ch : p) {
        if (ch == ',') ch = ' ';
      }
      std::istringstream is(p);
      std::vector<double> xs;
      std::string tok;
      while (is >> tok) {
        const auto d = parse_double(tok);
        if (!d) throw ConfigError(s + "." + k + ": not a number: '" + tok + "'");
        xs.push_back(*d);
      }
      if (xs.empty()) continue;
      if (xs.size() != 2) throw ConfigError(s + "." + k + ": each point needs two coordinates");
      out.push_back({xs[0], xs[1]});
    }
    return out;
  }

  Vec2 point(const std::string& s, const std::string& k) const {
    const auto ps = points(s, k);
    if (ps.size() != 1) throw ConfigError(s + "." + k + ": expected one point 'x1 x2'");
    return ps.front();
  }

  // Unknown keys are rejected so that typos do not fall back to defaults.
  void require_known(const std::string& s, const std::set<std::string>& keys) const {
    const auto it = sections_.find(s);
    if (it == sections_.end()) return;
    for (const auto& [k, v] : it->second) {
      if (!keys.count(k)) throw ConfigError("unknown key " + s + "." + k);
    }
  }

  // Sorted "section.key=value" lines; input of the experiment id.
  std::string canonical() const {
    std::string out;
    for (const auto& [s, sec] : sections_) {
      for (const auto& [k, v] : sec) out += s + "." + k + "=" + v + "\n";
    }
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\"");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, Section> sections_;
};

// [diffusion] kind = fixed_point | polynomial | perturbed_fixed_point.
inline DiffusionPair diffusion_from_config(const Config& cfg, const std::string& sec = "diffusion") {
  if (!cfg.has_section(sec)) throw ConfigError("missing section [" + sec + "]");
  const std::string kind = cfg.str(sec, "kind");
  if (kind == "fixed_point") {
    cfg.require_known(sec, {"kind", "b1", "b2", "c1", "c2"});
    return make_fixed_point(cfg.number(sec, "b1", 0.0), cfg.number(sec, "b2", 0.0), cfg.number(sec, "c1", 0.0),
                            cfg.number(sec, "c2", 0.0));
  }
  if (kind == "polynomial") {
    cfg.require_known(sec, {"kind", "alpha1", "alpha2", "beta1", "beta2", "gamma1", "gamma2"});
    PolynomialDiffusion p;
    p.alpha = {cfg.number(sec, "alpha1", 0.0), cfg.number(sec, "alpha2", 0.0)};
    p.beta = {cfg.number(sec, "beta1", 0.0), cfg.number(sec, "beta2", 0.0)};
    p.gamma = {cfg.number(sec, "gamma1", 0.0), cfg.number(sec, "gamma2", 0.0)};
    return make_polynomial(p);
  }
  if (kind == "perturbed_fixed_point") {
    cfg.require_known(sec, {"kind", "b1", "b2", "c1", "c2", "w", "w1", "w2"});
    const double w = cfg.number(sec, "w", 0.0);
    return make_perturbed_fixed_point(cfg.number(sec, "b1", 0.0), cfg.number(sec, "b2", 0.0),
                                      cfg.number(sec, "c1", 0.0), cfg.number(sec, "c2", 0.0),
                                      cfg.number(sec, "w1", w), cfg.number(sec, "w2", w));
  }
  throw ConfigError(sec + ".kind: unknown diffusion kind '" + kind + "'");
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "moment_matched") return Scheme::moment_matched;
  if (s == "euler") return Scheme::euler;
  throw ConfigError("mc.scheme: expected moment_matched or euler");
}

inline const char* to_string(Scheme s) { return s == Scheme::euler ? "euler" : "moment_matched"; }

// [mc] n_samples, dt, burn_in, thin, scheme; the seed comes from [experiment].
inline McParams mc_from_config(const Config& cfg, std::uint64_t seed, const std::string& sec = "mc") {
  cfg.require_known(sec, {"n_samples", "dt", "burn_in", "thin", "scheme"});
  McParams mc;
  mc.n_samples = cfg.count(sec, "n_samples", mc.n_samples);
  mc.dt = cfg.number(sec, "dt", mc.dt);
  mc.burn_in = cfg.optional_number(sec, "burn_in");
  mc.thin = cfg.optional_number(sec, "thin");
  mc.scheme = parse_scheme(cfg.str(sec, "scheme", "moment_matched"));
  mc.seed = seed;
  if (mc.n_samples < 1) throw ConfigError(sec + ".n_samples must be >= 1");
  if (!(mc.dt > 0.0)) throw ConfigError(sec + ".dt must be > 0");
  return mc;
}

}  // namespace renormflow
