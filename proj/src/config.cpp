#include "neuroagg/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace neuroagg::config {

namespace {

using Lines = std::map<std::string, int>;  // "section.key" -> line

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail_at(int line, const std::string& what) {
  throw ConfigError(line > 0 ? "line " + std::to_string(line) + ": " + what : what);
}

std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] == '\\' && in_str) {
      ++k;
      continue;
    }
    if (s[k] == '"') in_str = !in_str;
    if (s[k] == '#' && !in_str) return s.substr(0, k);
  }
  return s;
}

// Value parser for a single TOML value starting at pos.
class ValueParser {
 public:
  ValueParser(const std::string& s, int line) : s_(s), line_(line) {}

  Json parse() {
    Json v = value();
    skip_ws();
    if (pos_ != s_.size()) fail_at(line_, "unexpected text after value: '" + s_.substr(pos_) + "'");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
  }

  Json value() {
    skip_ws();
    if (pos_ >= s_.size()) fail_at(line_, "missing value");
    const char c = s_[pos_];
    if (c == '"') return string();
    if (c == '[') return array();
    if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return true;
    }
    if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return false;
    }
    return number();
  }

  Json string() {
    std::string out;
    ++pos_;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        c = e == 'n' ? '\n' : e == 't' ? '\t' : e;
      }
      out += c;
    }
    if (pos_ >= s_.size()) fail_at(line_, "unterminated string");
    ++pos_;
    return out;
  }

  Json array() {
    Json arr = Json::array();
    ++pos_;
    for (;;) {
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(value());
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return arr;
      }
      fail_at(line_, "expected ',' or ']' in array");
    }
  }

  Json number() {
    std::size_t end = pos_;
    while (end < s_.size() && std::string_view("+-.0123456789eE_").find(s_[end]) != std::string_view::npos) ++end;
    std::string tok = s_.substr(pos_, end - pos_);
    tok.erase(std::remove(tok.begin(), tok.end(), '_'), tok.end());
    if (!tok.empty() && tok[0] == '+') tok.erase(0, 1);
    if (tok.empty()) fail_at(line_, "cannot parse value '" + s_.substr(pos_) + "'");
    pos_ = end;
    const bool integral = tok.find_first_of(".eE") == std::string::npos;
    if (integral) {
      long long v = 0;
      const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (r.ec == std::errc() && r.ptr == tok.data() + tok.size()) return v;
    }
    double d = 0;
    const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), d);
    if (r.ec != std::errc() || r.ptr != tok.data() + tok.size())
      fail_at(line_, "bad number '" + tok + "'");
    return d;
  }

  const std::string& s_;
  int line_;
  std::size_t pos_ = 0;
};

Json parse_toml_impl(const std::string& text, Lines& lines) {
  Json root = Json::object();
  std::istringstream in(text);
  std::string raw, section;
  int ln = 0;
  while (std::getline(in, raw)) {
    ++ln;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail_at(ln, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty() || section.find_first_not_of(
                                 "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_") !=
                                 std::string::npos)
        fail_at(ln, "bad section name '" + section + "'");
      if (root.contains(section)) fail_at(ln, "duplicate section [" + section + "]");
      root[section] = Json::object();
      lines[section] = ln;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail_at(ln, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty() ||
        key.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_") !=
            std::string::npos)
      fail_at(ln, "bad key '" + key + "'");
    if (section.empty()) fail_at(ln, "key '" + key + "' outside any [section]");
    std::string rhs = trim(line.substr(eq + 1));
    // multi-line arrays: keep reading until brackets balance
    auto depth = [](const std::string& s) {
      int d = 0;
      bool str = false;
      for (char c : s) {
        if (c == '"') str = !str;
        if (!str) d += (c == '[') - (c == ']');
      }
      return d;
    };
    const int start = ln;
    while (depth(rhs) > 0 && std::getline(in, raw)) {
      ++ln;
      rhs += ' ' + trim(strip_comment(raw));
    }
    if (depth(rhs) != 0) fail_at(start, "unbalanced brackets in value of '" + key + "'");
    if (root[section].contains(key)) fail_at(start, "duplicate key '" + key + "'");
    root[section][key] = ValueParser(rhs, start).parse();
    lines[section + "." + key] = start;
  }
  return root;
}

struct Unit {
  const char* suffix;
  double factor;  // multiply to reach the canonical unit
};

const std::vector<Unit> kNone = {{"", 1.0}};
const std::vector<Unit> kPerH = {{"_per_h", 1.0}, {"_per_day", 1.0 / kHoursPerDay}};
const std::vector<Unit> kPerDay = {{"_per_day", 1.0}, {"_per_h", kHoursPerDay}};
const std::vector<Unit> kHours = {{"_h", 1.0}, {"_days", kHoursPerDay}};
const std::vector<Unit> kDays = {{"_days", 1.0}, {"_h", 1.0 / kHoursPerDay}};
const std::vector<Unit> kMolar = {{"_M", 1.0}, {"_uM", 1e-6}, {"_nM", 1e-9}};

// Schema-driven reader that remembers which keys were consumed.
class Reader {
 public:
  Reader(const Json& root, Lines lines) : root_(root), lines_(std::move(lines)) {
    if (!root_.is_object()) throw ConfigError("config root must be a table/object");
  }

  bool has(const std::string& sec) const { return root_.contains(sec); }

  std::optional<double> num(const std::string& sec, const std::string& base,
                            const std::vector<Unit>& units = kNone) {
    const auto hit = find(sec, base, units);
    if (!hit) return std::nullopt;
    const Json& v = root_[sec][hit->first];
    if (!v.is_number()) err(sec, hit->first, "expected a number");
    const double x = v.get<double>() * hit->second;
    if (!std::isfinite(x)) err(sec, hit->first, "value must be finite");
    return x;
  }

  std::optional<std::vector<double>> nums(const std::string& sec, const std::string& base,
                                          const std::vector<Unit>& units = kNone) {
    const auto hit = find(sec, base, units);
    if (!hit) return std::nullopt;
    const Json& v = root_[sec][hit->first];
    std::vector<double> out;
    auto one = [&](const Json& e) {
      if (!e.is_number()) err(sec, hit->first, "expected numbers");
      out.push_back(e.get<double>() * hit->second);
    };
    if (v.is_array())
      for (const auto& e : v) one(e);
    else
      one(v);
    return out;
  }

  std::optional<std::size_t> count(const std::string& sec, const std::string& base) {
    const auto hit = find(sec, base, kNone);
    if (!hit) return std::nullopt;
    const Json& v = root_[sec][hit->first];
    if (!v.is_number_integer() || v.get<long long>() < 0) err(sec, hit->first, "expected a non-negative integer");
    return static_cast<std::size_t>(v.get<long long>());
  }

  std::optional<std::vector<std::size_t>> counts(const std::string& sec, const std::string& base) {
    const auto hit = find(sec, base, kNone);
    if (!hit) return std::nullopt;
    const Json& v = root_[sec][hit->first];
    std::vector<std::size_t> out;
    for (const auto& e : v.is_array() ? v : Json::array({v})) {
      if (!e.is_number_integer() || e.get<long long>() < 0) err(sec, hit->first, "expected non-negative integers");
      out.push_back(static_cast<std::size_t>(e.get<long long>()));
    }
    return out;
  }

  std::optional<std::string> str(const std::string& sec, const std::string& base,
                                 bool allow_int = false) {
    const auto hit = find(sec, base, kNone);
    if (!hit) return std::nullopt;
    const Json& v = root_[sec][hit->first];
    if (v.is_string()) return v.get<std::string>();
    if (allow_int && v.is_number_integer()) return std::to_string(v.get<long long>());
    err(sec, hit->first, "expected a string");
  }

  std::optional<bool> flag(const std::string& sec, const std::string& base) {
    const auto hit = find(sec, base, kNone);
    if (!hit) return std::nullopt;
    const Json& v = root_[sec][hit->first];
    if (!v.is_boolean()) err(sec, hit->first, "expected true or false");
    return v.get<bool>();
  }

  std::string choice(const std::string& sec, const std::string& base,
                     const std::vector<std::string>& allowed, const std::string& fallback) {
    const auto v = str(sec, base);
    if (!v) return fallback;
    if (std::find(allowed.begin(), allowed.end(), *v) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      err(sec, base, "'" + *v + "' is not one of: " + list);
    }
    return *v;
  }

  bool given(const std::string& sec, const std::string& key) const {
    return root_.contains(sec) && root_[sec].contains(key);
  }

  void mark_section(const std::string& sec) {
    sections_.insert(sec);
    if (has(sec) && !root_[sec].is_object()) throw ConfigError("[" + sec + "] must be a table");
  }

  [[noreturn]] void err(const std::string& sec, const std::string& key, const std::string& what) const {
    const auto it = lines_.find(sec + "." + key);
    fail_at(it == lines_.end() ? 0 : it->second, sec + "." + key + ": " + what);
  }

  // Anything left over is either a unit mismatch or an unknown key.
  void finish() const {
    for (const auto& [sec, body] : root_.items()) {
      if (!sections_.count(sec)) {
        const auto it = lines_.find(sec);
        fail_at(it == lines_.end() ? 0 : it->second, "unknown section [" + sec + "]");
      }
      for (const auto& [key, _] : body.items()) {
        if (used_.count(sec + "." + key)) continue;
        const auto b = bases_.find(sec);
        if (b != bases_.end())
          for (const auto& [base, units] : b->second) {
            if (key.rfind(base + "_", 0) == 0 || key == base) {
              std::string list;
              for (const auto& u : units) list += std::string(list.empty() ? "" : ", ") + base + u.suffix;
              err(sec, key, "unit suffix not recognised; expected one of: " + list);
            }
          }
        err(sec, key, "unknown key");
      }
    }
  }

 private:
  std::optional<std::pair<std::string, double>> find(const std::string& sec, const std::string& base,
                                                     const std::vector<Unit>& units) {
    bases_[sec].push_back({base, units});
    if (!has(sec)) return std::nullopt;
    std::optional<std::pair<std::string, double>> hit;
    for (const auto& u : units) {
      const std::string key = base + u.suffix;
      if (!root_[sec].contains(key)) continue;
      if (hit) err(sec, key, "given twice in different units (" + hit->first + ")");
      hit = {key, u.factor};
      used_.insert(sec + "." + key);
    }
    return hit;
  }

  const Json& root_;
  Lines lines_;
  std::set<std::string> used_, sections_;
  std::map<std::string, std::vector<std::pair<std::string, std::vector<Unit>>>> bases_;
};

ModelTag tag_of(const std::string& s) {
  if (s == "in_vitro") return ModelTag::InVitroClosed;
  if (s == "dynamic") return ModelTag::InVivoDynamicClearance;
  return ModelTag::InVivoConstMonomer;
}

std::string tag_name(ModelTag t) {
  switch (t) {
    case ModelTag::InVitroClosed: return "in_vitro";
    case ModelTag::InVivoDynamicClearance: return "dynamic";
    default: return "in_vivo";
  }
}

RunConfig read(const Json& root, Lines lines) {
  Reader r(root, std::move(lines));
  RunConfig cfg;

  // --- model
  r.mark_section("model");
  {
    auto& m = cfg.model;
    const auto tag = tag_of(r.choice("model", "variant", {"in_vitro", "in_vivo", "dynamic"}, "in_vivo"));
    m.variant = ModelVariant::defaults(tag);
    const auto sat = r.choice("model", "saturation", {"monomer", "mass"}, "");
    if (!sat.empty()) m.variant.saturation = sat == "mass" ? SaturationArgument::Mass : SaturationArgument::Monomer;
    const auto nuc = r.choice("model", "nucleation", {"raw", "monomer_squared"}, "");
    if (!nuc.empty()) m.variant.nucleation = nuc == "raw" ? NucleationForm::Raw : NucleationForm::MonomerSquared;
    if (auto v = r.flag("model", "k_n_zeroed")) {
      m.variant.k_n_zeroed = *v;
      m.k_n_zeroed_given = true;
    }
    const auto clo = r.choice("model", "closure", {"reflecting", "absorbing"}, "reflecting");
    m.variant.closure = clo == "absorbing" ? Closure::Absorbing : Closure::Reflecting;
    if (auto v = r.count("model", "N_max")) m.N_max = *v;
    auto& p = m.params;
    if (auto v = r.num("model", "k_n", {{"_M_per_h", 1.0}})) p.k_n = *v;
    if (auto v = r.num("model", "k_2", {{"_per_M2_per_h", 1.0}})) p.k_2 = *v;
    if (auto v = r.num("model", "K_m", {{"_M2", 1.0}})) p.K_m = *v;
    if (auto v = r.num("model", "K_M", {{"_M2", 1.0}})) p.K_M = *v;
    if (auto v = r.num("model", "k_plus", {{"_per_M_per_h", 1.0}})) p.k_plus = *v;
    if (auto v = r.num("model", "m_0", kMolar)) p.m_0 = *v;
    if (auto v = r.num("model", "rescale_c")) p.rescale_c = *v;
    if (auto v = r.flag("model", "rescale_keep_k_n")) m.rescale_keep_k_n = *v;
    if (auto v = r.num("model", "seed_p2", kMolar)) m.seed_p2 = *v;
    try {
      p.validate();
    } catch (const std::exception& e) {
      r.err("model", "params", e.what());
    }
    if (m.N_max < 2) r.err("model", "N_max", "must be >= 2");
    if (!(m.seed_p2 >= 0)) r.err("model", "seed_p2_M", "must be >= 0");
  }

  // --- clearance
  r.mark_section("clearance");
  {
    const std::string fam = r.choice("clearance", "family",
                                     {"constant", "linear", "inverse", "interval", "dynamic", "dosing"}, "");
    const auto lam = r.num("clearance", "lambda", kPerH);
    const auto lam0 = r.num("clearance", "lambda_0", kPerH);
    const auto la = r.num("clearance", "lambda_a", kPerH);
    const auto ld = r.num("clearance", "lambda_drug", kPerH);
    const auto n0 = r.count("clearance", "n_0");
    const auto n1 = r.count("clearance", "n_1");
    const auto li = r.nums("clearance", "lambda_init", kPerH);
    const auto mu = r.nums("clearance", "mu", kPerH);
    const auto beta = r.nums("clearance", "beta", {{"_per_M_per_h", 1.0}});
    const auto A = r.num("clearance", "A", kPerDay);
    const auto B = r.num("clearance", "B", kDays);
    if (r.has("clearance") && fam.empty()) r.err("clearance", "family", "required");
    std::set<std::string> allowed;
    auto need = [&](bool ok, const char* key) {
      if (!ok) r.err("clearance", key, "required for family '" + fam + "'");
    };
    if (fam == "constant") {
      need(lam.has_value(), "lambda_per_h");
      cfg.clearance = clearance::Constant{*lam};
      allowed = {"lambda"};
    } else if (fam == "linear" || fam == "inverse") {
      need(lam0.has_value(), "lambda_0_per_h");
      cfg.clearance = fam == "linear" ? ClearanceSpec{clearance::LinearInSize{*lam0}}
                                      : ClearanceSpec{clearance::InverseInSize{*lam0}};
      allowed = {"lambda_0"};
    } else if (fam == "interval") {
      need(la && ld && n0 && n1, "lambda_a_per_h, lambda_drug_per_h, n_0, n_1");
      cfg.clearance = clearance::Interval{*la, *ld, *n0, *n1};
      allowed = {"lambda_a", "lambda_drug", "n_0", "n_1"};
    } else if (fam == "dynamic") {
      need(li && mu && beta, "lambda_init_per_h, mu_per_h, beta_per_M_per_h");
      cfg.clearance = clearance::Dynamic{*li, *mu, *beta};
      allowed = {"lambda_init", "mu", "beta"};
    } else if (fam == "dosing") {
      need(ld.has_value() && B.has_value(), "lambda_drug_per_h, B_days");
      cfg.clearance = clearance::DosingProfile{*ld, A.value_or(1.0), *B, la.value_or(0.0)};
      allowed = {"lambda_drug", "A", "B", "lambda_a"};
    }
    if (r.has("clearance"))
      for (const auto& [key, _] : root["clearance"].items()) {
        if (key == "family") continue;
        bool ok = false;
        for (const auto& a : allowed) ok = ok || key.rfind(a + "_", 0) == 0 || key == a;
        // lambda_a / lambda_drug / lambda_0 / lambda_init share the "lambda" prefix
        if (ok && allowed.count("lambda") && key != "lambda_per_h" && key != "lambda_per_day") ok = false;
        if (!ok) r.err("clearance", key, "not used by family '" + fam + "'");
      }
    if (cfg.clearance) {
      try {
        validate(*cfg.clearance, cfg.model.N_max);
      } catch (const std::exception& e) {
        r.err("clearance", "family", e.what());
      }
    }
    const bool dyn_model = cfg.model.variant.tag == ModelTag::InVivoDynamicClearance;
    if (cfg.clearance && dyn_model != std::holds_alternative<clearance::Dynamic>(*cfg.clearance))
      r.err("clearance", "family", "dynamic clearance goes with model.variant = \"dynamic\" only");
  }

  // --- solver
  r.mark_section("solver");
  {
    auto& s = cfg.solver;
    if (auto v = r.num("solver", "rel_tol")) s.rel_tol = *v;
    if (auto v = r.num("solver", "abs_tol", kMolar)) s.abs_tol = *v;
    if (auto v = r.num("solver", "t_end", kHours)) s.t_end_h = *v;
    if (auto v = r.num("solver", "output_step", kHours)) s.output_step_h = *v;
    if (auto v = r.count("solver", "max_steps")) s.max_steps = *v;
    if (auto v = r.str("solver", "method")) s.method = *v;
    if (s.method != "auto" && s.method != "explicit" && s.method != "rosenbrock")
      r.err("solver", "method", "expected auto, explicit or rosenbrock");
    if (!(s.rel_tol > 0)) r.err("solver", "rel_tol", "must be > 0");
    if (s.abs_tol && !(*s.abs_tol > 0)) r.err("solver", "abs_tol_M", "must be > 0");
    if (!(s.t_end_h > 0)) r.err("solver", "t_end_h", "must be > 0");
    if (s.output_step_h && !(*s.output_step_h > 0)) r.err("solver", "output_step_h", "must be > 0");
  }

  // --- network
  r.mark_section("network");
  if (r.has("network")) {
    NetworkSection n;
    if (auto v = r.str("network", "edges")) n.edges = *v;
    if (auto v = r.str("network", "metadata")) n.metadata = *v;
    n.generator = r.choice("network", "generator", {"small_world", "path", "star"}, "");
    if (auto v = r.count("network", "V")) n.V = *v;
    if (auto v = r.count("network", "k")) n.k = *v;
    if (auto v = r.num("network", "rewire_p")) n.rewire_p = *v;
    if (auto v = r.count("network", "seed")) n.seed = *v;
    if (auto v = r.num("network", "weight")) n.weight = *v;
    if (auto v = r.nums("network", "leaf_weights")) n.leaf_weights = *v;
    n.diffusion = r.choice("network", "diffusion", {"constant", "cube_inverse"}, "constant");
    if (auto v = r.num("network", "rho", kPerH)) n.rho_per_h = *v;
    if (auto v = r.str("network", "seed_node", true)) n.seed_node = *v;
    if (auto v = r.num("network", "invasion_fraction")) n.invasion_fraction = *v;
    n.invasion_reference = r.choice("network", "invasion_reference", {"m_0", "M_2"}, "m_0");
    if (auto v = r.counts("network", "sizes")) n.sizes = *v;
    if (n.edges.empty() == n.generator.empty())
      r.err("network", "edges", "give exactly one of 'edges' (file) or 'generator'");
    if (!n.generator.empty() && n.generator != "star" && n.V < 2) r.err("network", "V", "generator needs V >= 2");
    if (n.generator == "star" && n.leaf_weights.empty()) r.err("network", "leaf_weights", "required for star");
    if (!(n.rho_per_h >= 0)) r.err("network", "rho_per_h", "must be >= 0");
    if (!(n.invasion_fraction > 0)) r.err("network", "invasion_fraction", "must be > 0");
    cfg.network = n;
  }

  // --- therapy / dosing
  r.mark_section("therapy");
  r.mark_section("dosing");
  if (r.has("therapy") || r.has("dosing")) {
    TherapySection t;
    auto& d = t.drug;
    if (auto v = r.num("therapy", "delta_k")) d.delta_k = *v;
    if (auto v = r.num("therapy", "potency_L", {{"_per_M_per_h", 1.0}})) d.potency_L = *v;
    if (auto v = r.num("therapy", "C_p", kMolar)) d.C_p = *v;
    if (auto v = r.num("therapy", "lambda_drug", kPerH)) d.lambda_drug_override = *v;
    if (auto v = r.flag("therapy", "kinetic")) d.kinetic = *v;
    if (auto v = r.flag("therapy", "clearance")) d.clearance = *v;
    try {
      d.validate();
    } catch (const std::exception& e) {
      r.err("therapy", "drug", e.what());
    }
    if (r.has("dosing")) {
      therapy::DosingRegime g;
      if (auto v = r.num("dosing", "lambda_drug", kPerH)) g.lambda_drug = *v;
      if (auto v = r.num("dosing", "A", kPerDay)) g.A = *v;
      if (auto v = r.num("dosing", "B", kDays)) g.B = *v;
      if (auto v = r.num("dosing", "lambda_a", kPerH)) g.lambda_a = *v;
      if (auto v = r.num("dosing", "t_max", kDays)) g.t_max = *v;
      try {
        g.validate();
      } catch (const std::exception& e) {
        r.err("dosing", "B_days", e.what());
      }
      t.regime = g;
    }
    cfg.therapy = t;
  }

  // --- optimizer
  r.mark_section("optimizer");
  if (r.has("optimizer")) {
    OptimizerSection o;
    auto& s = o.settings;
    if (cfg.therapy && cfg.therapy->regime) {
      s.lambda_a = cfg.therapy->regime->lambda_a;
      s.A = cfg.therapy->regime->A;
      s.t_max = cfg.therapy->regime->t_max;
    }
    o.C_max = r.num("optimizer", "C_max");
    if (auto v = r.nums("optimizer", "B_grid", kDays)) o.B_grid_days = *v;
    if (auto v = r.nums("optimizer", "lambda_grid", kPerH)) o.lambda_grid_per_h = *v;
    if (auto v = r.num("optimizer", "lambda_a", kPerH)) s.lambda_a = *v;
    if (auto v = r.num("optimizer", "A", kPerDay)) s.A = *v;
    if (auto v = r.num("optimizer", "t_max", kDays)) s.t_max = *v;
    if (auto v = r.num("optimizer", "B_min", kDays)) s.B_min = *v;
    if (auto v = r.num("optimizer", "lambda_min", kPerH)) s.lambda_min = *v;
    if (auto v = r.num("optimizer", "lambda_max", kPerH)) s.lambda_max = *v;
    if (o.C_max && !(*o.C_max >= 0)) r.err("optimizer", "C_max", "must be >= 0");
    if (o.B_grid_days.empty()) r.err("optimizer", "B_grid_days", "required");
    cfg.optimizer = o;
  }

  // --- analysis / output
  r.mark_section("analysis");
  if (auto v = r.nums("analysis", "delta_k")) cfg.analysis.delta_k = *v;
  if (auto v = r.count("analysis", "existence_N_max")) cfg.analysis.existence_N = *v;
  if (auto v = r.flag("analysis", "numeric")) cfg.analysis.numeric = *v;
  for (double dk : cfg.analysis.delta_k)
    if (!(dk > 0 && dk <= 1)) r.err("analysis", "delta_k", "values must be in (0, 1]");
  r.mark_section("output");
  if (auto v = r.counts("output", "sizes")) cfg.output.sizes = *v;
  for (auto i : cfg.output.sizes)
    if (i < 2 || i > cfg.model.N_max) r.err("output", "sizes", "sizes must lie in [2, N_max]");

  r.finish();
  return cfg;
}

Json arr(const std::vector<double>& v) { return Json(v); }

}  // namespace

Json parse_toml(const std::string& text) {
  Lines lines;
  return parse_toml_impl(text, lines);
}

RunConfig parse_config(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("JSON: ") + e.what());
    }
    return read(j, {});
  }
  Lines lines;
  const Json j = parse_toml_impl(text, lines);
  return read(j, std::move(lines));
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

Json effective_config(const RunConfig& cfg) {
  Json j;
  const auto& m = cfg.model;
  auto& jm = j["model"];
  jm["variant"] = tag_name(m.variant.tag);
  jm["saturation"] = m.variant.saturation == SaturationArgument::Mass ? "mass" : "monomer";
  jm["nucleation"] = m.variant.nucleation == NucleationForm::Raw ? "raw" : "monomer_squared";
  jm["k_n_zeroed"] = m.variant.k_n_zeroed;
  jm["closure"] = m.variant.closure == Closure::Reflecting ? "reflecting" : "absorbing";
  jm["N_max"] = m.N_max;
  jm["k_n_M_per_h"] = m.params.k_n;
  jm["k_2_per_M2_per_h"] = m.params.k_2;
  jm["K_m_M2"] = m.params.K_m;
  jm["K_M_M2"] = m.params.K_M;
  jm["k_plus_per_M_per_h"] = m.params.k_plus;
  jm["m_0_M"] = m.params.m_0;
  jm["rescale_c"] = m.params.rescale_c;
  jm["rescale_keep_k_n"] = m.rescale_keep_k_n;
  jm["seed_p2_M"] = m.seed_p2;

  if (cfg.clearance) {
    auto& c = j["clearance"];
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, clearance::Constant>) {
            c["family"] = "constant";
            c["lambda_per_h"] = s.lambda;
          } else if constexpr (std::is_same_v<T, clearance::LinearInSize>) {
            c["family"] = "linear";
            c["lambda_0_per_h"] = s.lambda_0;
          } else if constexpr (std::is_same_v<T, clearance::InverseInSize>) {
            c["family"] = "inverse";
            c["lambda_0_per_h"] = s.lambda_0;
          } else if constexpr (std::is_same_v<T, clearance::Interval>) {
            c["family"] = "interval";
            c["lambda_a_per_h"] = s.lambda_a;
            c["lambda_drug_per_h"] = s.lambda_drug;
            c["n_0"] = s.n_0;
            c["n_1"] = s.n_1;
          } else if constexpr (std::is_same_v<T, clearance::Dynamic>) {
            c["family"] = "dynamic";
            c["lambda_init_per_h"] = arr(s.lambda_init);
            c["mu_per_h"] = arr(s.mu);
            c["beta_per_M_per_h"] = arr(s.beta);
          } else {
            c["family"] = "dosing";
            c["lambda_drug_per_h"] = s.lambda_drug;
            c["A_per_day"] = s.A;
            c["B_days"] = s.B;
            c["lambda_a_per_h"] = s.lambda_a;
          }
        },
        *cfg.clearance);
  }

  auto& s = j["solver"];
  s["rel_tol"] = cfg.solver.rel_tol;
  if (cfg.solver.abs_tol) s["abs_tol_M"] = *cfg.solver.abs_tol;
  s["t_end_h"] = cfg.solver.t_end_h;
  if (cfg.solver.output_step_h) s["output_step_h"] = *cfg.solver.output_step_h;
  s["max_steps"] = cfg.solver.max_steps;
  s["method"] = cfg.solver.method;

  if (cfg.network) {
    const auto& n = *cfg.network;
    auto& jn = j["network"];
    if (!n.edges.empty()) jn["edges"] = n.edges;
    if (!n.metadata.empty()) jn["metadata"] = n.metadata;
    if (!n.generator.empty()) {
      jn["generator"] = n.generator;
      jn["V"] = n.V;
      jn["k"] = n.k;
      jn["rewire_p"] = n.rewire_p;
      jn["seed"] = n.seed;
      jn["weight"] = n.weight;
      if (!n.leaf_weights.empty()) jn["leaf_weights"] = arr(n.leaf_weights);
    }
    jn["diffusion"] = n.diffusion;
    jn["rho_per_h"] = n.rho_per_h;
    jn["seed_node"] = n.seed_node;
    jn["invasion_fraction"] = n.invasion_fraction;
    jn["invasion_reference"] = n.invasion_reference;
    if (!n.sizes.empty()) jn["sizes"] = n.sizes;
  }

  if (cfg.therapy) {
    const auto& d = cfg.therapy->drug;
    auto& jt = j["therapy"];
    jt["delta_k"] = d.delta_k;
    jt["potency_L_per_M_per_h"] = d.potency_L;
    jt["C_p_M"] = d.C_p;
    if (d.lambda_drug_override) jt["lambda_drug_per_h"] = *d.lambda_drug_override;
    jt["kinetic"] = d.kinetic;
    jt["clearance"] = d.clearance;
    if (cfg.therapy->regime) {
      const auto& g = *cfg.therapy->regime;
      auto& jd = j["dosing"];
      jd["lambda_drug_per_h"] = g.lambda_drug;
      jd["A_per_day"] = g.A;
      jd["B_days"] = g.B;
      jd["lambda_a_per_h"] = g.lambda_a;
      jd["t_max_days"] = g.t_max;
    }
  }

  if (cfg.optimizer) {
    const auto& o = *cfg.optimizer;
    auto& jo = j["optimizer"];
    if (o.C_max) jo["C_max"] = *o.C_max;
    jo["B_grid_days"] = arr(o.B_grid_days);
    if (!o.lambda_grid_per_h.empty()) jo["lambda_grid_per_h"] = arr(o.lambda_grid_per_h);
    jo["lambda_a_per_h"] = o.settings.lambda_a;
    jo["A_per_day"] = o.settings.A;
    jo["t_max_days"] = o.settings.t_max;
    jo["B_min_days"] = o.settings.B_min;
    jo["lambda_min_per_h"] = o.settings.lambda_min;
    jo["lambda_max_per_h"] = o.settings.lambda_max;
  }

  auto& ja = j["analysis"];
  ja["delta_k"] = arr(cfg.analysis.delta_k);
  ja["existence_N_max"] = cfg.analysis.existence_N;
  ja["numeric"] = cfg.analysis.numeric;
  if (!cfg.output.sizes.empty()) j["output"]["sizes"] = cfg.output.sizes;
  return j;
}

}  // namespace neuroagg::config
