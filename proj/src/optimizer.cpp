#include "neuroagg/optimizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <ostream>
#include <thread>

namespace neuroagg::optimizer {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void check_axis(const std::vector<double>& a, double lo, double hi, const char* name) {
  if (a.empty()) throw ConfigError(std::string(name) + " axis is empty");
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!(a[k] >= lo && a[k] <= hi))
      throw ConfigError(std::string(name) + " value " + fmt(a[k]) + " outside [" + fmt(lo) + ", " +
                        fmt(hi) + "]");
    if (k && !(a[k] > a[k - 1])) throw ConfigError(std::string(name) + " axis must be strictly increasing");
  }
}

// Runs f(k) for k in [0, n) on a small pool; each k writes only its own slot.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  unsigned T = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  T = static_cast<unsigned>(std::min<std::size_t>(T, n));
  if (T <= 1) {
    for (std::size_t k = 0; k < n; ++k) f(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < T; ++w)
    pool.emplace_back([&] {
      for (std::size_t k; (k = next.fetch_add(1)) < n;) f(k);
    });
  for (auto& t : pool) t.join();
}

std::optional<double> evaluate(const KineticParameters& p, const therapy::DosingRegime& r,
                               const Settings& s, std::string& err) {
  try {
    return therapy::mean_toxic_mass(p, r, s.variant, s.mtm).M_bar;
  } catch (const std::exception& e) {
    err = e.what();
    return std::nullopt;
  }
}

}  // namespace

SweepGrid sweep(const std::vector<double>& B_values, const std::vector<double>& lambda_values,
                const KineticParameters& p, const Settings& s) {
  check_axis(B_values, s.B_min, s.t_max, "B");
  check_axis(lambda_values, s.lambda_min, s.lambda_max, "lambda_drug");
  SweepGrid g{B_values, lambda_values, {}};
  const std::size_t nl = lambda_values.size();
  g.points.resize(B_values.size() * nl);
  parallel_for(g.points.size(), s.threads, [&](std::size_t k) {
    therapy::DosingRegime r{lambda_values[k % nl], s.A, B_values[k / nl], s.lambda_a, s.t_max};
    SweepPoint pt{r.B, r.lambda_drug, therapy::regime_toxicity(r), std::nullopt, {}};
    pt.M_bar = evaluate(p, r, s, pt.error);
    g.points[k] = std::move(pt);
  });
  return g;
}

void write_contour_csv(std::ostream& out, const SweepGrid& g, double scale) {
  out << "B,lambda_drug,M_bar,C_max\n";
  for (const auto& pt : g.points)
    out << fmt(pt.B) << ',' << fmt(pt.lambda_drug) << ',' << (pt.M_bar ? fmt(*pt.M_bar * scale) : "")
        << ',' << fmt(pt.C_max) << '\n';
}

double lambda_for_toxicity(double target, double A, double B, double t_max) {
  if (!(target >= 0)) throw ConfigError("C_max target must be >= 0");
  const double u = therapy::toxicity_per_unit_drug(A, B, t_max);
  if (!(u > 0)) throw ConfigError("horizon too short for any exposure");
  // exact inverse of a function linear in lambda_drug
  return target / u;
}

Optimum constrained_optimum(double target, const KineticParameters& p, const Settings& s,
                            const std::vector<double>& B_grid) {
  check_axis(B_grid, s.B_min, s.t_max, "B");
  Optimum o{};
  o.candidates.resize(B_grid.size());
  double reach = 0.0;
  for (std::size_t k = 0; k < B_grid.size(); ++k) {
    const double lam = lambda_for_toxicity(target, s.A, B_grid[k], s.t_max);
    reach = std::max(reach, s.lambda_max * therapy::toxicity_per_unit_drug(s.A, B_grid[k], s.t_max));
    o.candidates[k] = {B_grid[k], lam, 0.0, std::nullopt, lam <= s.lambda_max};
  }
  if (std::none_of(o.candidates.begin(), o.candidates.end(), [](const Candidate& c) { return c.feasible; }))
    throw InfeasibleError("C_max target " + fmt(target) + " is not reachable with lambda_drug <= " +
                              fmt(s.lambda_max) + "; feasible C_max range on this B grid is [0, " +
                              fmt(reach) + "]",
                          0.0, reach);

  parallel_for(o.candidates.size(), s.threads, [&](std::size_t k) {
    auto& c = o.candidates[k];
    therapy::DosingRegime r{c.lambda_drug, s.A, c.B, s.lambda_a, s.t_max};
    c.C_max = therapy::regime_toxicity(r);
    if (!c.feasible) return;
    std::string err;
    c.M_bar = evaluate(p, r, s, err);
  });

  const Candidate* best = nullptr;
  for (const auto& c : o.candidates) {
    if (!c.feasible || !c.M_bar) continue;
    // ascending B: ties go to the later (larger) B
    if (!best || *c.M_bar <= *best->M_bar * (1 + 1e-12)) {
      if (!best || *c.M_bar < *best->M_bar * (1 - 1e-12) || c.B > best->B) best = &c;
    }
  }
  if (!best) throw therapy::ConvergenceError("no feasible B converged to a periodic steady state");
  o.B_star = best->B;
  o.lambda_drug_star = best->lambda_drug;
  o.M_bar_star = *best->M_bar;
  o.C_max = best->C_max;
  return o;
}

std::string optimum_json(const Optimum& o, double scale) {
  nlohmann::ordered_json j;
  j["B_star_days"] = o.B_star;
  j["lambda_drug_star_per_h"] = o.lambda_drug_star;
  j["M_bar_star"] = o.M_bar_star * scale;
  j["C_max"] = o.C_max;
  auto& cs = j["candidates"] = nlohmann::ordered_json::array();
  for (const auto& c : o.candidates) {
    nlohmann::ordered_json e;
    e["B_days"] = c.B;
    e["lambda_drug_per_h"] = c.lambda_drug;
    e["C_max"] = c.C_max;
    e["feasible"] = c.feasible;
    e["M_bar"] = c.M_bar ? nlohmann::ordered_json(*c.M_bar * scale) : nlohmann::ordered_json();
    cs.push_back(e);
  }
  return j.dump(2);
}

}  // namespace neuroagg::optimizer
