#include "neuroagg/therapy.hpp"

#include "neuroagg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace neuroagg::therapy {

void DrugSpec::validate() const {
  if (!(delta_k >= 0 && delta_k <= 1)) throw ConfigError("delta_k must be in [0, 1]");
  if (!(potency_L >= 0) || !(C_p >= 0)) throw ConfigError("potency and plasma concentration must be >= 0");
  if (lambda_drug_override && !(*lambda_drug_override >= 0))
    throw ConfigError("lambda_drug override must be >= 0");
}

DrugEffect apply_drug(const KineticParameters& p, const DrugSpec& drug) {
  drug.validate();
  DrugEffect out{p, 0.0};
  if (drug.kinetic) out.params.k_2 = drug.delta_k * p.k_2;
  if (drug.clearance)
    out.lambda_drug = drug.lambda_drug_override ? *drug.lambda_drug_override : drug.potency_L * drug.C_p;
  return out;
}

ClearanceSpec with_extra_clearance(const ClearanceSpec& c, double inc) {
  if (inc == 0.0) return c;
  if (const auto* k = std::get_if<clearance::Constant>(&c)) return clearance::Constant{k->lambda + inc};
  if (const auto* iv = std::get_if<clearance::Interval>(&c)) {
    auto r = *iv;
    r.lambda_a += inc;
    return r;
  }
  if (const auto* d = std::get_if<clearance::DosingProfile>(&c)) {
    auto r = *d;
    r.lambda_a += inc;
    return r;
  }
  throw ConfigError("extra drug clearance only combines with constant, interval or dosing clearance");
}

void DosingRegime::validate() const {
  if (!(lambda_drug >= 0) || !(A >= 0) || !(lambda_a >= 0) || !(t_max >= 0))
    throw ConfigError("dosing regime values must be >= 0");
  if (!(B > 0)) throw ConfigError("dosing period B must be > 0");
}

double dosing_clearance(double t_days, const DosingRegime& r) {
  if (!(t_days >= 0)) throw DomainError("dosing_clearance: t must be >= 0");
  return dosing_rate(r.profile(), t_days * kHoursPerDay);
}

double toxicity_per_unit_drug(double A, double B, double t_max) {
  const double n = std::floor(t_max / B);
  const double rem = t_max - n * B;
  if (A == 0.0) return t_max;
  // -expm1 keeps the B -> 0 limit accurate
  return (n * -std::expm1(-A * B) + -std::expm1(-A * rem)) / A;
}

double regime_toxicity(const DosingRegime& r) {
  r.validate();
  return r.lambda_drug * toxicity_per_unit_drug(r.A, r.B, r.t_max);
}

MeanToxicMass mean_toxic_mass(const KineticParameters& p, const DosingRegime& r,
                              const ModelVariant& v, const MeanToxicMassOptions& opt) {
  p.validate();
  r.validate();
  const auto prof = r.profile();
  const double period = r.B * kHoursPerDay;

  // start near the periodic orbit: fixed point of the cycle-mean rate
  const double mean_drug =
      r.A * r.B > 0 ? r.lambda_drug * -std::expm1(-r.A * r.B) / (r.A * r.B) : r.lambda_drug;
  const auto fp = analysis::fixed_point_moments(p, r.lambda_a + mean_drug);
  std::vector<double> y{fp.exists ? fp.P_2 : 0.0, fp.exists ? fp.M_2 : 0.0, 0.0};
  if (!fp.exists || fp.M_2 <= 0) {
    // no endemic state: a small seed decays (or not) on its own
    y[0] = 1e-4 * p.m_0;
    y[1] = 2e-4 * p.m_0;
  }

  solver::IntegrationConfig cfg;
  cfg.method = solver::Method::Rosenbrock;
  cfg.rel_tol = opt.rel_tol;
  cfg.abs_tol = opt.abs_tol > 0 ? opt.abs_tol : 1e-14 * p.m_0;
  auto rhs = [&](double t, std::span<const double> s, std::span<double> ds) {
    moment_rhs_invivo(s.first(2), ds.first(2), p, v, dosing_rate(prof, t));
    ds[2] = s[1];
  };

  double prev = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < opt.max_cycles; ++k) {
    const double t0 = static_cast<double>(k) * period;
    auto tr = solver::integrate(rhs, y, t0, t0 + period, cfg);
    y = tr.back();
    const double avg = y[2] / period;
    y[2] = 0.0;
    const bool done = std::isfinite(prev) &&
                      std::fabs(avg - prev) <= opt.cycle_rel_tol * std::max(std::fabs(avg), 1e-300);
    if (done || avg == 0.0) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto& s : tr.states) {
        lo = std::min(lo, s[1]);
        hi = std::max(hi, s[1]);
      }
      return {avg, lo, hi, k + 1};
    }
    prev = avg;
  }
  throw ConvergenceError("no periodic steady state after " + std::to_string(opt.max_cycles) +
                         " dosing cycles");
}

void interval_clearance_rhs(std::span<const double> y, std::span<double> dy,
                            const KineticParameters& p, const ModelVariant& v,
                            const clearance::Interval& iv) {
  const std::size_t N = y.size();
  validate(iv, N);
  std::vector<double> lam(N - 1);
  clearance_rates(iv, 0.0, lam);
  rhs_invivo(y, dy, p, v, lam);
}

Moments interval_moment_rhs(std::span<const double> y, const KineticParameters& p,
                            const ModelVariant& v, const clearance::Interval& iv) {
  const std::size_t N = y.size();
  validate(iv, N);
  const Moments mo = moments(y.subspan(1));
  double Pw = 0.0, Mw = 0.0;
  for (std::size_t i = iv.n_0; i <= iv.n_1; ++i) {
    Pw += y[i - 1];
    Mw += static_cast<double>(i) * y[i - 1];
  }
  double d[2];
  const double s[2] = {mo.P, mo.M};
  moment_rhs_invivo(s, d, p, v, iv.lambda_a);
  return {d[0] - iv.lambda_drug * Pw, d[1] - iv.lambda_drug * Mw};
}

IntervalEquilibrium interval_equilibrium(const KineticParameters& p, const clearance::Interval& iv,
                                         std::size_t N_max) {
  validate(iv, N_max);
  const auto exact = analysis::steady_state_distribution(p, iv, N_max);
  const auto base =
      analysis::steady_state_distribution(p, clearance::Constant{iv.lambda_a}, N_max);
  double window = 0.0;
  for (std::size_t k = iv.n_0; k <= iv.n_1; ++k) window += static_cast<double>(k) * base.Delta_i[k - 2];
  return {exact.exists ? exact.M_star : 0.0, base.p2_star * (base.Delta - window)};
}

}  // namespace neuroagg::therapy
