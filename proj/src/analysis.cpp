#include "neuroagg/analysis.hpp"

#include "neuroagg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>

namespace neuroagg::analysis {

LinearizedCoefficients linearized_coefficients(const KineticParameters& p) {
  const double m2 = p.m_0 * p.m_0;
  const double a = p.k_2 * m2 * p.K_m / (p.K_m + m2);
  return {a, 2.0 * p.m_0 * p.k_plus + a};
}

double linearized_mass(double t, const KineticParameters& p) {
  const auto [a, b] = linearized_coefficients(p);
  if (!(a > 0)) throw DomainError("linearized_mass: a must be > 0");
  return p.k_n / (2 * a) * ((1 + std::sqrt(a / b)) * std::exp((a + std::sqrt(a * b)) * t) - 2);
}

double halftime_lin(const KineticParameters& p) {
  if (!(p.k_n > 0) || !(p.m_0 > 0)) throw DomainError("halftime diverges for k_n = 0");
  const auto [a, b] = linearized_coefficients(p);
  const double arg = std::sqrt(b) * (a * p.m_0 + 2 * p.k_n) / (p.k_n * (std::sqrt(a) + std::sqrt(b)));
  return std::log(arg) / (a + std::sqrt(a * b));
}

double halftime_lin_simplified(const KineticParameters& p) {
  if (!(p.k_n > 0) || !(p.m_0 > 0)) throw DomainError("halftime diverges for k_n = 0");
  const double rate = std::sqrt(2 * p.k_plus * p.k_2 * p.K_m * p.m_0);
  return std::log(p.k_2 * p.K_m * p.m_0 / p.k_n + 2) / rate;
}

FixedPointMoments fixed_point_moments(const KineticParameters& p, double lambda) {
  if (!(lambda > 0)) throw DomainError("fixed_point_moments: lambda must be > 0");
  const double m0 = p.m_0;
  const double X = -lambda * lambda + 2 * lambda * p.k_2 * m0 * m0 +
                   2 * p.k_plus * p.k_2 * m0 * m0 * m0;
  FixedPointMoments fp;
  if (X <= 0) return fp;
  // sigma(M) = lambda^2 / (2 k_2 m_0^2 (k_+ m_0 + lambda)) solved for M
  fp.M_2 = std::sqrt(p.K_M * X) / lambda;
  fp.P_2 = fp.M_2 * lambda / (2 * (p.k_plus * m0 + lambda));
  fp.exists = true;
  return fp;
}

std::array<std::complex<double>, 2> moment_jacobian_eigenvalues(const KineticParameters& p,
                                                                double lambda, double P, double M) {
  ModelVariant v = ModelVariant::defaults(ModelTag::InVivoConstMonomer);
  v.k_n_zeroed = true;
  double J[2][2];
  const double x[2] = {P, M};
  for (int c = 0; c < 2; ++c) {
    const double h = 1e-6 * std::max(std::fabs(x[c]), 1e-9 * p.m_0);
    double yp[2] = {P, M}, ym[2] = {P, M}, fp[2], fm[2];
    yp[c] += h;
    ym[c] -= h;
    moment_rhs_invivo(yp, fp, p, v, lambda);
    moment_rhs_invivo(ym, fm, p, v, lambda);
    for (int r = 0; r < 2; ++r) J[r][c] = (fp[r] - fm[r]) / (2 * h);
  }
  const double half_tr = 0.5 * (J[0][0] + J[1][1]);
  const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
  const std::complex<double> disc = std::sqrt(std::complex<double>(half_tr * half_tr - det, 0.0));
  return {half_tr + disc, half_tr - disc};
}

double critical_clearance_constant(const KineticParameters& p, CritFormula f) {
  const double m0 = p.m_0, k2m2 = p.k_2 * m0 * m0;
  if (f == CritFormula::MomentBased)
    return k2m2 + std::sqrt(p.k_2 * m0 * m0 * m0 * (p.k_2 * m0 + 2 * p.k_plus));
  return k2m2 + std::sqrt(2 * p.k_2 * m0 * m0 * m0 * (p.k_2 * m0 + p.k_plus));
}

SteadyStateDistribution steady_state_distribution(const KineticParameters& p,
                                                  const ClearanceSpec& c, std::size_t N_max,
                                                  Truncation mode) {
  if (N_max < 2) throw ConfigError("N_max must be >= 2");
  if (std::holds_alternative<clearance::Dynamic>(c) ||
      std::holds_alternative<clearance::DosingProfile>(c))
    throw ConfigError("steady state needs a time-independent clearance law");
  validate(c, N_max);

  const std::size_t n = N_max - 1;
  const double A = 2 * p.k_plus * p.m_0;
  std::vector<double> lam(n);
  clearance_rates(c, 0.0, lam);

  SteadyStateDistribution d;
  d.delta_i.assign(n, 1.0);
  d.Delta_i.assign(n, 1.0);
  double partial = 2.0;
  for (std::size_t j = 1; j < n; ++j) {
    double delta = A / (lam[j] + A);
    if (j == n - 1 && mode == Truncation::Reflecting)
      delta = lam[j] > 0 ? A / lam[j] : std::numeric_limits<double>::infinity();
    d.delta_i[j] = delta;
    d.Delta_i[j] = d.Delta_i[j - 1] * delta;
    partial += static_cast<double>(j + 2) * d.Delta_i[j];
  }
  d.Delta_partial = partial;

  auto& C = d.conditions;
  if (mode == Truncation::Infinite) {
    const double N = static_cast<double>(N_max);
    const double dN = n >= 2 ? d.delta_i[n - 1] : A / (lam[0] + A);
    const double DN = d.Delta_i[n - 1];
    C.C1 = dN < 1.0;
    if (std::holds_alternative<clearance::InverseInSize>(c)) {
      // Delta_k ~ k^{-s}: remainder of sum k^{1-s}
      const double s = -N * std::log(dN);
      C.C2 = s > 2.0;
      d.tail = C.C2 ? N * N * DN / (s - 2.0) : std::numeric_limits<double>::infinity();
    } else {
      C.C2 = C.C1;
      d.tail = C.C2 ? DN * (N * dN / (1 - dN) + dN / ((1 - dN) * (1 - dN)))
                    : std::numeric_limits<double>::infinity();
    }
  } else {
    C.C1 = std::isfinite(partial);
    C.C2 = C.C1;
  }
  d.Delta = partial + d.tail;
  C.tail_resolved = d.tail < 1e-9 * partial;

  const double l2A = lam[0] + A;
  C.C3 = std::isfinite(d.Delta) && p.k_2 * p.m_0 * p.m_0 * d.Delta - l2A > 0;
  d.exists = C.C1 && C.C2 && C.C3;
  d.p_star.assign(n, 0.0);
  if (!d.exists) return d;

  d.p2_star = std::sqrt(p.K_M * (p.k_2 * p.m_0 * p.m_0 * d.Delta - l2A) / (l2A * d.Delta * d.Delta));
  for (std::size_t j = 0; j < n; ++j) {
    d.p_star[j] = d.Delta_i[j] * d.p2_star;
    d.P_star += d.p_star[j];
  }
  d.M_star = d.Delta * d.p2_star;
  return d;
}

ExistenceConditions existence_conditions(const SteadyStateDistribution& d) { return d.conditions; }

ClearanceSpec make_clearance(Family f, double value) {
  switch (f) {
    case Family::Constant: return clearance::Constant{value};
    case Family::LinearInSize: return clearance::LinearInSize{value};
    case Family::InverseInSize: return clearance::InverseInSize{value};
  }
  throw std::invalid_argument("unknown family");
}

InverseSizeCritical critical_clearance_inverse_size(const KineticParameters& p) {
  const double A = 2 * p.k_plus * p.m_0, k2m2 = p.k_2 * p.m_0 * p.m_0;
  return {2 * A * (A + 4 * k2m2) / (A + k2m2), 2 * A};
}

LinearSizeCritical critical_clearance_linear_size(const KineticParameters& p, std::size_t N_max) {
  const double m0 = p.m_0;
  const double printed =
      (p.k_plus * p.k_2 * m0 * m0 * m0 - 1) / (p.k_plus * m0 - p.k_2 * m0 * m0);
  return {printed, critical_clearance_existence(p, Family::LinearInSize, N_max)};
}

double critical_clearance_existence(const KineticParameters& p, Family f, std::size_t N_max,
                                    double rel_tol) {
  auto exists = [&](double v) {
    return steady_state_distribution(p, make_clearance(f, v), N_max, Truncation::Infinite).exists;
  };
  const double A = std::max(2 * p.k_plus * p.m_0, 1e-300);
  // coarse log scan for the upper edge of the existence region
  constexpr int kGrid = 480;
  double lo = -1, hi = -1;
  double prev = 0;
  bool prev_exists = false;
  for (int g = 0; g <= kGrid; ++g) {
    const double v = A * std::pow(10.0, -6.0 + 9.0 * g / kGrid);
    const bool e = exists(v);
    if (prev_exists && !e) {
      lo = prev;
      hi = v;
    }
    prev = v;
    prev_exists = e;
  }
  if (lo < 0) return 0.0;  // no existence region in the scanned range
  while ((hi - lo) > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (exists(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

bool classify_supercritical(const KineticParameters& p, Family f, double value,
                            const NumericOptions& opt) {
  ModelVariant v = ModelVariant::defaults(ModelTag::InVivoConstMonomer);
  v.k_n_zeroed = true;
  const double seed = opt.seed_fraction * p.m_0;
  if (!(seed > 0)) throw std::invalid_argument("classifier needs a positive seed");
  const double thr = 1e-9 * p.m_0;

  solver::IntegrationConfig cfg;
  cfg.rel_tol = 1e-8;
  cfg.abs_tol = 1e-14 * p.m_0;

  std::vector<double> y0;
  solver::Rhs rhs;
  std::function<double(std::span<const double>)> mass;
  std::function<Moments(double, std::span<const double>)> dmoments;

  if (opt.moment_system) {
    if (f != Family::Constant) throw std::invalid_argument("moment classifier needs Constant family");
    y0 = {seed, 2 * seed};
    rhs = [p, v, value](double, std::span<const double> y, std::span<double> dy) {
      moment_rhs_invivo(y, dy, p, v, value);
    };
    mass = [](std::span<const double> y) { return y[1]; };
    dmoments = [rhs](double t, std::span<const double> y) {
      double dy[2];
      rhs(t, y, dy);
      return Moments{dy[0], dy[1]};
    };
  } else {
    auto model = std::make_shared<LocalModel>(p, v, make_clearance(f, value), opt.N_max);
    y0 = model->initial_state(seed);
    rhs = [model](double t, std::span<const double> y, std::span<double> dy) { model->rhs(t, y, dy); };
    const std::size_t N = opt.N_max;
    mass = [N](std::span<const double> y) { return moments(y.subspan(1, N - 1)).M; };
    dmoments = [model, N](double t, std::span<const double> y) {
      std::vector<double> dy(y.size());
      model->rhs(t, y, dy);
      return moments(std::span<const double>(dy).subspan(1, N - 1));
    };
    cfg.nonneg_mask = model->nonneg_mask();
    cfg.negativity_tol = 1e-12 * p.m_0;
  }

  std::vector<solver::Event> events;
  events.push_back({"settled",
                    [dmoments, thr](double t, std::span<const double> y) {
                      const Moments d = dmoments(t, y);
                      return std::max(std::fabs(d.P), std::fabs(d.M)) - thr;
                    },
                    true, -1});
  // the seeded mass starts above the classifier level, so a downward
  // crossing is already decisive
  events.push_back({"extinct",
                    [mass, p](double, std::span<const double> y) { return mass(y) - 1e-6 * p.m_0; },
                    true, -1});
  // The fast transient is cheapest explicitly; only runs still undecided
  // after it (near the threshold) switch to the stiff solver for the tail.
  const double t_switch = std::min(1.0, opt.t_max);
  cfg.output_times = {t_switch};
  const auto head = solver::integrate(rhs, y0, 0.0, t_switch, cfg, events);
  if (head.terminated || t_switch >= opt.t_max) return mass(head.back()) < 1e-6 * p.m_0;
  cfg.method = y0.size() <= solver::kMaxDenseDim ? solver::Method::Rosenbrock : solver::Method::DormandPrince;
  cfg.output_times = {opt.t_max};
  const auto tail = solver::integrate(rhs, head.back(), t_switch, opt.t_max, cfg, events);
  return mass(tail.back()) < 1e-6 * p.m_0;
}

NumericCritical critical_clearance_numeric(const KineticParameters& p, Family f, double lo,
                                           double hi, const NumericOptions& opt) {
  if (!(hi > lo && lo > 0)) throw std::invalid_argument("bisection bracket must satisfy 0 < lo < hi");
  std::size_t evals = 2;
  if (classify_supercritical(p, f, lo, opt) || !classify_supercritical(p, f, hi, opt))
    throw std::runtime_error("classifier does not change sign across the bracket");
  while ((hi - lo) > opt.rel_width * hi) {
    const double mid = 0.5 * (lo + hi);
    ++evals;
    (classify_supercritical(p, f, mid, opt) ? hi : lo) = mid;
  }
  return {0.5 * (lo + hi), lo, hi, evals};
}

}  // namespace neuroagg::analysis
