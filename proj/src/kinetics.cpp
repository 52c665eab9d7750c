#include "neuroagg/kinetics.hpp"

#include "neuroagg/simd.hpp"

#include <cmath>
#include <string>

namespace neuroagg {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

double nucleation(const KineticParameters& p, const ModelVariant& v, double m) {
  if (v.k_n_zeroed) return 0.0;
  return v.nucleation == NucleationForm::Raw ? p.k_n : p.k_n * m * m;
}

double saturation(const KineticParameters& p, const ModelVariant& v, double m, double M) {
  return v.saturation == SaturationArgument::Monomer ? sigma(m, p.K_m) : sigma(M, p.K_M);
}

double pick(const std::vector<double>& v, std::size_t j) { return v.size() == 1 ? v[0] : v[j]; }

// Shared aggregate block: dp_i for i = 2..N given rates lam (or a uniform
// rate when lam is empty).
void aggregate_block(std::span<const double> y, std::span<double> dy, const KineticParameters& p,
                     const ModelVariant& v, const double* lam, double lam_uniform,
                     const double* zeros, std::size_t N, double M) {
  const double m = y[0];
  const double g = 2.0 * p.k_plus * m;
  const double source = nucleation(p, v, m) + p.k_2 * saturation(p, v, m, M) * m * m * M;
  const double l2 = lam ? lam[0] : lam_uniform;
  dy[1] = source - g * y[1] - l2 * y[1];
  if (N < 3) return;
  // sizes 3..N via the vector kernel, last size fixed up for the closure
  const auto& k = simd::kernels();
  const std::size_t n = N - 2;
  k.elongation(g, y.data() + 1, y.data() + 2, lam ? lam + 1 : zeros, dy.data() + 2, n);
  if (!lam) k.axpy(-lam_uniform, y.data() + 2, dy.data() + 2, n);
  if (v.closure == Closure::Reflecting) {
    const double lN = lam ? lam[N - 2] : lam_uniform;
    dy[N - 1] = g * y[N - 2] - lN * y[N - 1];
  }
}

}  // namespace

void KineticParameters::validate() const {
  require(k_n >= 0 && k_2 >= 0 && k_plus >= 0 && m_0 >= 0, "rate constants and m_0 must be >= 0");
  require(K_m > 0 && K_M > 0, "saturation constants K_m, K_M must be > 0");
  require(rescale_c > 0, "rescale_c must be > 0");
  require(std::isfinite(k_n) && std::isfinite(k_2) && std::isfinite(k_plus) &&
              std::isfinite(m_0) && std::isfinite(K_m) && std::isfinite(K_M),
          "parameters must be finite");
}

ModelVariant ModelVariant::defaults(ModelTag tag) {
  ModelVariant v;
  v.tag = tag;
  if (tag == ModelTag::InVitroClosed) {
    v.saturation = SaturationArgument::Monomer;
    v.nucleation = NucleationForm::Raw;
  } else {
    v.saturation = SaturationArgument::Mass;
    v.nucleation = NucleationForm::MonomerSquared;
  }
  return v;
}

std::vector<double> SizeDistribution::flatten() const {
  std::vector<double> y(p.size() + 1);
  y[0] = m;
  std::copy(p.begin(), p.end(), y.begin() + 1);
  return y;
}

SizeDistribution SizeDistribution::from_flat(std::span<const double> y, std::size_t N_max) {
  if (y.size() < N_max) throw std::invalid_argument("state shorter than N_max");
  SizeDistribution s(y[0], N_max);
  std::copy(y.begin() + 1, y.begin() + N_max, s.p.begin());
  return s;
}

void validate(const ClearanceSpec& spec, std::size_t N_max) {
  using namespace clearance;
  if (N_max < 2) throw ConfigError("N_max must be >= 2");
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Constant>) {
          require(c.lambda >= 0, "clearance lambda must be >= 0");
        } else if constexpr (std::is_same_v<T, LinearInSize> || std::is_same_v<T, InverseInSize>) {
          require(c.lambda_0 >= 0, "clearance lambda_0 must be >= 0");
        } else if constexpr (std::is_same_v<T, Interval>) {
          require(c.lambda_a >= 0 && c.lambda_drug >= 0, "interval rates must be >= 0");
          require(2 <= c.n_0 && c.n_0 <= c.n_1, "interval needs 2 <= n_0 <= n_1");
          require(c.n_1 <= N_max, "interval n_1 exceeds N_max");
        } else if constexpr (std::is_same_v<T, Dynamic>) {
          const std::size_t n = N_max - 1;
          for (const auto* v : {&c.lambda_init, &c.mu, &c.beta})
            require(v->size() == 1 || v->size() == n, "dynamic clearance vectors need length 1 or N_max-1");
          for (std::size_t j = 0; j < n; ++j) {
            const double l0 = pick(c.lambda_init, j), mu = pick(c.mu, j), b = pick(c.beta, j);
            require(l0 >= 0 && mu >= 0 && b >= 0, "dynamic clearance rates must be >= 0");
            require(mu <= l0, "basal clearance mu_i exceeds initial lambda_i");
          }
        } else {
          require(c.lambda_drug >= 0 && c.A >= 0 && c.lambda_a >= 0, "dosing rates must be >= 0");
          require(c.B > 0, "dosing period B must be > 0");
        }
      },
      spec);
}

double dosing_rate(const clearance::DosingProfile& d, double t_hours) {
  const double t_days = t_hours / kHoursPerDay;
  double phase = std::fmod(t_days, d.B);
  if (phase < 0) phase += d.B;
  return d.lambda_drug * std::exp(-d.A * phase) + d.lambda_a;
}

std::vector<double> dosing_instants(const clearance::DosingProfile& d, double t0, double t1) {
  std::vector<double> out;
  const double period = d.B * kHoursPerDay;
  for (long k = static_cast<long>(std::floor(t0 / period)) + 1;; ++k) {
    const double t = static_cast<double>(k) * period;
    if (t >= t1) break;
    if (t > t0) out.push_back(t);
  }
  return out;
}

void clearance_rates(const ClearanceSpec& spec, double t_hours, std::span<double> lam) {
  using namespace clearance;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        for (std::size_t j = 0; j < lam.size(); ++j) {
          const double i = static_cast<double>(j + 2);
          if constexpr (std::is_same_v<T, Constant>) {
            lam[j] = c.lambda;
          } else if constexpr (std::is_same_v<T, LinearInSize>) {
            lam[j] = i * c.lambda_0;
          } else if constexpr (std::is_same_v<T, InverseInSize>) {
            lam[j] = c.lambda_0 / i;
          } else if constexpr (std::is_same_v<T, Interval>) {
            const std::size_t s = j + 2;
            lam[j] = c.lambda_a + ((s >= c.n_0 && s <= c.n_1) ? c.lambda_drug : 0.0);
          } else if constexpr (std::is_same_v<T, Dynamic>) {
            throw ConfigError("dynamic clearance rates are part of the state");
          } else {
            lam[j] = dosing_rate(c, t_hours);
          }
        }
      },
      spec);
}

double sigma(double x, double K) {
  if (!(K > 0)) throw DomainError("sigma: saturation constant must be > 0");
  return K / (K + x * x);
}

Moments moments(std::span<const double> p) {
  Moments out;
  for (std::size_t j = 0; j < p.size(); ++j) {
    out.P += p[j];
    out.M += static_cast<double>(j + 2) * p[j];
  }
  return out;
}

KineticParameters rescaled(const KineticParameters& p, double c, NucleationForm form,
                           bool keep_k_n) {
  KineticParameters r = p;
  r.m_0 = p.m_0 * c;
  r.K_m = p.K_m * c * c;
  r.K_M = p.K_M * c * c;
  r.k_2 = p.k_2 / (c * c);
  r.k_plus = p.k_plus / c;
  if (!keep_k_n) r.k_n = form == NucleationForm::Raw ? p.k_n * c : p.k_n / c;
  r.rescale_c = 1.0;
  return r;
}

clearance::Dynamic rescaled(const clearance::Dynamic& d, double c) {
  clearance::Dynamic r = d;
  for (double& b : r.beta) b /= c;
  return r;
}

void rhs_invitro(std::span<const double> y, std::span<double> dy, const KineticParameters& p,
                 const ModelVariant& v) {
  const std::size_t N = y.size();
  const double m = y[0];
  const Moments mo = moments(y.subspan(1, N - 1));
  std::vector<double> zeros(N > 2 ? N - 2 : 0, 0.0);
  aggregate_block(y, dy, p, v, nullptr, 0.0, zeros.data(), N, mo.M);
  // monomer loss = mass gain of the aggregate block
  const double P_flow = v.closure == Closure::Reflecting ? mo.P - y[N - 1] : mo.P;
  const double nuc = nucleation(p, v, m);
  const double sec = p.k_2 * saturation(p, v, m, mo.M) * m * m * mo.M;
  dy[0] = -2.0 * nuc - 2.0 * p.k_plus * m * P_flow - 2.0 * sec;
}

void rhs_invivo(std::span<const double> y, std::span<double> dy, const KineticParameters& p,
                const ModelVariant& v, std::span<const double> lam) {
  const std::size_t N = y.size();
  if (lam.size() != N - 1) throw std::invalid_argument("rhs_invivo: rate vector length");
  const Moments mo = moments(y.subspan(1, N - 1));
  aggregate_block(y, dy, p, v, lam.data(), 0.0, nullptr, N, mo.M);
  dy[0] = 0.0;
}

void rhs_dynamic(std::span<const double> y, std::span<double> dy, const KineticParameters& p,
                 const ModelVariant& v, const clearance::Dynamic& d) {
  if (y.size() % 2 == 0) throw std::invalid_argument("rhs_dynamic: state length must be 2N-1");
  const std::size_t N = (y.size() + 1) / 2;
  const auto dist = y.first(N);
  const auto lam = y.subspan(N, N - 1);
  const Moments mo = moments(dist.subspan(1, N - 1));
  aggregate_block(dist, dy.first(N), p, v, lam.data(), 0.0, nullptr, N, mo.M);
  dy[0] = 0.0;
  for (std::size_t j = 0; j < N - 1; ++j)
    dy[N + j] = pick(d.beta, j) * mo.M * (pick(d.mu, j) - lam[j]);
}

SizeDistribution rhs_invitro(const SizeDistribution& s, const KineticParameters& p,
                             const ModelVariant& v) {
  const auto y = s.flatten();
  std::vector<double> dy(y.size());
  rhs_invitro(y, dy, p, v);
  return SizeDistribution::from_flat(dy, s.N_max());
}

SizeDistribution rhs_invivo(const SizeDistribution& s, const KineticParameters& p,
                            const ClearanceSpec& c, double t_hours, const ModelVariant& v) {
  if (std::holds_alternative<clearance::Dynamic>(c))
    throw ConfigError("dynamic clearance requires rhs_dynamic");
  const auto y = s.flatten();
  std::vector<double> lam(s.p.size()), dy(y.size());
  clearance_rates(c, t_hours, lam);
  rhs_invivo(y, dy, p, v, lam);
  return SizeDistribution::from_flat(dy, s.N_max());
}

LocalModel::LocalModel(KineticParameters p, ModelVariant v, ClearanceSpec c, std::size_t N_max)
    : p_(p), v_(v), c_(std::move(c)), N_(N_max) {
  p_.validate();
  validate(c_, N_);
  const bool dynamic = std::holds_alternative<clearance::Dynamic>(c_);
  if (v_.tag == ModelTag::InVivoDynamicClearance && !dynamic)
    throw ConfigError("dynamic-clearance model needs a Dynamic clearance spec");
  if (dynamic && v_.tag != ModelTag::InVivoDynamicClearance)
    throw ConfigError("Dynamic clearance spec requires the dynamic-clearance model");
  zeros_.assign(N_ > 2 ? N_ - 2 : 0, 0.0);
  if (dynamic) {
    const auto& d = std::get<clearance::Dynamic>(c_);
    for (std::size_t j = 0; j < N_ - 1; ++j) {
      dyn_.lambda_init.push_back(pick(d.lambda_init, j));
      dyn_.mu.push_back(pick(d.mu, j));
      dyn_.beta.push_back(pick(d.beta, j));
    }
  } else if (!std::holds_alternative<clearance::DosingProfile>(c_)) {
    lam_.resize(N_ - 1);
    clearance_rates(c_, 0.0, lam_);
  }
}

std::size_t LocalModel::dim() const {
  return v_.tag == ModelTag::InVivoDynamicClearance ? 2 * N_ - 1 : N_;
}

void LocalModel::rhs(double t, std::span<const double> y, std::span<double> dy) const {
  switch (v_.tag) {
    case ModelTag::InVitroClosed: {
      const double m = y[0];
      const Moments mo = moments(y.subspan(1, N_ - 1));
      // closed system: any configured clearance is ignored
      aggregate_block(y, dy, p_, v_, nullptr, 0.0, zeros_.data(), N_, mo.M);
      const double P_flow = v_.closure == Closure::Reflecting ? mo.P - y[N_ - 1] : mo.P;
      const double sec = p_.k_2 * saturation(p_, v_, m, mo.M) * m * m * mo.M;
      dy[0] = -2.0 * nucleation(p_, v_, m) - 2.0 * p_.k_plus * m * P_flow - 2.0 * sec;
      return;
    }
    case ModelTag::InVivoConstMonomer: {
      const Moments mo = moments(y.subspan(1, N_ - 1));
      if (lam_.empty()) {
        const double l = dosing_rate(std::get<clearance::DosingProfile>(c_), t);
        aggregate_block(y, dy, p_, v_, nullptr, l, zeros_.data(), N_, mo.M);
      } else {
        aggregate_block(y, dy, p_, v_, lam_.data(), 0.0, nullptr, N_, mo.M);
      }
      dy[0] = 0.0;
      return;
    }
    case ModelTag::InVivoDynamicClearance:
      rhs_dynamic(y, dy, p_, v_, dyn_);
      return;
  }
}

std::vector<double> LocalModel::initial_state(double seed_p2) const {
  std::vector<double> y(dim(), 0.0);
  y[0] = p_.m_0;
  if (N_ >= 2) y[1] = seed_p2;
  if (v_.tag == ModelTag::InVivoDynamicClearance)
    std::copy(dyn_.lambda_init.begin(), dyn_.lambda_init.end(), y.begin() + static_cast<long>(N_));
  return y;
}

std::vector<double> LocalModel::discontinuities(double t0, double t1) const {
  if (const auto* d = std::get_if<clearance::DosingProfile>(&c_)) return dosing_instants(*d, t0, t1);
  return {};
}

std::vector<char> LocalModel::nonneg_mask() const {
  std::vector<char> mask(dim(), 1);
  // the raw nucleation sink can push m marginally below zero once depleted
  mask[0] = v_.tag == ModelTag::InVitroClosed ? 0 : 1;
  return mask;
}

void moment_rhs_invitro(std::span<const double> y, std::span<double> dy,
                        const KineticParameters& p, const ModelVariant& v) {
  const double m = y[0], P = y[1], M = y[2];
  const double nuc = nucleation(p, v, m);
  const double sec = p.k_2 * saturation(p, v, m, M) * m * m * M;
  dy[1] = nuc + sec;
  dy[2] = 2.0 * nuc + 2.0 * p.k_plus * m * P + 2.0 * sec;
  dy[0] = -dy[2];
}

void moment_rhs_invivo(std::span<const double> y, std::span<double> dy,
                       const KineticParameters& p, const ModelVariant& v, double lambda) {
  const double m = p.m_0, P = y[0], M = y[1];
  const double nuc = nucleation(p, v, m);
  const double sec = p.k_2 * saturation(p, v, m, M) * m * m * M;
  dy[0] = -lambda * P + nuc + sec;
  dy[1] = -lambda * M + 2.0 * nuc + 2.0 * p.k_plus * m * P + 2.0 * sec;
}

void moment_rhs_dynamic(std::span<const double> y, std::span<double> dy,
                        const KineticParameters& p, const ModelVariant& v, double mu,
                        double beta) {
  moment_rhs_invivo(y.first(2), dy.first(2), p, v, y[2]);
  dy[2] = beta * y[1] * (mu - y[2]);
}

}  // namespace neuroagg
