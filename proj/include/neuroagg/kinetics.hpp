#pragma once

// Size-resolved nucleation/elongation/secondary-nucleation kinetics with
// clearance. Concentrations in M, times in hours unless a name says otherwise.
//
// Flat state layout used by every right-hand side:
//   y[0]            monomer m
//   y[i-1]          p_i for i = 2..N_max
//   y[N_max-1+i-1]  lambda_i (dynamic clearance only)

#include <cstddef>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace neuroagg {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct KineticParameters {
  double k_n = 1.6e-11;
  double k_2 = 2.1e14;
  double K_m = 2.3e-17;
  double K_M = 2.3e-17;
  double k_plus = 1e10;
  double m_0 = 3e-6;
  double rescale_c = 1.0;

  void validate() const;
};

enum class ModelTag { InVitroClosed, InVivoConstMonomer, InVivoDynamicClearance };
enum class SaturationArgument { Monomer, Mass };
enum class NucleationForm { Raw, MonomerSquared };
// Reflecting drops elongation out of the last size so the truncated system
// conserves mass; Absorbing keeps it (mass leaks past N_max).
enum class Closure { Reflecting, Absorbing };

struct ModelVariant {
  ModelTag tag = ModelTag::InVivoConstMonomer;
  SaturationArgument saturation = SaturationArgument::Mass;
  NucleationForm nucleation = NucleationForm::MonomerSquared;
  bool k_n_zeroed = false;
  Closure closure = Closure::Reflecting;

  static ModelVariant defaults(ModelTag tag);
};

struct Moments {
  double P = 0.0;
  double M = 0.0;
};

struct SizeDistribution {
  double m = 0.0;
  std::vector<double> p;  // p[i-2] = p_i

  SizeDistribution() = default;
  SizeDistribution(double m, std::size_t N_max) : m(m), p(N_max - 1, 0.0) {}

  std::size_t N_max() const { return p.size() + 1; }
  double& at(std::size_t i) { return p.at(i - 2); }
  double at(std::size_t i) const { return p.at(i - 2); }

  std::vector<double> flatten() const;
  static SizeDistribution from_flat(std::span<const double> y, std::size_t N_max);
};

namespace clearance {
struct Constant {
  double lambda = 0.0;
};
struct LinearInSize {
  double lambda_0 = 0.0;
};
struct InverseInSize {
  double lambda_0 = 0.0;
};
struct Interval {
  double lambda_a = 0.0;
  double lambda_drug = 0.0;
  std::size_t n_0 = 2;
  std::size_t n_1 = 2;
};
// Per-size vectors of length N_max - 1, or length 1 to broadcast.
struct Dynamic {
  std::vector<double> lambda_init;
  std::vector<double> mu;
  std::vector<double> beta;
};
struct DosingProfile {
  double lambda_drug = 0.0;  // 1/h
  double A = 1.0;            // 1/day
  double B = 1.0;            // days
  double lambda_a = 0.0;     // 1/h
};
}  // namespace clearance

using ClearanceSpec =
    std::variant<clearance::Constant, clearance::LinearInSize, clearance::InverseInSize,
                 clearance::Interval, clearance::Dynamic, clearance::DosingProfile>;

constexpr double kHoursPerDay = 24.0;

void validate(const ClearanceSpec& spec, std::size_t N_max);

// lambda(t) of the periodic dosing profile; t in hours.
double dosing_rate(const clearance::DosingProfile& d, double t_hours);

// Dose instants (hours) strictly inside (t0, t1).
std::vector<double> dosing_instants(const clearance::DosingProfile& d, double t0, double t1);

// lam[i-2] = lambda_i at time t (hours). Dynamic specs are rejected: their
// rates live in the state vector.
void clearance_rates(const ClearanceSpec& spec, double t_hours, std::span<double> lam);

double sigma(double x, double K);

Moments moments(std::span<const double> p);  // p_2..p_N, ascending-i sum
inline Moments moments(const SizeDistribution& s) { return moments(s.p); }

// Rates in the frame where every concentration is multiplied by c.
// The nucleation form decides how k_n transforms; keep_k_n leaves it
// numerically unchanged instead.
KineticParameters rescaled(const KineticParameters& p, double c, NucleationForm form,
                           bool keep_k_n = false);
clearance::Dynamic rescaled(const clearance::Dynamic& d, double c);

// --- distribution right-hand sides (flat layout) --------------------------

void rhs_invitro(std::span<const double> y, std::span<double> dy, const KineticParameters& p,
                 const ModelVariant& v);

// lam holds lambda_2..lambda_N.
void rhs_invivo(std::span<const double> y, std::span<double> dy, const KineticParameters& p,
                const ModelVariant& v, std::span<const double> lam);

// y carries 2*N_max - 1 entries: distribution followed by lambda_2..lambda_N.
void rhs_dynamic(std::span<const double> y, std::span<double> dy, const KineticParameters& p,
                 const ModelVariant& v, const clearance::Dynamic& d);

// Struct-level conveniences.
SizeDistribution rhs_invitro(const SizeDistribution& s, const KineticParameters& p,
                             const ModelVariant& v = ModelVariant::defaults(ModelTag::InVitroClosed));
SizeDistribution rhs_invivo(const SizeDistribution& s, const KineticParameters& p,
                            const ClearanceSpec& c, double t_hours = 0.0,
                            const ModelVariant& v = ModelVariant::defaults(ModelTag::InVivoConstMonomer));

// Bound homogeneous model: fixes params, variant, clearance and N_max. The
// rhs is const and reentrant.
class LocalModel {
 public:
  LocalModel(KineticParameters p, ModelVariant v, ClearanceSpec c, std::size_t N_max);

  std::size_t N_max() const { return N_; }
  std::size_t dim() const;
  const KineticParameters& params() const { return p_; }
  const ModelVariant& variant() const { return v_; }
  const ClearanceSpec& clearance() const { return c_; }

  void rhs(double t, std::span<const double> y, std::span<double> dy) const;
  std::vector<double> initial_state(double seed_p2) const;
  std::vector<double> discontinuities(double t0, double t1) const;
  // components subject to the negativity check (aggregates, clearance)
  std::vector<char> nonneg_mask() const;

 private:
  KineticParameters p_;
  ModelVariant v_;
  ClearanceSpec c_;
  std::size_t N_;
  std::vector<double> lam_;  // static rates, empty when time dependent
  std::vector<double> zeros_;
  clearance::Dynamic dyn_;   // broadcast to full length
};

// --- closed moment systems -------------------------------------------------
// in vitro: y = (m, P, M)
void moment_rhs_invitro(std::span<const double> y, std::span<double> dy,
                        const KineticParameters& p, const ModelVariant& v);
// in vivo, uniform clearance lambda, monomer held at m_0: y = (P, M)
void moment_rhs_invivo(std::span<const double> y, std::span<double> dy,
                       const KineticParameters& p, const ModelVariant& v, double lambda);
// uniform dynamic clearance: y = (P, M, lambda)
void moment_rhs_dynamic(std::span<const double> y, std::span<double> dy,
                        const KineticParameters& p, const ModelVariant& v, double mu,
                        double beta);

}  // namespace neuroagg
