#pragma once

// Drug action: kinetic inhibition of secondary nucleation, extra clearance,
// size-window clearance and periodic dosing.

#include "neuroagg/analysis.hpp"
#include "neuroagg/kinetics.hpp"

#include <optional>
#include <span>

namespace neuroagg::therapy {

struct DrugSpec {
  double delta_k = 1.0;       // k2 -> delta_k * k2
  double potency_L = 0.0;     // 1/(h M)
  double C_p = 0.0;           // M
  std::optional<double> lambda_drug_override;  // 1/h
  bool kinetic = true;        // apply delta_k
  bool clearance = true;      // apply lambda_drug

  void validate() const;
};

struct DrugEffect {
  KineticParameters params;
  double lambda_drug = 0.0;  // 1/h, added to every lambda_i
};

DrugEffect apply_drug(const KineticParameters& p, const DrugSpec& drug);

// Clearance spec with a uniform increment added (Constant, Interval and
// DosingProfile; other families throw ConfigError unless increment == 0).
ClearanceSpec with_extra_clearance(const ClearanceSpec& c, double increment);

struct DosingRegime {
  double lambda_drug = 0.0;  // 1/h peak increment
  double A = 1.0;            // 1/day
  double B = 1.0;            // days
  double lambda_a = 0.0;     // 1/h
  double t_max = 28.0;       // days

  void validate() const;
  clearance::DosingProfile profile() const { return {lambda_drug, A, B, lambda_a}; }
};

// 1/h at time t in days.
double dosing_clearance(double t_days, const DosingRegime& r);

// Time integral (days) of the drug part of the profile over [0, t_max].
double regime_toxicity(const DosingRegime& r);
// regime_toxicity per unit lambda_drug; the closed form is linear in it.
double toxicity_per_unit_drug(double A, double B, double t_max);

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MeanToxicMassOptions {
  double cycle_rel_tol = 1e-4;
  std::size_t max_cycles = 1000;
  double rel_tol = 1e-9;
  double abs_tol = 0.0;  // 0: 1e-14 m_0
};

struct MeanToxicMass {
  double M_bar;    // cycle average of M, parameter units
  double M_min;    // over the last cycle (sampled at solver steps)
  double M_max;
  std::size_t cycles;
};

// Integrates the in vivo moment system under the dosing profile, cycle by
// cycle, until successive cycle averages agree. Starts from the fixed point
// of the cycle-mean clearance.
MeanToxicMass mean_toxic_mass(const KineticParameters& p, const DosingRegime& r,
                              const ModelVariant& v = ModelVariant::defaults(ModelTag::InVivoConstMonomer),
                              const MeanToxicMassOptions& opt = {});

// --- size-window clearance ---------------------------------------------------

// Full distribution rhs with lambda_i = lambda_a (+ lambda_drug on [n_0, n_1]).
void interval_clearance_rhs(std::span<const double> y, std::span<double> dy,
                            const KineticParameters& p, const ModelVariant& v,
                            const clearance::Interval& iv);

// Moment-level form: (dP/dt, dM/dt) with the window sums taken from the
// distribution y (flat layout, monomer at y[0]). Agrees with the moments of
// interval_clearance_rhs when the last size is unpopulated.
Moments interval_moment_rhs(std::span<const double> y, const KineticParameters& p,
                            const ModelVariant& v, const clearance::Interval& iv);

struct IntervalEquilibrium {
  double exact;     // fixed point of the windowed recurrence (with tail)
  double estimate;  // constant-lambda_a steady state minus the window mass
};
IntervalEquilibrium interval_equilibrium(const KineticParameters& p, const clearance::Interval& iv,
                                         std::size_t N_max);

}  // namespace neuroagg::therapy
