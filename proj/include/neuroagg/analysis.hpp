#pragma once

// Closed-form results for the homogeneous models plus numeric oracles that
// arbitrate between printed formulas.

#include "neuroagg/kinetics.hpp"

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

namespace neuroagg::analysis {

struct LinearizedCoefficients {
  double a;  // k_2 m_0^2 K_m / (K_m + m_0^2)
  double b;  // 2 k_+ m_0 + a
};

LinearizedCoefficients linearized_coefficients(const KineticParameters& p);

// Early-time aggregate mass of the in vitro model (raw nucleation rate).
double linearized_mass(double t, const KineticParameters& p);

double halftime_lin(const KineticParameters& p);
double halftime_lin_simplified(const KineticParameters& p);

struct FixedPointMoments {
  double P_2 = 0.0;
  double M_2 = 0.0;
  bool exists = false;
};

// Nontrivial fixed point of the seeded in vivo moment system with uniform
// clearance lambda.
FixedPointMoments fixed_point_moments(const KineticParameters& p, double lambda);

// Eigenvalues of the moment-system Jacobian at (P, M), by central differences.
std::array<std::complex<double>, 2> moment_jacobian_eigenvalues(const KineticParameters& p,
                                                                double lambda, double P, double M);

enum class CritFormula { MomentBased, DistributionBased };
double critical_clearance_constant(const KineticParameters& p,
                                   CritFormula f = CritFormula::MomentBased);

enum class Truncation {
  Infinite,    // recurrence to N_max plus an estimated tail
  Reflecting,  // exact fixed point of the truncated reflecting system
  Absorbing,   // exact fixed point of the truncated absorbing system
};

struct ExistenceConditions {
  bool C1 = false;             // Delta_i -> 0
  bool C2 = false;             // sum k Delta_k converges
  bool C3 = false;             // k_2 m_0^2 Delta > lambda_2 + 2 k_+ m_0
  bool tail_resolved = false;  // tail estimate < 1e-9 of the partial sum
};

struct SteadyStateDistribution {
  std::vector<double> delta_i;  // index i-2, delta_2 := 1
  std::vector<double> Delta_i;  // cumulative products, Delta_2 = 1
  double Delta_partial = 0.0;   // sum_{k<=N} k Delta_k
  double tail = 0.0;            // estimated remainder beyond N_max
  double Delta = 0.0;           // partial + tail
  double p2_star = 0.0;
  std::vector<double> p_star;   // index i-2
  double M_star = 0.0;
  double P_star = 0.0;
  ExistenceConditions conditions;
  bool exists = false;
};

SteadyStateDistribution steady_state_distribution(const KineticParameters& p,
                                                  const ClearanceSpec& c, std::size_t N_max,
                                                  Truncation mode = Truncation::Infinite);

ExistenceConditions existence_conditions(const SteadyStateDistribution& d);

enum class Family { Constant, LinearInSize, InverseInSize };
ClearanceSpec make_clearance(Family f, double value);

struct InverseSizeCritical {
  double exact;   // 2A(A + 4k_2 m_0^2)/(A + k_2 m_0^2), A = 2 k_+ m_0
  double approx;  // 2A
};
InverseSizeCritical critical_clearance_inverse_size(const KineticParameters& p);

struct LinearSizeCritical {
  double printed;  // (k_+ k_2 m_0^3 - 1)/(k_+ m_0 - k_2 m_0^2), units do not match
  double numeric;  // existence-condition threshold
};
LinearSizeCritical critical_clearance_linear_size(const KineticParameters& p,
                                                  std::size_t N_max = 20000);

// Largest family scalar for which the steady state exists (bisection on the
// existence conditions, relative width rel_tol).
double critical_clearance_existence(const KineticParameters& p, Family f, std::size_t N_max,
                                    double rel_tol = 1e-9);

struct NumericOptions {
  std::size_t N_max = 200;
  bool moment_system = false;  // only valid for the Constant family
  double seed_fraction = 1e-4; // p_2(0) = seed_fraction * m_0
  double rel_width = 1e-3;
  double t_max = 2e3;          // hours
};

struct NumericCritical {
  double value;
  double lo;  // largest scalar classified subcritical
  double hi;  // smallest scalar classified supercritical
  std::size_t evaluations;
};

// true when the seeded system (k_n = 0) relaxes to M < 1e-6 m_0.
bool classify_supercritical(const KineticParameters& p, Family f, double value,
                            const NumericOptions& opt);

// Bisection on the family scalar in [lo, hi] with the ODE classifier.
// Throws std::runtime_error if the bracket does not straddle the threshold.
NumericCritical critical_clearance_numeric(const KineticParameters& p, Family f, double lo,
                                           double hi, const NumericOptions& opt = {});

}  // namespace neuroagg::analysis
