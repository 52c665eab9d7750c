#pragma once

// Dormand–Prince 5(4) with PI step control, or a linearly implicit
// Rosenbrock 2(3) pair for stiff problems (dense finite-difference Jacobian).
// Cubic Hermite dense output, bisection event location and exact restarts at
// discontinuities.

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace neuroagg::solver {

using Rhs = std::function<void(double t, std::span<const double> y, std::span<double> dy)>;

// Smooth piece between two discontinuities; index counts from 0.
struct Segment {
  double t_begin;
  double t_end;
  std::size_t index;
};
using SegmentRhs = std::function<void(double t, std::span<const double> y, std::span<double> dy,
                                      const Segment& seg)>;

enum class Method { DormandPrince, Rosenbrock };
// Largest system the Rosenbrock path accepts (dense Jacobian + LU per step).
inline constexpr std::size_t kMaxDenseDim = 1000;

struct IntegrationConfig {
  Method method = Method::DormandPrince;
  double rel_tol = 1e-8;
  double abs_tol = 1e-20;
  double max_step = std::numeric_limits<double>::infinity();
  double initial_step = 0.0;  // 0: automatic
  std::vector<double> discontinuity_times;
  // When set, only these times (plus t0, t1 and events) are stored.
  std::vector<double> output_times;
  std::size_t max_steps = 50'000'000;
  // Components with mask[i] != 0 may not fall below -negativity_tol.
  std::vector<char> nonneg_mask;
  double negativity_tol = std::numeric_limits<double>::infinity();
};

struct Event {
  std::string label;
  std::function<double(double t, std::span<const double> y)> g;
  bool terminal = false;
  int direction = 0;  // +1 rising only, -1 falling only, 0 both
};

struct EventRecord {
  std::string label;
  double t;
  std::vector<double> y;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> derivs;
  std::vector<EventRecord> events;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  bool terminated = false;  // stopped by a terminal event

  std::size_t dim() const { return states.empty() ? 0 : states.front().size(); }
  const std::vector<double>& back() const { return states.back(); }
  // Hermite interpolation between stored samples.
  std::vector<double> at(double t) const;
  std::optional<EventRecord> event(const std::string& label) const;
};

class SolverError : public std::runtime_error {
 public:
  enum class Kind { StepUnderflow, NonFinite, Negativity, MaxSteps };
  SolverError(Kind kind, double t, const std::string& what)
      : std::runtime_error(what), kind_(kind), t_(t) {}
  Kind kind() const { return kind_; }
  double time() const { return t_; }

 private:
  Kind kind_;
  double t_;
};

Trajectory integrate(const Rhs& rhs, std::vector<double> y0, double t0, double t1,
                     const IntegrationConfig& config, const std::vector<Event>& events = {});

Trajectory integrate_segmented(const SegmentRhs& rhs, std::vector<double> y0, double t0, double t1,
                               const IntegrationConfig& config,
                               const std::vector<Event>& events = {});

// First upward crossing of observable(y) = level along the stored
// trajectory, located on the Hermite interpolant.
std::optional<double> first_crossing(const Trajectory& traj,
                                     const std::function<double(std::span<const double>)>& observable,
                                     double level, double t_tol);

// Crossing of M = m_0/2; M supplied as a linear observable of the state.
std::optional<double> find_halftime(const Trajectory& traj,
                                    const std::function<double(std::span<const double>)>& mass,
                                    double m_0);

struct Timescales {
  double tau_1;
  std::optional<double> tau_2;
  double M_max;
};
// tau_1 = argmax M, tau_2 = first t > tau_1 with M - M_2 <= 0.01 (M_max - M_2).
Timescales find_timescales(const Trajectory& traj,
                           const std::function<double(std::span<const double>)>& mass, double M_2);

}  // namespace neuroagg::solver
