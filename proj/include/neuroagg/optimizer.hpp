#pragma once

// Grid sweeps over (B, lambda_drug) and the C_max-constrained optimum.

#include "neuroagg/therapy.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace neuroagg::optimizer {

struct Settings {
  double lambda_a = 10.0;  // 1/h
  double A = 1.0;          // 1/day
  double t_max = 28.0;     // days
  // admissible box (inclusive)
  double B_min = 0.2;
  double lambda_min = 0.2;
  double lambda_max = 80.0;
  unsigned threads = 0;    // 0: hardware concurrency
  ModelVariant variant = ModelVariant::defaults(ModelTag::InVivoConstMonomer);
  therapy::MeanToxicMassOptions mtm;
};

struct SweepPoint {
  double B;
  double lambda_drug;
  double C_max;
  std::optional<double> M_bar;  // empty: did not converge
  std::string error;
};

struct SweepGrid {
  std::vector<double> B_values;
  std::vector<double> lambda_values;
  std::vector<SweepPoint> points;  // B-major

  const SweepPoint& at(std::size_t b, std::size_t l) const {
    return points[b * lambda_values.size() + l];
  }
};

SweepGrid sweep(const std::vector<double>& B_values, const std::vector<double>& lambda_values,
                const KineticParameters& p, const Settings& s);

// B,lambda_drug,M_bar,C_max ; missing M_bar left empty. M_bar is multiplied
// by `scale` (reporting units).
void write_contour_csv(std::ostream& out, const SweepGrid& g, double scale = 1.0);

struct Candidate {
  double B;
  double lambda_drug;
  double C_max;
  std::optional<double> M_bar;
  bool feasible;  // lambda_drug within [0, lambda_max]
};

struct Optimum {
  double B_star;
  double lambda_drug_star;
  double M_bar_star;
  double C_max;  // achieved
  std::vector<Candidate> candidates;
};

class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double lo, double hi)
      : std::runtime_error(what), lo_(lo), hi_(hi) {}
  double feasible_min() const { return lo_; }
  double feasible_max() const { return hi_; }

 private:
  double lo_, hi_;
};

// lambda_drug with regime_toxicity == target at period B.
double lambda_for_toxicity(double target, double A, double B, double t_max);

Optimum constrained_optimum(double C_max_target, const KineticParameters& p, const Settings& s,
                            const std::vector<double>& B_grid);

std::string optimum_json(const Optimum& o, double scale = 1.0);

}  // namespace neuroagg::optimizer
