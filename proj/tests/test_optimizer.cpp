#include <doctest.h>

#include "neuroagg/optimizer.hpp"

#include <sstream>

using namespace neuroagg;
using namespace neuroagg::optimizer;

namespace {

const KineticParameters kP = rescaled(KineticParameters{}, 1e6, NucleationForm::MonomerSquared);

}  // namespace

TEST_CASE("lambda for a toxicity budget inverts the closed form") {
  for (double B : {0.2, 1.0, 7.0, 28.0}) {
    const double l = lambda_for_toxicity(100.0, 1.0, B, 28.0);
    CHECK(therapy::regime_toxicity({l, 1.0, B, 10.0, 28.0}) == doctest::Approx(100.0).epsilon(1e-12));
  }
  CHECK(lambda_for_toxicity(100.0, 1.0, 1.0, 28.0) == doctest::Approx(100.0 / 17.6993756472).epsilon(1e-10));
}

TEST_CASE("sweep is deterministic and thread-count independent") {
  Settings s;
  s.threads = 1;
  const std::vector<double> Bs = {0.5, 2.0}, ls = {1.0, 10.0};
  const auto a = sweep(Bs, ls, kP, s);
  s.threads = 2;
  const auto b = sweep(Bs, ls, kP, s);
  REQUIRE(a.points.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    REQUIRE(a.points[k].M_bar);
    CHECK(*a.points[k].M_bar == *b.points[k].M_bar);
  }
  CHECK(a.at(1, 0).B == 2.0);
  CHECK(a.at(1, 0).lambda_drug == 1.0);
  // more drug at the same period clears more
  CHECK(*a.at(0, 1).M_bar < *a.at(0, 0).M_bar);

  std::ostringstream csv;
  write_contour_csv(csv, a);
  CHECK(csv.str().rfind("B,lambda_drug,M_bar,C_max\n", 0) == 0);
}

TEST_CASE("constrained optimum") {
  Settings s;
  s.threads = 1;
  const auto o = constrained_optimum(100.0, kP, s, {0.2, 1.0, 7.0});
  CHECK(o.C_max == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(o.candidates.size() == 3);
  for (const auto& c : o.candidates)
    if (c.feasible && c.M_bar) CHECK(o.M_bar_star <= *c.M_bar);
  CHECK(o.B_star == 0.2);  // frequent small doses win
  const auto js = optimum_json(o);
  CHECK(js.find("\"B_star_days\"") != std::string::npos);

  // a budget no admissible period can spend within lambda_max
  try {
    constrained_optimum(1e6, kP, s, {0.2, 1.0});
    FAIL("expected infeasible");
  } catch (const InfeasibleError& e) {
    CHECK(e.feasible_min() <= e.feasible_max());
  }
}
