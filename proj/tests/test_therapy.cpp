#include <doctest.h>

#include "neuroagg/analysis.hpp"
#include "neuroagg/therapy.hpp"

#include <cmath>

using namespace neuroagg;
using namespace neuroagg::therapy;

TEST_CASE("drug application") {
  const KineticParameters p;
  DrugSpec d;
  d.delta_k = 0.5;
  d.potency_L = 2e6;
  d.C_p = 1e-6;
  const auto e = apply_drug(p, d);
  CHECK(e.params.k_2 == 0.5 * p.k_2);
  CHECK(e.lambda_drug == doctest::Approx(2.0));
  d.lambda_drug_override = 7.0;
  CHECK(apply_drug(p, d).lambda_drug == 7.0);
  d.kinetic = false;
  CHECK(apply_drug(p, d).params.k_2 == p.k_2);
  d.clearance = false;
  CHECK(apply_drug(p, d).lambda_drug == 0.0);
  d.delta_k = -1;
  CHECK_THROWS(d.validate());
}

TEST_CASE("extra clearance") {
  const auto c = with_extra_clearance(clearance::Constant{10.0}, 5.0);
  CHECK(std::get<clearance::Constant>(c).lambda == 15.0);
  const auto iv = with_extra_clearance(clearance::Interval{1.0, 2.0, 3, 4}, 1.0);
  CHECK(std::get<clearance::Interval>(iv).lambda_a == 2.0);
  const auto ds = with_extra_clearance(clearance::DosingProfile{1.0, 1.0, 1.0, 3.0}, 2.0);
  CHECK(std::get<clearance::DosingProfile>(ds).lambda_a == 5.0);
  CHECK_NOTHROW(with_extra_clearance(clearance::LinearInSize{1.0}, 0.0));
  CHECK_THROWS_AS(with_extra_clearance(clearance::LinearInSize{1.0}, 1.0), ConfigError);
}

TEST_CASE("toxicity closed form") {
  // n full cycles of (1 - e^{-AB})/A plus the partial one
  CHECK(toxicity_per_unit_drug(1.0, 1.0, 28.0) == doctest::Approx(28 * (1 - std::exp(-1.0))).epsilon(1e-14));
  CHECK(toxicity_per_unit_drug(1.0, 7.0, 28.0) == doctest::Approx(4 * (1 - std::exp(-7.0))).epsilon(1e-14));
  CHECK(toxicity_per_unit_drug(1.0, 5.0, 12.0) ==
        doctest::Approx(2 * (1 - std::exp(-5.0)) + (1 - std::exp(-2.0))).epsilon(1e-14));
  CHECK(toxicity_per_unit_drug(0.0, 3.0, 28.0) == 28.0);
  // B -> 0 tends to continuous infusion over t_max
  CHECK(toxicity_per_unit_drug(1.0, 1e-6, 28.0) == doctest::Approx(28.0).epsilon(1e-5));
  const DosingRegime r{5.6, 1.0, 1.0, 10.0, 28.0};
  CHECK(regime_toxicity(r) == doctest::Approx(5.6 * 17.6993756472).epsilon(1e-10));
  CHECK(dosing_clearance(0.5, r) == doctest::Approx(10 + 5.6 * std::exp(-0.5)));
  CHECK_THROWS((DosingRegime{1.0, 1.0, 0.0, 0.0, 28.0}.validate()));
}

TEST_CASE("mean toxic mass") {
  const KineticParameters p = rescaled(KineticParameters{}, 1e6, NucleationForm::MonomerSquared);
  // no drug: the cycle average is the constant-clearance fixed point
  const auto none = mean_toxic_mass(p, DosingRegime{0.0, 1.0, 1.0, 10.0, 28.0});
  CHECK(none.M_bar == doctest::Approx(analysis::fixed_point_moments(p, 10.0).M_2).epsilon(1e-6));
  // more drug, less toxic mass; shorter period at equal toxicity, less mass
  const auto daily = mean_toxic_mass(p, DosingRegime{5.6, 1.0, 1.0, 10.0, 28.0});
  const auto weekly = mean_toxic_mass(p, DosingRegime{25.0, 1.0, 7.0, 10.0, 28.0});
  CHECK(daily.M_bar < none.M_bar);
  CHECK(daily.M_bar < weekly.M_bar);
  CHECK(daily.M_min <= daily.M_bar);
  CHECK(daily.M_bar <= daily.M_max);
  CHECK(daily.M_bar == doctest::Approx(3.81).epsilon(0.1));
  MeanToxicMassOptions opt;
  opt.max_cycles = 1;
  CHECK_THROWS_AS(mean_toxic_mass(p, DosingRegime{25.0, 1.0, 7.0, 10.0, 28.0},
                                  ModelVariant::defaults(ModelTag::InVivoConstMonomer), opt),
                  ConvergenceError);
}

TEST_CASE("interval clearance") {
  const KineticParameters p;
  const auto v = ModelVariant::defaults(ModelTag::InVivoConstMonomer);
  const clearance::Interval iv{10.0, 1e3, 5, 9};
  const std::size_t N = 40;
  std::vector<double> y(N), dy(N);
  y[0] = p.m_0;
  for (std::size_t i = 2; i < N - 3; ++i) y[i - 1] = 1e-10 * std::exp(-0.1 * i);
  interval_clearance_rhs(y, dy, p, v, iv);
  const auto dm = moments(std::span<const double>(dy).subspan(1));
  const auto mr = interval_moment_rhs(y, p, v, iv);
  CHECK(mr.P == doctest::Approx(dm.P).epsilon(1e-10));
  CHECK(mr.M == doctest::Approx(dm.M).epsilon(1e-10));

  // exact equilibria increase as the window moves to larger sizes
  double prev = 0;
  for (std::size_t n0 : {2, 20, 50, 100}) {
    const auto e = interval_equilibrium(p, clearance::Interval{10.0, 1e5, n0, n0 + 10}, 200000);
    CHECK(e.exact > prev);
    prev = e.exact;
  }
  const auto base = analysis::fixed_point_moments(p, 10.0).M_2;
  CHECK(prev < base);
}
