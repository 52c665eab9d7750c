#include <doctest.h>

#include "neuroagg/solver.hpp"

#include <cmath>
#include <vector>

using namespace neuroagg::solver;

namespace {

const Rhs decay = [](double, std::span<const double> y, std::span<double> dy) { dy[0] = -y[0]; };

const Rhs oscillator = [](double, std::span<const double> y, std::span<double> dy) {
  dy[0] = y[1];
  dy[1] = -y[0];
};

// fast relaxation (rate 1e6) onto a slowly decaying manifold
const Rhs stiff = [](double, std::span<const double> y, std::span<double> dy) {
  dy[0] = -1e6 * (y[0] - std::cos(y[1]));
  dy[1] = -y[1];
};

IntegrationConfig tight(Method m = Method::DormandPrince) {
  IntegrationConfig c;
  c.method = m;
  c.rel_tol = 1e-10;
  c.abs_tol = 1e-14;
  return c;
}

}  // namespace

TEST_CASE("exponential decay to tolerance, both methods") {
  for (Method m : {Method::DormandPrince, Method::Rosenbrock}) {
    const auto tr = integrate(decay, {1.0}, 0.0, 5.0, tight(m));
    CHECK(tr.back()[0] == doctest::Approx(std::exp(-5.0)).epsilon(1e-7));
    CHECK(tr.times.front() == 0.0);
    CHECK(tr.times.back() == 5.0);
    CHECK(tr.accepted > 0);
  }
}

TEST_CASE("harmonic oscillator keeps phase") {
  const auto tr = integrate(oscillator, {1.0, 0.0}, 0.0, 20.0, tight());
  CHECK(tr.back()[0] == doctest::Approx(std::cos(20.0)).epsilon(1e-7));
  CHECK(tr.back()[1] == doctest::Approx(-std::sin(20.0)).epsilon(1e-7));
}

TEST_CASE("dense output samples and Hermite interpolation") {
  auto cfg = tight();
  cfg.output_times = {0.5, 1.0, 2.5};
  const auto tr = integrate(decay, {1.0}, 0.0, 3.0, cfg);
  REQUIRE(tr.times.size() == 5);  // t0, three samples, t1
  CHECK(tr.times[1] == 0.5);
  CHECK(tr.states[3][0] == doctest::Approx(std::exp(-2.5)).epsilon(1e-6));
  CHECK(tr.derivs[3][0] == doctest::Approx(-std::exp(-2.5)).epsilon(1e-5));
  const auto full = integrate(decay, {1.0}, 0.0, 3.0, tight());
  CHECK(full.at(1.234)[0] == doctest::Approx(std::exp(-1.234)).epsilon(1e-6));
  CHECK(full.at(-1.0)[0] == 1.0);
}

TEST_CASE("event location") {
  const std::vector<Event> ev = {
      {"half", [](double, std::span<const double> y) { return y[0] - 0.5; }, false, -1},
      {"rise", [](double, std::span<const double> y) { return y[0] - 0.5; }, false, +1}};
  const auto tr = integrate(decay, {1.0}, 0.0, 2.0, tight(), ev);
  const auto e = tr.event("half");
  REQUIRE(e);
  CHECK(e->t == doctest::Approx(std::log(2.0)).epsilon(1e-5));
  CHECK_FALSE(tr.event("rise"));
  CHECK_FALSE(tr.terminated);
}

TEST_CASE("terminal event stops the run") {
  const std::vector<Event> ev = {
      {"stop", [](double, std::span<const double> y) { return y[0] - 0.25; }, true, -1}};
  const auto tr = integrate(decay, {1.0}, 0.0, 10.0, tight(), ev);
  CHECK(tr.terminated);
  CHECK(tr.times.back() == doctest::Approx(std::log(4.0)).epsilon(1e-5));
  CHECK(tr.back()[0] == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("restarts at discontinuities see the new forcing") {
  // dy/dt = 1 before t = 1, -1 after
  const Rhs step = [](double t, std::span<const double>, std::span<double> dy) { dy[0] = t < 1.0 ? 1.0 : -1.0; };
  auto cfg = tight();
  cfg.discontinuity_times = {1.0};
  const auto tr = integrate(step, {0.0}, 0.0, 3.0, cfg);
  CHECK(tr.back()[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(tr.at(1.0)[0] == doctest::Approx(1.0).epsilon(1e-12));
  cfg.discontinuity_times = {2.0, 1.0};
  CHECK_THROWS_AS(integrate(step, {0.0}, 0.0, 3.0, cfg), std::invalid_argument);
}

TEST_CASE("Rosenbrock handles stiffness the explicit pair cannot afford") {
  auto cfg = tight(Method::Rosenbrock);
  cfg.rel_tol = 1e-7;
  cfg.abs_tol = 1e-12;
  const auto imp = integrate(stiff, {0.0, 1.0}, 0.0, 2.0, cfg);
  CHECK(imp.back()[1] == doctest::Approx(std::exp(-2.0)).epsilon(1e-5));
  CHECK(imp.back()[0] == doctest::Approx(std::cos(std::exp(-2.0))).epsilon(1e-5));
  CHECK(imp.accepted < 5000);
  cfg.method = Method::DormandPrince;
  const auto exp = integrate(stiff, {0.0, 1.0}, 0.0, 2.0, cfg);
  CHECK(exp.accepted > 100 * imp.accepted);
  CHECK(exp.back()[0] == doctest::Approx(imp.back()[0]).epsilon(1e-5));
}

TEST_CASE("Rosenbrock rejects systems beyond the dense limit") {
  const Rhs zero = [](double, std::span<const double>, std::span<double> dy) {
    for (auto& d : dy) d = 0;
  };
  IntegrationConfig cfg;
  cfg.method = Method::Rosenbrock;
  CHECK_THROWS_AS(integrate(zero, std::vector<double>(kMaxDenseDim + 1, 1.0), 0.0, 1.0, cfg),
                  std::invalid_argument);
}

TEST_CASE("solver errors") {
  IntegrationConfig cfg;
  CHECK_THROWS_AS(integrate(decay, {1.0}, 1.0, 1.0, cfg), std::invalid_argument);
  CHECK_THROWS_AS(integrate(decay, {NAN}, 0.0, 1.0, cfg), SolverError);

  cfg.max_steps = 3;
  try {
    integrate(oscillator, {1.0, 0.0}, 0.0, 100.0, cfg);
    FAIL("expected max steps");
  } catch (const SolverError& e) {
    CHECK(e.kind() == SolverError::Kind::MaxSteps);
  }

  // forced below zero
  const Rhs sink = [](double, std::span<const double>, std::span<double> dy) { dy[0] = -1.0; };
  IntegrationConfig neg;
  neg.nonneg_mask = {1};
  neg.negativity_tol = 1e-9;
  try {
    integrate(sink, {1.0}, 0.0, 2.0, neg);
    FAIL("expected negativity");
  } catch (const SolverError& e) {
    CHECK(e.kind() == SolverError::Kind::Negativity);
    CHECK(e.time() == doctest::Approx(1.0).epsilon(1e-6));
  }
  neg.nonneg_mask = {1, 1};
  CHECK_THROWS_AS(integrate(sink, {1.0}, 0.0, 2.0, neg), std::invalid_argument);
}

TEST_CASE("crossings and timescales on stored trajectories") {
  // M(t) = t e^{1-t}: peak 1 at t = 1
  const Rhs bump = [](double t, std::span<const double>, std::span<double> dy) {
    dy[0] = (1 - t) * std::exp(1 - t);
  };
  auto cfg = tight();
  for (int k = 1; k <= 400; ++k) cfg.output_times.push_back(0.05 * k);
  const auto tr = integrate(bump, {0.0}, 0.0, 20.0, cfg);
  auto mass = [](std::span<const double> y) { return y[0]; };
  const auto ht = find_halftime(tr, mass, 1.0);  // M = 0.5
  REQUIRE(ht);
  CHECK(*ht * std::exp(1 - *ht) == doctest::Approx(0.5).epsilon(1e-6));
  const auto ts = find_timescales(tr, mass, 0.0);
  CHECK(ts.tau_1 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ts.M_max == doctest::Approx(1.0).epsilon(1e-8));
  REQUIRE(ts.tau_2);
  CHECK(*ts.tau_2 * std::exp(1 - *ts.tau_2) == doctest::Approx(0.01).epsilon(1e-4));
  CHECK_FALSE(first_crossing(tr, mass, 2.0, 1e-9));
}

TEST_CASE("integration is deterministic") {
  const auto a = integrate(oscillator, {1.0, 0.0}, 0.0, 7.0, tight());
  const auto b = integrate(oscillator, {1.0, 0.0}, 0.0, 7.0, tight());
  CHECK(a.times == b.times);
  CHECK(a.states == b.states);
}
