#include <doctest.h>

#include "neuroagg/kinetics.hpp"
#include "neuroagg/simd.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace neuroagg;

namespace {

std::vector<double> random_state(std::size_t N, double m, std::uint64_t seed, std::size_t zero_tail = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1e-8);
  std::vector<double> y(N);
  y[0] = m;
  for (std::size_t i = 1; i < N; ++i) y[i] = i + zero_tail >= N ? 0.0 : u(rng) / static_cast<double>(i);
  return y;
}

}  // namespace

TEST_CASE("default parameters") {
  const KineticParameters p;
  CHECK(p.k_n == 1.6e-11);
  CHECK(p.k_2 == 2.1e14);
  CHECK(p.K_m == 2.3e-17);
  CHECK(p.K_M == 2.3e-17);
  CHECK(p.k_plus == 1e10);
  CHECK(p.m_0 == 3e-6);
  CHECK_NOTHROW(p.validate());
  KineticParameters bad = p;
  bad.k_plus = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p;
  bad.K_M = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p;
  bad.m_0 = 0;
  CHECK_NOTHROW(bad.validate());
}

TEST_CASE("sigma saturation") {
  CHECK(sigma(0.0, 2.0) == 1.0);
  CHECK(sigma(1.0, 1.0) == 0.5);
  CHECK_THROWS_AS(sigma(1.0, 0.0), DomainError);
}

TEST_CASE("moments are ascending-size sums") {
  const std::vector<double> p = {1.0, 2.0, 0.5};  // p_2, p_3, p_4
  const auto m = moments(p);
  CHECK(m.P == 3.5);
  CHECK(m.M == 2.0 + 6.0 + 2.0);
}

TEST_CASE("size distribution flatten round trip") {
  SizeDistribution s(3e-6, 5);
  s.at(2) = 1e-9;
  s.at(5) = 2e-9;
  const auto y = s.flatten();
  REQUIRE(y.size() == 5);
  CHECK(y[0] == 3e-6);
  CHECK(y[1] == 1e-9);
  CHECK(y[4] == 2e-9);
  const auto back = SizeDistribution::from_flat(y, 5);
  CHECK(back.at(5) == 2e-9);
  CHECK(back.N_max() == 5);
}

TEST_CASE("in vitro rhs conserves total monomer") {
  const KineticParameters p;
  for (auto closure : {Closure::Reflecting}) {
    auto v = ModelVariant::defaults(ModelTag::InVitroClosed);
    v.closure = closure;
    const std::size_t N = 50;
    const auto y = random_state(N, 2e-6, 7);
    std::vector<double> dy(N);
    rhs_invitro(y, dy, p, v);
    const auto dm = moments(std::span<const double>(dy).subspan(1));
    double scale = std::fabs(dy[0]);
    for (std::size_t i = 1; i < N; ++i) scale += static_cast<double>(i + 1) * std::fabs(dy[i]);
    CHECK(std::fabs(dy[0] + dm.M) <= 1e-12 * scale);
  }
}

TEST_CASE("absorbing closure leaks mass past N_max") {
  const KineticParameters p;
  auto v = ModelVariant::defaults(ModelTag::InVitroClosed);
  v.closure = Closure::Absorbing;
  const std::size_t N = 20;
  auto y = random_state(N, 2e-6, 3);
  y[N - 1] = 1e-8;
  std::vector<double> dy(N);
  rhs_invitro(y, dy, p, v);
  const auto dm = moments(std::span<const double>(dy).subspan(1));
  CHECK(dy[0] + dm.M < 0);
}

TEST_CASE("in vitro moment rhs matches the distribution when the tail is empty") {
  const KineticParameters p;
  const auto v = ModelVariant::defaults(ModelTag::InVitroClosed);
  const std::size_t N = 60;
  const auto y = random_state(N, 2.5e-6, 11, 5);
  std::vector<double> dy(N);
  rhs_invitro(y, dy, p, v);
  const auto mo = moments(std::span<const double>(y).subspan(1));
  const auto dmo = moments(std::span<const double>(dy).subspan(1));
  const double ym[3] = {y[0], mo.P, mo.M};
  double dm[3];
  moment_rhs_invitro(ym, dm, p, v);
  CHECK(dm[0] == doctest::Approx(dy[0]).epsilon(1e-10));
  CHECK(dm[1] == doctest::Approx(dmo.P).epsilon(1e-10));
  CHECK(dm[2] == doctest::Approx(dmo.M).epsilon(1e-10));
}

TEST_CASE("in vivo moment rhs matches the distribution under uniform clearance") {
  const KineticParameters p;
  auto v = ModelVariant::defaults(ModelTag::InVivoConstMonomer);
  const std::size_t N = 60;
  const auto y = random_state(N, p.m_0, 5, 5);
  std::vector<double> dy(N), lam(N - 1, 1234.0);
  rhs_invivo(y, dy, p, v, lam);
  CHECK(dy[0] == 0.0);  // monomer is held fixed
  const auto mo = moments(std::span<const double>(y).subspan(1));
  const auto dmo = moments(std::span<const double>(dy).subspan(1));
  const double ym[2] = {mo.P, mo.M};
  double dm[2];
  moment_rhs_invivo(ym, dm, p, v, 1234.0);
  CHECK(dm[0] == doctest::Approx(dmo.P).epsilon(1e-10));
  CHECK(dm[1] == doctest::Approx(dmo.M).epsilon(1e-10));
}

TEST_CASE("k_n_zeroed removes nucleation") {
  const KineticParameters p;
  auto v = ModelVariant::defaults(ModelTag::InVivoConstMonomer);
  const double y0[2] = {0.0, 0.0};
  double d[2];
  moment_rhs_invivo(y0, d, p, v, 1000.0);
  CHECK(d[0] > 0);
  v.k_n_zeroed = true;
  moment_rhs_invivo(y0, d, p, v, 1000.0);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 0.0);
}

TEST_CASE("rescaling maps rates so the dynamics are frame invariant") {
  const KineticParameters p;
  const double c = 1e6;
  const auto r = rescaled(p, c, NucleationForm::MonomerSquared);
  CHECK(r.m_0 == doctest::Approx(3.0));
  CHECK(r.k_2 == doctest::Approx(210.0));
  CHECK(r.k_plus == doctest::Approx(1e4));
  CHECK(r.K_m == doctest::Approx(2.3e-5));  // M^2
  CHECK(r.k_n == doctest::Approx(1.6e-17));
  CHECK(rescaled(p, c, NucleationForm::MonomerSquared, true).k_n == p.k_n);
  CHECK(rescaled(p, c, NucleationForm::Raw).k_n == doctest::Approx(1.6e-5));

  // d/dt(c y) = c * (dy/dt)
  const auto v = ModelVariant::defaults(ModelTag::InVivoConstMonomer);
  const double y[2] = {1e-10, 5e-10}, yc[2] = {1e-10 * c, 5e-10 * c};
  double d[2], dc[2];
  moment_rhs_invivo(y, d, p, v, 500.0);
  moment_rhs_invivo(yc, dc, r, v, 500.0);
  CHECK(dc[0] == doctest::Approx(c * d[0]).epsilon(1e-12));
  CHECK(dc[1] == doctest::Approx(c * d[1]).epsilon(1e-12));

  clearance::Dynamic dyn{{1.0}, {2.0}, {1e17}};
  CHECK(rescaled(dyn, c).beta[0] == doctest::Approx(1e11));
}

TEST_CASE("clearance families") {
  const std::size_t N = 6;
  std::vector<double> lam(N - 1);
  clearance_rates(clearance::Constant{5.0}, 0.0, lam);
  CHECK(lam[3] == 5.0);
  clearance_rates(clearance::LinearInSize{2.0}, 0.0, lam);
  CHECK(lam[0] == 4.0);  // size 2
  CHECK(lam[4] == 12.0);
  clearance_rates(clearance::InverseInSize{6.0}, 0.0, lam);
  CHECK(lam[0] == 3.0);
  CHECK(lam[1] == 2.0);
  clearance_rates(clearance::Interval{1.0, 10.0, 3, 4}, 0.0, lam);
  CHECK(lam == std::vector<double>{1.0, 11.0, 11.0, 1.0, 1.0});
  CHECK_THROWS(clearance_rates(clearance::Dynamic{{1.0}, {1.0}, {1.0}}, 0.0, lam));
  CHECK_THROWS(validate(clearance::Interval{1.0, 10.0, 4, 3}, N));
  CHECK_THROWS(validate(clearance::Interval{1.0, 10.0, 2, 7}, N));
  CHECK_THROWS(validate(clearance::Constant{-1.0}, N));
}

TEST_CASE("dosing profile") {
  const clearance::DosingProfile d{10.0, 1.0, 2.0, 3.0};
  CHECK(dosing_rate(d, 0.0) == 13.0);
  CHECK(dosing_rate(d, 24.0) == doctest::Approx(3.0 + 10.0 * std::exp(-1.0)));
  CHECK(dosing_rate(d, 48.0) == 13.0);  // next dose
  CHECK(dosing_rate(d, 47.999999) == doctest::Approx(3.0 + 10.0 * std::exp(-2.0)).epsilon(1e-6));
  const auto inst = dosing_instants(d, 0.0, 150.0);
  CHECK(inst == std::vector<double>{48.0, 96.0, 144.0});
  CHECK(dosing_instants(d, 48.0, 96.0).empty());
}

TEST_CASE("local model layout and masks") {
  const KineticParameters p;
  const LocalModel in_vivo(p, ModelVariant::defaults(ModelTag::InVivoConstMonomer), clearance::Constant{1.0}, 10);
  CHECK(in_vivo.dim() == 10);
  const auto y0 = in_vivo.initial_state(1e-9);
  CHECK(y0[0] == p.m_0);
  CHECK(y0[1] == 1e-9);
  const auto mask = in_vivo.nonneg_mask();
  CHECK(mask[1] != 0);
  const LocalModel in_vitro(p, ModelVariant::defaults(ModelTag::InVitroClosed), clearance::Constant{0.0}, 10);
  CHECK(in_vitro.nonneg_mask()[0] == 0);

  const LocalModel dyn(p, ModelVariant::defaults(ModelTag::InVivoDynamicClearance),
                       clearance::Dynamic{{100.0}, {50.0}, {1.0}}, 10);
  CHECK(dyn.dim() == 19);
  const auto yd = dyn.initial_state(0.0);
  CHECK(yd[10] == 100.0);
  std::vector<double> dy(19);
  dyn.rhs(0.0, yd, dy);
  CHECK(dy[10] == 0.0);  // no aggregate mass yet

  const LocalModel dosed(p, ModelVariant::defaults(ModelTag::InVivoConstMonomer),
                         clearance::DosingProfile{5.0, 1.0, 1.0, 1.0}, 10);
  CHECK(dosed.discontinuities(0.0, 50.0) == std::vector<double>{24.0, 48.0});

  CHECK_THROWS(LocalModel(p, ModelVariant::defaults(ModelTag::InVivoConstMonomer), clearance::Constant{1.0}, 1));
}

TEST_CASE("rhs is bit-identical across ISAs") {
  const KineticParameters p;
  const LocalModel m(p, ModelVariant::defaults(ModelTag::InVivoConstMonomer), clearance::LinearInSize{3.0}, 300);
  const auto y = random_state(300, p.m_0, 21);
  std::vector<double> ref(300), other(300);
  const auto before = simd::active_isa();
  simd::force_isa(simd::Isa::Scalar);
  m.rhs(0.0, y, ref);
  for (auto isa : {simd::Isa::Avx2, simd::Isa::Neon}) {
    if (!simd::isa_available(isa)) continue;
    simd::force_isa(isa);
    m.rhs(0.0, y, other);
    CHECK(other == ref);
  }
  simd::force_isa(before);
}
