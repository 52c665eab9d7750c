#include <doctest.h>

#include "neuroagg/simd.hpp"

#include <cmath>
#include <stdexcept>
#include <cstring>
#include <random>
#include <vector>

using namespace neuroagg::simd;

namespace {

std::vector<double> randvec(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<Isa> vector_isas() {
  std::vector<Isa> out;
  for (Isa i : {Isa::Avx2, Isa::Neon})
    if (isa_available(i)) out.push_back(i);
  return out;
}

}  // namespace

TEST_CASE("scalar table is always available") {
  CHECK(isa_available(Isa::Scalar));
  CHECK(kernels(Isa::Scalar).isa == Isa::Scalar);
  CHECK(isa_name(Isa::Scalar) == "scalar");
}

TEST_CASE("unavailable ISA is rejected") {
  for (Isa i : {Isa::Avx2, Isa::Neon})
    if (!isa_available(i)) CHECK_THROWS_AS(kernels(i), std::invalid_argument);
}

TEST_CASE("force_isa switches the active table") {
  const Isa before = active_isa();
  force_isa(Isa::Scalar);
  CHECK(active_isa() == Isa::Scalar);
  CHECK(kernels().isa == Isa::Scalar);
  force_isa(before);
  CHECK(active_isa() == before);
}

TEST_CASE("scalar reference values") {
  const auto& K = kernels(Isa::Scalar);
  const double prev[3] = {1, 2, 3}, cur[3] = {0.5, 1, 4}, lam[3] = {2, 0, 1};
  double out[3];
  K.elongation(2.0, prev, cur, lam, out, 3);
  CHECK(out[0] == 0.0);  // 2*0.5 - 1
  CHECK(out[1] == 2.0);
  CHECK(out[2] == -6.0);
  double y[3] = {1, 1, 1};
  K.axpy(-2.0, prev, y, 3);
  CHECK(y[2] == -5.0);
  CHECK(K.dot(prev, cur, 3) == 14.5);
  const double err[2] = {1e-9, -4e-9}, y0[2] = {1, 2}, y1[2] = {1, 3};
  CHECK(K.error_norm_max(err, y0, y1, 1e-9, 1e-30, 2) == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("vector kernels are bit-identical to scalar for elementwise ops") {
  const auto& S = kernels(Isa::Scalar);
  std::mt19937_64 rng(42);
  for (Isa isa : vector_isas()) {
    const auto& V = kernels(isa);
    CAPTURE(isa_name(isa));
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 33u, 200u, 1001u}) {
      CAPTURE(n);
      const auto prev = randvec(rng, n), cur = randvec(rng, n), lam = randvec(rng, n, 0, 1e4);
      const auto g = randvec(rng, n, 0, 3e4);
      std::vector<double> a(n), b(n);

      S.elongation(3e4, prev.data(), cur.data(), lam.data(), a.data(), n);
      V.elongation(3e4, prev.data(), cur.data(), lam.data(), b.data(), n);
      CHECK(bit_equal(a, b));

      S.elongation_nodes(g.data(), prev.data(), cur.data(), lam.data(), a.data(), n);
      V.elongation_nodes(g.data(), prev.data(), cur.data(), lam.data(), b.data(), n);
      CHECK(bit_equal(a, b));

      a = cur;
      b = cur;
      S.axpy(-0.37, prev.data(), a.data(), n);
      V.axpy(-0.37, prev.data(), b.data(), n);
      CHECK(bit_equal(a, b));

      std::vector<std::vector<double>> ks;
      std::vector<const double*> kp;
      for (int s = 0; s < 7; ++s) ks.push_back(randvec(rng, n));
      for (auto& k : ks) kp.push_back(k.data());
      const double coef[7] = {0.1, -0.2, 0.3, 1e-3, -5.0, 0.0, 2.5};
      for (std::size_t stages = 1; stages <= 7; ++stages) {
        S.combine(prev.data(), kp.data(), coef, stages, a.data(), n);
        V.combine(prev.data(), kp.data(), coef, stages, b.data(), n);
        CHECK(bit_equal(a, b));
      }

      const auto err = randvec(rng, n, -1e-8, 1e-8);
      CHECK(S.error_norm_max(err.data(), prev.data(), cur.data(), 1e-8, 1e-12, n) ==
            V.error_norm_max(err.data(), prev.data(), cur.data(), 1e-8, 1e-12, n));

      const double ds = S.dot(prev.data(), cur.data(), n), dv = V.dot(prev.data(), cur.data(), n);
      double mag = 0;
      for (std::size_t j = 0; j < n; ++j) mag += std::fabs(prev[j] * cur[j]);
      CHECK(std::fabs(ds - dv) <= 1e-14 * mag + 1e-300);
    }
  }
}

TEST_CASE("error norm propagates NaN") {
  std::vector<double> err = {0.0, NAN, 0.0, 0.0, 0.0}, y(5, 1.0);
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
    if (!isa_available(isa)) continue;
    const double e = kernels(isa).error_norm_max(err.data(), y.data(), y.data(), 1e-8, 1e-12, 5);
    CHECK_FALSE(std::isfinite(e));
  }
}
