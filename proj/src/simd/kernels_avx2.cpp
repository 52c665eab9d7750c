// Compiled with -mavx2 only; FMA is deliberately not enabled so the lane
// arithmetic rounds exactly like the scalar reference.

#include "neuroagg/simd.hpp"

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace neuroagg::simd::detail {
namespace {

constexpr std::size_t kLanes = 4;

void elongation(double g, const double* prev, const double* cur, const double* lam, double* out,
                std::size_t n) {
  const __m256d vg = _mm256_set1_pd(g);
  std::size_t j = 0;
  for (; j + kLanes <= n; j += kLanes) {
    const __m256d p = _mm256_loadu_pd(prev + j);
    const __m256d c = _mm256_loadu_pd(cur + j);
    const __m256d l = _mm256_loadu_pd(lam + j);
    const __m256d gain = _mm256_mul_pd(vg, _mm256_sub_pd(p, c));
    const __m256d loss = _mm256_mul_pd(l, c);
    _mm256_storeu_pd(out + j, _mm256_sub_pd(gain, loss));
  }
  for (; j < n; ++j) {
    const double gain = g * (prev[j] - cur[j]);
    const double loss = lam[j] * cur[j];
    out[j] = gain - loss;
  }
}

void elongation_nodes(const double* g, const double* prev, const double* cur, const double* lam,
                      double* out, std::size_t n) {
  std::size_t j = 0;
  for (; j + kLanes <= n; j += kLanes) {
    const __m256d vg = _mm256_loadu_pd(g + j);
    const __m256d p = _mm256_loadu_pd(prev + j);
    const __m256d c = _mm256_loadu_pd(cur + j);
    const __m256d l = _mm256_loadu_pd(lam + j);
    const __m256d gain = _mm256_mul_pd(vg, _mm256_sub_pd(p, c));
    const __m256d loss = _mm256_mul_pd(l, c);
    _mm256_storeu_pd(out + j, _mm256_sub_pd(gain, loss));
  }
  for (; j < n; ++j) {
    const double gain = g[j] * (prev[j] - cur[j]);
    const double loss = lam[j] * cur[j];
    out[j] = gain - loss;
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t j = 0;
  for (; j + kLanes <= n; j += kLanes) {
    const __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(x + j));
    _mm256_storeu_pd(y + j, _mm256_add_pd(_mm256_loadu_pd(y + j), t));
  }
  for (; j < n; ++j) {
    const double t = alpha * x[j];
    y[j] = y[j] + t;
  }
}

void combine(const double* y, const double* const* k, const double* coef, std::size_t stages,
             double* out, std::size_t n) {
  std::size_t j = 0;
  for (; j + kLanes <= n; j += kLanes) {
    __m256d acc = _mm256_loadu_pd(y + j);
    for (std::size_t s = 0; s < stages; ++s) {
      const __m256d t = _mm256_mul_pd(_mm256_set1_pd(coef[s]), _mm256_loadu_pd(k[s] + j));
      acc = _mm256_add_pd(acc, t);
    }
    _mm256_storeu_pd(out + j, acc);
  }
  for (; j < n; ++j) {
    double acc = y[j];
    for (std::size_t s = 0; s < stages; ++s) {
      const double t = coef[s] * k[s][j];
      acc = acc + t;
    }
    out[j] = acc;
  }
}

double error_norm_max(const double* err, const double* y0, const double* y1, double rtol,
                      double atol, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  const __m256d vr = _mm256_set1_pd(rtol);
  const __m256d va = _mm256_set1_pd(atol);
  __m256d worst = _mm256_setzero_pd();
  __m256d nan = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + kLanes <= n; j += kLanes) {
    const __m256d a0 = _mm256_andnot_pd(sign, _mm256_loadu_pd(y0 + j));
    const __m256d a1 = _mm256_andnot_pd(sign, _mm256_loadu_pd(y1 + j));
    const __m256d scale = _mm256_add_pd(va, _mm256_mul_pd(vr, _mm256_max_pd(a0, a1)));
    const __m256d e = _mm256_andnot_pd(sign, _mm256_loadu_pd(err + j));
    const __m256d r = _mm256_div_pd(e, scale);
    nan = _mm256_or_pd(nan, _mm256_cmp_pd(r, r, _CMP_UNORD_Q));
    worst = _mm256_max_pd(worst, r);
  }
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, worst);
  bool any_nan = _mm256_movemask_pd(nan) != 0;
  double result = 0.0;
  for (double v : lanes) {
    if (v > result) result = v;
  }
  for (; j < n; ++j) {
    const double scale = atol + rtol * std::fmax(std::fabs(y0[j]), std::fabs(y1[j]));
    const double r = std::fabs(err[j]) / scale;
    if (std::isnan(r)) any_nan = true;
    else if (r > result) result = r;
  }
  return any_nan ? std::numeric_limits<double>::quiet_NaN() : result;
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + kLanes <= n; j += kLanes) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j)));
  }
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, acc);
  double sum = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; j < n; ++j) sum += a[j] * b[j];
  return sum;
}

}  // namespace

const KernelTable avx2_table{Isa::Avx2, elongation, elongation_nodes, axpy,
                             combine,   error_norm_max, dot};

}  // namespace neuroagg::simd::detail
