#include "neuroagg/simd.hpp"

#include <arm_neon.h>

#include <cmath>
#include <limits>

namespace neuroagg::simd::detail {
namespace {

constexpr std::size_t kLanes = 2;

void elongation(double g, const double* prev, const double* cur, const double* lam, double* out,
                std::size_t n) {
  const float64x2_t vg = vdupq_n_f64(g);
  std::size_t j = 0;
  for (; j + kLanes <= n; j += kLanes) {
    const float64x2_t c = vld1q_f64(cur + j);
    const float64x2_t gain = vmulq_f64(vg, vsubq_f64(vld1q_f64(prev + j), c));
    const float64x2_t loss = vmulq_f64(vld1q_f64(lam + j), c);
    vst1q_f64(out + j, vsubq_f64(gain, loss));
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
    const float64x2_t c = vld1q_f64(cur + j);
    const float64x2_t gain = vmulq_f64(vld1q_f64(g + j), vsubq_f64(vld1q_f64(prev + j), c));
    const float64x2_t loss = vmulq_f64(vld1q_f64(lam + j), c);
    vst1q_f64(out + j, vsubq_f64(gain, loss));
  }
  for (; j < n; ++j) {
    const double gain = g[j] * (prev[j] - cur[j]);
    const double loss = lam[j] * cur[j];
    out[j] = gain - loss;
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t j = 0;
  for (; j + kLanes <= n; j += kLanes) {
    const float64x2_t t = vmulq_f64(va, vld1q_f64(x + j));
    vst1q_f64(y + j, vaddq_f64(vld1q_f64(y + j), t));
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
    float64x2_t acc = vld1q_f64(y + j);
    for (std::size_t s = 0; s < stages; ++s) {
      acc = vaddq_f64(acc, vmulq_f64(vdupq_n_f64(coef[s]), vld1q_f64(k[s] + j)));
    }
    vst1q_f64(out + j, acc);
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
  const float64x2_t vr = vdupq_n_f64(rtol);
  const float64x2_t va = vdupq_n_f64(atol);
  float64x2_t worst = vdupq_n_f64(0.0);
  uint64x2_t nan = vdupq_n_u64(0);
  std::size_t j = 0;
  for (; j + kLanes <= n; j += kLanes) {
    const float64x2_t a0 = vabsq_f64(vld1q_f64(y0 + j));
    const float64x2_t a1 = vabsq_f64(vld1q_f64(y1 + j));
    const float64x2_t scale = vaddq_f64(va, vmulq_f64(vr, vmaxnmq_f64(a0, a1)));
    const float64x2_t r = vdivq_f64(vabsq_f64(vld1q_f64(err + j)), scale);
    nan = vorrq_u64(nan, veorq_u64(vceqq_f64(r, r), vdupq_n_u64(~0ull)));
    worst = vmaxnmq_f64(worst, r);
  }
  bool any_nan = (vgetq_lane_u64(nan, 0) | vgetq_lane_u64(nan, 1)) != 0;
  double result = std::fmax(vgetq_lane_f64(worst, 0), vgetq_lane_f64(worst, 1));
  for (; j < n; ++j) {
    const double scale = atol + rtol * std::fmax(std::fabs(y0[j]), std::fabs(y1[j]));
    const double r = std::fabs(err[j]) / scale;
    if (std::isnan(r)) any_nan = true;
    else if (r > result) result = r;
  }
  return any_nan ? std::numeric_limits<double>::quiet_NaN() : result;
}

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t j = 0;
  for (; j + kLanes <= n; j += kLanes) {
    acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(a + j), vld1q_f64(b + j)));
  }
  double sum = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; j < n; ++j) sum += a[j] * b[j];
  return sum;
}

}  // namespace

const KernelTable neon_table{Isa::Neon, elongation, elongation_nodes, axpy,
                             combine,   error_norm_max, dot};

}  // namespace neuroagg::simd::detail
