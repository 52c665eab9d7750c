#include "neuroagg/simd.hpp"

#include <cmath>
#include <limits>

namespace neuroagg::simd::detail {
namespace {

void elongation(double g, const double* prev, const double* cur, const double* lam, double* out,
                std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const double gain = g * (prev[j] - cur[j]);
    const double loss = lam[j] * cur[j];
    out[j] = gain - loss;
  }
}

void elongation_nodes(const double* g, const double* prev, const double* cur, const double* lam,
                      double* out, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const double gain = g[j] * (prev[j] - cur[j]);
    const double loss = lam[j] * cur[j];
    out[j] = gain - loss;
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const double t = alpha * x[j];
    y[j] = y[j] + t;
  }
}

void combine(const double* y, const double* const* k, const double* coef, std::size_t stages,
             double* out, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
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
  double worst = 0.0;
  bool nan = false;
  for (std::size_t j = 0; j < n; ++j) {
    const double scale = atol + rtol * std::fmax(std::fabs(y0[j]), std::fabs(y1[j]));
    const double r = std::fabs(err[j]) / scale;
    if (std::isnan(r)) nan = true;
    else if (r > worst) worst = r;
  }
  // NaN must reach the integrator so the step is rejected
  return nan ? std::numeric_limits<double>::quiet_NaN() : worst;
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) acc += a[j] * b[j];
  return acc;
}

}  // namespace

const KernelTable scalar_table{Isa::Scalar, elongation, elongation_nodes, axpy,
                               combine,     error_norm_max, dot};

}  // namespace neuroagg::simd::detail
