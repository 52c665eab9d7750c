#pragma once

// Data-parallel inner loops used by the right-hand sides and the integrator.
//
// Every kernel has a scalar reference implementation; AVX2 (x86-64) and NEON
// (aarch64) variants are selected at runtime. Elementwise kernels perform the
// same IEEE operations in the same order as the scalar reference (no FMA
// contraction), so their results are bit-identical. Reductions (dot) may
// associate differently across lanes.

#include <cstddef>
#include <span>
#include <string_view>

namespace neuroagg::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  // out[j] = g * (prev[j] - cur[j]) - lam[j] * cur[j]
  void (*elongation)(double g, const double* prev, const double* cur, const double* lam,
                     double* out, std::size_t n);
  // out[j] = g[j] * (prev[j] - cur[j]) - lam[j] * cur[j]
  void (*elongation_nodes)(const double* g, const double* prev, const double* cur,
                           const double* lam, double* out, std::size_t n);
  // y[j] += alpha * x[j]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[j] = y[j] + sum_s coef[s] * k[s][j], accumulated in s order
  void (*combine)(const double* y, const double* const* k, const double* coef,
                  std::size_t stages, double* out, std::size_t n);
  // max_j |err[j]| / (atol + rtol * max(|y0[j]|, |y1[j]|))
  double (*error_norm_max)(const double* err, const double* y0, const double* y1, double rtol,
                           double atol, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
};

bool isa_available(Isa isa);

/// Table for a specific ISA. Throws std::invalid_argument if the ISA was not
/// compiled in or the CPU lacks it.
const KernelTable& kernels(Isa isa);

/// Active table: best available ISA, overridable through NEUROAGG_ISA
/// ("scalar", "avx2", "neon") or force_isa().
const KernelTable& kernels();

Isa active_isa();
void force_isa(Isa isa);

// Span conveniences over the active table.

inline void elongation(double g, std::span<const double> prev, std::span<const double> cur,
                       std::span<const double> lam, std::span<double> out) {
  kernels().elongation(g, prev.data(), cur.data(), lam.data(), out.data(), out.size());
}

inline void elongation_nodes(std::span<const double> g, std::span<const double> prev,
                             std::span<const double> cur, std::span<const double> lam,
                             std::span<double> out) {
  kernels().elongation_nodes(g.data(), prev.data(), cur.data(), lam.data(), out.data(),
                             out.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels().axpy(alpha, x.data(), y.data(), y.size());
}

inline double error_norm_max(std::span<const double> err, std::span<const double> y0,
                             std::span<const double> y1, double rtol, double atol) {
  return kernels().error_norm_max(err.data(), y0.data(), y1.data(), rtol, atol, err.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}

namespace detail {
extern const KernelTable scalar_table;
#if defined(NEUROAGG_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
#if defined(NEUROAGG_HAVE_NEON)
extern const KernelTable neon_table;
#endif
}  // namespace detail

}  // namespace neuroagg::simd
