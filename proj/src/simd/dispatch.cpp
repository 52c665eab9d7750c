#include "neuroagg/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace neuroagg::simd {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(NEUROAGG_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(NEUROAGG_HAVE_NEON)
      return true;  // baseline on aarch64
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& kernels(Isa isa) {
  if (!isa_available(isa))
    throw std::invalid_argument("ISA not available: " + std::string(isa_name(isa)));
  switch (isa) {
#if defined(NEUROAGG_HAVE_AVX2)
    case Isa::Avx2: return detail::avx2_table;
#endif
#if defined(NEUROAGG_HAVE_NEON)
    case Isa::Neon: return detail::neon_table;
#endif
    default: return detail::scalar_table;
  }
}

namespace {

Isa best_isa() {
  if (const char* env = std::getenv("NEUROAGG_ISA")) {
    const std::string_view want(env);
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
      if (want == isa_name(isa) && isa_available(isa)) return isa;
    }
    // unknown or unavailable request: fall through to autodetect
  }
  if (isa_available(Isa::Avx2)) return Isa::Avx2;
  if (isa_available(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&kernels(best_isa())};
  return slot;
}

}  // namespace

const KernelTable& kernels() { return *active_slot().load(std::memory_order_acquire); }

Isa active_isa() { return kernels().isa; }

void force_isa(Isa isa) { active_slot().store(&kernels(isa), std::memory_order_release); }

}  // namespace neuroagg::simd
