#include <atomic>
#include <cstdlib>
#include <string_view>

#include "lupiet/error.hpp"
#include "lupiet/simd/kernels.hpp"

namespace lupiet::simd {
namespace {

const KernelTable* pick_default() {
  const char* env = std::getenv("LUPIET_SIMD");
  const std::string_view want = env ? env : "auto";
  if (want == "scalar") return &scalar_kernels();
  if ((want == "auto" || want == "avx2") && cpu_supports(Isa::kAvx2)) return avx2_kernels();
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> table{pick_default()};
  return table;
}

}  // namespace

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(__x86_64__) || defined(__i386__)
      return avx2_kernels() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_active(Isa isa) {
  if (!cpu_supports(isa)) {
    throw ParameterError(std::string("SIMD variant not available: ") + isa_name(isa));
  }
  slot().store(isa == Isa::kScalar ? &scalar_kernels() : avx2_kernels(),
               std::memory_order_release);
}

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace lupiet::simd
