#pragma once

// Dense f64 inner loops used by the differentiable ops and the optimizer.
//
// Every kernel has a scalar reference implementation; an AVX2+FMA variant is
// compiled in a separate translation unit and selected at runtime when the
// CPU supports it. The two agree to within rounding (FMA contraction and a
// different summation order), which the equivalence tests pin down. Within
// one process the choice is fixed, so results are bitwise reproducible.
//
// Override with LUPIET_SIMD=scalar|avx2|auto.

#include <cstddef>

namespace lupiet::simd {

enum class Isa { kScalar, kAvx2 };

struct AdamUpdate {
  double lr;
  double beta1;
  double beta2;
  double epsilon;
  double weight_decay;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
  // C[m x n] += A[m x k] * B[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
  // C[m x n] += A[k x m]^T * B[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
  // Bias-corrected Adam with decoupled weight decay, elementwise over n.
  void (*adam_update)(const AdamUpdate& h, double* param, const double* grad, double* m,
                      double* v, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled for this target.
const KernelTable* avx2_kernels();

bool cpu_supports(Isa isa);

// Kernel table used by the library. Resolved once, on first use.
const KernelTable& active();

// Forces a variant (tests, benchmarks). Throws ParameterError if the variant
// is unavailable on this machine.
void set_active(Isa isa);

const char* isa_name(Isa isa);

}  // namespace lupiet::simd
