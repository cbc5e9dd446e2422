// Built with -mavx2 -mfma. Nothing in here may run before cpu_supports(kAvx2)
// has been checked by the dispatcher.

#include "lupiet/simd/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

namespace lupiet::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Register-blocked over 8 output columns: C[i, j..j+8) accumulates all k
// terms in two ymm registers before one store.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      __m256d c1 = _mm256_loadu_pd(crow + j + 4);
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d va = _mm256_broadcast_sd(arow + p);
        c0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b + p * n + j), c0);
        c1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b + p * n + j + 4), c1);
      }
      _mm256_storeu_pd(crow + j, c0);
      _mm256_storeu_pd(crow + j + 4, c1);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      for (std::size_t p = 0; p < k; ++p) {
        c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(arow + p), _mm256_loadu_pd(b + p * n + j), c0);
      }
      _mm256_storeu_pd(crow + j, c0);
    }
    for (; j < n; ++j) {
      double s = crow[j];
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * b[p * n + j];
      crow[j] = s;
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(a + i * k, b + j * k, k);
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      __m256d c1 = _mm256_loadu_pd(crow + j + 4);
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d va = _mm256_broadcast_sd(a + p * m + i);
        c0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b + p * n + j), c0);
        c1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b + p * n + j + 4), c1);
      }
      _mm256_storeu_pd(crow + j, c0);
      _mm256_storeu_pd(crow + j + 4, c1);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      for (std::size_t p = 0; p < k; ++p) {
        c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p * m + i), _mm256_loadu_pd(b + p * n + j),
                             c0);
      }
      _mm256_storeu_pd(crow + j, c0);
    }
    for (; j < n; ++j) {
      double s = crow[j];
      for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
      crow[j] = s;
    }
  }
}

void adam_update(const AdamUpdate& h, double* param, const double* grad, double* m, double* v,
                 std::size_t n) {
  const __m256d b1 = _mm256_set1_pd(h.beta1);
  const __m256d b2 = _mm256_set1_pd(h.beta2);
  const __m256d one_b1 = _mm256_set1_pd(1.0 - h.beta1);
  const __m256d one_b2 = _mm256_set1_pd(1.0 - h.beta2);
  const __m256d inv_bc1 = _mm256_set1_pd(1.0 / h.bias_correction1);
  const __m256d inv_bc2 = _mm256_set1_pd(1.0 / h.bias_correction2);
  const __m256d eps = _mm256_set1_pd(h.epsilon);
  const __m256d lr = _mm256_set1_pd(h.lr);
  const __m256d wd = _mm256_set1_pd(h.weight_decay);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    __m256d vm = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    __m256d p = _mm256_loadu_pd(param + i);
    vm = _mm256_fmadd_pd(b1, vm, _mm256_mul_pd(one_b1, g));
    vv = _mm256_fmadd_pd(b2, vv, _mm256_mul_pd(_mm256_mul_pd(one_b2, g), g));
    const __m256d m_hat = _mm256_mul_pd(vm, inv_bc1);
    const __m256d v_hat = _mm256_mul_pd(vv, inv_bc2);
    const __m256d step =
        _mm256_fmadd_pd(wd, p, _mm256_div_pd(m_hat, _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps)));
    p = _mm256_fnmadd_pd(lr, step, p);
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    _mm256_storeu_pd(param + i, p);
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
    const double m_hat = m[i] / h.bias_correction1;
    const double v_hat = v[i] / h.bias_correction2;
    param[i] -= h.lr * (m_hat / (std::sqrt(v_hat) + h.epsilon) + h.weight_decay * param[i]);
  }
}

constexpr KernelTable kAvx2{
    Isa::kAvx2, "avx2", dot, axpy, gemm_nn, gemm_nt, gemm_tn, adam_update,
};

}  // namespace

const KernelTable* avx2_kernels() { return &kAvx2; }

}  // namespace lupiet::simd

#else

namespace lupiet::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace lupiet::simd

#endif
