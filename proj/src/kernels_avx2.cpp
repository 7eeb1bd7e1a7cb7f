// AVX2+FMA kernel variants. This translation unit is the only one compiled
// with -mavx2 -mfma; dispatch happens at runtime via __builtin_cpu_supports,
// so the rest of the binary stays portable.

#include "stiffdyn/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define STIFFDYN_X86 1
#include <immintrin.h>
#else
#define STIFFDYN_X86 0
#endif

#include <cstring>

namespace stiffdyn::kernels {

#if STIFFDYN_X86

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d sum = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(sum, _mm_unpackhi_pd(sum, sum)));
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        acc += x[i] * y[i];
    }
    return acc;
}

void axpy_avx2(std::size_t n, double a, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i,
                         _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        std::size_t j = 0;
        // Four B rows share each A load.
        for (; j + 4 <= n; j += 4) {
            const double* b0 = b + j * k;
            const double* b1 = b0 + k;
            const double* b2 = b1 + k;
            const double* b3 = b2 + k;
            __m256d acc0 = _mm256_setzero_pd();
            __m256d acc1 = _mm256_setzero_pd();
            __m256d acc2 = _mm256_setzero_pd();
            __m256d acc3 = _mm256_setzero_pd();
            std::size_t kk = 0;
            for (; kk + 4 <= k; kk += 4) {
                const __m256d va = _mm256_loadu_pd(arow + kk);
                acc0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b0 + kk), acc0);
                acc1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b1 + kk), acc1);
                acc2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b2 + kk), acc2);
                acc3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b3 + kk), acc3);
            }
            double s0 = hsum(acc0), s1 = hsum(acc1), s2 = hsum(acc2), s3 = hsum(acc3);
            for (; kk < k; ++kk) {
                const double av = arow[kk];
                s0 += av * b0[kk];
                s1 += av * b1[kk];
                s2 += av * b2[kk];
                s3 += av * b3[kk];
            }
            if (accumulate) {
                crow[j] += s0;
                crow[j + 1] += s1;
                crow[j + 2] += s2;
                crow[j + 3] += s3;
            } else {
                crow[j] = s0;
                crow[j + 1] = s1;
                crow[j + 2] = s2;
                crow[j + 3] = s3;
            }
        }
        for (; j < n; ++j) {
            const double v = dot_avx2(k, arow, b + j * k);
            crow[j] = accumulate ? crow[j] + v : v;
        }
    }
}

void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate) {
    if (!accumulate) {
        std::memset(c, 0, m * n * sizeof(double));
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            axpy_avx2(n, arow[kk], b + kk * n, crow);
        }
    }
}

void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate) {
    if (!accumulate) {
        std::memset(c, 0, k * n * sizeof(double));
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            axpy_avx2(n, arow[kk], brow, c + kk * n);
        }
    }
}

}  // namespace

const KernelTable* avx2_kernels() {
    static const bool supported =
        __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    if (!supported) {
        return nullptr;
    }
    static const KernelTable table{dot_avx2, axpy_avx2, gemm_nt_avx2, gemm_nn_avx2,
                                   gemm_tn_avx2};
    return &table;
}

#else  // !STIFFDYN_X86

const KernelTable* avx2_kernels() { return nullptr; }

#endif

}  // namespace stiffdyn::kernels
