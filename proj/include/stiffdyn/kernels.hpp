#pragma once

// Dense double-precision kernels behind the network forward/backward passes
// and the optimizer update. A scalar reference implementation always exists;
// an AVX2+FMA variant is selected at runtime when the CPU supports it. The
// two backends are equivalence-tested against each other (results may differ
// by reassociation rounding, never more).
//
// Matrix arguments are row-major, contiguous.

#include <cstddef>

namespace stiffdyn::kernels {

struct KernelTable {
    // sum_i x[i] * y[i]
    double (*dot)(std::size_t n, const double* x, const double* y);
    // y += a * x
    void (*axpy)(std::size_t n, double a, const double* x, double* y);
    // C[m x n] (+)= A[m x k] * B[n x k]^T
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    const double* b, double* c, bool accumulate);
    // C[m x n] (+)= A[m x k] * B[k x n]
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    const double* b, double* c, bool accumulate);
    // C[k x n] (+)= A[m x k]^T * B[m x n]
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    const double* b, double* c, bool accumulate);
};

const KernelTable& scalar_kernels();

// Null when the binary or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

// Scalar unless AVX2 is available and not disabled via force_scalar().
const KernelTable& active_kernels();
const char* active_backend_name();

// Test hook: pin the dispatch to the scalar reference.
void force_scalar(bool on);

}  // namespace stiffdyn::kernels
