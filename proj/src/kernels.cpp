#include "stiffdyn/kernels.hpp"

#include <cstring>

namespace stiffdyn::kernels {

namespace {

double dot_scalar(std::size_t n, const double* x, const double* y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += x[i] * y[i];
    }
    return acc;
}

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    const double* b, double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = dot_scalar(k, arow, b + j * k);
            crow[j] = accumulate ? crow[j] + v : v;
        }
    }
}

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    const double* b, double* c, bool accumulate) {
    if (!accumulate) {
        std::memset(c, 0, m * n * sizeof(double));
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            axpy_scalar(n, arow[kk], b + kk * n, crow);
        }
    }
}

void gemm_tn_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    const double* b, double* c, bool accumulate) {
    if (!accumulate) {
        std::memset(c, 0, k * n * sizeof(double));
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            axpy_scalar(n, arow[kk], brow, c + kk * n);
        }
    }
}

bool g_force_scalar = false;

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{dot_scalar, axpy_scalar, gemm_nt_scalar,
                                   gemm_nn_scalar, gemm_tn_scalar};
    return table;
}

const KernelTable& active_kernels() {
    if (!g_force_scalar) {
        if (const KernelTable* avx2 = avx2_kernels()) {
            return *avx2;
        }
    }
    return scalar_kernels();
}

const char* active_backend_name() {
    return &active_kernels() == &scalar_kernels() ? "scalar" : "avx2";
}

void force_scalar(bool on) { g_force_scalar = on; }

}  // namespace stiffdyn::kernels
