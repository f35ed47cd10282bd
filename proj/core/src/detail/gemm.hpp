#pragma once

#include <cstddef>

namespace transmamba::detail {

// C[m x n] += op(A) * op(B) with row-major operands; op(A) is m x k, op(B) is k x n.
inline void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
                 const double* b, double* c) {
    if (!trans_a && !trans_b) {
        for (std::size_t i = 0; i < m; ++i) {
            double* crow = c + i * n;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = a[i * k + p];
                const double* brow = b + p * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else if (!trans_a && trans_b) {
        for (std::size_t i = 0; i < m; ++i) {
            const double* arow = a + i * k;
            for (std::size_t j = 0; j < n; ++j) {
                const double* brow = b + j * k;
                double acc = 0.0;
                for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
                c[i * n + j] += acc;
            }
        }
    } else if (trans_a && !trans_b) {
        for (std::size_t p = 0; p < k; ++p) {
            const double* brow = b + p * n;
            for (std::size_t i = 0; i < m; ++i) {
                const double av = a[p * m + i];
                double* crow = c + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[j * k + p];
                c[i * n + j] += acc;
            }
        }
    }
}

}  // namespace transmamba::detail
