#include "qdlab/nn/kernels.hpp"

#include <omp.h>

namespace qdlab::nn {

namespace {

// one output row, all four transpose combinations
inline void gemm_row(int m, int N, int K, const float* A, int lda, bool transA, const float* B,
                     int ldb, bool transB, float* c, bool accumulate) {
    if (!accumulate)
        for (int n = 0; n < N; ++n) c[n] = 0.0f;
    if (!transA && !transB) {
        const float* a = A + static_cast<long>(m) * lda;
        for (int k = 0; k < K; ++k) {
            const float av = a[k];
            const float* b = B + static_cast<long>(k) * ldb;
            for (int n = 0; n < N; ++n) c[n] += av * b[n];
        }
    } else if (!transA && transB) {
        const float* a = A + static_cast<long>(m) * lda;
        for (int n = 0; n < N; ++n) {
            const float* b = B + static_cast<long>(n) * ldb;
            float acc = 0.0f;
            for (int k = 0; k < K; ++k) acc += a[k] * b[k];
            c[n] += acc;
        }
    } else if (transA && !transB) {
        for (int k = 0; k < K; ++k) {
            const float av = A[static_cast<long>(k) * lda + m];
            const float* b = B + static_cast<long>(k) * ldb;
            for (int n = 0; n < N; ++n) c[n] += av * b[n];
        }
    } else {
        for (int n = 0; n < N; ++n) {
            float acc = 0.0f;
            for (int k = 0; k < K; ++k)
                acc += A[static_cast<long>(k) * lda + m] * B[static_cast<long>(n) * ldb + k];
            c[n] += acc;
        }
    }
}

}  // namespace

void gemm_serial(int M, int N, int K, const float* A, int lda, bool transA, const float* B,
                 int ldb, bool transB, float* C, int ldc, bool accumulate) {
    for (int m = 0; m < M; ++m)
        gemm_row(m, N, K, A, lda, transA, B, ldb, transB, C + static_cast<long>(m) * ldc,
                 accumulate);
}

void gemm(int M, int N, int K, const float* A, int lda, bool transA, const float* B, int ldb,
          bool transB, float* C, int ldc, bool accumulate) {
    const long work = static_cast<long>(M) * N * K;
    if (work < 1 << 16 || omp_get_max_threads() == 1) {
        gemm_serial(M, N, K, A, lda, transA, B, ldb, transB, C, ldc, accumulate);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int m = 0; m < M; ++m)
        gemm_row(m, N, K, A, lda, transA, B, ldb, transB, C + static_cast<long>(m) * ldc,
                 accumulate);
}

}  // namespace qdlab::nn
