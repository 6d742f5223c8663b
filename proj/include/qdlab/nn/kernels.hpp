#pragma once

namespace qdlab::nn {

// C[M x N] (+)= op(A) * op(B), row-major, lda/ldb are row strides.
// Parallelism is over output rows only, so results are bit-identical for
// any thread count.
void gemm(int M, int N, int K, const float* A, int lda, bool transA, const float* B, int ldb,
          bool transB, float* C, int ldc, bool accumulate);

// Serial reference implementation (same contract); kept for testing and
// benchmarking against the OpenMP path.
void gemm_serial(int M, int N, int K, const float* A, int lda, bool transA, const float* B,
                 int ldb, bool transB, float* C, int ldc, bool accumulate);

}  // namespace qdlab::nn
