#pragma once

// Dense float32 kernels used by the autodiff engine.
//
// Every kernel in `ardhoi::kernels` is OpenMP-parallel; `ardhoi::kernels::reference`
// holds plain serial loops with the same contracts. The reference versions are
// kept for tests and for the benchmark target, never on the training path.

#include <cstddef>
#include <span>

namespace ardhoi::kernels {

// C[M,N] = A[M,K] * B[K,N]   (C += ... when accumulate)
void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
// C[M,N] = A[M,K] * B[N,K]^T
void gemm_nt(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
// C[M,N] = A[K,M]^T * B[K,N]
void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);

// First-order linear recurrence along the row axis of [len, channels] buffers:
//   h[t] = a[t] * h[t-1] + b[t],  h[-1] = 0.
// Rows listed in `resets` start a fresh sequence (h[t-1] treated as 0).
// The parallel version uses a log-depth associative scan over time.
void linear_scan(int len, int channels, const float* a, const float* b, float* h,
                 std::span<const int> resets);

// Adjoint of linear_scan: lambda[t] = g[t] + a[t+1] * lambda[t+1], with the
// carry cut at every reset row.
void linear_scan_adjoint(int len, int channels, const float* a, const float* g, float* lambda,
                         std::span<const int> resets);

// Row-wise normalisation of x[rows, cols] to zero mean / unit variance.
// Writes the normalised values and the per-row reciprocal std.
void layernorm_rows(int rows, int cols, const float* x, float eps, float* y, float* rstd);

namespace reference {

void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
void gemm_nt(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
void linear_scan(int len, int channels, const float* a, const float* b, float* h,
                 std::span<const int> resets);
void linear_scan_adjoint(int len, int channels, const float* a, const float* g, float* lambda,
                         std::span<const int> resets);
void layernorm_rows(int rows, int cols, const float* x, float eps, float* y, float* rstd);

}  // namespace reference

}  // namespace ardhoi::kernels
