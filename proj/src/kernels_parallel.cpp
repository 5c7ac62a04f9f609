#include "ardhoi/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace ardhoi::kernels {

namespace {

// Only worth forking when there is enough arithmetic to amortise the team.
constexpr long kParallelWork = 1L << 15;

std::vector<char> reset_mask(int len, std::span<const int> resets) {
  std::vector<char> mask(static_cast<size_t>(len), 0);
  if (len > 0) mask[0] = 1;
  for (int r : resets)
    if (r >= 0 && r < len) mask[static_cast<size_t>(r)] = 1;
  return mask;
}

}  // namespace

void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(float) * static_cast<size_t>(m) * n);
  const long work = static_cast<long>(m) * n * k;
  const int blocks = (m + 3) / 4;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (int blk = 0; blk < blocks; ++blk) {
    const int i = blk * 4;
    if (i + 4 <= m) {
      float* c0 = c + static_cast<size_t>(i) * n;
      float* c1 = c0 + n;
      float* c2 = c1 + n;
      float* c3 = c2 + n;
      const float* a0 = a + static_cast<size_t>(i) * k;
      const float* a1 = a0 + k;
      const float* a2 = a1 + k;
      const float* a3 = a2 + k;
      for (int p = 0; p < k; ++p) {
        const float* brow = b + static_cast<size_t>(p) * n;
        const float v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
#pragma omp simd
        for (int j = 0; j < n; ++j) {
          const float bj = brow[j];
          c0[j] += v0 * bj;
          c1[j] += v1 * bj;
          c2[j] += v2 * bj;
          c3[j] += v3 * bj;
        }
      }
    } else {
      for (int r = i; r < m; ++r) {
        float* crow = c + static_cast<size_t>(r) * n;
        const float* arow = a + static_cast<size_t>(r) * k;
        for (int p = 0; p < k; ++p) {
          const float* brow = b + static_cast<size_t>(p) * n;
          const float v = arow[p];
#pragma omp simd
          for (int j = 0; j < n; ++j) crow[j] += v * brow[j];
        }
      }
    }
  }
}

void gemm_nt(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  // Transpose B once so the inner loop streams contiguous rows.
  std::vector<float> bt(static_cast<size_t>(k) * n);
  for (int j = 0; j < n; ++j)
    for (int p = 0; p < k; ++p) bt[static_cast<size_t>(p) * n + j] = b[static_cast<size_t>(j) * k + p];
  gemm_nn(m, n, k, a, bt.data(), c, accumulate);
}

void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(float) * static_cast<size_t>(m) * n);
  const long work = static_cast<long>(m) * n * k;
#pragma omp parallel if (work > kParallelWork)
  {
    const int threads = omp_get_num_threads();
    const int tid = omp_get_thread_num();
    const int chunk = (m + threads - 1) / threads;
    const int lo = std::min(m, tid * chunk);
    const int hi = std::min(m, lo + chunk);
    for (int p = 0; p < k; ++p) {
      const float* arow = a + static_cast<size_t>(p) * m;
      const float* brow = b + static_cast<size_t>(p) * n;
      for (int i = lo; i < hi; ++i) {
        const float v = arow[i];
        if (v == 0.0f) continue;
        float* crow = c + static_cast<size_t>(i) * n;
#pragma omp simd
        for (int j = 0; j < n; ++j) crow[j] += v * brow[j];
      }
    }
  }
}

void linear_scan(int len, int channels, const float* a, const float* b, float* h,
                 std::span<const int> resets) {
  if (len <= 0 || channels <= 0) return;
  const size_t total = static_cast<size_t>(len) * channels;
  const auto mask = reset_mask(len, resets);
  // (A, B) pairs; combining an earlier (A1, B1) with a later (A2, B2) gives (A1*A2, A2*B1 + B2).
  std::vector<float> ca(total), cb(total), na(total), nb(total);
  for (int t = 0; t < len; ++t) {
    const size_t row = static_cast<size_t>(t) * channels;
    const bool cut = mask[static_cast<size_t>(t)] != 0;
    for (int c = 0; c < channels; ++c) {
      ca[row + c] = cut ? 0.0f : a[row + c];
      cb[row + c] = b[row + c];
    }
  }
  const bool par = static_cast<long>(total) * 4 > kParallelWork;
  for (int d = 1; d < len; d <<= 1) {
#pragma omp parallel for schedule(static) if (par)
    for (int t = 0; t < len; ++t) {
      const size_t row = static_cast<size_t>(t) * channels;
      if (t < d) {
        std::memcpy(&na[row], &ca[row], sizeof(float) * channels);
        std::memcpy(&nb[row], &cb[row], sizeof(float) * channels);
        continue;
      }
      const size_t prev = static_cast<size_t>(t - d) * channels;
#pragma omp simd
      for (int c = 0; c < channels; ++c) {
        const float a2 = ca[row + c];
        na[row + c] = ca[prev + c] * a2;
        nb[row + c] = a2 * cb[prev + c] + cb[row + c];
      }
    }
    ca.swap(na);
    cb.swap(nb);
  }
  std::memcpy(h, cb.data(), sizeof(float) * total);
}

void linear_scan_adjoint(int len, int channels, const float* a, const float* g, float* lambda,
                         std::span<const int> resets) {
  if (len <= 0 || channels <= 0) return;
  const size_t total = static_cast<size_t>(len) * channels;
  const auto mask = reset_mask(len, resets);
  // Reverse time: lambda'[s] = a'[s] lambda'[s-1] + g'[s] with a'[s] = a[t+1] (0 across a reset).
  std::vector<float> ra(total), rg(total), out(total);
  for (int s = 0; s < len; ++s) {
    const int t = len - 1 - s;
    const size_t dst = static_cast<size_t>(s) * channels;
    const size_t src = static_cast<size_t>(t) * channels;
    const bool has_next = t + 1 < len && mask[static_cast<size_t>(t + 1)] == 0;
    for (int c = 0; c < channels; ++c) {
      ra[dst + c] = has_next ? a[src + channels + c] : 0.0f;
      rg[dst + c] = g[src + c];
    }
  }
  const int no_resets[] = {0};
  linear_scan(len, channels, ra.data(), rg.data(), out.data(), std::span<const int>(no_resets, 1));
  for (int s = 0; s < len; ++s) {
    const int t = len - 1 - s;
    std::memcpy(lambda + static_cast<size_t>(t) * channels, &out[static_cast<size_t>(s) * channels],
                sizeof(float) * channels);
  }
}

void layernorm_rows(int rows, int cols, const float* x, float eps, float* y, float* rstd) {
  const long work = static_cast<long>(rows) * cols * 4;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (int r = 0; r < rows; ++r) {
    const float* xr = x + static_cast<size_t>(r) * cols;
    float* yr = y + static_cast<size_t>(r) * cols;
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += xr[c];
    mean /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double d = xr[c] - mean;
      var += d * d;
    }
    var /= cols;
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps));
    const float mu = static_cast<float>(mean);
    for (int c = 0; c < cols; ++c) yr[c] = (xr[c] - mu) * inv;
    rstd[r] = inv;
  }
}

}  // namespace ardhoi::kernels
