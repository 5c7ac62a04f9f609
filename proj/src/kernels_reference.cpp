#include <cmath>
#include <vector>

#include "ardhoi/kernels.hpp"

namespace ardhoi::kernels::reference {

namespace {

std::vector<char> reset_mask(int len, std::span<const int> resets) {
  std::vector<char> mask(static_cast<size_t>(len), 0);
  if (len > 0) mask[0] = 1;
  for (int r : resets)
    if (r >= 0 && r < len) mask[static_cast<size_t>(r)] = 1;
  return mask;
}

}  // namespace

void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = accumulate ? c[i * n + j] : 0.0;
      for (int p = 0; p < k; ++p) s += static_cast<double>(a[i * k + p]) * b[p * n + j];
      c[i * n + j] = static_cast<float>(s);
    }
}

void gemm_nt(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = accumulate ? c[i * n + j] : 0.0;
      for (int p = 0; p < k; ++p) s += static_cast<double>(a[i * k + p]) * b[j * k + p];
      c[i * n + j] = static_cast<float>(s);
    }
}

void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = accumulate ? c[i * n + j] : 0.0;
      for (int p = 0; p < k; ++p) s += static_cast<double>(a[p * m + i]) * b[p * n + j];
      c[i * n + j] = static_cast<float>(s);
    }
}

void linear_scan(int len, int channels, const float* a, const float* b, float* h,
                 std::span<const int> resets) {
  const auto mask = reset_mask(len, resets);
  for (int c = 0; c < channels; ++c) {
    float state = 0.0f;
    for (int t = 0; t < len; ++t) {
      const size_t i = static_cast<size_t>(t) * channels + c;
      if (mask[static_cast<size_t>(t)]) state = 0.0f;
      state = a[i] * state + b[i];
      h[i] = state;
    }
  }
}

void linear_scan_adjoint(int len, int channels, const float* a, const float* g, float* lambda,
                         std::span<const int> resets) {
  const auto mask = reset_mask(len, resets);
  for (int c = 0; c < channels; ++c) {
    float carry = 0.0f;
    for (int t = len - 1; t >= 0; --t) {
      const size_t i = static_cast<size_t>(t) * channels + c;
      const bool has_next = t + 1 < len && !mask[static_cast<size_t>(t + 1)];
      const float next = has_next ? a[i + channels] * carry : 0.0f;
      carry = g[i] + next;
      lambda[i] = carry;
    }
  }
}

void layernorm_rows(int rows, int cols, const float* x, float eps, float* y, float* rstd) {
  for (int r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += x[r * cols + c];
    mean /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) var += (x[r * cols + c] - mean) * (x[r * cols + c] - mean);
    var /= cols;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int c = 0; c < cols; ++c) y[r * cols + c] = static_cast<float>((x[r * cols + c] - mean) * inv);
    rstd[r] = static_cast<float>(inv);
  }
}

}  // namespace ardhoi::kernels::reference
