#include <doctest.h>
#include <omp.h>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "ardhoi/kernels.hpp"

namespace k = ardhoi::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double max_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(static_cast<double>(a[i]) - b[i]));
  return m;
}

struct Threads {
  explicit Threads(int n) : prev(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~Threads() { omp_set_num_threads(prev); }
  int prev;
};

}  // namespace

TEST_CASE("gemm variants match the serial reference") {
  Threads t(4);
  std::mt19937_64 rng(1);
  for (auto [m, n, kk] : std::vector<std::array<int, 3>>{{1, 1, 1}, {7, 5, 3}, {33, 65, 17}, {128, 96, 80}, {5, 200, 300}}) {
    const auto a = random_vec(static_cast<std::size_t>(m) * kk, rng);
    const auto b = random_vec(static_cast<std::size_t>(kk) * n, rng);
    const auto bt = random_vec(static_cast<std::size_t>(n) * kk, rng);
    const auto at = random_vec(static_cast<std::size_t>(kk) * m, rng);
    const auto init = random_vec(static_cast<std::size_t>(m) * n, rng);
    const double tol = 1e-5 * kk;
    for (bool acc : {false, true}) {
      auto c1 = init, c2 = init;
      k::gemm_nn(m, n, kk, a.data(), b.data(), c1.data(), acc);
      k::reference::gemm_nn(m, n, kk, a.data(), b.data(), c2.data(), acc);
      CHECK(max_diff(c1, c2) < tol);
      c1 = init, c2 = init;
      k::gemm_nt(m, n, kk, a.data(), bt.data(), c1.data(), acc);
      k::reference::gemm_nt(m, n, kk, a.data(), bt.data(), c2.data(), acc);
      CHECK(max_diff(c1, c2) < tol);
      c1 = init, c2 = init;
      k::gemm_tn(m, n, kk, at.data(), b.data(), c1.data(), acc);
      k::reference::gemm_tn(m, n, kk, at.data(), b.data(), c2.data(), acc);
      CHECK(max_diff(c1, c2) < tol);
    }
  }
}

TEST_CASE("gemm rows do not depend on their neighbours") {
  // Row r of A*B must be bitwise the same whatever block it lands in.
  std::mt19937_64 rng(2);
  const int n = 37, kk = 29;
  const auto a = random_vec(9 * kk, rng);
  const auto b = random_vec(static_cast<std::size_t>(kk) * n, rng);
  std::vector<float> full(9 * n), single(n);
  k::gemm_nn(9, n, kk, a.data(), b.data(), full.data(), false);
  for (int r = 0; r < 9; ++r) {
    k::gemm_nn(1, n, kk, a.data() + r * kk, b.data(), single.data(), false);
    for (int j = 0; j < n; ++j) REQUIRE(single[j] == full[r * n + j]);
  }
}

TEST_CASE("linear scan and its adjoint match the recurrence") {
  Threads t(3);
  std::mt19937_64 rng(3);
  for (int len : {1, 2, 5, 64, 129}) {
    const int ch = 13;
    const auto a = random_vec(static_cast<std::size_t>(len) * ch, rng, 0.0f, 1.0f);
    const auto b = random_vec(static_cast<std::size_t>(len) * ch, rng);
    std::vector<int> resets;
    for (int r = 3; r < len; r += 17) resets.push_back(r);
    std::vector<float> h1(a.size()), h2(a.size()), l1(a.size()), l2(a.size());
    k::linear_scan(len, ch, a.data(), b.data(), h1.data(), resets);
    k::reference::linear_scan(len, ch, a.data(), b.data(), h2.data(), resets);
    CHECK(max_diff(h1, h2) < 1e-5);
    k::linear_scan_adjoint(len, ch, a.data(), b.data(), l1.data(), resets);
    k::reference::linear_scan_adjoint(len, ch, a.data(), b.data(), l2.data(), resets);
    CHECK(max_diff(l1, l2) < 1e-5);
  }
}

TEST_CASE("reset rows cut the recurrence") {
  const std::vector<float> a{0.5f, 0.5f, 0.5f, 0.5f};
  const std::vector<float> b{1, 1, 1, 1};
  const std::vector<int> resets{2};
  std::vector<float> h(4);
  k::linear_scan(4, 1, a.data(), b.data(), h.data(), resets);
  CHECK(h[0] == doctest::Approx(1.0));
  CHECK(h[1] == doctest::Approx(1.5));
  CHECK(h[2] == doctest::Approx(1.0));
  CHECK(h[3] == doctest::Approx(1.5));
}

TEST_CASE("layernorm rows match the reference") {
  Threads t(2);
  std::mt19937_64 rng(4);
  const int rows = 300, cols = 70;
  const auto x = random_vec(rows * cols, rng, -3.0f, 5.0f);
  std::vector<float> y1(x.size()), y2(x.size()), r1(rows), r2(rows);
  k::layernorm_rows(rows, cols, x.data(), 1e-5f, y1.data(), r1.data());
  k::reference::layernorm_rows(rows, cols, x.data(), 1e-5f, y2.data(), r2.data());
  CHECK(max_diff(y1, y2) < 1e-5);
  CHECK(max_diff(r1, r2) < 1e-5);
}
