#include <doctest.h>

#include <cmath>
#include <random>

#include "ardhoi/diffusion.hpp"
#include "diffusion_checks.hpp"
#include "gradcheck.hpp"

using namespace ardhoi;

TEST_CASE("schedule shape") {
  const NoiseSchedule s;
  CHECK(testing::alpha_bar_monotone(s));
  CHECK(s.beta(1) == doctest::Approx(1e-4));
  CHECK(s.beta(1000) == doctest::Approx(2e-2));
  const auto& d = s.ddim_steps();
  REQUIRE(d.size() == 50);
  CHECK(d.front() == 1000);
  CHECK(d.back() == 20);
  for (std::size_t i = 1; i < d.size(); ++i) CHECK(d[i - 1] - d[i] == 20);
}

TEST_CASE("q_sample limits and range") {
  const NoiseSchedule s;
  const std::vector<float> s0{1.0f, -2.0f, 0.5f}, eps{0.3f, 0.1f, -0.7f};
  const auto a = s.q_sample(s0, 0, eps);
  for (int i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(s0[i]).epsilon(1e-6));
  const auto b = s.q_sample(s0, 1000, eps);
  for (int i = 0; i < 3; ++i) CHECK(std::fabs(b[i] - eps[i]) < 0.02);
  CHECK_THROWS_AS(s.q_sample(s0, 1001, eps), std::out_of_range);
  CHECK_THROWS_AS(s.q_sample(s0, -1, eps), std::out_of_range);
}

TEST_CASE("closed-form noising matches iterated single steps") {
  const NoiseSchedule s;
  for (int t : {1, 50, 400}) CHECK(testing::q_sample_vs_iterated(s, t, 10000, static_cast<std::uint64_t>(t)).worst_z < 3.0);
}

TEST_CASE("ddim with a fixed oracle returns the oracle") {
  const NoiseSchedule s;
  const std::vector<float> target{0.5f, -1.0f, 2.0f, 0.0f, 1.0f};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CHECK(testing::ddim_fixed_oracle_error(s, target, 2.0, seed) < 1e-5);
    CHECK(testing::ddim_fixed_oracle_error(s, target, 1.0, seed) < 1e-5);
  }
  CHECK(testing::ddim_reconstruction_error(s, 3) < 1e-4);
}

TEST_CASE("guidance is the affine combination at every step") {
  const NoiseSchedule s;
  for (double xi : {0.0, 0.5, 2.0, 3.5}) CHECK(testing::guidance_affine_error(s, xi, 4) < 1e-6);
  CHECK(testing::guidance_one_is_conditional(s, 5));
}

TEST_CASE("ddim is deterministic") {
  const NoiseSchedule s;
  std::vector<float> noise{0.1f, -0.4f, 1.3f};
  const PredictFn f = [](std::span<const float> z, int t, bool c) {
    std::vector<float> o(z.begin(), z.end());
    for (auto& v : o) v = std::tanh(v) * (c ? 1.0f : 0.5f) + 1e-3f * t;
    return o;
  };
  CHECK(ddim_sample(s, noise, f, 2.0) == ddim_sample(s, noise, f, 2.0));
}

TEST_CASE("classifier-free dropout rate") {
  std::mt19937_64 rng(9);
  const std::vector<float> text(8, 0.25f);
  int dropped = 0;
  for (int i = 0; i < 10000; ++i) dropped += cfg_dropout(text, 0.1, rng)[0] == 0.0f;
  CHECK(std::fabs(dropped / 10000.0 - 0.1) < 0.01);
  for (int i = 0; i < 100; ++i) {
    CHECK(cfg_dropout(text, 0.0, rng) == text);
    CHECK(cfg_dropout(text, 1.0, rng) == std::vector<float>(8, 0.0f));
  }
  CHECK_THROWS(cfg_dropout(text, 1.5, rng));
}

TEST_CASE("denoisers: shapes, parameter match, prefix agreement, gradients") {
  for (auto kind : {DenoiserKind::mlp, DenoiserKind::transformer}) {
    ParamStore store;
    std::mt19937_64 rng(2);
    const int td = 9, cd = 16;
    auto den = make_denoiser(kind, store, td, cd, 32, 2, rng);
    CHECK(den->kind() == kind);
    const double target = static_cast<double>(denoiser_mlp_params(td, cd, 32, 2));
    CHECK(std::fabs(static_cast<double>(store.count()) - target) / target < 0.1);

    // Two sequences of 3 and 2 rows.
    std::normal_distribution<float> g(0.0f, 1.0f);
    std::vector<float> z(5 * td), c(5 * cd);
    for (auto& v : z) v = g(rng);
    for (auto& v : c) v = g(rng);
    const Tensor zt = Tensor::from({5, td}, z), ct = Tensor::from({5, cd}, c);
    const std::vector<int> steps{10, 500, 999, 1, 250}, starts{0, 3};
    const Tensor out = den->predict(zt, steps, ct, starts);
    CHECK(out.shape() == Shape{5, td});

    // Row r of the batch equals the one-token path with the prefix up to r.
    const auto ov = out.to_vector();
    const int seq_of[5] = {0, 0, 0, 1, 1};
    for (int r = 0; r < 5; ++r) {
      const int first = starts[seq_of[r]];
      const Tensor prefix = slice(ct, 0, first, r + 1);
      const auto one = den->predict_one(std::span<const float>(z).subspan(r * td, td), steps[r], prefix);
      for (int i = 0; i < td; ++i) CHECK(one[i] == doctest::Approx(ov[r * td + i]).epsilon(1e-4));
    }

    const auto gc = testing::grad_check(
        [&](const std::vector<Tensor>& in) { return den->predict(in[0], steps, in[1], starts); }, {zt, ct}, rng);
    CHECK(gc.rel_error < 1e-3);
  }
}
