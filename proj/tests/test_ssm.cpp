#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "ardhoi/context.hpp"
#include "ardhoi/encoders.hpp"

using namespace ardhoi;

namespace {

float max_abs_diff(const Tensor& a, const Tensor& b) {
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

ContextBatch random_batch(std::mt19937_64& rng, int seqs, int token_dims) {
  ContextBatch b;
  std::uniform_int_distribution<int> len(0, 9);
  int total = 0;
  for (int s = 0; s < seqs; ++s) {
    b.text.push_back(Tensor::uniform({kTextDims}, rng, -1, 1).to_vector());
    b.point.push_back(Tensor::uniform({kPointDims}, rng, 0, 1).to_vector());
    b.token_counts.push_back(len(rng));
    total += b.token_counts.back();
  }
  if (total > 0) b.tokens = Tensor::uniform({total, token_dims}, rng, -1, 1);
  return b;
}

}  // namespace

TEST_CASE("zero input gives zero scan output") {
  std::mt19937_64 rng(1);
  ParamStore ps;
  SsmBlock blk(ps, "b", 8, 4, 2, rng);
  NoGradGuard g;
  const Tensor y = blk.scan(Tensor::zeros({10, 16}), std::vector<int>{0}, ScanMode::parallel);
  for (float v : y.data()) CHECK(v == 0.0f);
}

TEST_CASE("length-one scan agrees between modes") {
  std::mt19937_64 rng(2);
  ParamStore ps;
  SsmBlock blk(ps, "b", 8, 4, 2, rng);
  NoGradGuard g;
  const Tensor x = Tensor::uniform({1, 16}, rng, -1, 1);
  const Tensor y = blk.scan(x, std::vector<int>{0}, ScanMode::parallel);
  const Tensor y2 = blk.scan(x, std::vector<int>{0}, ScanMode::sequential);
  CHECK(max_abs_diff(y, y2) == 0.0f);
}

TEST_CASE("parallel scan, recurrence and stepping agree") {
  std::mt19937_64 rng(3);
  ParamStore ps;
  SsmConfig cfg{.d = 16, .state = 4, .expand = 2, .layers = 3};
  SsmStack stack(ps, "s", cfg, rng);
  NoGradGuard g;
  for (int trial = 0; trial < 10; ++trial) {
    const int len = 1 + trial * 6;
    const Tensor x = Tensor::uniform({len, 16}, rng, -1, 1);
    const Tensor a = stack(x, std::vector<int>{0}, ScanMode::parallel);
    const Tensor b = stack(x, std::vector<int>{0}, ScanMode::sequential);
    CHECK(max_abs_diff(a, b) < 1e-5f);
    auto st = stack.initial_state();
    for (int t = 0; t < len; ++t) {
      const Tensor row = stack.step(slice(x, 0, t, t + 1), st);
      CHECK(max_abs_diff(row, slice(a, 0, t, t + 1)) < 1e-5f);
    }
  }
}

TEST_CASE("context encoders: incremental equals batch and causality is exact") {
  for (auto kind : {ContextKind::ssm, ContextKind::transformer}) {
    std::mt19937_64 rng(4);
    ParamStore ps;
    auto enc = make_context_encoder(kind, ps, kTextDims, kPointDims, 9, SsmConfig{.d = 16, .state = 4, .expand = 2, .layers = 2}, rng);
    NoGradGuard g;
    const ContextBatch b = random_batch(rng, 4, 9);
    const Tensor c = enc->encode(b);
    int row = 0, tok = 0;
    for (std::size_t s = 0; s < b.text.size(); ++s) {
      ContextState st = enc->start(b.text[s], b.point[s]);
      for (int i = 0; i <= b.token_counts[s]; ++i) {
        if (i > 0) {
          const auto t = slice(b.tokens, 0, tok, tok + 1).to_vector();
          enc->advance(st, t);
          ++tok;
        }
        for (int k = 0; k < enc->width(); ++k)
          CHECK(std::fabs(st.condition[k] - c[static_cast<std::size_t>(row) * enc->width() + k]) < 1e-5);
        ++row;
      }
    }
    CHECK(row == c.dim(0));

    // Perturb one token of the first sequence; earlier conditions must not move at all.
    ContextBatch one;
    one.text = {b.text[0]};
    one.point = {b.point[0]};
    one.token_counts = {8};
    one.tokens = Tensor::uniform({8, 9}, rng, -1, 1);
    const Tensor base = enc->encode(one);
    auto pert = one.tokens.to_vector();
    pert[4 * 9 + 2] += 0.5f;  // s_5
    one.tokens = Tensor::from({8, 9}, pert);
    const Tensor moved = enc->encode(one);
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < enc->width(); ++k)
        CHECK(base[static_cast<std::size_t>(j) * enc->width() + k] == moved[static_cast<std::size_t>(j) * enc->width() + k]);
    bool later_changed = false;
    for (std::size_t i = 5 * enc->width(); i < base.size(); ++i) later_changed |= base[i] != moved[i];
    CHECK(later_changed);
  }
}

TEST_CASE("empty token list gives one condition") {
  std::mt19937_64 rng(5);
  ParamStore ps;
  auto enc = make_context_encoder(ContextKind::ssm, ps, kTextDims, kPointDims, 9, SsmConfig{.d = 16, .state = 4, .expand = 2, .layers = 2}, rng);
  ContextBatch b;
  b.text = {encode_text("lift the box")};
  b.point = {std::vector<float>(kPointDims, 0.1f)};
  b.token_counts = {0};
  CHECK(enc->encode(b).shape() == Shape{1, 16});
}

TEST_CASE("bounded inputs stay finite over long sequences") {
  std::mt19937_64 rng(6);
  ParamStore ps;
  SsmStack stack(ps, "s", SsmConfig{}, rng);
  NoGradGuard g;
  const Tensor y = stack(Tensor::uniform({64, 64}, rng, -1, 1), std::vector<int>{0});
  for (float v : y.data()) CHECK(std::isfinite(v));
}

TEST_CASE("stepping cost does not grow with position") {
  std::mt19937_64 rng(7);
  ParamStore ps;
  auto enc = make_context_encoder(ContextKind::ssm, ps, kTextDims, kPointDims, 33, SsmConfig{}, rng);
  ContextState st = enc->start(std::vector<float>(kTextDims, 0.1f), std::vector<float>(kPointDims, 0.1f));
  const std::vector<float> tok(33, 0.2f);
  std::vector<double> per_pos(16, 0.0);
  for (int rep = 0; rep < 20; ++rep) {
    ContextState s = st;
    for (int i = 1; i <= 15; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      enc->advance(s, tok);
      per_pos[static_cast<std::size_t>(i)] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  }
  const double lo = std::min({per_pos[1], per_pos[8], per_pos[15]});
  const double hi = std::max({per_pos[1], per_pos[8], per_pos[15]});
  CHECK(hi / lo < 1.5);
}
