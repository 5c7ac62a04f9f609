#include <doctest.h>

#include <cmath>
#include <random>

#include "ardhoi/metrics.hpp"
#include "ardhoi/synth.hpp"

using namespace ardhoi;

namespace {

Embeddings gaussian_set(int n, int d, double shift, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Embeddings e(static_cast<std::size_t>(n), Embedding(static_cast<std::size_t>(d)));
  for (auto& v : e)
    for (auto& x : v) x = g(rng) + shift;
  return e;
}

// Rescales a 1-D set to exactly the given sample mean and (n-1) variance.
Embeddings standardized(Embeddings e, double mean, double var) {
  double m = 0.0;
  for (const auto& v : e) m += v[0];
  m /= static_cast<double>(e.size());
  double s = 0.0;
  for (const auto& v : e) s += (v[0] - m) * (v[0] - m);
  const double sd = std::sqrt(s / static_cast<double>(e.size() - 1));
  for (auto& v : e) v[0] = (v[0] - m) / sd * std::sqrt(var) + mean;
  return e;
}

const std::vector<ObjectSpec>& lib() {
  static const auto l = synth::default_object_library();
  return l;
}

}  // namespace

TEST_CASE("fid of a set with itself is zero and fid is symmetric") {
  std::mt19937_64 rng(1);
  const auto a = gaussian_set(200, 8, 0.0, rng);
  const auto b = gaussian_set(150, 8, 0.3, rng);
  CHECK(std::fabs(fid(a, a)) < 1e-6);
  CHECK(std::fabs(fid(a, b) - fid(b, a)) < 1e-6);
  CHECK(fid(a, b) > 0.1);
}

TEST_CASE("fid between unit Gaussians one apart is one") {
  std::mt19937_64 rng(2);
  const auto a = standardized(gaussian_set(5000, 1, 0.0, rng), 0.0, 1.0);
  const auto b = standardized(gaussian_set(5000, 1, 0.0, rng), 1.0, 1.0);
  CHECK(std::fabs(fid(a, b) - 1.0) < 1e-3);
  // Large unstandardised samples land near the same value.
  const auto c = gaussian_set(40000, 1, 0.0, rng);
  const auto d = gaussian_set(40000, 1, 1.0, rng);
  CHECK(std::fabs(fid(c, d) - 1.0) < 0.05);
}

TEST_CASE("fid rejects too few samples") {
  std::mt19937_64 rng(3);
  const auto a = gaussian_set(8, 8, 0.0, rng);
  const auto b = gaussian_set(100, 8, 0.0, rng);
  CHECK_THROWS_AS(fid(a, b), std::invalid_argument);
}

TEST_CASE("psd square root squares back") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + trial;
    std::vector<double> a(static_cast<std::size_t>(n) * n), m(a.size(), 0.0);
    for (auto& v : a) v = g(rng);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) m[i * n + j] += a[i * n + k] * a[j * n + k];
    const auto r = sqrt_psd(m, n);
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += r[i * n + k] * r[k * n + j];
        worst = std::max(worst, std::fabs(s - m[i * n + j]));
      }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("r-precision on a perfect embedder") {
  const int n = 64, d = 4;
  Embeddings t, m;
  for (int i = 0; i < n; ++i) {
    Embedding v(d, 0.0);
    v[i % d] = 10.0 * (1 + i / d);
    t.push_back(v);
    m.push_back(v);
  }
  const auto r = r_precision(t, m, 7);
  CHECK(r[0] == 1.0);
  CHECK(r_precision_at(t, m, 32, 7) == 1.0);
  CHECK_THROWS_AS(r_precision_at(t, m, 33, 7), std::invalid_argument);
}

TEST_CASE("r-precision of random embeddings is chance") {
  std::mt19937_64 rng(5);
  double top1 = 0.0;
  const int trials = 10000 / 32;
  for (int i = 0; i < trials; ++i) {
    const auto t = gaussian_set(32, 8, 0.0, rng);
    const auto m = gaussian_set(32, 8, 0.0, rng);
    const auto r = r_precision(t, m, static_cast<std::uint64_t>(i));
    CHECK(r[0] <= r[1]);
    CHECK(r[1] <= r[2]);
    top1 += r[0];
  }
  CHECK(std::fabs(top1 / trials - 1.0 / 32.0) < 0.02);
  const auto t = gaussian_set(64, 8, 0.0, rng);
  const auto m = gaussian_set(64, 8, 0.0, rng);
  CHECK(r_precision_at(t, m, 32, 1) == 1.0);
}

TEST_CASE("multimodal distance and diversity") {
  std::mt19937_64 rng(6);
  const auto a = gaussian_set(50, 16, 0.0, rng);
  CHECK(multimodal_distance(a, a) == 0.0);
  const Embeddings same(20, Embedding(16, 0.5));
  CHECK(diversity(same, 1) == 0.0);

  // E||x - y|| for x, y ~ N(0, I_d) is 2 Gamma((d+1)/2) / Gamma(d/2).
  const int d = 32;
  const double expected = 2.0 * std::exp(std::lgamma((d + 1) / 2.0) - std::lgamma(d / 2.0));
  double acc = 0.0;
  for (int r = 0; r < 20; ++r) acc += diversity(gaussian_set(300, d, 0.0, rng), static_cast<std::uint64_t>(r));
  acc /= 20.0;
  CHECK(std::fabs(acc - expected) / expected < 0.05);
  CHECK(std::fabs(acc - std::sqrt(2.0 * d)) / std::sqrt(2.0 * d) < 0.05);
}

TEST_CASE("boundary jerk") {
  HoiSequence still;
  still.frames.assign(64, HoiFrame{});
  CHECK(boundary_jerk(still) == 1.0);

  HoiSequence walk;
  for (int f = 0; f < 64; ++f) {
    HoiFrame fr;
    fr.root_translation = {0.0, 0.9, 0.01 * f};
    fr.joint_rotations[0] = {0.0, 0.02 * f, 0.0};
    walk.frames.push_back(fr);
  }
  CHECK(boundary_jerk(walk) == doctest::Approx(1.0).epsilon(0.05));
  for (int f = 32; f < 64; ++f) walk.frames[f].root_translation[0] += 0.2;
  CHECK(boundary_jerk(walk) > 5.0);
}

TEST_CASE("ground-truth carries keep contact while the object moves") {
  auto corpus = synth::generate_corpus_detailed(60, 12, lib());
  int carries = 0;
  for (const auto& g : corpus) {
    if (g.scenario.verb != synth::Verb::carry) continue;
    const auto pm = physical_metrics(g.sequence, find_object(lib(), g.sequence.object));
    CHECK(pm.manipulation_frames > 0);
    CHECK(pm.contact_mean < 0.02);
    ++carries;
  }
  CHECK(carries > 3);
}

TEST_CASE("retrieval returns the closest text with lowest-index ties") {
  auto corpus = synth::generate_corpus(40, 13, lib());
  const auto self = retrieve(corpus, corpus);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(self[i].text == corpus[i].text);
    CHECK(self[i].frames.size() == corpus[i].frames.size());
    CHECK(self[i].frames.front().root_translation == corpus[i].frames.front().root_translation);
  }
  auto dup = corpus;
  dup[5] = dup[9];
  dup[5].frames.pop_back();
  const std::vector<HoiSequence> query{corpus[9]};
  const auto r = retrieve(query, dup);
  CHECK(r[0].frames.size() == dup[5].frames.size());
}

TEST_CASE("evaluator separates matched pairs and round-trips through a checkpoint") {
  const auto corpus = synth::generate_corpus(96, 14, lib());
  EvaluatorConfig cfg;
  cfg.epochs = 6;
  Evaluator ev(cfg, 3);
  const double loss = ev.train(corpus, 5);
  CHECK(std::isfinite(loss));

  std::vector<std::string> texts;
  for (const auto& s : corpus) texts.push_back(s.text);
  const auto m = ev.embed_motions(corpus);
  const auto t = ev.embed_texts(texts);
  CHECK(m.size() == corpus.size());
  CHECK(m[0].size() == 32);
  double matched = 0.0, mismatched = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    double a = 0.0, b = 0.0;
    const auto& other = m[(i + 1) % m.size()];
    for (std::size_t k = 0; k < m[i].size(); ++k) {
      a += (t[i][k] - m[i][k]) * (t[i][k] - m[i][k]);
      b += (t[i][k] - other[k]) * (t[i][k] - other[k]);
    }
    matched += std::sqrt(a);
    mismatched += std::sqrt(b);
  }
  CHECK(matched < mismatched);

  const auto path = std::filesystem::temp_directory_path() / "ardhoi_eval_test.ckpt";
  ev.save(path);
  const Evaluator back = Evaluator::load(path);
  const auto m2 = back.embed_motions(corpus);
  CHECK(m2 == m);
  std::filesystem::remove(path);

  // Self-retrieval is a perfect copy of the reference distribution.
  const auto rep = evaluate(ev, corpus, retrieve(corpus, corpus), lib(), 1, 20);
  CHECK(rep.fid.mean < 1e-6);
  CHECK(rep.runs == 20);
  CHECK(rep.r1.mean <= rep.r2.mean);
  CHECK(rep.r2.mean <= rep.r3.mean);
}
