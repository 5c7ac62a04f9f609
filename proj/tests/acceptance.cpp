// Acceptance run: one PASS/FAIL line per criterion, with the measured numbers.
//
//   acceptance [--only 1,2,...] [--cache DIR]
//
// --cache keeps trained checkpoints between runs (development only; the ctest
// registration always trains from scratch).

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ardhoi/context.hpp"
#include "ardhoi/pipeline.hpp"
#include "ardhoi/ssm.hpp"
#include "ardhoi/synth.hpp"
#include "cvae_checks.hpp"
#include "diffusion_checks.hpp"
#include "op_cases.hpp"

using namespace ardhoi;
namespace fs = std::filesystem;

namespace {

// ---- pinned thresholds ---------------------------------------------------------------

constexpr int kGradChecks = 100;
constexpr double kGradTol = 1e-3;
constexpr double kGradSeconds = 60.0;

constexpr int kScanInstances = 200;
constexpr int kScanMaxLen = 64;
constexpr double kScanTol = 1e-5;

constexpr double kMcSigmas = 3.0;
constexpr double kDdimTol = 1e-4;
constexpr double kAffineTol = 1e-6;

constexpr double kKlTol = 1e-5;
constexpr double kTripletTol = 1e-5;

constexpr double kRatioWithTriplet = 1.5;
constexpr double kRatioWithout = 1.2;

constexpr double kNullStopFraction = 0.8;
constexpr double kR1Floor = 3.0 / 32.0;

constexpr double kFidSelfTol = 1e-6;
constexpr double kFidAnalyticTol = 1e-3;
constexpr double kRandomRTol = 0.02;

// ---- training budgets -----------------------------------------------------------------

constexpr int kCorpus = 500;
constexpr int kPrompts = 64;
constexpr std::uint64_t kCorpusSeed = 1;
constexpr std::uint64_t kTestSeed = 99;
constexpr int kCvaeEpochs = 30;
constexpr int kArdmEpochs = 40;

// Token-size sweep: same budget for every token size.
constexpr int kTrendCvaeEpochs = 8;
constexpr int kTrendArdmEpochs = 15;
constexpr int kTrendPrompts = 128;

constexpr int kSpeedPrompts = 8;

double now() {
  static const auto t0 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Line {
  int id;
  bool pass;
  std::string detail;
};
std::vector<Line> results;

void report(int id, bool pass, const std::string& detail) {
  results.push_back({id, pass, detail});
  std::printf("%s %d %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
}

void note(const char* fmt, auto... args) {
  std::printf("  [%7.1fs] ", now());
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- shared fixture ----------------------------------------------------------------

struct World {
  std::optional<fs::path> cache;
  std::vector<ObjectSpec> library = synth::default_object_library();
  std::vector<HoiSequence> corpus, test, trend_test;
  PointEncoder points;
  CvaeData data, test_data;
  std::unique_ptr<Evaluator> evaluator;

  std::map<std::string, std::unique_ptr<Cvae>> cvaes;
  std::map<std::string, std::unique_ptr<Ardm>> ardms;

  void init() {
    corpus = synth::generate_corpus(kCorpus, kCorpusSeed, library);
    test = synth::generate_corpus(kPrompts, kTestSeed, library);
    trend_test = synth::generate_corpus(kTrendPrompts, kTestSeed + 1, library);
    const auto pe = pretrain_point_encoder(points, 5);
    note("point encoder test accuracy %.3f", pe.test_accuracy);
    data = make_cvae_data(corpus, library, points);
    test_data = make_cvae_data(test, library, points);
  }

  const Evaluator& eval() {
    if (!evaluator) {
      const auto path = cache ? std::optional(*cache / "evaluator.ckpt") : std::nullopt;
      if (path && fs::exists(*path)) {
        evaluator = std::make_unique<Evaluator>(Evaluator::load(*path));
      } else {
        evaluator = std::make_unique<Evaluator>(EvaluatorConfig{}, 11);
        const double loss = evaluator->train(corpus, 11);
        note("evaluator trained, final loss %.4f", loss);
        if (path) evaluator->save(*path);
      }
      const auto real = evaluate(*evaluator, test, test, library, 3, 20);
      note("evaluator on held-out ground truth: R@1 %.3f R@3 %.3f", real.r1.mean, real.r3.mean);
    }
    return *evaluator;
  }

  const Cvae& cvae(const std::string& key, const CvaeConfig& cfg, std::uint64_t seed) {
    auto& slot = cvaes[key];
    if (slot) return *slot;
    const auto path = cache ? std::optional(*cache / ("cvae_" + key + ".ckpt")) : std::nullopt;
    if (path && fs::exists(*path)) {
      slot = std::make_unique<Cvae>(Cvae::load(*path));
      return *slot;
    }
    const double t0 = now();
    slot = std::make_unique<Cvae>(cfg, seed);
    const auto rep = train_cvae(*slot, data, seed);
    note("cVAE %s: %d epochs, final loss %.4f, %d triplets, %.0fs", key.c_str(), cfg.epochs, rep.epoch_loss.back(),
         rep.triplets, now() - t0);
    if (path) slot->save(*path);
    return *slot;
  }

  const Ardm& ardm(const std::string& key, const ArdmConfig& cfg, const Cvae& cv, std::uint64_t seed) {
    auto& slot = ardms[key];
    if (slot) return *slot;
    const auto path = cache ? std::optional(*cache / ("ardm_" + key + ".ckpt")) : std::nullopt;
    if (path && fs::exists(*path)) {
      slot = std::make_unique<Ardm>(Ardm::load(*path));
      return *slot;
    }
    const double t0 = now();
    slot = std::make_unique<Ardm>(cfg, cv.config().d_l, seed);
    const auto rep = train_ardm(*slot, cv, data, seed + 1);
    note("ARDM %s: %d epochs, final loss %.4f, %.0fs", key.c_str(), cfg.epochs, rep.epoch_loss.back(), now() - t0);
    if (path) slot->save(*path);
    return *slot;
  }

  CvaeConfig main_cvae_config(double lambda_tri) const {
    CvaeConfig c;
    c.epochs = kCvaeEpochs;
    c.lambda_tri = lambda_tri;
    return c;
  }
  ArdmConfig main_ardm_config() const {
    ArdmConfig c;
    c.epochs = kArdmEpochs;
    return c;
  }
  const Cvae& full_cvae() { return cvae("tri", main_cvae_config(0.1), 1); }
  const Ardm& full_ardm() { return ardm("tri", main_ardm_config(), full_cvae(), 2); }
};

// ---- 1: autodiff ----------------------------------------------------------------------

void criterion_autodiff() {
  const double t0 = now();
  std::mt19937_64 rng(2024);
  const auto ops = testing::op_cases();
  double worst = 0.0;
  std::string worst_op;
  int failures = 0;
  std::set<std::string> covered;
  for (int i = 0; i < kGradChecks; ++i) {
    const auto& op = ops[static_cast<std::size_t>(i) % ops.size()];
    auto [inputs, fn] = op.make(rng);
    const auto r = testing::grad_check(fn, inputs, rng, op.eps);
    covered.insert(op.name);
    failures += !(r.rel_error < kGradTol);
    if (r.rel_error > worst) {
      worst = r.rel_error;
      worst_op = op.name;
    }
  }
  const double secs = now() - t0;
  report(1, failures == 0 && secs < kGradSeconds,
         fmt("autodiff: %d checks over %zu ops, worst relative error %.2e (%s), %d above %.0e, %.1fs (limit %.0fs)",
             kGradChecks, covered.size(), worst, worst_op.c_str(), failures, kGradTol, secs, kGradSeconds));
}

// ---- 2: SSM ---------------------------------------------------------------------------

float max_abs_diff(const Tensor& a, const Tensor& b) {
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

void criterion_ssm() {
  std::mt19937_64 rng(77);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  float worst = 0.0f;
  {
    NoGradGuard g;
    for (int i = 0; i < kScanInstances; ++i) {
      ParamStore ps;
      const int d = pick(2, 24), state = pick(1, 8), expand = pick(1, 3), len = pick(1, kScanMaxLen);
      SsmBlock blk(ps, "b", d, state, expand, rng);
      std::vector<int> resets{0};
      if (len > 4 && i % 3 == 0) resets.push_back(pick(1, len - 1));
      const Tensor x = Tensor::uniform({len, d}, rng, -2, 2);
      worst = std::max(worst, max_abs_diff(blk(x, resets, ScanMode::parallel), blk(x, resets, ScanMode::sequential)));
    }
  }

  // Causality: gradient of output row i with respect to every later input row.
  double leak = 0.0;
  int probes = 0;
  for (int trial = 0; trial < 10; ++trial) {
    ParamStore ps;
    const int len = 8 + 5 * trial;
    SsmStack stack(ps, "s", SsmConfig{.d = 12, .state = 6, .expand = 2, .layers = 3}, rng);
    for (int i : {0, len / 3, len / 2, len - 2}) {
      Tensor x = Tensor::uniform({len, 12}, rng, -1, 1);
      x.set_requires_grad(true);
      const Tensor y = stack(x, std::vector<int>{0});
      sum(slice(y, 0, i, i + 1) * Tensor::uniform({1, 12}, rng, 0.5f, 1.5f)).backward();
      for (int r = i + 1; r < len; ++r)
        for (int k = 0; k < 12; ++k) leak = std::max(leak, static_cast<double>(std::fabs(x.grad()[static_cast<std::size_t>(r) * 12 + k])));
      ++probes;
    }
  }
  // The same for both context encoders: perturbing token j leaves conditions 0..j bit-identical.
  bool encoders_causal = true;
  for (auto kind : {ContextKind::ssm, ContextKind::transformer}) {
    ParamStore ps;
    auto enc = make_context_encoder(kind, ps, kTextDims, kPointDims, 9, SsmConfig{.d = 16, .state = 4, .expand = 2, .layers = 2}, rng);
    NoGradGuard g;
    ContextBatch b;
    b.text = {encode_text("push the small box forward")};
    b.point = {Tensor::uniform({kPointDims}, rng, 0, 1).to_vector()};
    b.token_counts = {12};
    b.tokens = Tensor::uniform({12, 9}, rng, -1, 1);
    const Tensor base = enc->encode(b);
    for (int j = 0; j < 12; ++j) {
      auto v = b.tokens.to_vector();
      v[static_cast<std::size_t>(j) * 9 + 3] += 0.7f;
      ContextBatch p = b;
      p.tokens = Tensor::from({12, 9}, v);
      const Tensor moved = enc->encode(p);
      // Condition row r sees tokens 0..r-1.
      for (std::size_t e = 0; e < static_cast<std::size_t>(j + 1) * enc->width(); ++e)
        encoders_causal = encoders_causal && base[e] == moved[e];
    }
  }
  report(2, worst < kScanTol && leak == 0.0 && encoders_causal,
         fmt("ssm: %d scan-vs-recurrence instances (len <= %d), max |diff| %.2e (limit %.0e); causality: %d gradient "
             "probes with max future-input gradient %.1e (must be 0), context encoders causal: %s",
             kScanInstances, kScanMaxLen, worst, kScanTol, probes, leak, encoders_causal ? "yes" : "no"));
}

// ---- 3: diffusion -----------------------------------------------------------------------

void criterion_diffusion() {
  const NoiseSchedule s{DiffusionConfig{}};
  const bool monotone = testing::alpha_bar_monotone(s);
  double worst_z = 0.0;
  for (int t : {1, 10, 100, 500, 1000}) worst_z = std::max(worst_z, testing::q_sample_vs_iterated(s, t, 4000, 100 + t).worst_z);
  double ddim = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<float> target(33);
    for (auto& v : target) v = std::normal_distribution<float>(0, 1)(rng);
    ddim = std::max({ddim, testing::ddim_fixed_oracle_error(s, target, 2.0, seed), testing::ddim_reconstruction_error(s, seed)});
  }
  double affine = 0.0;
  for (double xi : {0.0, 0.5, 2.0, 3.5}) affine = std::max(affine, testing::guidance_affine_error(s, xi, 9));
  bool one = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) one = one && testing::guidance_one_is_conditional(s, seed);
  report(3, monotone && worst_z < kMcSigmas && ddim < kDdimTol && affine < kAffineTol && one,
         fmt("diffusion: alpha_bar monotone %s; q_sample vs iterated worst z %.2f (limit %.0f); DDIM oracle error %.2e "
             "(limit %.0e); guidance affine error %.2e; xi=1 exactly conditional %s",
             monotone ? "yes" : "no", worst_z, kMcSigmas, ddim, kDdimTol, affine, one ? "yes" : "no"));
}

// ---- 4: cVAE loss identities -----------------------------------------------------------

void criterion_cvae_losses(World& w) {
  std::mt19937_64 rng(4);
  const auto kl = testing::kl_identity(rng, 200);
  const auto tri = testing::triplet_identity(rng, 400);
  double phy = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& s = w.corpus[i];
    phy = std::max(phy, testing::perfect_reconstruction(s, find_object(w.library, s.object), 64).largest());
  }
  const bool ok = kl.at_prior == 0.0 && kl.smallest_off_prior > 0.0 && kl.worst_rel_error < kKlTol &&
                  tri.worst_error < kTripletTol && tri.active > 0 && tri.inactive > 0 && phy == 0.0;
  report(4, ok,
         fmt("cvae losses: KL at prior %.1e, smallest off prior %.2e, closed-form error %.1e; triplet hinge error %.1e "
             "(%d active / %d inactive); perfect reconstruction largest term %.1e",
             kl.at_prior, kl.smallest_off_prior, kl.worst_rel_error, tri.worst_error, tri.active, tri.inactive, phy));
}

// ---- 5: contrastive geometry ------------------------------------------------------------

void sigma_diagnostics(const Cvae& m, const CvaeData& d, double* lo, double* hi) {
  *lo = 1e30;
  *hi = 0.0;
  NoGradGuard g;
  for (std::size_t i = 0; i < d.sequences.size(); ++i) {
    auto clips = segment(d.sequences[i], m.config().token_frames);
    clips.pop_back();  // null clip
    for (const auto& clip : clips) {
      const Tensor x = Tensor::from({1, m.clip_dims()}, m.normalize(clip));
      const Tensor p = Tensor::from({1, kPointDims}, d.points[i]);
      const auto [mu, lv] = m.encode(x, p);
      for (float v : lv.data()) {
        const double s = std::exp(0.5 * v);
        *lo = std::min(*lo, s);
        *hi = std::max(*hi, s);
      }
    }
  }
}

double mean_contact(const BatchGeneration& g, const std::vector<ObjectSpec>& lib, int tf, int* counted) {
  double s = 0.0;
  *counted = 0;
  for (const auto& r : g.results) {
    const auto pm = physical_metrics(r.sequence, find_object(lib, r.sequence.object), tf);
    if (std::isnan(pm.contact_mean)) continue;
    s += pm.contact_mean;
    ++*counted;
  }
  return *counted ? s / *counted : std::numeric_limits<double>::quiet_NaN();
}

void criterion_contrastive(World& w) {
  const Cvae& with = w.full_cvae();
  const Cvae& without = w.cvae("notri", w.main_cvae_config(0.0), 1);
  int skipped = 0;
  const auto triples_with = build_triples(with, w.test_data, 77, &skipped);
  const auto triples_without = build_triples(without, w.test_data, 77);
  const double r_with = separation_ratio(with, triples_with);
  const double r_without = separation_ratio(without, triples_without);
  double lo = 0, hi = 0;
  sigma_diagnostics(with, w.test_data, &lo, &hi);
  note("held-out sigma range [%.4f, %.4f], reconstruction MSE %.4f (triplet) / %.4f (no triplet), %zu triples, %d anchors skipped",
       lo, hi, reconstruction_mse(with, w.test_data), reconstruction_mse(without, w.test_data), triples_with.size(), skipped);

  const Ardm& a_with = w.full_ardm();
  const Ardm& a_without = w.ardm("notri", w.main_ardm_config(), without, 2);
  const auto g_with = generate_batch(a_with, with, w.points, w.test, w.library, 5);
  const auto g_without = generate_batch(a_without, without, w.points, w.test, w.library, 5);
  int n_with = 0, n_without = 0;
  const double c_with = mean_contact(g_with, w.library, 16, &n_with);
  const double c_without = mean_contact(g_without, w.library, 16, &n_without);
  double jerk = 0.0, rec_jerk = 0.0;
  for (const auto& r : g_with.results) jerk += boundary_jerk(r.sequence, 16);
  for (std::size_t i = 0; i < w.test.size(); ++i) {
    HoiSequence rec = w.test[i];
    rec.frames = with.decode_tokens(with.encode_sequence(w.test[i], w.test_data.points[i]), w.test_data.points[i]);
    rec.frames.resize(w.test[i].frames.size());
    rec_jerk += boundary_jerk(rec, 16);
  }
  note("boundary jerk (triplet model): reconstructions %.3f, generations %.3f", rec_jerk / static_cast<double>(w.test.size()),
       jerk / static_cast<double>(g_with.results.size()));
  report(5, r_with >= kRatioWithTriplet && r_without < kRatioWithout && c_with < c_without,
         fmt("contrastive geometry: held-out separation ratio %.3f with triplet (need >= %.1f), %.3f without (need < %.1f); "
             "generated contact_mean %.4f m with triplet vs %.4f m without (%d / %d sequences with manipulation)",
             r_with, kRatioWithTriplet, r_without, kRatioWithout, c_with, c_without, n_with, n_without));
}

// ---- 6: token size trend ----------------------------------------------------------------

void criterion_token_size(World& w) {
  const Evaluator& ev = w.eval();
  const auto real = ev.embed_motions(w.trend_test);
  std::map<int, double> mean_fid;
  std::string per_seed;
  for (int tf : {4, 16, 24}) {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      CvaeConfig cc;
      cc.token_frames = tf;
      cc.epochs = kTrendCvaeEpochs;
      ArdmConfig ac;
      ac.epochs = kTrendArdmEpochs;
      const std::string key = fmt("tf%d_s%llu", tf, static_cast<unsigned long long>(seed));
      const Cvae& cv = w.cvae(key, cc, 100 * seed);
      const Ardm& am = w.ardm(key, ac, cv, 100 * seed + 1);
      const auto g = generate_batch(am, cv, w.points, w.trend_test, w.library, 100 * seed + 2);
      const double f = fid(real, ev.embed_motions(g.sequences()));
      note("token_frames %d seed %llu: FID %.4f, null stops %.2f, %.2fs per sequence", tf,
           static_cast<unsigned long long>(seed), f, g.null_stop_fraction(), g.seconds / w.trend_test.size());
      per_seed += fmt(" %d/%llu=%.3f", tf, static_cast<unsigned long long>(seed), f);
      total += f;
      // Models of this sweep are not reused.
      w.ardms.erase(key);
      w.cvaes.erase(key);
    }
    mean_fid[tf] = total / 3.0;
  }
  report(6, mean_fid[16] <= mean_fid[4] && mean_fid[16] <= mean_fid[24],
         fmt("token size: mean FID over 3 seeds %.4f at 4 frames, %.4f at 16, %.4f at 24 (need 16 <= both);%s",
             mean_fid[4], mean_fid[16], mean_fid[24], per_seed.c_str()));
}

// ---- 7: denoiser speed ------------------------------------------------------------------

void criterion_speed(World& w) {
  const Cvae& cv = w.full_cvae();
  std::vector<double> seconds;
  std::vector<std::size_t> params;
  CvaeData small;
  for (std::size_t i = 0; i < 64; ++i) {
    small.sequences.push_back(w.data.sequences[i]);
    small.objects.push_back(w.data.objects[i]);
    small.points.push_back(w.data.points[i]);
  }
  for (auto kind : {DenoiserKind::mlp, DenoiserKind::transformer}) {
    ArdmConfig ac;
    ac.denoiser_kind = kind;
    ac.epochs = 1;
    Ardm m(ac, cv.config().d_l, 9);
    train_ardm(m, cv, small, 9);
    {
      ParamStore ps;
      std::mt19937_64 rng(1);
      make_denoiser(kind, ps, m.token_dims(), ac.context.d, ac.denoiser_hidden, ac.denoiser_blocks, rng);
      params.push_back(ps.count());
    }
    // Fixed length for both: the flag is ignored and every prompt runs 15 tokens of 50 DDIM steps.
    const double t0 = now();
    for (int i = 0; i < kSpeedPrompts; ++i) {
      GenRequest req;
      req.text = w.test[i].text;
      req.object = &find_object(w.library, w.test[i].object);
      req.seed = 31 + i;
      req.max_tokens = 15;
      req.stop_on_null = false;
      generate(m, cv, w.points, req);
    }
    seconds.push_back((now() - t0) / kSpeedPrompts);
  }
  report(7, seconds[0] < seconds[1],
         fmt("denoiser speed: %.3fs per sequence with the MLP denoiser (%zu params) vs %.3fs with the transformer "
             "denoiser (%zu params), ratio transformer/MLP %.2f, both 15 tokens x 50 DDIM steps with guidance",
             seconds[0], params[0], seconds[1], params[1], seconds[1] / seconds[0]));
}

// ---- 8: end-to-end generation ----------------------------------------------------------

void criterion_generation(World& w) {
  const Cvae& cv = w.full_cvae();
  const Ardm& am = w.full_ardm();
  const auto g = generate_batch(am, cv, w.points, w.test, w.library, 8);
  int violations = 0;
  std::string first_issue;
  for (const auto& r : g.results) {
    const auto issues = check_invariants(r.sequence);
    if (!issues.empty()) {
      ++violations;
      if (first_issue.empty()) first_issue = issues.front();
    }
  }
  const auto again = generate_batch(am, cv, w.points, w.test, w.library, 8);
  bool identical = again.results.size() == g.results.size();
  for (std::size_t i = 0; identical && i < g.results.size(); ++i) {
    const auto& a = g.results[i].sequence.frames;
    const auto& b = again.results[i].sequence.frames;
    identical = a.size() == b.size();
    for (std::size_t f = 0; identical && f < a.size(); ++f) identical = a[f].flatten() == b[f].flatten();
  }
  const auto rep = evaluate(w.eval(), w.test, g.sequences(), w.library, 8, 20);
  double frames = 0.0;
  for (const auto& r : g.results) frames += static_cast<double>(r.sequence.frames.size());
  note("generated: mean %.1f frames, FID %.3f, MMD %.3f, diversity %.3f, %.3fs per sequence", frames / g.results.size(),
       rep.fid.mean, rep.mmd.mean, rep.diversity.mean, g.seconds / g.results.size());
  report(8, violations == 0 && g.null_stop_fraction() >= kNullStopFraction && rep.r1.mean >= kR1Floor && identical,
         fmt("generation: %zu prompts, %d invariant violations%s%s; null-token stops %.3f (need >= %.2f); R@1 %.4f +- %.4f "
             "(need >= %.4f); reruns bit-identical %s",
             g.results.size(), violations, first_issue.empty() ? "" : ", first: ", first_issue.c_str(),
             g.null_stop_fraction(), kNullStopFraction, rep.r1.mean, rep.r1.std, kR1Floor, identical ? "yes" : "no"));
}

// ---- 9: metrics -------------------------------------------------------------------------

void criterion_metrics(World& w) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  Embeddings a(300, Embedding(16));
  for (auto& v : a)
    for (auto& x : v) x = g(rng);
  const double self = fid(a, a);

  // N(0, 1) vs N(1, 4) in one dimension: (0 - 1)^2 + 1 + 4 - 2 * sqrt(4) = 2.
  auto standard = [&](double mean, double sd) {
    Embeddings e(4000, Embedding(1));
    for (auto& v : e) v[0] = g(rng);
    double m = 0.0, s = 0.0;
    for (const auto& v : e) m += v[0];
    m /= static_cast<double>(e.size());
    for (const auto& v : e) s += (v[0] - m) * (v[0] - m);
    const double k = std::sqrt(s / static_cast<double>(e.size() - 1));
    for (auto& v : e) v[0] = (v[0] - m) / k * sd + mean;
    return e;
  };
  const double analytic = fid(standard(0.0, 1.0), standard(1.0, 2.0));

  // Independent texts and motions: the true match is a uniform draw among 32.
  const int n = 32 * 400;
  Embeddings texts(n, Embedding(8)), motions(n, Embedding(8));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 8; ++k) {
      texts[i][k] = g(rng);
      motions[i][k] = g(rng);
    }
  const double random_r1 = r_precision(texts, motions, 5)[0];

  const auto retrieved = retrieve(w.test, w.test);
  const auto rep = evaluate(w.eval(), w.test, retrieved, w.library, 9, 20);
  report(9, std::fabs(self) < kFidSelfTol && std::fabs(analytic - 2.0) < kFidAnalyticTol &&
                std::fabs(random_r1 - 1.0 / 32.0) < kRandomRTol && std::fabs(rep.fid.mean) < kFidSelfTol,
         fmt("metrics: FID self %.1e; 1-D analytic FID %.6f vs 2 (tol %.0e); random R@1 %.4f vs %.4f (tol %.2f); "
             "retrieval train=test FID %.1e",
             self, analytic, kFidAnalyticTol, random_r1, 1.0 / 32.0, kRandomRTol, rep.fid.mean));
}

}  // namespace

int main(int argc, char** argv) {
  now();
  CLI::App app{"acceptance run"};
  std::vector<int> only;
  std::string cache;
  app.add_option("--only", only, "criteria to run")->delimiter(',')->check(CLI::Range(1, 9));
  app.add_option("--cache", cache, "directory for reusable checkpoints");
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

  World w;
  if (!cache.empty()) {
    fs::create_directories(cache);
    w.cache = fs::path(cache);
  }
  const std::vector<std::pair<int, std::function<void()>>> steps{
      {1, [] { criterion_autodiff(); }},
      {2, [] { criterion_ssm(); }},
      {3, [] { criterion_diffusion(); }},
      {4, [&] { criterion_cvae_losses(w); }},
      {9, [&] { criterion_metrics(w); }},
      {5, [&] { criterion_contrastive(w); }},
      {8, [&] { criterion_generation(w); }},
      {7, [&] { criterion_speed(w); }},
      {6, [&] { criterion_token_size(w); }},
  };
  bool initialised = false;
  for (const auto& [id, fn] : steps) {
    if (!wanted(id)) continue;
    if (id >= 4 && !initialised) {
      w.init();
      initialised = true;
    }
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("threw: ") + e.what());
    }
  }

  std::sort(results.begin(), results.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  std::printf("\nsummary (%.0fs)\n", now());
  int failed = 0;
  for (const auto& r : results) {
    std::printf("%s %d %s\n", r.pass ? "PASS" : "FAIL", r.id, r.detail.c_str());
    failed += !r.pass;
  }
  return failed == 0 ? 0 : 1;
}
