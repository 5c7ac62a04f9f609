#include "ardhoi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "ardhoi/cvae.hpp"
#include "ardhoi/encoders.hpp"

namespace ardhoi {

namespace {

using Mat = Eigen::MatrixXd;

Mat to_matrix(const Embeddings& e) {
  const int n = static_cast<int>(e.size()), d = static_cast<int>(e.front().size());
  Mat m(n, d);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(e[i].size()) != d) throw std::invalid_argument("embeddings differ in width");
    for (int j = 0; j < d; ++j) m(i, j) = e[i][j];
  }
  return m;
}

Mat sqrt_psd(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

double dist(const Embedding& a, const Embedding& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

void check_pairs(const Embeddings& texts, const Embeddings& motions) {
  if (texts.size() != motions.size()) throw std::invalid_argument("text and motion sets differ in size");
}

Stat stat_of(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

double frame_speed(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += norm(a[j] - b[j]);
  return s / static_cast<double>(a.size());
}

}  // namespace

std::vector<double> sqrt_psd(std::span<const double> m, int n) {
  if (static_cast<int>(m.size()) != n * n) throw std::invalid_argument("sqrt_psd: matrix size mismatch");
  const Mat r = sqrt_psd(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      m.data(), n, n));
  std::vector<double> out(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] = r(i, j);
  return out;
}

double fid(const Embeddings& a, const Embeddings& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("fid: empty embedding set");
  const std::size_t d = a.front().size();
  if (a.size() < d + 1 || b.size() < d + 1)
    throw std::invalid_argument("fid: need at least " + std::to_string(d + 1) + " samples per side, got " +
                                std::to_string(a.size()) + " and " + std::to_string(b.size()));
  auto moments = [](const Mat& x, Eigen::VectorXd& mu, Mat& cov) {
    mu = x.colwise().mean();
    const Mat c = x.rowwise() - mu.transpose();
    cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
  };
  Eigen::VectorXd m1, m2;
  Mat s1, s2;
  moments(to_matrix(a), m1, s1);
  moments(to_matrix(b), m2, s2);
  if (s1.rows() != s2.rows()) throw std::invalid_argument("fid: embedding widths differ");
  // Tr((S1 S2)^1/2) equals Tr((S1^1/2 S2 S1^1/2)^1/2), whose argument is symmetric.
  const Mat r1 = sqrt_psd(s1);
  const Mat cross = sqrt_psd(Mat(r1 * s2 * r1));
  const double v = (m1 - m2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * cross.trace();
  return std::max(0.0, v);
}

namespace {

// For each query, how many pool candidates sit strictly closer than its own motion.
std::vector<int> closer_counts(const Embeddings& texts, const Embeddings& motions, std::uint64_t seed, int pool) {
  check_pairs(texts, motions);
  const int n = static_cast<int>(texts.size());
  if (n < pool) throw std::invalid_argument("r_precision: fewer samples than the pool size");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> out;
  for (int p = 0; p + pool <= n; p += pool) {
    for (int q = p; q < p + pool; ++q) {
      const auto& t = texts[order[q]];
      const double own = dist(t, motions[order[q]]);
      int closer = 0;
      for (int c = p; c < p + pool; ++c)
        if (c != q && dist(t, motions[order[c]]) < own) ++closer;
      out.push_back(closer);
    }
  }
  return out;
}

}  // namespace

std::array<double, 3> r_precision(const Embeddings& texts, const Embeddings& motions, std::uint64_t seed, int pool) {
  if (pool < 3) throw std::invalid_argument("r_precision: pool smaller than k");
  const auto closer = closer_counts(texts, motions, seed, pool);
  std::array<double, 3> hits{};
  for (int c : closer)
    for (int k = 0; k < 3; ++k)
      if (c <= k) hits[k] += 1.0;
  for (auto& h : hits) h /= static_cast<double>(closer.size());
  return hits;
}

double r_precision_at(const Embeddings& texts, const Embeddings& motions, int k, std::uint64_t seed, int pool) {
  if (k < 1 || pool < k) throw std::invalid_argument("r_precision: pool smaller than k");
  const auto closer = closer_counts(texts, motions, seed, pool);
  const auto hits = std::count_if(closer.begin(), closer.end(), [k](int c) { return c < k; });
  return static_cast<double>(hits) / static_cast<double>(closer.size());
}

double multimodal_distance(const Embeddings& texts, const Embeddings& motions) {
  check_pairs(texts, motions);
  if (texts.empty()) throw std::invalid_argument("multimodal_distance: empty set");
  double s = 0.0;
  for (std::size_t i = 0; i < texts.size(); ++i) s += dist(texts[i], motions[i]);
  return s / static_cast<double>(texts.size());
}

double diversity(const Embeddings& motions, std::uint64_t seed, int pairs) {
  const long n = static_cast<long>(motions.size());
  if (n < 2) throw std::invalid_argument("diversity: need at least two samples");
  const long count = std::min<long>(pairs, n * (n - 1) / 2);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<long> pick(0, n - 1);
  double s = 0.0;
  if (count == n * (n - 1) / 2) {
    for (long i = 0; i < n; ++i)
      for (long j = i + 1; j < n; ++j) s += dist(motions[i], motions[j]);
  } else {
    for (long k = 0; k < count; ++k) {
      long i = pick(rng), j = pick(rng);
      while (j == i) j = pick(rng);
      s += dist(motions[i], motions[j]);
    }
  }
  return s / static_cast<double>(count);
}

// ---- physical measures ----------------------------------------------------------

std::vector<int> manipulation_frames(const HoiSequence& seq) {
  std::vector<int> out;
  for (std::size_t f = 1; f < seq.frames.size(); ++f) {
    const auto& a = seq.frames[f - 1];
    const auto& b = seq.frames[f];
    const Quat qa = rot::from_axis_angle(a.object_rotation), qb = rot::from_axis_angle(b.object_rotation);
    const double c = std::fabs(qa.w * qb.w + qa.x * qb.x + qa.y * qb.y + qa.z * qb.z);
    const double angle = 2.0 * std::acos(std::min(1.0, c));
    if (norm(b.object_translation - a.object_translation) > 1e-3 || angle > 1e-3) out.push_back(static_cast<int>(f));
  }
  return out;
}

double boundary_jerk(const HoiSequence& seq, int token_frames) {
  const auto& sk = Skeleton::humanoid();
  std::vector<std::vector<Vec3>> pos;
  for (const auto& f : seq.frames) pos.push_back(forward_kinematics(f, sk));
  std::vector<double> boundary, inside;
  for (std::size_t f = 1; f < pos.size(); ++f) {
    const double v = frame_speed(pos[f], pos[f - 1]);
    (f % static_cast<std::size_t>(token_frames) == 0 ? boundary : inside).push_back(v);
  }
  if (boundary.empty() || inside.empty()) return 1.0;
  const double b = std::accumulate(boundary.begin(), boundary.end(), 0.0) / static_cast<double>(boundary.size());
  const double m = std::accumulate(inside.begin(), inside.end(), 0.0) / static_cast<double>(inside.size());
  constexpr double still = 1e-9;
  if (m < still) return b < still ? 1.0 : std::numeric_limits<double>::infinity();
  return b / m;
}

PhysicalMetrics physical_metrics(const HoiSequence& seq, const ObjectSpec& object, int token_frames) {
  PhysicalMetrics pm;
  const auto frames = manipulation_frames(seq);
  pm.manipulation_frames = static_cast<int>(frames.size());
  if (frames.empty()) {
    pm.contact_mean = std::numeric_limits<double>::quiet_NaN();
  } else {
    double s = 0.0;
    for (int f : frames) s += contact_distances(seq.frames[f], Skeleton::humanoid(), object).nearest();
    pm.contact_mean = s / static_cast<double>(frames.size());
  }
  pm.boundary_jerk = boundary_jerk(seq, token_frames);
  return pm;
}

// ---- evaluator --------------------------------------------------------------------

Evaluator::Evaluator(const EvaluatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  std::mt19937_64 rng(seed);
  const int w = cfg.width;
  chunk_proj_ = nn::Linear(params_, "eval.chunk", cfg.chunk_frames * kFrameDims, w, rng);
  ssm_ = SsmStack(params_, "eval.ssm", SsmConfig{w, cfg.state, 2, cfg.layers}, rng);
  motion_out_ = nn::Linear(params_, "eval.motion_out", w, w, rng);
  text_in_ = nn::Linear(params_, "eval.text_in", kTextDims, 2 * w, rng);
  text_out_ = nn::Linear(params_, "eval.text_out", 2 * w, w, rng);
  mean_.fill(0.0f);
  std_.fill(1.0f);
}

Tensor Evaluator::motion_branch(std::span<const HoiSequence> seqs) const {
  const int cf = cfg_.chunk_frames;
  std::vector<float> rows;
  std::vector<int> resets, counts;
  int total = 0;
  for (const auto& s : seqs) {
    // An empty generation (immediate stop) is scored as one rest frame.
    HoiSequence c = s;
    if (c.frames.empty()) c.frames.emplace_back();
    c = canonicalize(c).sequence;
    const int chunks = (static_cast<int>(c.frames.size()) + cf - 1) / cf;
    resets.push_back(total);
    counts.push_back(chunks);
    for (int k = 0; k < chunks * cf; ++k) {
      const auto& f = c.frames[std::min<std::size_t>(static_cast<std::size_t>(k), c.frames.size() - 1)];
      const auto v = f.flatten();
      for (int i = 0; i < kFrameDims; ++i) rows.push_back((v[i] - mean_[i]) / std_[i]);
    }
    total += chunks;
  }
  const Tensor x = Tensor::from({total, cf * kFrameDims}, std::move(rows));
  const Tensor h = ssm_(chunk_proj_(x), resets);
  const int b = static_cast<int>(seqs.size());
  std::vector<float> pool(static_cast<std::size_t>(b) * total, 0.0f);
  for (int i = 0; i < b; ++i)
    for (int r = 0; r < counts[i]; ++r) pool[static_cast<std::size_t>(i) * total + resets[i] + r] = 1.0f / counts[i];
  return motion_out_(matmul(Tensor::from({b, total}, std::move(pool)), h));
}

Tensor Evaluator::text_branch(std::span<const std::string> texts) const {
  std::vector<float> rows;
  for (const auto& t : texts) {
    const auto e = encode_text(t);
    rows.insert(rows.end(), e.begin(), e.end());
  }
  return text_out_(silu(text_in_(Tensor::from({static_cast<int>(texts.size()), kTextDims}, std::move(rows)))));
}

double Evaluator::train(std::span<const HoiSequence> corpus, std::uint64_t seed) {
  if (corpus.size() < 2) throw std::invalid_argument("evaluator training needs at least two sequences");
  std::vector<HoiSequence> canon;
  for (const auto& s : corpus) canon.push_back(canonicalize(s).sequence);
  const FrameStats st = compute_frame_stats(canon);
  mean_ = st.mean;
  std_ = st.std;

  params_.set_frozen(false);
  Adam opt(params_, AdamConfig{.lr = cfg_.lr, .clip_norm = 1.0f});
  std::mt19937_64 rng(seed);
  std::vector<int> order(canon.size());
  std::iota(order.begin(), order.end(), 0);
  double last = 0.0;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    int batches = 0;
    for (std::size_t lo = 0; lo + 1 < order.size(); lo += static_cast<std::size_t>(cfg_.batch)) {
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg_.batch));
      if (hi - lo < 2) break;
      std::vector<HoiSequence> seqs;
      std::vector<std::string> texts;
      for (std::size_t i = lo; i < hi; ++i) {
        seqs.push_back(canon[order[i]]);
        texts.push_back(canon[order[i]].text);
      }
      const int b = static_cast<int>(seqs.size());
      const Tensor m = motion_branch(seqs);
      const Tensor t = text_branch(texts);
      const Tensor tt = reshape(sum_axis(square(t), 1), {b, 1});
      const Tensor mm = reshape(sum_axis(square(m), 1), {1, b});
      const Tensor logits = -(tt + mm - 2.0f * matmul(t, transpose(m)));
      std::vector<float> eye(static_cast<std::size_t>(b) * b, 0.0f);
      for (int i = 0; i < b; ++i) eye[static_cast<std::size_t>(i) * b + i] = 1.0f;
      const Tensor id = Tensor::from({b, b}, std::move(eye));
      const Tensor rows = sum(id * log(softmax(logits) + 1e-9f));
      const Tensor cols = sum(id * log(softmax(transpose(logits)) + 1e-9f));
      const Tensor loss = -(rows + cols) * (0.5f / static_cast<float>(b));
      loss.backward();
      opt.step();
      total += loss.item();
      ++batches;
    }
    last = total / std::max(1, batches);
  }
  params_.set_frozen(true);
  return last;
}

Embeddings Evaluator::embed_motions(std::span<const HoiSequence> seqs) const {
  NoGradGuard guard;
  Embeddings out;
  constexpr std::size_t chunk = 64;
  for (std::size_t lo = 0; lo < seqs.size(); lo += chunk) {
    const auto part = seqs.subspan(lo, std::min(chunk, seqs.size() - lo));
    const Tensor m = motion_branch(part);
    const auto v = m.to_vector();
    const int w = cfg_.width;
    for (std::size_t i = 0; i < part.size(); ++i) out.emplace_back(v.begin() + i * w, v.begin() + (i + 1) * w);
  }
  return out;
}

Embeddings Evaluator::embed_texts(std::span<const std::string> texts) const {
  NoGradGuard guard;
  Embeddings out;
  if (texts.empty()) return out;
  const auto v = text_branch(texts).to_vector();
  const int w = cfg_.width;
  for (std::size_t i = 0; i < texts.size(); ++i) out.emplace_back(v.begin() + i * w, v.begin() + (i + 1) * w);
  return out;
}

void Evaluator::save(const std::filesystem::path& path) const {
  nlohmann::json meta{{"kind", "evaluator"},
                      {"width", cfg_.width},
                      {"chunk_frames", cfg_.chunk_frames},
                      {"layers", cfg_.layers},
                      {"state", cfg_.state},
                      {"epochs", cfg_.epochs},
                      {"batch", cfg_.batch},
                      {"lr", cfg_.lr},
                      {"frame_mean", mean_},
                      {"frame_std", std_}};
  save_checkpoint(path, params_, meta);
}

Evaluator Evaluator::load(const std::filesystem::path& path) {
  const auto meta = read_checkpoint_meta(path);
  if (meta.value("kind", "") != "evaluator") throw std::runtime_error(path.string() + " is not an evaluator checkpoint");
  EvaluatorConfig cfg;
  cfg.width = meta.at("width");
  cfg.chunk_frames = meta.at("chunk_frames");
  cfg.layers = meta.at("layers");
  cfg.state = meta.at("state");
  cfg.epochs = meta.at("epochs");
  cfg.batch = meta.at("batch");
  cfg.lr = meta.at("lr");
  Evaluator e(cfg);
  load_checkpoint(path, e.params_);
  e.mean_ = meta.at("frame_mean").get<std::array<float, kFrameDims>>();
  e.std_ = meta.at("frame_std").get<std::array<float, kFrameDims>>();
  e.params_.set_frozen(true);
  return e;
}

// ---- reports ------------------------------------------------------------------------

nlohmann::json to_json(const MetricsReport& r) {
  auto s = [](const Stat& x) { return nlohmann::json{{"mean", x.mean}, {"std", x.std}}; };
  return {{"fid", s(r.fid)},
          {"r_precision_top1", s(r.r1)},
          {"r_precision_top2", s(r.r2)},
          {"r_precision_top3", s(r.r3)},
          {"mmd", s(r.mmd)},
          {"diversity", s(r.diversity)},
          {"contact_mean", s(r.contact_mean)},
          {"boundary_jerk", s(r.boundary_jerk)},
          {"runs", r.runs},
          {"samples", r.samples}};
}

MetricsReport evaluate(const Evaluator& evaluator, std::span<const HoiSequence> real,
                       std::span<const HoiSequence> generated, std::span<const ObjectSpec> library,
                       std::uint64_t seed, int runs, int token_frames) {
  if (runs < 1) throw std::invalid_argument("evaluate: need at least one run");
  const Embeddings real_m = evaluator.embed_motions(real);
  const Embeddings gen_m = evaluator.embed_motions(generated);
  std::vector<std::string> prompts;
  for (const auto& g : generated) prompts.push_back(g.text);
  const Embeddings gen_t = evaluator.embed_texts(prompts);

  MetricsReport rep;
  rep.runs = runs;
  rep.samples = static_cast<int>(generated.size());
  const double f = fid(real_m, gen_m);
  const double mmd = multimodal_distance(gen_t, gen_m);
  double contact = 0.0, jerk = 0.0;
  int with_contact = 0;
  for (const auto& g : generated) {
    const auto pm = physical_metrics(g, find_object(library, g.object), token_frames);
    if (!std::isnan(pm.contact_mean)) {
      contact += pm.contact_mean;
      ++with_contact;
    }
    jerk += pm.boundary_jerk;
  }
  contact = with_contact ? contact / with_contact : std::numeric_limits<double>::quiet_NaN();
  jerk /= static_cast<double>(std::max<std::size_t>(1, generated.size()));

  std::vector<double> r1, r2, r3, div;
  for (int r = 0; r < runs; ++r) {
    const std::uint64_t s = seed * 1000003ull + static_cast<std::uint64_t>(r);
    const auto rp = r_precision(gen_t, gen_m, s);
    r1.push_back(rp[0]);
    r2.push_back(rp[1]);
    r3.push_back(rp[2]);
    div.push_back(diversity(gen_m, s));
  }
  rep.fid = {f, 0.0};
  rep.mmd = {mmd, 0.0};
  rep.contact_mean = {contact, 0.0};
  rep.boundary_jerk = {jerk, 0.0};
  rep.r1 = stat_of(r1);
  rep.r2 = stat_of(r2);
  rep.r3 = stat_of(r3);
  rep.diversity = stat_of(div);
  return rep;
}

std::vector<HoiSequence> retrieve(std::span<const HoiSequence> test, std::span<const HoiSequence> train) {
  if (test.empty() || train.empty()) throw std::invalid_argument("retrieve: empty corpus");
  std::vector<std::vector<float>> keys;
  for (const auto& s : train) keys.push_back(encode_text(s.text));
  std::vector<HoiSequence> out;
  for (const auto& q : test) {
    const auto e = encode_text(q.text);
    std::size_t best = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < keys.size(); ++i) {
      double sim = 0.0;
      for (std::size_t k = 0; k < e.size(); ++k) sim += static_cast<double>(e[k]) * keys[i][k];
      if (sim > best_sim) {
        best_sim = sim;
        best = i;
      }
    }
    HoiSequence r = train[best];
    r.text = q.text;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace ardhoi
