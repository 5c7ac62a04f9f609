#include "ardhoi/cvae.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "ardhoi/geometry.hpp"

namespace ardhoi {

int token_count(int frames, int token_frames) { return (frames + token_frames - 1) / token_frames; }

std::vector<Clip> segment(const HoiSequence& seq, int token_frames) {
  if (token_frames < 1) throw std::invalid_argument("token_frames must be positive");
  if (seq.frames.empty()) throw std::invalid_argument("cannot segment an empty sequence");
  const int frames = static_cast<int>(seq.frames.size());
  const int k = token_count(frames, token_frames);
  std::vector<Clip> out;
  out.reserve(static_cast<std::size_t>(k) + 1);
  for (int c = 0; c < k; ++c) {
    Clip clip;
    for (int f = 0; f < token_frames; ++f) clip.push_back(seq.frames[static_cast<std::size_t>(std::min(c * token_frames + f, frames - 1))]);
    out.push_back(std::move(clip));
  }
  out.emplace_back(static_cast<std::size_t>(token_frames), HoiFrame{});
  for (auto& f : out.back()) {
    f.root_translation = {0, 0, 0};
    f.object_translation = {0, 0, 0};
  }
  return out;
}

nlohmann::json to_json(const CvaeConfig& c) {
  return {{"d_l", c.d_l},           {"hidden", c.hidden},         {"blocks", c.blocks},
          {"token_frames", c.token_frames}, {"ssm_state", c.ssm_state}, {"ssm_expand", c.ssm_expand},
          {"alpha", c.alpha},       {"tau", c.tau},               {"lambda_tri", c.lambda_tri},
          {"lambda_kl", c.lambda_kl}, {"lambda_phy", c.lambda_phy}, {"lambda_fk", c.lambda_fk},
          {"lambda_vel", c.lambda_vel}, {"lambda_ovel", c.lambda_ovel}, {"lambda_con", c.lambda_con},
          {"epochs", c.epochs},     {"batch_sequences", c.batch_sequences}, {"batch_triplets", c.batch_triplets},
          {"lr", c.lr}};
}

CvaeConfig cvae_config_from_json(const nlohmann::json& j) {
  CvaeConfig c;
  c.d_l = j.at("d_l");
  c.hidden = j.at("hidden");
  c.blocks = j.at("blocks");
  c.token_frames = j.at("token_frames");
  c.ssm_state = j.at("ssm_state");
  c.ssm_expand = j.at("ssm_expand");
  c.alpha = j.at("alpha");
  c.tau = j.at("tau");
  c.lambda_tri = j.at("lambda_tri");
  c.lambda_kl = j.at("lambda_kl");
  c.lambda_phy = j.at("lambda_phy");
  c.lambda_fk = j.at("lambda_fk");
  c.lambda_vel = j.at("lambda_vel");
  c.lambda_ovel = j.at("lambda_ovel");
  c.lambda_con = j.at("lambda_con");
  c.epochs = j.at("epochs");
  c.batch_sequences = j.at("batch_sequences");
  c.batch_triplets = j.at("batch_triplets");
  c.lr = j.at("lr");
  return c;
}

FrameStats compute_frame_stats(std::span<const HoiSequence> corpus) {
  std::array<double, kFrameDims> s{}, s2{};
  double n = 0;
  for (const auto& seq : corpus)
    for (const auto& f : seq.frames) {
      const auto v = f.flatten();
      for (int i = 0; i < kFrameDims; ++i) {
        s[i] += v[i];
        s2[i] += static_cast<double>(v[i]) * v[i];
      }
      n += 1;
    }
  if (n == 0) throw std::invalid_argument("frame statistics need at least one frame");
  FrameStats st;
  for (int i = 0; i < kFrameDims; ++i) {
    const double m = s[i] / n;
    const double var = std::max(0.0, s2[i] / n - m * m);
    st.mean[i] = static_cast<float>(m);
    st.std[i] = static_cast<float>(std::max(std::sqrt(var), 1e-2));
  }
  return st;
}

// ---- contrastive samples ----------------------------------------------------

namespace {

struct AnchorGeometry {
  std::vector<std::vector<Vec3>> joints;    // per frame
  std::vector<std::vector<double>> dist;    // per frame, per contact joint
  std::vector<int> first, second;           // contact slot per frame
};

AnchorGeometry anchor_geometry(const Clip& anchor, const ObjectSpec& object) {
  const Skeleton& sk = Skeleton::humanoid();
  AnchorGeometry g;
  for (const auto& f : anchor) {
    g.joints.push_back(forward_kinematics(f, sk));
    std::vector<double> d;
    for (int j : sk.contact_joints()) d.push_back(point_object_distance(g.joints.back()[j], f, object));
    std::vector<int> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return d[a] < d[b]; });
    g.first.push_back(idx[0]);
    g.second.push_back(idx.size() > 1 ? idx[1] : idx[0]);
    g.dist.push_back(std::move(d));
  }
  return g;
}

// Object-only candidates keep the human, so the anchor's joints are reused.
ContrastLabel label_with(const AnchorGeometry& g, const Clip& candidate, const ObjectSpec& object, double tau) {
  const Skeleton& sk = Skeleton::humanoid();
  double c1 = 0.0, c2 = 0.0;
  for (std::size_t f = 0; f < candidate.size(); ++f) {
    const auto& cj = sk.contact_joints();
    const double d1 = point_object_distance(g.joints[f][cj[g.first[f]]], candidate[f], object);
    const double d2 = point_object_distance(g.joints[f][cj[g.second[f]]], candidate[f], object);
    c1 = std::max(c1, std::fabs(d1 - g.dist[f][g.first[f]]));
    c2 = std::max(c2, std::fabs(d2 - g.dist[f][g.second[f]]));
  }
  if (c1 >= tau && c2 >= tau) return ContrastLabel::negative;
  if (c1 < tau / 3 && c2 < tau / 3) return ContrastLabel::positive;
  return ContrastLabel::ambiguous;
}

bool same_human(const Clip& a, const Clip& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t f = 0; f < a.size(); ++f)
    if (a[f].root_translation != b[f].root_translation || a[f].joint_rotations != b[f].joint_rotations) return false;
  return true;
}

}  // namespace

ContrastLabel label_candidate(const Clip& anchor, const Clip& candidate, const ObjectSpec& object, double tau) {
  if (!same_human(anchor, candidate)) {
    // General case: recompute the candidate's joints too.
    const Skeleton& sk = Skeleton::humanoid();
    const AnchorGeometry g = anchor_geometry(anchor, object);
    double c1 = 0.0, c2 = 0.0;
    for (std::size_t f = 0; f < candidate.size(); ++f) {
      const auto cd = contact_distances(candidate[f], sk, object);
      c1 = std::max(c1, std::fabs(cd.distance[g.first[f]] - g.dist[f][g.first[f]]));
      c2 = std::max(c2, std::fabs(cd.distance[g.second[f]] - g.dist[f][g.second[f]]));
    }
    if (c1 >= tau && c2 >= tau) return ContrastLabel::negative;
    if (c1 < tau / 3 && c2 < tau / 3) return ContrastLabel::positive;
    return ContrastLabel::ambiguous;
  }
  return label_with(anchor_geometry(anchor, object), candidate, object, tau);
}

std::optional<ContrastiveTriple> make_contrastive_samples(const Clip& anchor, const ObjectSpec& object, double tau,
                                                          std::uint64_t seed) {
  const AnchorGeometry g = anchor_geometry(anchor, object);
  double closest = 1e18;
  for (const auto& d : g.dist) closest = std::min(closest, *std::min_element(d.begin(), d.end()));
  if (closest > 0.2) return std::nullopt;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), coin(0.0, 1.0);
  std::optional<Clip> pos, neg;
  int failures = 0;
  while (!(pos && neg)) {
    Clip cand = anchor;
    ContrastLabel label;
    if (object.vertically_symmetric && coin(rng) < 0.5) {
      const double yaw = std::numbers::pi * u(rng);
      for (auto& f : cand)
        f.object_rotation = rot::to_axis_angle(rot::mul(rot::from_axis_angle(f.object_rotation), rot::about_y(yaw)));
      label = ContrastLabel::positive;
    } else {
      Vec3 off;
      do off = {u(rng), u(rng), u(rng)};
      while (dot(off, off) > 1.0);
      off = 0.1 * off;
      for (auto& f : cand) f.object_translation = f.object_translation + off;
      label = label_with(g, cand, object, tau);
    }
    if (label == ContrastLabel::positive && !pos) {
      pos = std::move(cand);
    } else if (label == ContrastLabel::negative && !neg) {
      neg = std::move(cand);
    } else if (++failures >= 100) {
      return std::nullopt;
    }
  }
  return ContrastiveTriple{anchor, std::move(*pos), std::move(*neg)};
}

// ---- model ----------------------------------------------------------------------

Cvae::Cvae(const CvaeConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  std::mt19937_64 rng(seed);
  for (auto& s : stats_.std) s = 1.0f;
  encoder_ = nn::ResidualMlp(params_, "cvae.encoder", clip_dims() + kPointDims, cfg.hidden, 2 * cfg.d_l, cfg.blocks, rng);
  decoder_ = nn::ResidualMlp(params_, "cvae.decoder", cfg.d_l + kPointDims, cfg.hidden, clip_dims(), cfg.blocks, rng);
  decoder_ssm_ = SsmBlock(params_, "cvae.decoder_ssm", cfg.hidden, cfg.ssm_state, cfg.ssm_expand, rng);
}

std::pair<Tensor, Tensor> Cvae::encode(const Tensor& x, const Tensor& point) const {
  const Tensor h = encoder_(concat({x, point}, 1));
  return {slice(h, 1, 0, cfg_.d_l), slice(h, 1, cfg_.d_l, 2 * cfg_.d_l)};
}

Tensor Cvae::decode(const Tensor& z, const Tensor& point, std::span<const int> starts, ScanMode mode) const {
  const Tensor h = decoder_ssm_(decoder_.trunk(concat({z, point}, 1)), starts, mode);
  return decoder_.head()(h);
}

std::vector<float> Cvae::normalize(const Clip& clip) const {
  if (static_cast<int>(clip.size()) != cfg_.token_frames) throw std::invalid_argument("clip length differs from token_frames");
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(clip_dims()));
  for (const auto& f : clip) {
    const auto v = f.flatten();
    for (int i = 0; i < kFrameDims; ++i) out.push_back((v[i] - stats_.mean[i]) / stats_.std[i]);
  }
  return out;
}

std::vector<HoiFrame> Cvae::denormalize(std::span<const float> values) const {
  std::vector<HoiFrame> out;
  std::array<float, kFrameDims> buf;
  for (std::size_t off = 0; off + kFrameDims <= values.size(); off += kFrameDims) {
    for (int i = 0; i < kFrameDims; ++i) buf[i] = values[off + i] * stats_.std[i] + stats_.mean[i];
    out.push_back(HoiFrame::unflatten(buf));
  }
  return out;
}

Tensor Cvae::denormalize(const Tensor& x) const {
  std::vector<float> s(static_cast<std::size_t>(clip_dims())), m(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = stats_.std[i % kFrameDims];
    m[i] = stats_.mean[i % kFrameDims];
  }
  return x * Tensor::from({clip_dims()}, std::move(s)) + Tensor::from({clip_dims()}, std::move(m));
}

std::vector<std::vector<float>> Cvae::encode_sequence(const HoiSequence& seq, std::span<const float> point) const {
  const auto clips = segment(seq, cfg_.token_frames);
  const int k = static_cast<int>(clips.size()) - 1;
  std::vector<float> x, p;
  for (int c = 0; c < k; ++c) {
    const auto v = normalize(clips[static_cast<std::size_t>(c)]);
    x.insert(x.end(), v.begin(), v.end());
    p.insert(p.end(), point.begin(), point.end());
  }
  NoGradGuard guard;
  const Tensor mu = encode(Tensor::from({k, clip_dims()}, std::move(x)), Tensor::from({k, kPointDims}, std::move(p))).first;
  std::vector<std::vector<float>> out;
  for (int c = 0; c < k; ++c) {
    const auto b = mu.data().begin() + static_cast<std::ptrdiff_t>(c) * cfg_.d_l;
    out.emplace_back(b, b + cfg_.d_l);
  }
  return out;
}

std::vector<HoiFrame> Cvae::decode_tokens(const std::vector<std::vector<float>>& z, std::span<const float> point) const {
  if (z.empty()) return {};
  const int k = static_cast<int>(z.size());
  std::vector<float> zz, p;
  for (const auto& t : z) {
    if (static_cast<int>(t.size()) != cfg_.d_l) throw std::invalid_argument("token width differs from d_l");
    zz.insert(zz.end(), t.begin(), t.end());
    p.insert(p.end(), point.begin(), point.end());
  }
  NoGradGuard guard;
  const int start[1] = {0};
  const Tensor x = decode(Tensor::from({k, cfg_.d_l}, std::move(zz)), Tensor::from({k, kPointDims}, std::move(p)), start);
  return denormalize(x.data());
}

void Cvae::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nlohmann::json meta = extra;
  meta["kind"] = "cvae";
  meta["config"] = to_json(cfg_);
  meta["stats_mean"] = stats_.mean;
  meta["stats_std"] = stats_.std;
  meta["frozen"] = frozen();
  save_checkpoint(path, params_, meta);
}

Cvae Cvae::load(const std::filesystem::path& path) {
  const nlohmann::json meta = read_checkpoint_meta(path);
  if (meta.value("kind", "") != "cvae") throw std::runtime_error(path.string() + " is not a cVAE checkpoint");
  Cvae m(cvae_config_from_json(meta.at("config")), 0);
  load_checkpoint(path, m.params_);
  m.stats_.mean = meta.at("stats_mean").get<std::array<float, kFrameDims>>();
  m.stats_.std = meta.at("stats_std").get<std::array<float, kFrameDims>>();
  m.params_.set_frozen(meta.value("frozen", false));
  return m;
}

// ---- losses -----------------------------------------------------------------------

Tensor safe_norm(const Tensor& x) {
  static const float floor_value = l2norm(Tensor::zeros({1}))[0];
  return l2norm(x) - floor_value;
}

Tensor kl_term(const Tensor& mu, const Tensor& logvar) { return sum(exp(logvar) + square(mu) - 1.0f - logvar); }

Tensor triplet_term(const Tensor& a, const Tensor& p, const Tensor& n, float alpha) {
  return mean(relu(safe_norm(a - p) - safe_norm(a - n) + alpha));
}

Tensor reconstruction_term(const Tensor& x, const Tensor& x_hat) { return mean(safe_norm(x - x_hat)); }

PhysicalTerms physical_terms(const Tensor& gt_frames, const Tensor& pred_frames, std::span<const ObjectSpec* const> objects,
                             std::span<const float> pair_mask) {
  const Skeleton& sk = Skeleton::humanoid();
  const int n = pred_frames.dim(0);
  Tensor jg, dg;
  {
    NoGradGuard guard;
    jg = geo::forward_kinematics(gt_frames, sk);
    dg = geo::contact_distances(jg, gt_frames, sk, objects);
  }
  const Tensor jp = geo::forward_kinematics(pred_frames, sk);
  PhysicalTerms t;
  t.fk = mean(safe_norm(jp - jg));
  t.con = mean(abs(geo::contact_distances(jp, pred_frames, sk, objects) - dg));
  if (n < 2) {
    t.vel = Tensor::scalar(0.0f);
    t.ovel = Tensor::scalar(0.0f);
    return t;
  }
  float pairs = 0.0f;
  for (float m : pair_mask) pairs += m;
  pairs = std::max(pairs, 1.0f);
  const Tensor mask = Tensor::from({n - 1, 1}, std::vector<float>(pair_mask.begin(), pair_mask.end()));
  const Tensor vp = slice(jp, 0, 1, n) - slice(jp, 0, 0, n - 1);
  const Tensor vg = slice(jg, 0, 1, n) - slice(jg, 0, 0, n - 1);
  t.vel = sum(safe_norm(vp - vg) * mask) * (1.0f / (pairs * sk.joint_count()));
  const Tensor op = slice(pred_frames, 1, kHumanDims, kHumanDims + 3);
  const Tensor og = slice(gt_frames, 1, kHumanDims, kHumanDims + 3);
  const Tensor ov = (slice(op, 0, 1, n) - slice(op, 0, 0, n - 1)) - (slice(og, 0, 1, n) - slice(og, 0, 0, n - 1));
  t.ovel = sum(reshape(safe_norm(ov), {n - 1, 1}) * mask) * (1.0f / pairs);
  return t;
}

// ---- training -------------------------------------------------------------------

CvaeData make_cvae_data(std::span<const HoiSequence> corpus, std::span<const ObjectSpec> library,
                        const PointEncoder& encoder) {
  CvaeData d;
  std::map<std::string, std::vector<float>> cache;
  for (const auto& s : corpus) {
    const ObjectSpec& o = find_object(library, s.object);
    auto it = cache.find(o.label);
    if (it == cache.end()) it = cache.emplace(o.label, encoder.encode(o.points)).first;
    d.sequences.push_back(s);
    d.objects.push_back(&o);
    d.points.push_back(it->second);
  }
  return d;
}

std::vector<EncodedTriple> build_triples(const Cvae& model, const CvaeData& data, std::uint64_t seed, int* skipped) {
  std::vector<EncodedTriple> out;
  int skip = 0;
  const int tf = model.config().token_frames;
  for (std::size_t s = 0; s < data.sequences.size(); ++s) {
    const auto clips = segment(data.sequences[s], tf);
    for (std::size_t c = 0; c + 1 < clips.size(); ++c) {
      const std::uint64_t sub = seed * 0x9E3779B97F4A7C15ull + s * 1000003ull + c;
      const auto t = make_contrastive_samples(clips[c], *data.objects[s], model.config().tau, sub);
      if (!t) {
        ++skip;
        continue;
      }
      out.push_back({model.normalize(t->anchor), model.normalize(t->positive), model.normalize(t->negative), data.points[s]});
    }
  }
  if (skipped) *skipped = skip;
  return out;
}

namespace {

struct SeqCache {
  std::vector<float> clips;  // [K, clip_dims] normalised
  std::vector<float> raw;    // [K * tf, 75]
  int tokens = 0;
};

}  // namespace

CvaeTrainReport train_cvae(Cvae& model, const CvaeData& data, std::uint64_t seed, const EpochCallback& on_epoch) {
  const auto t0 = std::chrono::steady_clock::now();
  const CvaeConfig& cfg = model.config();
  const int tf = cfg.token_frames, cd = model.clip_dims();
  if (data.sequences.empty()) throw std::invalid_argument("cVAE training needs at least one sequence");
  model.set_stats(compute_frame_stats(data.sequences));

  std::vector<SeqCache> cache(data.sequences.size());
  for (std::size_t s = 0; s < data.sequences.size(); ++s) {
    const auto clips = segment(data.sequences[s], tf);
    auto& c = cache[s];
    c.tokens = static_cast<int>(clips.size()) - 1;
    for (int k = 0; k < c.tokens; ++k) {
      const auto v = model.normalize(clips[static_cast<std::size_t>(k)]);
      c.clips.insert(c.clips.end(), v.begin(), v.end());
      for (const auto& f : clips[static_cast<std::size_t>(k)]) {
        const auto r = f.flatten();
        c.raw.insert(c.raw.end(), r.begin(), r.end());
      }
    }
  }

  CvaeTrainReport rep;
  std::vector<EncodedTriple> triples;
  if (cfg.lambda_tri > 0.0) triples = build_triples(model, data, seed, &rep.skipped_anchors);
  rep.triplets = static_cast<int>(triples.size());

  model.params().set_frozen(false);
  Adam opt(model.params(), AdamConfig{.lr = cfg.lr, .clip_norm = 1.0f});
  std::mt19937_64 rng(seed ^ 0xC0FFEEull);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::vector<int> order(data.sequences.size());
  std::iota(order.begin(), order.end(), 0);
  const int batches = static_cast<int>((order.size() + cfg.batch_sequences - 1) / cfg.batch_sequences);
  const long total_steps = static_cast<long>(batches) * cfg.epochs;
  long step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0, e_rec = 0, e_kl = 0, e_tri = 0, e_phy = 0;
    for (int b = 0; b < batches; ++b) {
      const double progress = static_cast<double>(step++) / std::max<long>(1, total_steps);
      opt.set_lr(static_cast<float>(cfg.lr * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)))));
      std::vector<float> x, pts, raw, mask;
      std::vector<int> starts;
      std::vector<const ObjectSpec*> objs;
      int rows = 0;
      const std::size_t lo = static_cast<std::size_t>(b) * cfg.batch_sequences;
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_sequences);
      for (std::size_t i = lo; i < hi; ++i) {
        const int s = order[i];
        const auto& c = cache[static_cast<std::size_t>(s)];
        starts.push_back(rows);
        rows += c.tokens;
        x.insert(x.end(), c.clips.begin(), c.clips.end());
        raw.insert(raw.end(), c.raw.begin(), c.raw.end());
        for (int k = 0; k < c.tokens; ++k) pts.insert(pts.end(), data.points[s].begin(), data.points[s].end());
        const int frames = c.tokens * tf;
        for (int f = 0; f < frames; ++f) {
          objs.push_back(data.objects[s]);
          if (!mask.empty() || f > 0 || i > lo) mask.push_back(f == 0 ? 0.0f : 1.0f);
        }
      }
      const int nframes = rows * tf;
      const Tensor xt = Tensor::from({rows, cd}, std::move(x));
      const Tensor pt = Tensor::from({rows, kPointDims}, std::move(pts));
      const auto [mu, logvar] = model.encode(xt, pt);
      std::vector<float> eps(static_cast<std::size_t>(rows) * cfg.d_l);
      for (auto& e : eps) e = gauss(rng);
      const Tensor z = mu + exp(logvar * 0.5f) * Tensor::from({rows, cfg.d_l}, std::move(eps));
      const Tensor xh = model.decode(z, pt, starts);

      const Tensor rec = reconstruction_term(xt, xh);
      const Tensor kl = kl_term(mu, logvar) * (1.0f / static_cast<float>(starts.size()));
      const Tensor gt = Tensor::from({nframes, kFrameDims}, std::move(raw));
      const Tensor pred = reshape(model.denormalize(xh), {nframes, kFrameDims});
      const PhysicalTerms ph = physical_terms(gt, pred, objs, mask);
      const Tensor phy = ph.fk * static_cast<float>(cfg.lambda_fk) + ph.vel * static_cast<float>(cfg.lambda_vel) +
                         ph.ovel * static_cast<float>(cfg.lambda_ovel) + ph.con * static_cast<float>(cfg.lambda_con);
      Tensor loss = rec + kl * static_cast<float>(cfg.lambda_kl) + phy * static_cast<float>(cfg.lambda_phy);

      if (!triples.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, triples.size() - 1);
        const int nt = cfg.batch_triplets;
        std::vector<float> ta, tp;
        ta.reserve(static_cast<std::size_t>(3 * nt) * cd);
        std::vector<const EncodedTriple*> chosen;
        for (int i = 0; i < nt; ++i) chosen.push_back(&triples[pick(rng)]);
        for (int part = 0; part < 3; ++part)
          for (const auto* t : chosen) {
            const auto& v = part == 0 ? t->anchor : part == 1 ? t->positive : t->negative;
            ta.insert(ta.end(), v.begin(), v.end());
            tp.insert(tp.end(), t->point.begin(), t->point.end());
          }
        const Tensor m = model.encode(Tensor::from({3 * nt, cd}, std::move(ta)), Tensor::from({3 * nt, kPointDims}, std::move(tp))).first;
        const Tensor tri = triplet_term(slice(m, 0, 0, nt), slice(m, 0, nt, 2 * nt), slice(m, 0, 2 * nt, 3 * nt),
                                        static_cast<float>(cfg.alpha));
        loss = loss + tri * static_cast<float>(cfg.lambda_tri);
        e_tri += tri.item();
      }
      loss.backward();
      opt.step();
      epoch_loss += loss.item();
      e_rec += rec.item();
      e_kl += kl.item();
      e_phy += phy.item();
    }
    rep.epoch_loss.push_back(epoch_loss / batches);
    rep.rec = e_rec / batches;
    rep.kl = e_kl / batches;
    rep.tri = e_tri / batches;
    rep.phy = e_phy / batches;
    if (on_epoch) on_epoch(epoch, rep.epoch_loss.back());
  }
  model.params().set_frozen(true);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

double separation_ratio(const Cvae& model, std::span<const EncodedTriple> triples) {
  if (triples.empty()) throw std::invalid_argument("separation ratio needs triples");
  NoGradGuard guard;
  const int cd = model.clip_dims(), dl = model.config().d_l;
  double dp = 0.0, dn = 0.0;
  const std::size_t chunk = 256;
  for (std::size_t lo = 0; lo < triples.size(); lo += chunk) {
    const std::size_t hi = std::min(triples.size(), lo + chunk);
    const int n = static_cast<int>(hi - lo);
    std::vector<float> x, p;
    for (int part = 0; part < 3; ++part)
      for (std::size_t i = lo; i < hi; ++i) {
        const auto& v = part == 0 ? triples[i].anchor : part == 1 ? triples[i].positive : triples[i].negative;
        x.insert(x.end(), v.begin(), v.end());
        p.insert(p.end(), triples[i].point.begin(), triples[i].point.end());
      }
    const Tensor mu = model.encode(Tensor::from({3 * n, cd}, std::move(x)), Tensor::from({3 * n, kPointDims}, std::move(p))).first;
    for (int i = 0; i < n; ++i) {
      double a2p = 0, a2n = 0;
      for (int k = 0; k < dl; ++k) {
        const double a = mu[static_cast<std::size_t>(i) * dl + k];
        const double q = mu[static_cast<std::size_t>(n + i) * dl + k];
        const double r = mu[static_cast<std::size_t>(2 * n + i) * dl + k];
        a2p += (a - q) * (a - q);
        a2n += (a - r) * (a - r);
      }
      dp += std::sqrt(a2p);
      dn += std::sqrt(a2n);
    }
  }
  return dp > 0 ? dn / dp : std::numeric_limits<double>::infinity();
}

double reconstruction_mse(const Cvae& model, const CvaeData& data) {
  NoGradGuard guard;
  double se = 0.0;
  std::size_t count = 0;
  const int cd = model.clip_dims();
  for (std::size_t s = 0; s < data.sequences.size(); ++s) {
    const auto clips = segment(data.sequences[s], model.config().token_frames);
    const int k = static_cast<int>(clips.size()) - 1;
    std::vector<float> x, p;
    for (int c = 0; c < k; ++c) {
      const auto v = model.normalize(clips[static_cast<std::size_t>(c)]);
      x.insert(x.end(), v.begin(), v.end());
      p.insert(p.end(), data.points[s].begin(), data.points[s].end());
    }
    const Tensor xt = Tensor::from({k, cd}, std::move(x));
    const Tensor pt = Tensor::from({k, kPointDims}, std::move(p));
    const int start[1] = {0};
    const Tensor xh = model.decode(model.encode(xt, pt).first, pt, start);
    for (std::size_t i = 0; i < xt.size(); ++i) {
      const double d = xt[i] - xh[i];
      se += d * d;
    }
    count += xt.size();
  }
  return count ? se / count : 0.0;
}

}  // namespace ardhoi
