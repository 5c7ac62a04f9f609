#include "ardhoi/ardm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace ardhoi {

namespace {

const char* context_kind_name(ContextKind k) { return k == ContextKind::ssm ? "ssm" : "transformer"; }
const char* denoiser_kind_name(DenoiserKind k) { return k == DenoiserKind::mlp ? "mlp" : "transformer"; }

}  // namespace

nlohmann::json to_json(const ArdmConfig& c) {
  return {{"context_d", c.context.d},
          {"context_state", c.context.state},
          {"context_expand", c.context.expand},
          {"context_layers", c.context.layers},
          {"context_kind", context_kind_name(c.context_kind)},
          {"denoiser_kind", denoiser_kind_name(c.denoiser_kind)},
          {"mse_regressor", c.mse_regressor},
          {"denoiser_hidden", c.denoiser_hidden},
          {"denoiser_blocks", c.denoiser_blocks},
          {"T_steps", c.diffusion.steps},
          {"ddim_steps", c.diffusion.ddim_steps},
          {"beta_min", c.diffusion.beta_min},
          {"beta_max", c.diffusion.beta_max},
          {"xi", c.diffusion.xi},
          {"p_uncond", c.diffusion.p_uncond},
          {"epochs", c.epochs},
          {"batch_sequences", c.batch_sequences},
          {"lr", c.lr}};
}

ArdmConfig ardm_config_from_json(const nlohmann::json& j) {
  ArdmConfig c;
  c.context.d = j.at("context_d");
  c.context.state = j.at("context_state");
  c.context.expand = j.at("context_expand");
  c.context.layers = j.at("context_layers");
  c.context_kind = j.at("context_kind") == "ssm" ? ContextKind::ssm : ContextKind::transformer;
  c.denoiser_kind = j.at("denoiser_kind") == "mlp" ? DenoiserKind::mlp : DenoiserKind::transformer;
  c.mse_regressor = j.at("mse_regressor");
  c.denoiser_hidden = j.at("denoiser_hidden");
  c.denoiser_blocks = j.at("denoiser_blocks");
  c.diffusion.steps = j.at("T_steps");
  c.diffusion.ddim_steps = j.at("ddim_steps");
  c.diffusion.beta_min = j.at("beta_min");
  c.diffusion.beta_max = j.at("beta_max");
  c.diffusion.xi = j.at("xi");
  c.diffusion.p_uncond = j.at("p_uncond");
  c.epochs = j.at("epochs");
  c.batch_sequences = j.at("batch_sequences");
  c.lr = j.at("lr");
  return c;
}

Ardm::Ardm(const ArdmConfig& cfg, int latent_dims, std::uint64_t seed)
    : cfg_(cfg), latent_(latent_dims), schedule_(cfg.diffusion) {
  std::mt19937_64 rng(seed);
  context_ = make_context_encoder(cfg.context_kind, params_, kTextDims, kPointDims, token_dims(), cfg.context, rng);
  if (cfg.mse_regressor) {
    regressor_.emplace(params_, "regressor", cfg.context.d, cfg.denoiser_hidden, token_dims(), cfg.denoiser_blocks, rng);
  } else {
    denoiser_ = make_denoiser(cfg.denoiser_kind, params_, token_dims(), cfg.context.d, cfg.denoiser_hidden,
                              cfg.denoiser_blocks, rng);
  }
  stats_.mean.assign(static_cast<std::size_t>(latent_dims), 0.0f);
  stats_.std.assign(static_cast<std::size_t>(latent_dims), 1.0f);
}

std::vector<float> Ardm::to_token(std::span<const float> latent) const {
  std::vector<float> t(static_cast<std::size_t>(token_dims()));
  for (int i = 0; i < latent_; ++i) t[i] = (latent[i] - stats_.mean[i]) / stats_.std[i];
  t[latent_] = 1.0f;
  return t;
}

std::vector<float> Ardm::to_latent(std::span<const float> token) const {
  std::vector<float> z(static_cast<std::size_t>(latent_));
  for (int i = 0; i < latent_; ++i) z[i] = token[i] * stats_.std[i] + stats_.mean[i];
  return z;
}

std::vector<float> Ardm::null_token() const { return std::vector<float>(static_cast<std::size_t>(token_dims()), 0.0f); }

Tensor Ardm::regress(const Tensor& cond) const {
  if (!regressor_) throw std::logic_error("model has no regressor head");
  return (*regressor_)(cond);
}

void Ardm::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nlohmann::json meta = extra;
  meta["kind"] = "ardm";
  meta["config"] = to_json(cfg_);
  meta["latent_dims"] = latent_;
  meta["token_mean"] = stats_.mean;
  meta["token_std"] = stats_.std;
  save_checkpoint(path, params_, meta);
}

Ardm Ardm::load(const std::filesystem::path& path) {
  const nlohmann::json meta = read_checkpoint_meta(path);
  if (meta.value("kind", "") != "ardm") throw std::runtime_error(path.string() + " is not an ARDM checkpoint");
  Ardm m(ardm_config_from_json(meta.at("config")), meta.at("latent_dims").get<int>(), 0);
  load_checkpoint(path, m.params_);
  m.stats_.mean = meta.at("token_mean").get<std::vector<float>>();
  m.stats_.std = meta.at("token_std").get<std::vector<float>>();
  return m;
}

// ---- training -------------------------------------------------------------------

ArdmTrainReport train_ardm(Ardm& model, const Cvae& cvae, const CvaeData& data, std::uint64_t seed,
                           const EpochCallback& on_epoch) {
  if (!cvae.frozen()) throw std::logic_error("ARDM training requires a frozen cVAE");
  if (cvae.config().d_l != model.latent_dims()) throw std::invalid_argument("cVAE latent width differs from the ARDM token width");
  if (data.sequences.empty()) throw std::invalid_argument("ARDM training needs at least one sequence");
  const auto t0 = std::chrono::steady_clock::now();
  const ArdmConfig& cfg = model.config();
  const int dl = model.latent_dims(), td = model.token_dims();

  // Posterior means of every content clip, then their per-dimension statistics.
  std::vector<std::vector<std::vector<float>>> latents;
  std::vector<double> s(static_cast<std::size_t>(dl), 0.0), s2(static_cast<std::size_t>(dl), 0.0);
  double n = 0;
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    latents.push_back(cvae.encode_sequence(data.sequences[i], data.points[i]));
    for (const auto& z : latents.back()) {
      for (int k = 0; k < dl; ++k) {
        s[k] += z[k];
        s2[k] += static_cast<double>(z[k]) * z[k];
      }
      n += 1;
    }
  }
  TokenStats st;
  for (int k = 0; k < dl; ++k) {
    const double m = s[k] / n;
    st.mean.push_back(static_cast<float>(m));
    st.std.push_back(static_cast<float>(std::max(std::sqrt(std::max(0.0, s2[k] / n - m * m)), 1e-3)));
  }
  model.set_token_stats(st);

  std::vector<std::vector<float>> targets(data.sequences.size());
  std::vector<std::vector<float>> texts(data.sequences.size());
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    for (const auto& z : latents[i]) {
      const auto t = model.to_token(z);
      targets[i].insert(targets[i].end(), t.begin(), t.end());
    }
    const auto nt = model.null_token();
    targets[i].insert(targets[i].end(), nt.begin(), nt.end());
    texts[i] = encode_text(data.sequences[i].text);
  }

  model.params().set_frozen(false);
  Adam opt(model.params(), AdamConfig{.lr = cfg.lr, .clip_norm = 1.0f});
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::uniform_int_distribution<int> tdist(1, model.schedule().steps());
  std::vector<int> order(data.sequences.size());
  std::iota(order.begin(), order.end(), 0);
  const int batches = static_cast<int>((order.size() + cfg.batch_sequences - 1) / cfg.batch_sequences);
  const long total_steps = static_cast<long>(batches) * cfg.epochs;
  long step = 0;
  ArdmTrainReport rep;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (int b = 0; b < batches; ++b) {
      const double progress = static_cast<double>(step++) / std::max<long>(1, total_steps);
      opt.set_lr(static_cast<float>(cfg.lr * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)))));
      ContextBatch cb;
      std::vector<float> prefix, target;
      std::vector<int> starts;
      int rows = 0;
      const std::size_t lo = static_cast<std::size_t>(b) * cfg.batch_sequences;
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_sequences);
      for (std::size_t i = lo; i < hi; ++i) {
        const auto idx = static_cast<std::size_t>(order[i]);
        const int k = static_cast<int>(latents[idx].size());
        cb.text.push_back(cfg_dropout(texts[idx], cfg.diffusion.p_uncond, rng));
        cb.point.push_back(data.points[idx]);
        cb.token_counts.push_back(k);
        // Context sees s_1..s_K; the targets are s_1..s_K and the null token.
        prefix.insert(prefix.end(), targets[idx].begin(), targets[idx].begin() + static_cast<std::ptrdiff_t>(k) * td);
        target.insert(target.end(), targets[idx].begin(), targets[idx].end());
        starts.push_back(rows);
        rows += k + 1;
      }
      const int prefix_rows = static_cast<int>(prefix.size() / td);
      cb.tokens = Tensor::from({prefix_rows, td}, std::move(prefix));
      const Tensor cond = model.context().encode(cb);
      const Tensor tgt = Tensor::from({rows, td}, std::move(target));
      Tensor loss;
      if (cfg.mse_regressor) {
        loss = mean(square(model.regress(cond) - tgt));
      } else {
        std::vector<int> steps(static_cast<std::size_t>(rows));
        for (auto& t : steps) t = tdist(rng);
        std::vector<float> eps(static_cast<std::size_t>(rows) * td);
        for (auto& e : eps) e = gauss(rng);
        const Tensor noisy = model.schedule().q_sample(tgt, steps, Tensor::from({rows, td}, std::move(eps)));
        loss = mean(safe_norm(model.denoiser().predict(noisy, steps, cond, starts) - tgt));
      }
      loss.backward();
      opt.step();
      epoch_loss += loss.item();
    }
    rep.epoch_loss.push_back(epoch_loss / batches);
    if (on_epoch) on_epoch(epoch, rep.epoch_loss.back());
  }
  model.params().set_frozen(true);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ---- generation -----------------------------------------------------------------

const char* stop_reason_name(StopReason r) { return r == StopReason::null_token ? "null-token" : "max-length"; }

void trim_padding(std::vector<HoiFrame>& frames, int token_frames, int min_frames) {
  const int n = static_cast<int>(frames.size());
  if (n < 3) return;
  auto step = [&](int f) {
    const auto a = frames[static_cast<std::size_t>(f)].flatten();
    const auto b = frames[static_cast<std::size_t>(f - 1)].flatten();
    double s = 0.0;
    for (int i = 0; i < kFrameDims; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  std::vector<double> d;
  for (int f = 1; f < n; ++f) d.push_back(step(f));
  std::vector<double> sorted = d;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double thresh = 0.1 * sorted[sorted.size() / 2];
  const int floor = std::max(min_frames, ((n - 1) / token_frames) * token_frames + 1);
  int keep = n;
  while (keep > floor && d[static_cast<std::size_t>(keep - 2)] <= thresh) --keep;
  frames.resize(static_cast<std::size_t>(keep));
}

GenResult generate(const Ardm& model, const Cvae& cvae, const PointEncoder& points, const GenRequest& req) {
  if (!req.object) throw std::invalid_argument("generation request has no object");
  const int tf = cvae.config().token_frames;
  const int cap = kMaxFrames / tf;
  const int max_tokens = req.max_tokens > 0 ? req.max_tokens : cap;
  if (max_tokens * tf > kMaxFrames) throw std::invalid_argument("max_tokens exceeds the 240-frame cap");
  const int min_tokens = std::min(max_tokens, (kMinFrames + tf - 1) / tf);
  const double xi = req.xi.value_or(model.config().diffusion.xi);
  const int td = model.token_dims();

  const std::vector<float> text = encode_text(req.text);
  const std::vector<float> null_text(text.size(), 0.0f);
  const std::vector<float> pt = points.encode(req.object->points);

  GenResult res;
  for (const auto& clip : req.initial_clips) {
    HoiSequence tmp;
    tmp.frames = clip;
    if (static_cast<int>(clip.size()) != tf) throw std::invalid_argument("initial clips must have token_frames frames");
    res.tokens.push_back(model.to_token(cvae.encode_sequence(tmp, pt).front()));
  }
  for (const auto& t : req.initial_tokens) {
    if (static_cast<int>(t.size()) != td) throw std::invalid_argument("initial token width differs from the model");
    res.tokens.push_back(t);
  }
  if (static_cast<int>(res.tokens.size()) > max_tokens) throw std::invalid_argument("initial state exceeds the maximum length");

  const ContextEncoder& ctx = model.context();
  const bool guided = xi != 1.0;
  ContextState cs = ctx.start(text, pt);
  ContextState us = guided ? ctx.start(null_text, pt) : ContextState{};
  std::vector<float> cprefix = cs.condition, uprefix = us.condition;
  auto advance = [&](const std::vector<float>& tok) {
    ctx.advance(cs, tok);
    cprefix.insert(cprefix.end(), cs.condition.begin(), cs.condition.end());
    if (guided) {
      ctx.advance(us, tok);
      uprefix.insert(uprefix.end(), us.condition.begin(), us.condition.end());
    }
  };
  for (const auto& t : res.tokens) advance(t);

  res.stop_reason = StopReason::max_length;
  const int w = ctx.width();
  while (static_cast<int>(res.tokens.size()) < max_tokens) {
    const int position = static_cast<int>(res.tokens.size()) + 1;
    std::seed_seq sq{static_cast<std::uint32_t>(req.seed), static_cast<std::uint32_t>(req.seed >> 32),
                     static_cast<std::uint32_t>(position)};
    std::mt19937_64 rng(sq);
    std::normal_distribution<float> gauss(0.0f, 1.0f);
    std::vector<float> noise(static_cast<std::size_t>(td));
    for (auto& v : noise) v = gauss(rng);

    std::vector<float> tok;
    if (model.config().mse_regressor && !req.oracle) {
      NoGradGuard guard;
      const auto c = model.regress(Tensor::from({1, w}, cs.condition)).to_vector();
      if (guided) {
        const auto u = model.regress(Tensor::from({1, w}, us.condition)).to_vector();
        tok.resize(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) tok[i] = static_cast<float>(xi * c[i] + (1.0 - xi) * u[i]);
      } else {
        tok = c;
      }
    } else {
      const int rows = position;
      const Tensor cmem = Tensor::from({rows, w}, cprefix);
      const Tensor umem = guided ? Tensor::from({rows, w}, uprefix) : Tensor();
      const PredictFn fn = [&](std::span<const float> z, int t, bool conditional) {
        if (req.oracle) return req.oracle(position, z, t, conditional);
        return model.denoiser().predict_one(z, t, conditional ? cmem : umem);
      };
      tok = ddim_sample(model.schedule(), noise, fn, xi);
    }

    if (req.stop_on_null && tok[static_cast<std::size_t>(td - 1)] < 0.5f) {
      // Stops before the 60-frame minimum are overruled.
      if (static_cast<int>(res.tokens.size()) >= min_tokens) {
        res.stop_reason = StopReason::null_token;
        break;
      }
    }
    tok[static_cast<std::size_t>(td - 1)] = 1.0f;
    res.tokens.push_back(tok);
    if (static_cast<int>(res.tokens.size()) < max_tokens) advance(tok);
  }

  res.token_count = static_cast<int>(res.tokens.size());
  res.sequence.text = req.text;
  res.sequence.object = req.object->label;
  res.sequence.fps = kFps;
  if (res.tokens.empty()) return res;
  std::vector<std::vector<float>> latents;
  for (const auto& t : res.tokens) latents.push_back(model.to_latent(t));
  std::vector<HoiFrame> frames = cvae.decode_tokens(latents, pt);
  // Only a sequence that ended on its own can carry tail padding.
  if (res.stop_reason == StopReason::null_token)
    trim_padding(frames, tf, std::min(kMinFrames, static_cast<int>(frames.size())));
  res.sequence.frames = std::move(frames);
  res.sequence = canonicalize(res.sequence).sequence;
  normalize_rotations(res.sequence);
  return res;
}

}  // namespace ardhoi
