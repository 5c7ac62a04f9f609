#include "ardhoi/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ardhoi {

NoiseSchedule::NoiseSchedule(const DiffusionConfig& cfg) : steps_(cfg.steps) {
  if (cfg.steps < 1 || cfg.ddim_steps < 1 || cfg.ddim_steps > cfg.steps)
    throw std::invalid_argument("invalid diffusion step counts");
  if (!(cfg.beta_min > 0.0 && cfg.beta_max < 1.0 && cfg.beta_min <= cfg.beta_max))
    throw std::invalid_argument("beta range must satisfy 0 < beta_min <= beta_max < 1");
  beta_.assign(static_cast<std::size_t>(steps_) + 1, 0.0);
  alpha_bar_.assign(static_cast<std::size_t>(steps_) + 1, 1.0);
  for (int t = 1; t <= steps_; ++t) {
    const double frac = steps_ > 1 ? static_cast<double>(t - 1) / (steps_ - 1) : 0.0;
    beta_[t] = cfg.beta_min + frac * (cfg.beta_max - cfg.beta_min);
    alpha_bar_[t] = alpha_bar_[t - 1] * (1.0 - beta_[t]);
    if (!(alpha_bar_[t] < alpha_bar_[t - 1])) throw std::logic_error("alpha_bar is not strictly decreasing");
  }
  for (int k = cfg.ddim_steps; k >= 1; --k)
    ddim_.push_back(static_cast<int>(std::lround(static_cast<double>(k) * steps_ / cfg.ddim_steps)));
}

void NoiseSchedule::check_step(int t) const {
  if (t < 0 || t > steps_) throw std::out_of_range("diffusion step " + std::to_string(t) + " outside [0, " + std::to_string(steps_) + "]");
}

double NoiseSchedule::alpha_bar(int t) const {
  check_step(t);
  return alpha_bar_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::beta(int t) const {
  check_step(t);
  return beta_[static_cast<std::size_t>(t)];
}

std::vector<float> NoiseSchedule::q_sample(std::span<const float> s0, int t, std::span<const float> eps) const {
  const double ab = alpha_bar(t);
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  std::vector<float> out(s0.size());
  for (std::size_t i = 0; i < s0.size(); ++i) out[i] = static_cast<float>(a * s0[i] + b * eps[i]);
  return out;
}

Tensor NoiseSchedule::q_sample(const Tensor& s0, std::span<const int> t, const Tensor& eps) const {
  const int rows = s0.dim(0);
  if (static_cast<int>(t.size()) != rows) throw ShapeError("q_sample: one step per row required");
  std::vector<float> a(static_cast<std::size_t>(rows)), b(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const double ab = alpha_bar(t[static_cast<std::size_t>(r)]);
    a[static_cast<std::size_t>(r)] = static_cast<float>(std::sqrt(ab));
    b[static_cast<std::size_t>(r)] = static_cast<float>(std::sqrt(1.0 - ab));
  }
  return s0 * Tensor::from({rows, 1}, std::move(a)) + eps * Tensor::from({rows, 1}, std::move(b));
}

std::vector<float> NoiseSchedule::q_step(std::span<const float> prev, int t, std::span<const float> eps) const {
  if (t < 1) throw std::out_of_range("q_step needs t >= 1");
  const double bt = beta(t);
  std::vector<float> out(prev.size());
  for (std::size_t i = 0; i < prev.size(); ++i)
    out[i] = static_cast<float>(std::sqrt(1.0 - bt) * prev[i] + std::sqrt(bt) * eps[i]);
  return out;
}

std::vector<float> cfg_dropout(std::span<const float> text, double p, std::mt19937_64& rng) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("p_uncond must lie in [0, 1]");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < p) return std::vector<float>(text.size(), 0.0f);
  return {text.begin(), text.end()};
}

std::vector<float> ddim_sample(const NoiseSchedule& schedule, std::span<const float> noise, const PredictFn& predict,
                               double xi, GuidanceTrace* trace) {
  std::vector<float> z(noise.begin(), noise.end());
  const auto& seq = schedule.ddim_steps();
  std::vector<float> x0(z.size());
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const int t = seq[k];
    const int next = k + 1 < seq.size() ? seq[k + 1] : 0;
    const std::vector<float> c = predict(z, t, true);
    std::vector<float> u;
    if (xi != 1.0) u = predict(z, t, false);
    for (std::size_t i = 0; i < z.size(); ++i)
      x0[i] = xi == 1.0 ? c[i] : static_cast<float>(xi * c[i] + (1.0 - xi) * u[i]);
    if (trace) trace->steps.push_back({t, c, u, x0});
    const double ab = schedule.alpha_bar(t), abn = schedule.alpha_bar(next);
    const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
    const double na = std::sqrt(abn), nb = std::sqrt(1.0 - abn);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double eps = (z[i] - sa * x0[i]) / sb;
      z[i] = static_cast<float>(na * x0[i] + nb * eps);
    }
  }
  // The last update lands on t = 0 where alpha_bar = 1, i.e. on x0 itself.
  return x0;
}

// ---- MLP denoiser -------------------------------------------------------------

MlpDenoiser::MlpDenoiser(ParamStore& store, int token_dims, int cond_dims, int hidden, int blocks, std::mt19937_64& rng)
    : time_proj_(store, "denoiser.time_proj", kTimeEmbedDims, cond_dims, rng),
      net_(store, "denoiser.mlp", token_dims + cond_dims, hidden, token_dims, blocks, rng) {}

Tensor MlpDenoiser::forward(const Tensor& noisy, std::span<const int> steps, const Tensor& cond) const {
  const Tensor c = cond + time_proj_(nn::timestep_embedding(steps, kTimeEmbedDims));
  return net_(concat({noisy, c}, 1));
}

Tensor MlpDenoiser::predict(const Tensor& noisy, std::span<const int> steps, const Tensor& cond,
                            std::span<const int>) const {
  return forward(noisy, steps, cond);
}

std::vector<float> MlpDenoiser::predict_one(std::span<const float> noisy, int step, const Tensor& cond_prefix) const {
  NoGradGuard guard;
  const int n = cond_prefix.dim(0);
  const int t[1] = {step};
  const Tensor z = Tensor::from({1, static_cast<int>(noisy.size())}, std::vector<float>(noisy.begin(), noisy.end()));
  return forward(z, t, slice(cond_prefix, 0, n - 1, n)).to_vector();
}

// ---- cross-attention denoiser -------------------------------------------------

TransformerDenoiser::TransformerDenoiser(ParamStore& store, int token_dims, int cond_dims, int width, int ff, int layers,
                                         int heads, std::mt19937_64& rng)
    : width_(width), heads_(heads) {
  in_proj_ = nn::Linear(store, "denoiser.in_proj", token_dims, width, rng);
  time_proj_ = nn::Linear(store, "denoiser.time_proj", kTimeEmbedDims, width, rng);
  mem_proj_ = nn::Linear(store, "denoiser.mem_proj", cond_dims, width, rng);
  mem_norm_ = nn::LayerNorm(store, "denoiser.mem_norm", width);
  for (int l = 0; l < layers; ++l) {
    const std::string n = "denoiser.layer" + std::to_string(l);
    Layer ly;
    ly.ln_q = nn::LayerNorm(store, n + ".ln_q", width);
    ly.q = nn::Linear(store, n + ".q", width, width, rng);
    ly.kv = nn::Linear(store, n + ".kv", width, 2 * width, rng);
    ly.proj = nn::Linear(store, n + ".proj", width, width, rng);
    ly.ln_ff = nn::LayerNorm(store, n + ".ln_ff", width);
    ly.ff1 = nn::Linear(store, n + ".ff1", width, ff, rng);
    ly.ff2 = nn::Linear(store, n + ".ff2", ff, width, rng);
    layers_.push_back(std::move(ly));
  }
  out_norm_ = nn::LayerNorm(store, "denoiser.out_norm", width);
  out_proj_ = nn::Linear(store, "denoiser.out_proj", width, token_dims, rng);
}

namespace {

// Query row r of [Q, w] against its own memory [Q, M, w]; mask (optional) is [Q, 1, M].
Tensor cross_attend(const Tensor& q, const Tensor& k, const Tensor& v, int heads, const Tensor& mask) {
  const int nq = q.dim(0), m = k.dim(1), w = q.dim(1), dh = w / heads;
  Tensor scores = sum_axis(reshape(reshape(q, {nq, 1, w}) * k, {nq, m, heads, dh}), 3);  // [Q, M, H]
  scores = transpose(scores) * (1.0f / std::sqrt(static_cast<float>(dh)));               // [Q, H, M]
  if (mask.defined()) scores = scores + mask;
  const Tensor p = reshape(transpose(softmax(scores)), {nq, m, heads, 1});                // [Q, M, H, 1]
  return reshape(sum_axis(p * reshape(v, {nq, m, heads, dh}), 1), {nq, w});
}

}  // namespace

Tensor TransformerDenoiser::group(const Tensor& noisy, std::span<const int> steps, const Tensor& cond) const {
  const int p = noisy.dim(0);
  const Tensor temb = time_proj_(nn::timestep_embedding(steps, kTimeEmbedDims));  // [P, w]
  const Tensor mem = mem_norm_(reshape(mem_proj_(cond), {1, p, width_}) + reshape(temb, {p, 1, width_}));
  std::vector<float> mask(static_cast<std::size_t>(p) * p, 0.0f);
  for (int r = 0; r < p; ++r)
    for (int j = r + 1; j < p; ++j) mask[static_cast<std::size_t>(r) * p + j] = -1e30f;
  const Tensor mask_t = Tensor::from({p, 1, p}, std::move(mask));
  Tensor h = in_proj_(noisy) + temb;
  for (const auto& ly : layers_) {
    const Tensor kv = ly.kv(mem);
    h = h + ly.proj(cross_attend(ly.q(ly.ln_q(h)), slice(kv, 2, 0, width_), slice(kv, 2, width_, 2 * width_), heads_, mask_t));
    h = h + ly.ff2(silu(ly.ff1(ly.ln_ff(h))));
  }
  return out_proj_(out_norm_(h));
}

Tensor TransformerDenoiser::one(const Tensor& noisy, int step, const Tensor& cond_prefix) const {
  const int m = cond_prefix.dim(0);
  const int t[1] = {step};
  const Tensor temb = time_proj_(nn::timestep_embedding(t, kTimeEmbedDims));
  const Tensor mem = mem_norm_(reshape(mem_proj_(cond_prefix), {1, m, width_}) + reshape(temb, {1, 1, width_}));
  Tensor h = in_proj_(noisy) + temb;
  for (const auto& ly : layers_) {
    const Tensor kv = ly.kv(mem);
    h = h + ly.proj(cross_attend(ly.q(ly.ln_q(h)), slice(kv, 2, 0, width_), slice(kv, 2, width_, 2 * width_), heads_, Tensor()));
    h = h + ly.ff2(silu(ly.ff1(ly.ln_ff(h))));
  }
  return out_proj_(out_norm_(h));
}

Tensor TransformerDenoiser::predict(const Tensor& noisy, std::span<const int> steps, const Tensor& cond,
                                    std::span<const int> starts) const {
  const int rows = noisy.dim(0);
  std::vector<Tensor> parts;
  for (std::size_t g = 0; g < starts.size(); ++g) {
    const int b = starts[g], e = g + 1 < starts.size() ? starts[g + 1] : rows;
    parts.push_back(group(slice(noisy, 0, b, e), steps.subspan(static_cast<std::size_t>(b), static_cast<std::size_t>(e - b)),
                          slice(cond, 0, b, e)));
  }
  return parts.size() == 1 ? parts[0] : concat(parts, 0);
}

std::vector<float> TransformerDenoiser::predict_one(std::span<const float> noisy, int step, const Tensor& cond_prefix) const {
  NoGradGuard guard;
  const Tensor z = Tensor::from({1, static_cast<int>(noisy.size())}, std::vector<float>(noisy.begin(), noisy.end()));
  return one(z, step, cond_prefix).to_vector();
}

long denoiser_mlp_params(int token_dims, int cond_dims, int hidden, int blocks) {
  const long d = token_dims, c = cond_dims, h = hidden;
  return (kTimeEmbedDims * c + c) + ((d + c) * h + h) + blocks * (2 * (h * h + h) + 2 * h) + (h * d + d);
}

namespace {

long transformer_denoiser_params(int token_dims, int cond_dims, int width, int ff, int layers) {
  const long d = token_dims, c = cond_dims, w = width;
  const long per_layer = 2 * w + (w * w + w) + (w * 2 * w + 2 * w) + (w * w + w) + 2 * w + (w * ff + ff) + (static_cast<long>(ff) * w + w);
  return (d * w + w) + (kTimeEmbedDims * w + w) + (c * w + w) + 2 * w + layers * per_layer + 2 * w + (w * d + d);
}

}  // namespace

std::unique_ptr<Denoiser> make_denoiser(DenoiserKind kind, ParamStore& store, int token_dims, int cond_dims, int hidden,
                                        int blocks, std::mt19937_64& rng) {
  if (kind == DenoiserKind::mlp) return std::make_unique<MlpDenoiser>(store, token_dims, cond_dims, hidden, blocks, rng);
  // Width hidden/2 with a 2x feed-forward; pick the layer count closest in parameters.
  const int width = std::max(16, hidden / 2), ff = 2 * width;
  const long target = denoiser_mlp_params(token_dims, cond_dims, hidden, blocks);
  int best = 1;
  long best_gap = -1;
  for (int l = 1; l <= 12; ++l) {
    const long gap = std::labs(transformer_denoiser_params(token_dims, cond_dims, width, ff, l) - target);
    if (best_gap < 0 || gap < best_gap) {
      best_gap = gap;
      best = l;
    }
  }
  return std::make_unique<TransformerDenoiser>(store, token_dims, cond_dims, width, ff, best, 4, rng);
}

}  // namespace ardhoi
