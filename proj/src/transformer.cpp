#include "ardhoi/transformer.hpp"

#include <cmath>
#include <stdexcept>

namespace ardhoi {

namespace {

Tensor causal_mask(int len) {
  std::vector<float> m(static_cast<std::size_t>(len) * len, 0.0f);
  for (int r = 0; r < len; ++r)
    for (int c = r + 1; c < len; ++c) m[static_cast<std::size_t>(r) * len + c] = -1e30f;
  return Tensor::from({len, len}, std::move(m));
}

}  // namespace

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, bool causal) {
  const int width = q.dim(1), dh = width / heads;
  if (causal && q.dim(0) != k.dim(0)) throw ShapeError("causal attention needs equal query and key counts");
  const float scale_f = 1.0f / std::sqrt(static_cast<float>(dh));
  Tensor mask;
  if (causal) mask = causal_mask(q.dim(0));
  std::vector<Tensor> outs;
  for (int h = 0; h < heads; ++h) {
    const Tensor qh = slice(q, 1, h * dh, (h + 1) * dh);
    const Tensor kh = slice(k, 1, h * dh, (h + 1) * dh);
    const Tensor vh = slice(v, 1, h * dh, (h + 1) * dh);
    Tensor scores = matmul(qh, transpose(kh)) * scale_f;
    if (causal) scores = scores + mask;
    outs.push_back(matmul(softmax(scores), vh));
  }
  return heads == 1 ? outs[0] : concat(outs, 1);
}

Tensor per_group(const Tensor& x, std::span<const int> starts, const std::function<Tensor(const Tensor&)>& fn) {
  const int rows = x.dim(0);
  std::vector<Tensor> parts;
  for (std::size_t g = 0; g < starts.size(); ++g) {
    const int end = g + 1 < starts.size() ? starts[g + 1] : rows;
    parts.push_back(fn(slice(x, 0, starts[g], end)));
  }
  return parts.size() == 1 ? parts[0] : concat(parts, 0);
}

Tensor position_codes(int len, int width) {
  std::vector<int> pos(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) pos[static_cast<std::size_t>(i)] = i;
  return nn::timestep_embedding(pos, width);
}

TransformerBlock::TransformerBlock(ParamStore& store, const std::string& name, int width, int ff, int heads,
                                   bool cross, std::mt19937_64& rng)
    : heads_(heads), cross_(cross) {
  ln1_ = nn::LayerNorm(store, name + ".ln1", width);
  qkv_ = nn::Linear(store, name + ".qkv", width, 3 * width, rng);
  proj_ = nn::Linear(store, name + ".proj", width, width, rng);
  if (cross) {
    ln2_ = nn::LayerNorm(store, name + ".ln2", width);
    cq_ = nn::Linear(store, name + ".cross_q", width, width, rng);
    ckv_ = nn::Linear(store, name + ".cross_kv", width, 2 * width, rng);
    cproj_ = nn::Linear(store, name + ".cross_proj", width, width, rng);
  }
  ln3_ = nn::LayerNorm(store, name + ".ln3", width);
  ff1_ = nn::Linear(store, name + ".ff1", width, ff, rng);
  ff2_ = nn::Linear(store, name + ".ff2", ff, width, rng);
}

Tensor TransformerBlock::operator()(const Tensor& x, const Tensor& memory, bool causal) const {
  const int w = x.dim(1);
  const Tensor qkv = qkv_(ln1_(x));
  Tensor h = x + proj_(attention(slice(qkv, 1, 0, w), slice(qkv, 1, w, 2 * w), slice(qkv, 1, 2 * w, 3 * w), heads_, causal));
  if (cross_) {
    const Tensor kv = ckv_(memory);
    h = h + cproj_(attention(cq_(ln2_(h)), slice(kv, 1, 0, w), slice(kv, 1, w, 2 * w), heads_, causal));
  }
  return h + ff2_(silu(ff1_(ln3_(h))));
}

long transformer_block_params(int width, int ff, bool cross) {
  const long w = width;
  long n = 2 * w + (w * 3 * w + 3 * w) + (w * w + w);
  if (cross) n += 2 * w + 2 * (w * w + w) + (w * 2 * w + 2 * w);
  n += 2 * w + (w * ff + ff) + (static_cast<long>(ff) * w + w);
  return n;
}

}  // namespace ardhoi
