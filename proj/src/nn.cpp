#include "ardhoi/nn.hpp"

#include <cmath>

namespace ardhoi::nn {

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, std::mt19937_64& rng, bool bias)
    : in_(in), out_(out) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in));
  weight_ = store.add_uniform(name + ".weight", {in, out}, rng, bound);
  if (bias) bias_ = store.add_constant(name + ".bias", {out}, 0.0f);
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight_);
  return bias_.defined() ? y + bias_ : y;
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, int width) {
  gain_ = store.add_constant(name + ".gain", {width}, 1.0f);
  shift_ = store.add_constant(name + ".shift", {width}, 0.0f);
}

Tensor LayerNorm::operator()(const Tensor& x) const { return layernorm(x) * gain_ + shift_; }

ResidualBlock::ResidualBlock(ParamStore& store, const std::string& name, int width, std::mt19937_64& rng)
    : fc1_(store, name + ".fc1", width, width, rng),
      fc2_(store, name + ".fc2", width, width, rng),
      norm_(store, name + ".norm", width) {}

Tensor ResidualBlock::operator()(const Tensor& x) const { return x + norm_(fc2_(silu(fc1_(x)))); }

ResidualMlp::ResidualMlp(ParamStore& store, const std::string& name, int in, int hidden, int out, int blocks,
                         std::mt19937_64& rng)
    : stem_(store, name + ".stem", in, hidden, rng) {
  for (int i = 0; i < blocks; ++i) blocks_.emplace_back(store, name + ".block" + std::to_string(i), hidden, rng);
  head_ = Linear(store, name + ".head", hidden, out, rng);
}

Tensor ResidualMlp::trunk(const Tensor& x) const {
  Tensor h = stem_(x);
  for (const auto& b : blocks_) h = b(h);
  return h;
}

Tensor ResidualMlp::operator()(const Tensor& x) const { return head_(trunk(x)); }

Tensor timestep_embedding(std::span<const int> steps, int width) {
  const int half = width / 2;
  std::vector<float> out(steps.size() * static_cast<std::size_t>(width), 0.0f);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (int k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(10000.0) * k / std::max(half, 1));
      const double arg = steps[i] * freq;
      out[i * width + k] = static_cast<float>(std::sin(arg));
      out[i * width + half + k] = static_cast<float>(std::cos(arg));
    }
  }
  return Tensor::from({static_cast<int>(steps.size()), width}, std::move(out));
}

}  // namespace ardhoi::nn
