#include "ardhoi/ssm.hpp"

#include <cmath>

namespace ardhoi {

SsmBlock::SsmBlock(ParamStore& store, const std::string& name, int d, int state, int expand, std::mt19937_64& rng)
    : d_(d), n_(state), expand_(expand), rank_(std::max(1, (d + 15) / 16)) {
  const int e = d * expand;
  norm_ = nn::LayerNorm(store, name + ".norm", d);
  in_proj_ = nn::Linear(store, name + ".in_proj", d, 2 * e, rng);
  x_proj_ = nn::Linear(store, name + ".x_proj", e, rank_ + 2 * state, rng, false);
  dt_proj_ = nn::Linear(store, name + ".dt_proj", rank_, e, rng);
  out_proj_ = nn::Linear(store, name + ".out_proj", e, d, rng);

  // Step sizes start log-uniform in [1e-3, 1e-1]; the bias holds softplus^-1.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor dt_bias = store.get(name + ".dt_proj.bias");
  auto bias = dt_bias.mutable_data();
  for (auto& b : bias) {
    const double dt = std::exp(std::log(1e-3) + u(rng) * (std::log(1e-1) - std::log(1e-3)));
    b = static_cast<float>(dt + std::log(-std::expm1(-dt)));
  }
  std::vector<float> alog(static_cast<std::size_t>(e) * state);
  std::uniform_real_distribution<double> ua(0.0, std::log(static_cast<double>(state)));
  for (auto& v : alog) v = static_cast<float>(ua(rng));
  a_log_ = store.add(name + ".A_log", Tensor::from({e, state}, std::move(alog)));
  d_skip_ = store.add_constant(name + ".D", {e}, 1.0f);
}

SsmBlock::Coeffs SsmBlock::coefficients(const Tensor& xs) const {
  const int len = xs.dim(0), e = inner();
  const Tensor proj = x_proj_(xs);
  const Tensor delta = softplus(dt_proj_(slice(proj, 1, 0, rank_)));
  const Tensor bmat = slice(proj, 1, rank_, rank_ + n_);
  const Tensor cmat = slice(proj, 1, rank_ + n_, rank_ + 2 * n_);
  const Tensor a_cont = -exp(a_log_);
  Coeffs k;
  k.a = reshape(exp(reshape(delta, {len, e, 1}) * a_cont), {len, e * n_});
  k.b = reshape(reshape(delta * xs, {len, e, 1}) * reshape(bmat, {len, 1, n_}), {len, e * n_});
  k.c = cmat;
  k.x = xs;
  return k;
}

Tensor SsmBlock::readout(const Coeffs& k, const Tensor& h) const {
  const int len = k.x.dim(0), e = inner();
  return sum_axis(reshape(h, {len, e, n_}) * reshape(k.c, {len, 1, n_}), 2) + k.x * d_skip_;
}

Tensor SsmBlock::scan(const Tensor& xs, std::span<const int> resets, ScanMode mode) const {
  const Coeffs k = coefficients(xs);
  return readout(k, linear_scan(k.a, k.b, resets, mode));
}

Tensor SsmBlock::operator()(const Tensor& x, std::span<const int> resets, ScanMode mode) const {
  const int e = inner();
  const Tensor xz = in_proj_(norm_(x));
  const Tensor xs = silu(slice(xz, 1, 0, e));
  const Tensor gate = silu(slice(xz, 1, e, 2 * e));
  return x + out_proj_(scan(xs, resets, mode) * gate);
}

Tensor SsmBlock::step(const Tensor& x, std::vector<float>& h) const {
  const int e = inner();
  const Tensor xz = in_proj_(norm_(x));
  const Tensor xs = silu(slice(xz, 1, 0, e));
  const Tensor gate = silu(slice(xz, 1, e, 2 * e));
  const Coeffs k = coefficients(xs);
  const Tensor prev = Tensor::from({1, e * n_}, h);
  const Tensor hn = k.a * prev + k.b;
  h = hn.to_vector();
  return x + out_proj_(readout(k, hn) * gate);
}

SsmStack::SsmStack(ParamStore& store, const std::string& name, const SsmConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
  for (int i = 0; i < cfg.layers; ++i)
    blocks_.emplace_back(store, name + ".layer" + std::to_string(i), cfg.d, cfg.state, cfg.expand, rng);
  final_ = nn::LayerNorm(store, name + ".final_norm", cfg.d);
}

Tensor SsmStack::operator()(const Tensor& x, std::span<const int> resets, ScanMode mode) const {
  Tensor h = x;
  for (const auto& b : blocks_) h = b(h, resets, mode);
  return final_(h);
}

SsmStack::State SsmStack::initial_state() const {
  State s;
  for (const auto& b : blocks_) s.h.emplace_back(b.state_floats(), 0.0f);
  return s;
}

Tensor SsmStack::step(const Tensor& x, State& state) const {
  Tensor h = x;
  for (std::size_t i = 0; i < blocks_.size(); ++i) h = blocks_[i].step(h, state.h[i]);
  ++state.position;
  return final_(h);
}

}  // namespace ardhoi
