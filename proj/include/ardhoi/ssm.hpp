#pragma once

// Diagonal selective state-space block (Mamba-style gating, no convolution).
//
//   h_t = exp(delta_t * A) . h_{t-1} + (delta_t * B_t) x_t
//   y_t = C_t h_t + D x_t
//
// with delta = softplus(.), A = -exp(A_log) and B, C, delta all functions of
// the current input. Rows of a batch are concatenated sequences; `resets`
// marks the first row of each.

#include <random>
#include <span>
#include <string>
#include <vector>

#include "ardhoi/nn.hpp"
#include "ardhoi/optim.hpp"
#include "ardhoi/tensor.hpp"

namespace ardhoi {

struct SsmConfig {
  int d = 64;       // model width
  int state = 8;    // N
  int expand = 2;   // E
  int layers = 6;
};

class SsmBlock {
 public:
  SsmBlock() = default;
  SsmBlock(ParamStore& store, const std::string& name, int d, int state, int expand, std::mt19937_64& rng);

  // x: [L, d] -> [L, d], residual included.
  Tensor operator()(const Tensor& x, std::span<const int> resets, ScanMode mode = ScanMode::parallel) const;

  // One row with explicit recurrent state h of size d*E*N, updated in place.
  Tensor step(const Tensor& x, std::vector<float>& h) const;

  int width() const { return d_; }
  int inner() const { return d_ * expand_; }
  int state_size() const { return n_; }
  std::size_t state_floats() const { return static_cast<std::size_t>(inner()) * n_; }

  // Inner selective scan on already-projected inputs: x [L, dE] -> y [L, dE].
  Tensor scan(const Tensor& x, std::span<const int> resets, ScanMode mode) const;

 private:
  struct Coeffs {
    Tensor a, b, c, x;  // a, b: [L, dE*N]; c: [L, N]; x: [L, dE]
  };
  Coeffs coefficients(const Tensor& xs) const;
  Tensor readout(const Coeffs& k, const Tensor& h) const;

  int d_ = 0, n_ = 0, expand_ = 0, rank_ = 0;
  nn::LayerNorm norm_;
  nn::Linear in_proj_, x_proj_, dt_proj_, out_proj_;
  Tensor a_log_, d_skip_;
};

// Stack of blocks with a final layer norm.
class SsmStack {
 public:
  SsmStack() = default;
  SsmStack(ParamStore& store, const std::string& name, const SsmConfig& cfg, std::mt19937_64& rng);

  Tensor operator()(const Tensor& x, std::span<const int> resets, ScanMode mode = ScanMode::parallel) const;

  struct State {
    std::vector<std::vector<float>> h;
    int position = 0;
  };
  State initial_state() const;
  // One row through every layer.
  Tensor step(const Tensor& x, State& state) const;

  const SsmConfig& config() const { return cfg_; }

 private:
  SsmConfig cfg_;
  std::vector<SsmBlock> blocks_;
  nn::LayerNorm final_;
};

}  // namespace ardhoi
