#pragma once

// Pre-norm transformer pieces for the attention-based ablation baselines.

#include <random>
#include <span>
#include <string>
#include <vector>

#include "ardhoi/nn.hpp"
#include "ardhoi/optim.hpp"
#include "ardhoi/tensor.hpp"

namespace ardhoi {

// Scaled dot-product attention with `heads` heads over rows. With `causal`
// (requires equal row counts) query r only sees keys 0..r.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, bool causal);

// Runs `fn` on each row group [starts[i], starts[i+1]) and stacks the results.
Tensor per_group(const Tensor& x, std::span<const int> starts, const std::function<Tensor(const Tensor&)>& fn);

// Sinusoidal position codes for positions 0..len-1: [len, width].
Tensor position_codes(int len, int width);

class TransformerBlock {
 public:
  TransformerBlock() = default;
  // cross = true adds a cross-attention sublayer reading from a memory sequence.
  TransformerBlock(ParamStore& store, const std::string& name, int width, int ff, int heads, bool cross,
                   std::mt19937_64& rng);

  // x and memory are one sequence each; memory is ignored without cross-attention.
  Tensor operator()(const Tensor& x, const Tensor& memory, bool causal) const;

 private:
  int heads_ = 1;
  bool cross_ = false;
  nn::LayerNorm ln1_, ln2_, ln3_;
  nn::Linear qkv_, proj_, cq_, ckv_, cproj_, ff1_, ff2_;
};

// Parameter count of a TransformerBlock, for width matching.
long transformer_block_params(int width, int ff, bool cross);

}  // namespace ardhoi
