#pragma once

#include <random>
#include <string>
#include <vector>

#include "ardhoi/optim.hpp"
#include "ardhoi/tensor.hpp"

namespace ardhoi::nn {

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out, std::mt19937_64& rng, bool bias = true);

  // x: [..., in] -> [..., out]
  Tensor operator()(const Tensor& x) const;
  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  Tensor weight_;
  Tensor bias_;
  int in_ = 0, out_ = 0;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, int width);
  Tensor operator()(const Tensor& x) const;

 private:
  Tensor gain_, shift_;
};

// fc -> SiLU -> fc -> layer norm, with the input added back.
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(ParamStore& store, const std::string& name, int width, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const;

 private:
  Linear fc1_, fc2_;
  LayerNorm norm_;
};

// Input projection, a stack of residual blocks, output projection.
class ResidualMlp {
 public:
  ResidualMlp() = default;
  ResidualMlp(ParamStore& store, const std::string& name, int in, int hidden, int out, int blocks,
              std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const;
  // Everything except the output projection.
  Tensor trunk(const Tensor& x) const;
  const Linear& head() const { return head_; }

 private:
  Linear stem_;
  std::vector<ResidualBlock> blocks_;
  Linear head_;
};

// Sinusoidal embedding of integer diffusion steps: [n] -> [n, width].
Tensor timestep_embedding(std::span<const int> steps, int width);

}  // namespace ardhoi::nn
