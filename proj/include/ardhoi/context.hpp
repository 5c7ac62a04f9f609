#pragma once

// Causal context encoders producing the per-position condition c_i from the
// text embedding, the object embedding and the preceding motion tokens.
//
// A sequence enters as rows [text, object, s_1, ..., s_n]; the output row at
// index j (0-based, j >= 1) is c_j, so n tokens yield c_1..c_{n+1}.

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ardhoi/nn.hpp"
#include "ardhoi/optim.hpp"
#include "ardhoi/ssm.hpp"
#include "ardhoi/transformer.hpp"

namespace ardhoi {

struct ContextBatch {
  std::vector<std::vector<float>> text;   // per sequence, text dims
  std::vector<std::vector<float>> point;  // per sequence, point dims
  Tensor tokens;                          // [sum n_i, token dims], sequences back to back
  std::vector<int> token_counts;          // n_i, may be zero
};

struct ContextState {
  SsmStack::State ssm;
  std::vector<std::vector<float>> rows;  // attention encoders keep every projected input
  std::vector<float> condition;          // latest c_i
  int position = 0;                      // index of the latest input row
};

enum class ContextKind { ssm, transformer };

class ContextEncoder {
 public:
  ContextEncoder(ParamStore& store, const std::string& name, int text_dims, int point_dims, int token_dims, int width,
                 std::mt19937_64& rng);
  virtual ~ContextEncoder() = default;

  // Conditions for every sequence, back to back: [sum (n_i + 1), width].
  Tensor encode(const ContextBatch& batch, ScanMode mode = ScanMode::parallel) const;

  // State after the text and object rows; condition holds c_1.
  ContextState start(std::span<const float> text, std::span<const float> point) const;
  // Consumes token s_i; condition becomes c_{i+1}.
  void advance(ContextState& state, std::span<const float> token) const;

  int width() const { return width_; }
  virtual ContextKind kind() const = 0;

 protected:
  // Trunk over projected rows grouped by `starts`.
  virtual Tensor trunk(const Tensor& rows, std::span<const int> starts, ScanMode mode) const = 0;
  virtual Tensor step(const Tensor& row, ContextState& state) const = 0;
  Tensor project(std::span<const float> v, const nn::Linear& proj) const;

  int width_;
  nn::Linear text_proj_, point_proj_, token_proj_;
};

class SsmContextEncoder : public ContextEncoder {
 public:
  SsmContextEncoder(ParamStore& store, const std::string& name, int text_dims, int point_dims, int token_dims,
                    const SsmConfig& cfg, std::mt19937_64& rng);
  ContextKind kind() const override { return ContextKind::ssm; }
  const SsmStack& stack() const { return stack_; }

 protected:
  Tensor trunk(const Tensor& rows, std::span<const int> starts, ScanMode mode) const override;
  Tensor step(const Tensor& row, ContextState& state) const override;

 private:
  SsmStack stack_;
};

class TransformerContextEncoder : public ContextEncoder {
 public:
  TransformerContextEncoder(ParamStore& store, const std::string& name, int text_dims, int point_dims, int token_dims,
                            int width, int layers, int heads, std::mt19937_64& rng);
  ContextKind kind() const override { return ContextKind::transformer; }

 protected:
  Tensor trunk(const Tensor& rows, std::span<const int> starts, ScanMode mode) const override;
  Tensor step(const Tensor& row, ContextState& state) const override;

 private:
  Tensor run(const Tensor& rows) const;
  int heads_;
  std::vector<TransformerBlock> blocks_;
  nn::LayerNorm final_;
};

// Layer count giving the transformer encoder roughly the parameters of an SSM stack.
int matched_transformer_layers(const SsmConfig& cfg);

std::unique_ptr<ContextEncoder> make_context_encoder(ContextKind kind, ParamStore& store, int text_dims, int point_dims,
                                                     int token_dims, const SsmConfig& cfg, std::mt19937_64& rng);

}  // namespace ardhoi
