#pragma once

// Per-token diffusion: linear-beta schedule, x0-predicting denoisers,
// deterministic DDIM sampling with classifier-free guidance.

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "ardhoi/nn.hpp"
#include "ardhoi/optim.hpp"
#include "ardhoi/tensor.hpp"

namespace ardhoi {

struct DiffusionConfig {
  int steps = 1000;
  int ddim_steps = 50;
  double beta_min = 1e-4;
  double beta_max = 2e-2;
  double xi = 2.0;
  double p_uncond = 0.1;
};

class NoiseSchedule {
 public:
  explicit NoiseSchedule(const DiffusionConfig& cfg = {});

  int steps() const { return steps_; }
  // alpha_bar(0) = 1; alpha_bar(t) = prod_{s=1..t} (1 - beta_s).
  double alpha_bar(int t) const;
  double beta(int t) const;
  // Decreasing DDIM steps, first = T, all > 0; sampling ends at t = 0.
  const std::vector<int>& ddim_steps() const { return ddim_; }

  std::vector<float> q_sample(std::span<const float> s0, int t, std::span<const float> eps) const;
  // Row-wise q_sample for [B, D] with one step per row; eps has the same shape.
  Tensor q_sample(const Tensor& s0, std::span<const int> t, const Tensor& eps) const;
  // One forward step s_{t-1} -> s_t with fresh noise.
  std::vector<float> q_step(std::span<const float> prev, int t, std::span<const float> eps) const;

 private:
  void check_step(int t) const;
  int steps_;
  std::vector<double> beta_, alpha_bar_;
  std::vector<int> ddim_;
};

// Returns the zero vector with probability p, the input otherwise.
std::vector<float> cfg_dropout(std::span<const float> text, double p, std::mt19937_64& rng);

// x0 prediction for one noisy token at step t; `conditional` selects the
// text-conditioned branch.
using PredictFn = std::function<std::vector<float>(std::span<const float> z, int t, bool conditional)>;

struct GuidanceTrace {
  struct Step {
    int t = 0;
    std::vector<float> cond, uncond, guided;
  };
  std::vector<Step> steps;
};

// Deterministic DDIM (eta = 0) from `noise` using
//   s_hat = xi * pred(cond) + (1 - xi) * pred(uncond).
// With xi == 1 the unconditional branch is never evaluated.
std::vector<float> ddim_sample(const NoiseSchedule& schedule, std::span<const float> noise, const PredictFn& predict,
                               double xi, GuidanceTrace* trace = nullptr);

enum class DenoiserKind { mlp, transformer };

class Denoiser {
 public:
  virtual ~Denoiser() = default;
  // Training path. Rows are positions of sequences laid back to back;
  // `starts` gives each sequence's first row. noisy [B, D], cond [B, C].
  virtual Tensor predict(const Tensor& noisy, std::span<const int> steps, const Tensor& cond,
                         std::span<const int> starts) const = 0;
  // Generation path: one noisy token at the position of the last row of
  // `cond_prefix` ([i, C], rows c_1..c_i).
  virtual std::vector<float> predict_one(std::span<const float> noisy, int step, const Tensor& cond_prefix) const = 0;
  virtual DenoiserKind kind() const = 0;
};

// Noisy token concatenated with (condition + projected time embedding),
// through the residual MLP recipe.
class MlpDenoiser : public Denoiser {
 public:
  MlpDenoiser(ParamStore& store, int token_dims, int cond_dims, int hidden, int blocks, std::mt19937_64& rng);
  Tensor predict(const Tensor& noisy, std::span<const int> steps, const Tensor& cond,
                 std::span<const int> starts) const override;
  std::vector<float> predict_one(std::span<const float> noisy, int step, const Tensor& cond_prefix) const override;
  DenoiserKind kind() const override { return DenoiserKind::mlp; }

 private:
  Tensor forward(const Tensor& noisy, std::span<const int> steps, const Tensor& cond) const;
  nn::Linear time_proj_;
  nn::ResidualMlp net_;
};

// Cross-attention baseline: the noisy token queries the condition prefix
// c_1..c_i, each memory row normalised together with the time embedding.
class TransformerDenoiser : public Denoiser {
 public:
  TransformerDenoiser(ParamStore& store, int token_dims, int cond_dims, int width, int ff, int layers, int heads,
                      std::mt19937_64& rng);
  Tensor predict(const Tensor& noisy, std::span<const int> steps, const Tensor& cond,
                 std::span<const int> starts) const override;
  std::vector<float> predict_one(std::span<const float> noisy, int step, const Tensor& cond_prefix) const override;
  DenoiserKind kind() const override { return DenoiserKind::transformer; }

 private:
  struct Layer {
    nn::LayerNorm ln_q, ln_ff;
    nn::Linear q, kv, proj, ff1, ff2;
  };
  // queries [P, w]; memory [P, M, w] (row r attends memory rows 0..limit_r).
  Tensor group(const Tensor& noisy, std::span<const int> steps, const Tensor& cond) const;
  Tensor one(const Tensor& noisy, int step, const Tensor& cond_prefix) const;
  int width_, heads_;
  nn::Linear in_proj_, time_proj_, mem_proj_, out_proj_;
  nn::LayerNorm mem_norm_, out_norm_;
  std::vector<Layer> layers_;
};

inline constexpr int kTimeEmbedDims = 64;

// The transformer baseline is sized to the parameter count of an MLP denoiser.
std::unique_ptr<Denoiser> make_denoiser(DenoiserKind kind, ParamStore& store, int token_dims, int cond_dims, int hidden,
                                        int blocks, std::mt19937_64& rng);
long denoiser_mlp_params(int token_dims, int cond_dims, int hidden, int blocks);

}  // namespace ardhoi
