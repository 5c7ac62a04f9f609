#pragma once

// Autoregressive diffusion over cVAE tokens: teacher-forced training and
// token-by-token generation until the continuation flag drops.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ardhoi/context.hpp"
#include "ardhoi/cvae.hpp"
#include "ardhoi/diffusion.hpp"
#include "ardhoi/encoders.hpp"

namespace ardhoi {

struct ArdmConfig {
  SsmConfig context{};
  ContextKind context_kind = ContextKind::ssm;
  DenoiserKind denoiser_kind = DenoiserKind::mlp;
  // Single-shot token regression with a squared-error loss instead of diffusion.
  bool mse_regressor = false;
  int denoiser_hidden = 256;
  int denoiser_blocks = 3;
  DiffusionConfig diffusion{};
  int epochs = 200;
  int batch_sequences = 32;
  float lr = 1e-3f;
};
nlohmann::json to_json(const ArdmConfig& c);
ArdmConfig ardm_config_from_json(const nlohmann::json& j);

// Per-dimension statistics of the posterior means, used to put tokens on unit scale.
struct TokenStats {
  std::vector<float> mean, std;
};

class Ardm {
 public:
  Ardm(const ArdmConfig& cfg, int latent_dims, std::uint64_t seed);

  const ArdmConfig& config() const { return cfg_; }
  int latent_dims() const { return latent_; }
  int token_dims() const { return latent_ + 1; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const ContextEncoder& context() const { return *context_; }
  const Denoiser& denoiser() const { return *denoiser_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const TokenStats& token_stats() const { return stats_; }
  void set_token_stats(TokenStats s) { stats_ = std::move(s); }

  // Latent (posterior mean) -> normalised token with flag 1, and back.
  std::vector<float> to_token(std::span<const float> latent) const;
  std::vector<float> to_latent(std::span<const float> token) const;
  // All-zero latent part, flag 0.
  std::vector<float> null_token() const;

  // Regressor head for the MSE variant: conditions [B, C] -> tokens [B, D].
  Tensor regress(const Tensor& cond) const;

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static Ardm load(const std::filesystem::path& path);

 private:
  ArdmConfig cfg_;
  int latent_;
  ParamStore params_;
  NoiseSchedule schedule_;
  TokenStats stats_;
  std::unique_ptr<ContextEncoder> context_;
  std::unique_ptr<Denoiser> denoiser_;
  std::optional<nn::ResidualMlp> regressor_;
};

struct ArdmTrainReport {
  std::vector<double> epoch_loss;
  double seconds = 0;
};

// Targets per sequence: normalised tokens of every content clip plus the null
// token. Rejects a cVAE that is not frozen.
ArdmTrainReport train_ardm(Ardm& model, const Cvae& cvae, const CvaeData& data, std::uint64_t seed,
                           const EpochCallback& on_epoch = {});

enum class StopReason { null_token, max_length };
const char* stop_reason_name(StopReason r);

// Replaces the denoiser's x0 prediction at a given token position (1-based).
using DenoiserOracle = std::function<std::vector<float>(int position, std::span<const float> z, int t, bool conditional)>;

struct GenRequest {
  std::string text;
  const ObjectSpec* object = nullptr;
  std::uint64_t seed = 0;
  int max_tokens = 0;  // 0: as many as fit in 240 frames
  std::optional<double> xi;
  std::vector<Clip> initial_clips;
  // Normalised tokens fed as a fixed prefix after any initial clips.
  std::vector<std::vector<float>> initial_tokens;
  DenoiserOracle oracle;
  // When false the flag is ignored and generation always runs to max_tokens.
  bool stop_on_null = true;
};

struct GenResult {
  HoiSequence sequence;
  int token_count = 0;
  StopReason stop_reason = StopReason::max_length;
  std::vector<std::vector<float>> tokens;  // every token of the sequence, prefix included
};

// A token whose flag falls below 0.5 ends the sequence, but only once the
// tokens so far cover 60 frames; earlier stops are overruled.
GenResult generate(const Ardm& model, const Cvae& cvae, const PointEncoder& points, const GenRequest& req);

// Drops trailing frames that barely move (the decoded image of tail padding),
// never going below `min_frames` or into the last token's first frame.
void trim_padding(std::vector<HoiFrame>& frames, int token_frames, int min_frames);

}  // namespace ardhoi
