#pragma once

// Contrastive VAE over fixed-length HOI clips: clips of `token_frames`
// frames become continuous latent tokens and back.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ardhoi/encoders.hpp"
#include "ardhoi/hoi.hpp"
#include "ardhoi/nn.hpp"
#include "ardhoi/optim.hpp"
#include "ardhoi/ssm.hpp"

namespace ardhoi {

using Clip = std::vector<HoiFrame>;

// Content clips of exactly `token_frames` frames (tail padded by repeating
// the last frame) followed by one all-zero null clip.
std::vector<Clip> segment(const HoiSequence& seq, int token_frames);
int token_count(int frames, int token_frames);

struct CvaeConfig {
  int d_l = 32;
  int hidden = 256;
  int blocks = 3;
  int token_frames = 16;
  int ssm_state = 8;
  int ssm_expand = 2;
  double alpha = 1.0;
  double tau = 0.03;
  double lambda_tri = 0.1;
  double lambda_kl = 1e-4;
  double lambda_phy = 1.0;
  double lambda_fk = 1.0;
  double lambda_vel = 1.0;
  double lambda_ovel = 1.0;
  double lambda_con = 1.0;
  int epochs = 60;
  int batch_sequences = 16;
  int batch_triplets = 32;
  float lr = 1e-3f;
};
nlohmann::json to_json(const CvaeConfig& c);
CvaeConfig cvae_config_from_json(const nlohmann::json& j);

// Per-channel statistics used to normalise frames.
struct FrameStats {
  std::array<float, kFrameDims> mean{};
  std::array<float, kFrameDims> std{};
};
FrameStats compute_frame_stats(std::span<const HoiSequence> corpus);

// ---- contrastive samples ----------------------------------------------------

enum class ContrastLabel { positive, negative, ambiguous };

// Compares the anchor's nearest and second-nearest contact joints (chosen per
// frame on the anchor) between the two clips; the change of each is the
// largest absolute difference over frames.
ContrastLabel label_candidate(const Clip& anchor, const Clip& candidate, const ObjectSpec& object, double tau);

struct ContrastiveTriple {
  Clip anchor, positive, negative;
};

// Candidates offset the object uniformly inside a 0.1 m ball; for symmetric
// objects half of them spin it about its own vertical axis instead, which is
// always a positive. Returns nothing if the anchor never comes within 0.2 m
// of the object or after 100 rejected candidates.
std::optional<ContrastiveTriple> make_contrastive_samples(const Clip& anchor, const ObjectSpec& object, double tau,
                                                          std::uint64_t seed);

// ---- model ----------------------------------------------------------------------

class Cvae {
 public:
  Cvae(const CvaeConfig& cfg, std::uint64_t seed);

  const CvaeConfig& config() const { return cfg_; }
  int clip_dims() const { return cfg_.token_frames * kFrameDims; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  bool frozen() const { return params_.frozen(); }

  const FrameStats& stats() const { return stats_; }
  void set_stats(const FrameStats& s) { stats_ = s; }

  // x [B, clip_dims] normalised, point [B, 64] -> (mu, logvar), each [B, d_l].
  std::pair<Tensor, Tensor> encode(const Tensor& x, const Tensor& point) const;
  // z [K, d_l] for sequences back to back (first rows in `starts`) -> [K, clip_dims].
  // The SSM layer runs causally along each sequence's tokens.
  Tensor decode(const Tensor& z, const Tensor& point, std::span<const int> starts,
                ScanMode mode = ScanMode::parallel) const;

  std::vector<float> normalize(const Clip& clip) const;
  // Normalised clip rows [..., clip_dims] back to frames.
  std::vector<HoiFrame> denormalize(std::span<const float> values) const;
  // Raw-unit tensor [..., clip_dims] -> [..., clip_dims].
  Tensor denormalize(const Tensor& x) const;

  // Posterior means of every content clip (null clip excluded).
  std::vector<std::vector<float>> encode_sequence(const HoiSequence& seq, std::span<const float> point) const;
  // Frames of the decoded token sequence, token_frames per token.
  std::vector<HoiFrame> decode_tokens(const std::vector<std::vector<float>>& z, std::span<const float> point) const;

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static Cvae load(const std::filesystem::path& path);

 private:
  CvaeConfig cfg_;
  ParamStore params_;
  FrameStats stats_;
  nn::ResidualMlp encoder_;
  nn::Linear mu_head_, logvar_head_;
  nn::ResidualMlp decoder_;
  SsmBlock decoder_ssm_;
};

// ---- losses -----------------------------------------------------------------------

// sqrt(|x|^2 + eps) - sqrt(eps) over the last axis: exactly 0 at 0, smooth everywhere.
Tensor safe_norm(const Tensor& x);

// Sum over all rows and dims of sigma^2 + mu^2 - 1 - log sigma^2.
Tensor kl_term(const Tensor& mu, const Tensor& logvar);
// Mean over rows of max(|a - p| - |a - n| + alpha, 0).
Tensor triplet_term(const Tensor& a, const Tensor& p, const Tensor& n, float alpha);
// Mean over rows of |x - x_hat|.
Tensor reconstruction_term(const Tensor& x, const Tensor& x_hat);

struct PhysicalTerms {
  Tensor fk, vel, ovel, con;
};
// Raw-unit frames [N, 75]; pairs (r, r+1) with pair_mask[r] = 0 cross a
// sequence boundary and are ignored by the velocity terms.
PhysicalTerms physical_terms(const Tensor& gt_frames, const Tensor& pred_frames, std::span<const ObjectSpec* const> objects,
                             std::span<const float> pair_mask);

// ---- training -------------------------------------------------------------------

struct EncodedTriple {
  std::vector<float> anchor, positive, negative;  // normalised clips
  std::vector<float> point;
};

struct CvaeTrainReport {
  std::vector<double> epoch_loss;
  double rec = 0, kl = 0, tri = 0, phy = 0;
  int triplets = 0;
  int skipped_anchors = 0;
  double seconds = 0;
};

struct CvaeData {
  std::vector<HoiSequence> sequences;
  std::vector<const ObjectSpec*> objects;
  std::vector<std::vector<float>> points;  // point embedding per sequence
};
CvaeData make_cvae_data(std::span<const HoiSequence> corpus, std::span<const ObjectSpec> library,
                        const PointEncoder& encoder);

// Triples from every anchor clip that admits one; `skipped` counts anchors without.
std::vector<EncodedTriple> build_triples(const Cvae& model, const CvaeData& data, std::uint64_t seed, int* skipped = nullptr);

using EpochCallback = std::function<void(int epoch, double loss)>;

// Fits normalisation statistics, trains, and freezes the model.
CvaeTrainReport train_cvae(Cvae& model, const CvaeData& data, std::uint64_t seed, const EpochCallback& on_epoch = {});

// mean |mu_a - mu_n| / mean |mu_a - mu_p|
double separation_ratio(const Cvae& model, std::span<const EncodedTriple> triples);
// Mean squared error per element in normalised units, encoding to the mean.
double reconstruction_mse(const Cvae& model, const CvaeData& data);

}  // namespace ardhoi
