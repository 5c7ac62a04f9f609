#pragma once

// Evaluation: a contrastively trained text/motion embedder and the metric
// suite computed in its feature space, plus physical plausibility measures.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ardhoi/hoi.hpp"
#include "ardhoi/nn.hpp"
#include "ardhoi/optim.hpp"
#include "ardhoi/ssm.hpp"

namespace ardhoi {

using Embedding = std::vector<double>;
using Embeddings = std::vector<Embedding>;

// ---- distribution metrics -------------------------------------------------------

// Principal square root of a symmetric PSD matrix (row-major n x n); negative
// eigenvalues are clamped to zero.
std::vector<double> sqrt_psd(std::span<const double> m, int n);

// Frechet distance between Gaussians fitted to each set. Needs more samples
// than dimensions on both sides.
double fid(const Embeddings& a, const Embeddings& b);

// For each query i, whether motions[i] is among the k nearest (Euclidean)
// motions of its pool. Queries are shuffled with `seed` and split into
// consecutive pools of `pool`; a trailing partial pool is dropped.
// Returns the hit rates at k = 1, 2, 3.
std::array<double, 3> r_precision(const Embeddings& texts, const Embeddings& motions, std::uint64_t seed,
                                  int pool = 32);
double r_precision_at(const Embeddings& texts, const Embeddings& motions, int k, std::uint64_t seed, int pool = 32);

// Mean distance between each text embedding and its motion embedding.
double multimodal_distance(const Embeddings& texts, const Embeddings& motions);
// Mean distance over random distinct pairs, at most n(n-1)/2 of them.
double diversity(const Embeddings& motions, std::uint64_t seed, int pairs = 300);

// ---- physical measures ----------------------------------------------------------

struct PhysicalMetrics {
  // Mean over frames where the object moves of the nearest contact distance;
  // NaN when the object never moves.
  double contact_mean = 0.0;
  double boundary_jerk = 1.0;
  int manipulation_frames = 0;
};

// Frames whose object pose changed from the previous frame.
std::vector<int> manipulation_frames(const HoiSequence& seq);
// Mean joint speed at clip boundaries over the mean speed inside clips.
// Two still sequences compare as 1.
double boundary_jerk(const HoiSequence& seq, int token_frames = 16);
PhysicalMetrics physical_metrics(const HoiSequence& seq, const ObjectSpec& object, int token_frames = 16);

// ---- evaluator --------------------------------------------------------------------

struct EvaluatorConfig {
  int width = 32;  // d_e
  int chunk_frames = 4;
  int layers = 2;
  int state = 8;
  int epochs = 50;
  int batch = 32;
  float lr = 2e-3f;
};

class Evaluator {
 public:
  explicit Evaluator(const EvaluatorConfig& cfg = {}, std::uint64_t seed = 11);

  // Fits frame statistics, trains with a symmetric contrastive objective on
  // negative squared distances, then freezes. Returns the final epoch loss.
  double train(std::span<const HoiSequence> corpus, std::uint64_t seed);

  Embeddings embed_motions(std::span<const HoiSequence> seqs) const;
  Embeddings embed_texts(std::span<const std::string> texts) const;

  const EvaluatorConfig& config() const { return cfg_; }
  void save(const std::filesystem::path& path) const;
  static Evaluator load(const std::filesystem::path& path);

 private:
  Tensor motion_branch(std::span<const HoiSequence> seqs) const;
  Tensor text_branch(std::span<const std::string> texts) const;

  EvaluatorConfig cfg_;
  ParamStore params_;
  std::array<float, kFrameDims> mean_{}, std_{};
  nn::Linear chunk_proj_, motion_out_, text_in_, text_out_;
  SsmStack ssm_;
};

// ---- reports ------------------------------------------------------------------------

struct Stat {
  double mean = 0.0, std = 0.0;
};

struct MetricsReport {
  Stat fid, r1, r2, r3, mmd, diversity, contact_mean, boundary_jerk;
  int runs = 0;
  int samples = 0;
};
nlohmann::json to_json(const MetricsReport& r);

// `generated[i]` answers the prompt `generated[i].text`; real and generated
// sets need not have the same size. FID, MMD and the physical measures do not
// depend on the repetition, so their std is 0.
MetricsReport evaluate(const Evaluator& evaluator, std::span<const HoiSequence> real,
                       std::span<const HoiSequence> generated, std::span<const ObjectSpec> library,
                       std::uint64_t seed, int runs = 20, int token_frames = 16);

// For each test item, the training sequence with the most similar text
// embedding (lowest index on ties), relabelled with the test text.
std::vector<HoiSequence> retrieve(std::span<const HoiSequence> test, std::span<const HoiSequence> train);

}  // namespace ardhoi
