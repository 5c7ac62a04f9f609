#pragma once

// Condition encoders: a frozen hashed bag-of-words for text and a small
// PointNet-style network for object clouds.

#include <random>
#include <span>
#include <string>
#include <vector>

#include "ardhoi/hoi.hpp"
#include "ardhoi/nn.hpp"
#include "ardhoi/optim.hpp"

namespace ardhoi {

inline constexpr int kTextDims = 64;
inline constexpr int kPointDims = 64;

// Whitespace tokens hashed into `dims` signed buckets, averaged and
// L2-normalised. The empty string maps to the zero vector, which doubles as
// the null text condition.
std::vector<float> encode_text(const std::string& text, int dims = kTextDims);

class PointEncoder {
 public:
  static constexpr int kClasses = 5;

  explicit PointEncoder(std::uint64_t seed = 3);

  // [P, 3] -> [64] or [B, P, 3] -> [B, 64]; max-pooled so row order is irrelevant.
  Tensor features(const Tensor& points) const;
  Tensor logits(const Tensor& points) const;
  // Exactly kPointsPerObject points, otherwise std::invalid_argument.
  std::vector<float> encode(std::span<const Vec3> points) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  ParamStore params_;
  nn::Linear l1_, l2_, head_;
};

struct PretrainReport {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double final_loss = 0.0;
};

// Trains primitive-shape classification on freshly sampled clouds and
// freezes the encoder.
PretrainReport pretrain_point_encoder(PointEncoder& encoder, std::uint64_t seed, int steps = 300, int batch = 32);

// Labelled clouds of random primitives, for training and held-out checks.
struct LabelledClouds {
  std::vector<float> points;  // [n, 256, 3]
  std::vector<int> labels;
  int count = 0;
};
LabelledClouds sample_labelled_clouds(int n, std::mt19937_64& rng);
double classification_accuracy(const PointEncoder& encoder, const LabelledClouds& data);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

}  // namespace ardhoi
