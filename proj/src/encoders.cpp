#include "ardhoi/encoders.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ardhoi/synth.hpp"

namespace ardhoi {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::vector<float> encode_text(const std::string& text, int dims) {
  std::vector<double> acc(static_cast<std::size_t>(dims), 0.0);
  std::istringstream in(text);
  std::string tok;
  int count = 0;
  while (in >> tok) {
    for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const std::uint64_t h = fnv1a(tok);
    acc[h % static_cast<std::uint64_t>(dims)] += (h >> 63) ? -1.0 : 1.0;
    ++count;
  }
  std::vector<float> out(acc.size(), 0.0f);
  if (count == 0) return out;
  double n2 = 0.0;
  for (auto& v : acc) {
    v /= count;
    n2 += v * v;
  }
  // Tokens can cancel inside one bucket; leave those texts at zero rather than divide by it.
  if (n2 <= 0.0) return out;
  const double inv = 1.0 / std::sqrt(n2);
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] * inv);
  return out;
}

PointEncoder::PointEncoder(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  l1_ = nn::Linear(params_, "point.l1", 3, 64, rng);
  l2_ = nn::Linear(params_, "point.l2", 64, kPointDims, rng);
  head_ = nn::Linear(params_, "point.head", kPointDims, kClasses, rng);
}

Tensor PointEncoder::features(const Tensor& points) const { return max_rows(relu(l2_(relu(l1_(points))))); }

Tensor PointEncoder::logits(const Tensor& points) const { return head_(features(points)); }

std::vector<float> PointEncoder::encode(std::span<const Vec3> points) const {
  if (points.size() != static_cast<std::size_t>(kPointsPerObject))
    throw std::invalid_argument("point encoder expects " + std::to_string(kPointsPerObject) + " points, got " +
                                std::to_string(points.size()));
  std::vector<float> flat;
  flat.reserve(points.size() * 3);
  for (const auto& p : points)
    for (double v : p) flat.push_back(static_cast<float>(v));
  NoGradGuard guard;
  return features(Tensor::from({kPointsPerObject, 3}, std::move(flat))).to_vector();
}

LabelledClouds sample_labelled_clouds(int n, std::mt19937_64& rng) {
  LabelledClouds out;
  out.count = n;
  out.points.reserve(static_cast<std::size_t>(n) * kPointsPerObject * 3);
  std::uniform_int_distribution<int> pick(0, synth::kNumPrimitives - 1);
  for (int i = 0; i < n; ++i) {
    const auto prim = static_cast<synth::Primitive>(pick(rng));
    const ObjectSpec obj = synth::make_object("sample", prim, synth::random_dims(prim, rng), rng);
    for (const auto& p : obj.points)
      for (double v : p) out.points.push_back(static_cast<float>(v));
    out.labels.push_back(static_cast<int>(prim));
  }
  return out;
}

double classification_accuracy(const PointEncoder& encoder, const LabelledClouds& data) {
  NoGradGuard guard;
  const Tensor logits = encoder.logits(Tensor::from({data.count, kPointsPerObject, 3}, data.points));
  int correct = 0;
  for (int i = 0; i < data.count; ++i) {
    int best = 0;
    for (int c = 1; c < PointEncoder::kClasses; ++c)
      if (logits[static_cast<std::size_t>(i) * PointEncoder::kClasses + c] >
          logits[static_cast<std::size_t>(i) * PointEncoder::kClasses + best])
        best = c;
    correct += best == data.labels[static_cast<std::size_t>(i)];
  }
  return data.count ? static_cast<double>(correct) / data.count : 0.0;
}

PretrainReport pretrain_point_encoder(PointEncoder& encoder, std::uint64_t seed, int steps, int batch) {
  std::mt19937_64 rng(seed);
  const LabelledClouds train = sample_labelled_clouds(600, rng);
  const LabelledClouds test = sample_labelled_clouds(200, rng);
  encoder.params().set_frozen(false);
  Adam opt(encoder.params(), AdamConfig{.lr = 3e-3f});
  std::uniform_int_distribution<int> pick(0, train.count - 1);
  const std::size_t stride = static_cast<std::size_t>(kPointsPerObject) * 3;
  PretrainReport rep;
  for (int s = 0; s < steps; ++s) {
    std::vector<float> pts;
    std::vector<float> onehot(static_cast<std::size_t>(batch) * PointEncoder::kClasses, 0.0f);
    pts.reserve(batch * stride);
    for (int b = 0; b < batch; ++b) {
      const int i = pick(rng);
      pts.insert(pts.end(), train.points.begin() + i * stride, train.points.begin() + (i + 1) * stride);
      onehot[static_cast<std::size_t>(b) * PointEncoder::kClasses + train.labels[static_cast<std::size_t>(i)]] = 1.0f;
    }
    const Tensor logits = encoder.logits(Tensor::from({batch, kPointsPerObject, 3}, std::move(pts)));
    const Tensor loss = -mean(sum_axis(Tensor::from({batch, PointEncoder::kClasses}, onehot) * log(softmax(logits) + 1e-7f), 1));
    loss.backward();
    opt.step();
    rep.final_loss = loss.item();
  }
  encoder.params().set_frozen(true);
  rep.train_accuracy = classification_accuracy(encoder, train);
  rep.test_accuracy = classification_accuracy(encoder, test);
  return rep;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

}  // namespace ardhoi
