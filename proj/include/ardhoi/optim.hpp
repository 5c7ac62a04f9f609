#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ardhoi/tensor.hpp"

namespace ardhoi {

// Named registry of trainable tensors. Registration order is preserved and is
// the order used by checkpoints and the optimiser.
class ParamStore {
 public:
  Tensor add(const std::string& name, Tensor value);
  Tensor add_randn(const std::string& name, Shape shape, std::mt19937_64& rng, float stddev);
  Tensor add_uniform(const std::string& name, Shape shape, std::mt19937_64& rng, float bound);
  Tensor add_constant(const std::string& name, Shape shape, float value);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return params_; }
  std::size_t count() const;

  // Frozen stores stop recording gradients for their tensors.
  void set_frozen(bool frozen);
  bool frozen() const { return frozen_; }
  void zero_grad();

  // Copies values from `other` for every matching name; throws on missing names or shape mismatch.
  void copy_from(const ParamStore& other);

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::map<std::string, std::size_t> index_;
  bool frozen_ = false;
};

class TrainingHalted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  // Global gradient-norm clip; <= 0 disables.
  float clip_norm = 0.0f;
};

class Adam {
 public:
  Adam(ParamStore& params, AdamConfig config);

  // Applies one bias-corrected Adam update and zeroes all gradients.
  // Throws TrainingHalted if any gradient is non-finite.
  void step();
  void set_lr(float lr) { config_.lr = lr; }
  const AdamConfig& config() const { return config_; }
  long steps() const { return t_; }

 private:
  ParamStore& params_;
  AdamConfig config_;
  std::vector<std::vector<float>> m_, v_;
  long t_ = 0;
};

// Flat binary checkpoint: 8-byte magic, u64 header length, JSON header
// {"tensors": [{"name", "shape", "offset"}], "meta": {...}}, then raw
// little-endian float32 data; offsets are byte offsets into the data block.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const nlohmann::json& meta = {});
// Loads values into an already-constructed store (names and shapes must match).
nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore& params);
nlohmann::json read_checkpoint_meta(const std::filesystem::path& path);

}  // namespace ardhoi
