#include "ardhoi/optim.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace ardhoi {

namespace {
constexpr char kMagic[8] = {'A', 'R', 'D', 'H', 'C', 'K', 'P', '1'};
}

Tensor ParamStore::add(const std::string& name, Tensor value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  value.set_requires_grad(!frozen_);
  index_[name] = params_.size();
  params_.emplace_back(name, value);
  return value;
}

Tensor ParamStore::add_randn(const std::string& name, Shape shape, std::mt19937_64& rng, float stddev) {
  return add(name, Tensor::randn(std::move(shape), rng, stddev));
}

Tensor ParamStore::add_uniform(const std::string& name, Shape shape, std::mt19937_64& rng, float bound) {
  return add(name, Tensor::uniform(std::move(shape), rng, -bound, bound));
}

Tensor ParamStore::add_constant(const std::string& name, Shape shape, float value) {
  return add(name, Tensor::full(std::move(shape), value));
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return params_[it->second].second;
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void ParamStore::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (auto& [_, t] : params_) {
    t.set_requires_grad(!frozen);
    if (frozen) t.zero_grad();
  }
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

void ParamStore::copy_from(const ParamStore& other) {
  for (auto& [name, t] : params_) {
    const Tensor& src = other.get(name);
    if (src.shape() != t.shape())
      throw ShapeError("parameter " + name + ": shape " + shape_str(src.shape()) + " != " + shape_str(t.shape()));
    auto dst = t.mutable_data();
    std::copy(src.data().begin(), src.data().end(), dst.begin());
  }
}

Adam::Adam(ParamStore& params, AdamConfig config) : params_(params), config_(config) {
  for (const auto& [_, t] : params_.entries()) {
    m_.emplace_back(t.size(), 0.0f);
    v_.emplace_back(t.size(), 0.0f);
  }
}

void Adam::step() {
  auto& entries = params_.entries();
  double sq = 0.0;
  for (const auto& [name, t] : entries) {
    for (float g : t.grad()) {
      if (!std::isfinite(g)) {
        params_.zero_grad();
        throw TrainingHalted("non-finite gradient in parameter '" + name + "' at step " + std::to_string(t_ + 1));
      }
      sq += static_cast<double>(g) * g;
    }
  }
  float clip = 1.0f;
  if (config_.clip_norm > 0.0f) {
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) clip = static_cast<float>(config_.clip_norm / norm);
  }
  ++t_;
  const float bc1 = 1.0f - std::pow(config_.beta1, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(config_.beta2, static_cast<float>(t_));
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor t = entries[p].second;
    if (!t.has_grad()) continue;
    auto w = t.mutable_data();
    auto g = t.grad();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const float gi = g[i] * clip;
      m[i] = config_.beta1 * m[i] + (1.0f - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0f - config_.beta2) * gi * gi;
      const float mhat = m[i] / bc1;
      const float vhat = v[i] / bc2;
      w[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
  params_.zero_grad();
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const nlohmann::json& meta) {
  nlohmann::json header;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params.entries()) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size() * sizeof(float);
  }
  header["meta"] = meta.is_null() ? nlohmann::json::object() : meta;
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [_, t] : params.entries())
    out.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
  if (!out) throw std::runtime_error("short write on checkpoint " + path.string());
}

namespace {

nlohmann::json read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path.string());
  return nlohmann::json::parse(text);
}

}  // namespace

nlohmann::json read_checkpoint_meta(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint not found: " + path.string());
  return read_header(in, path)["meta"];
}

nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint not found: " + path.string());
  const nlohmann::json header = read_header(in, path);
  const auto data_start = in.tellg();
  std::map<std::string, nlohmann::json> entries;
  for (const auto& e : header["tensors"]) entries[e["name"].get<std::string>()] = e;
  for (const auto& [name, t] : params.entries()) {
    auto it = entries.find(name);
    if (it == entries.end()) throw std::runtime_error("checkpoint " + path.string() + " lacks parameter " + name);
    const Shape shape = it->second["shape"].get<Shape>();
    if (shape != t.shape())
      throw ShapeError("checkpoint parameter " + name + " has shape " + shape_str(shape) + ", expected " + shape_str(t.shape()));
    in.seekg(data_start + static_cast<std::streamoff>(it->second["offset"].get<std::uint64_t>()));
    Tensor dst = t;
    in.read(reinterpret_cast<char*>(dst.mutable_data().data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint data for " + name);
  }
  return header["meta"];
}

}  // namespace ardhoi
