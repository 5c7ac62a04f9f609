#include "ardhoi/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <type_traits>

#include <openssl/evp.h>

namespace ardhoi {

namespace {

struct Entry {
  std::string name;
  std::function<void(Config&, const nlohmann::json&)> set;
  std::function<nlohmann::json(const Config&)> get;
};

template <class Ref>
Entry field(std::string name, Ref ref) {
  Entry e;
  e.name = name;
  e.set = [name, ref](Config& c, const nlohmann::json& j) {
    auto& dst = ref(c);
    using T = std::remove_reference_t<decltype(dst)>;
    bool ok = false;
    if constexpr (std::is_same_v<T, bool>) ok = j.is_boolean();
    else if constexpr (std::is_integral_v<T>) ok = j.is_number_integer() && (std::is_signed_v<T> || j.get<long long>() >= 0);
    else if constexpr (std::is_floating_point_v<T>) ok = j.is_number();
    else ok = j.is_string();
    if (!ok) throw std::invalid_argument("config key '" + name + "' has the wrong type: " + j.dump());
    dst = j.get<T>();
  };
  e.get = [ref](const Config& c) { return nlohmann::json(ref(c)); };
  return e;
}

Entry kind_field(std::string name, std::function<std::string(const Config&)> get,
                 std::function<void(Config&, const std::string&)> set, std::vector<std::string> allowed) {
  Entry e;
  e.name = name;
  e.set = [name, set, allowed](Config& c, const nlohmann::json& j) {
    if (!j.is_string() || std::find(allowed.begin(), allowed.end(), j.get<std::string>()) == allowed.end())
      throw std::invalid_argument("config key '" + name + "' must be one of the allowed names, got " + j.dump());
    set(c, j.get<std::string>());
  };
  e.get = [get](const Config& c) { return nlohmann::json(get(c)); };
  return e;
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back(field("seed", [](auto& c) -> auto& { return c.seed; }));
    t.push_back(field("out_dir", [](auto& c) -> auto& { return c.out_dir; }));
    t.push_back(field("corpus_size", [](auto& c) -> auto& { return c.corpus_size; }));
    t.push_back(field("test_size", [](auto& c) -> auto& { return c.test_size; }));
    t.push_back(field("pointnet_steps", [](auto& c) -> auto& { return c.pointnet_steps; }));
    t.push_back(field("eval_runs", [](auto& c) -> auto& { return c.eval_runs; }));
    // cVAE
    t.push_back(field("d_l", [](auto& c) -> auto& { return c.cvae.d_l; }));
    t.push_back(field("cvae_hidden", [](auto& c) -> auto& { return c.cvae.hidden; }));
    t.push_back(field("cvae_blocks", [](auto& c) -> auto& { return c.cvae.blocks; }));
    t.push_back(field("token_frames", [](auto& c) -> auto& { return c.cvae.token_frames; }));
    t.push_back(field("decoder_ssm_state", [](auto& c) -> auto& { return c.cvae.ssm_state; }));
    t.push_back(field("decoder_ssm_expand", [](auto& c) -> auto& { return c.cvae.ssm_expand; }));
    t.push_back(field("alpha", [](auto& c) -> auto& { return c.cvae.alpha; }));
    t.push_back(field("tau", [](auto& c) -> auto& { return c.cvae.tau; }));
    t.push_back(field("lambda_tri", [](auto& c) -> auto& { return c.cvae.lambda_tri; }));
    t.push_back(field("lambda_kl", [](auto& c) -> auto& { return c.cvae.lambda_kl; }));
    t.push_back(field("lambda_phy", [](auto& c) -> auto& { return c.cvae.lambda_phy; }));
    t.push_back(field("lambda_fk", [](auto& c) -> auto& { return c.cvae.lambda_fk; }));
    t.push_back(field("lambda_vel", [](auto& c) -> auto& { return c.cvae.lambda_vel; }));
    t.push_back(field("lambda_ovel", [](auto& c) -> auto& { return c.cvae.lambda_ovel; }));
    t.push_back(field("lambda_con", [](auto& c) -> auto& { return c.cvae.lambda_con; }));
    t.push_back(field("cvae_epochs", [](auto& c) -> auto& { return c.cvae.epochs; }));
    t.push_back(field("cvae_batch_sequences", [](auto& c) -> auto& { return c.cvae.batch_sequences; }));
    t.push_back(field("cvae_batch_triplets", [](auto& c) -> auto& { return c.cvae.batch_triplets; }));
    t.push_back(field("cvae_lr", [](auto& c) -> auto& { return c.cvae.lr; }));
    // context encoder
    t.push_back(field("context_d", [](auto& c) -> auto& { return c.ardm.context.d; }));
    t.push_back(field("context_state", [](auto& c) -> auto& { return c.ardm.context.state; }));
    t.push_back(field("context_expand", [](auto& c) -> auto& { return c.ardm.context.expand; }));
    t.push_back(field("context_layers", [](auto& c) -> auto& { return c.ardm.context.layers; }));
    t.push_back(kind_field(
        "context_kind",
        [](const Config& c) { return std::string(c.ardm.context_kind == ContextKind::ssm ? "ssm" : "transformer"); },
        [](Config& c, const std::string& v) {
          c.ardm.context_kind = v == "ssm" ? ContextKind::ssm : ContextKind::transformer;
        },
        {"ssm", "transformer"}));
    // denoiser and diffusion
    t.push_back(kind_field(
        "denoiser_kind",
        [](const Config& c) { return std::string(c.ardm.denoiser_kind == DenoiserKind::mlp ? "mlp" : "transformer"); },
        [](Config& c, const std::string& v) {
          c.ardm.denoiser_kind = v == "mlp" ? DenoiserKind::mlp : DenoiserKind::transformer;
        },
        {"mlp", "transformer"}));
    t.push_back(field("mse_regressor", [](auto& c) -> auto& { return c.ardm.mse_regressor; }));
    t.push_back(field("denoiser_hidden", [](auto& c) -> auto& { return c.ardm.denoiser_hidden; }));
    t.push_back(field("denoiser_blocks", [](auto& c) -> auto& { return c.ardm.denoiser_blocks; }));
    t.push_back(field("T_steps", [](auto& c) -> auto& { return c.ardm.diffusion.steps; }));
    t.push_back(field("ddim_steps", [](auto& c) -> auto& { return c.ardm.diffusion.ddim_steps; }));
    t.push_back(field("beta_min", [](auto& c) -> auto& { return c.ardm.diffusion.beta_min; }));
    t.push_back(field("beta_max", [](auto& c) -> auto& { return c.ardm.diffusion.beta_max; }));
    t.push_back(field("xi", [](auto& c) -> auto& { return c.ardm.diffusion.xi; }));
    t.push_back(field("p_uncond", [](auto& c) -> auto& { return c.ardm.diffusion.p_uncond; }));
    t.push_back(field("ardm_epochs", [](auto& c) -> auto& { return c.ardm.epochs; }));
    t.push_back(field("ardm_batch_sequences", [](auto& c) -> auto& { return c.ardm.batch_sequences; }));
    t.push_back(field("ardm_lr", [](auto& c) -> auto& { return c.ardm.lr; }));
    // evaluator
    t.push_back(field("eval_width", [](auto& c) -> auto& { return c.evaluator.width; }));
    t.push_back(field("eval_chunk_frames", [](auto& c) -> auto& { return c.evaluator.chunk_frames; }));
    t.push_back(field("eval_layers", [](auto& c) -> auto& { return c.evaluator.layers; }));
    t.push_back(field("eval_epochs", [](auto& c) -> auto& { return c.evaluator.epochs; }));
    return t;
  }();
  return table;
}

void validate(const Config& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("invalid config: " + what);
  };
  need(c.corpus_size >= 1 && c.test_size >= 1, "corpus_size and test_size must be positive");
  need(c.cvae.token_frames >= 1 && c.cvae.token_frames <= kMaxFrames, "token_frames must lie in [1, 240]");
  need(c.cvae.d_l >= 1 && c.cvae.hidden >= 1 && c.cvae.blocks >= 1, "cVAE sizes must be positive");
  need(c.ardm.context.d >= 1 && c.ardm.context.layers >= 1 && c.ardm.context.state >= 1, "context sizes must be positive");
  need(c.ardm.diffusion.steps >= 1 && c.ardm.diffusion.ddim_steps >= 1 &&
           c.ardm.diffusion.ddim_steps <= c.ardm.diffusion.steps,
       "ddim_steps must lie in [1, T_steps]");
  need(c.ardm.diffusion.beta_min > 0 && c.ardm.diffusion.beta_max < 1 &&
           c.ardm.diffusion.beta_min <= c.ardm.diffusion.beta_max,
       "betas must satisfy 0 < beta_min <= beta_max < 1");
  need(c.ardm.diffusion.p_uncond >= 0 && c.ardm.diffusion.p_uncond <= 1, "p_uncond must lie in [0, 1]");
  need(c.cvae.tau > 0, "tau must be positive");
  need(c.eval_runs >= 1, "eval_runs must be positive");
}

}  // namespace

Config preset_config(const std::string& name) {
  Config c;
  if (name == "desk") {
    c.preset = "desk";
    return c;
  }
  if (name != "paper") throw std::invalid_argument("unknown preset '" + name + "' (expected desk or paper)");
  c.preset = "paper";
  c.cvae.d_l = 512;
  c.cvae.hidden = 1024;
  c.cvae.token_frames = 16;
  c.ardm.context = SsmConfig{512, 32, 2, 27};
  c.ardm.denoiser_hidden = 1024;
  c.ardm.diffusion.ddim_steps = 50;
  return c;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k{"preset"};
    for (const auto& e : entries()) k.push_back(e.name);
    return k;
  }();
  return keys;
}

Config config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  std::string preset = "desk";
  if (j.contains("preset")) {
    if (!j.at("preset").is_string()) throw std::invalid_argument("config key 'preset' must be a string");
    preset = j.at("preset").get<std::string>();
  }
  Config c = preset_config(preset);
  for (const auto& [key, value] : j.items()) {
    if (key == "preset") continue;
    const auto& table = entries();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Entry& e) { return e.name == key; });
    if (it == table.end()) throw std::invalid_argument("unknown config key '" + key + "'");
    it->set(c, value);
  }
  validate(c);
  return c;
}

nlohmann::json to_json(const Config& c) {
  nlohmann::json j{{"preset", c.preset}};
  for (const auto& e : entries()) j[e.name] = e.get(c);
  return j;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const Config& c) {
  auto j = to_json(c);
  j.erase("out_dir");
  const std::string text = j.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return out.str();
}

}  // namespace ardhoi
