#pragma once

// One flat JSON document configures every phase. Keys not listed in
// config_keys() are rejected.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ardhoi/ardm.hpp"
#include "ardhoi/cvae.hpp"
#include "ardhoi/metrics.hpp"

namespace ardhoi {

struct Config {
  std::string preset = "desk";
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int corpus_size = 500;
  int test_size = 64;
  int pointnet_steps = 300;
  int eval_runs = 20;
  CvaeConfig cvae;
  ArdmConfig ardm;
  EvaluatorConfig evaluator;
};

// "desk" (default sizes) or "paper" (d_l 512, widths 1024, 27 SSM layers of
// width 512 with N = 32, E = 2).
Config preset_config(const std::string& name);

// Starts from the preset named by "preset" (desk when absent), then applies
// every other key. Unknown keys and wrong types throw std::invalid_argument.
Config config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Config& c);
const std::vector<std::string>& config_keys();

Config load_config(const std::string& path);

// Hex SHA-256 of the canonical JSON dump, out_dir left out.
std::string config_hash(const Config& c);

}  // namespace ardhoi
