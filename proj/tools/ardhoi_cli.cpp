// ardhoi: runs one pipeline phase per invocation.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "ardhoi/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ardhoi;

int main(int argc, char** argv) {
  CLI::App app{"Text-conditioned human-object interaction generation with continuous tokens"};
  app.require_subcommand(1);

  std::string config_path, preset, out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--preset", preset, "desk or paper (overrides the config's preset)")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--seed", seed, "global seed");
  app.add_option("--out-dir", out_dir, "artifact directory");

  auto* synth = app.add_subcommand("synth-data", "write a procedural corpus and its object library");
  int n = 0;
  std::optional<std::uint64_t> synth_seed;
  std::string synth_out, synth_objects;
  synth->add_option("--n", n, "number of sequences (default: corpus_size)");
  synth->add_option("--seed", synth_seed, "corpus seed (default: global seed)");
  synth->add_option("--out", synth_out, "corpus JSONL path");
  synth->add_option("--objects", synth_objects, "object library JSON path");

  auto* pretrain = app.add_subcommand("pretrain-encoders", "train the point encoder and the metric evaluator");
  auto* train_cvae_cmd = app.add_subcommand("train-cvae", "phase 1: contrastive VAE tokenizer");
  auto* train_ardm_cmd = app.add_subcommand("train-ardm", "phase 2: autoregressive diffusion model");

  auto* gen = app.add_subcommand("generate", "generate one sequence");
  std::string text, object, gen_out;
  std::optional<std::uint64_t> gen_seed;
  std::optional<double> xi;
  gen->add_option("--text", text, "prompt")->required();
  gen->add_option("--object", object, "object label from the library")->required();
  gen->add_option("--seed", gen_seed, "sampling seed (default: global seed)");
  gen->add_option("--xi", xi, "guidance factor (default: config xi)");
  gen->add_option("--out", gen_out, "output JSON (default: <out-dir>/generated.json)");

  auto* eval = app.add_subcommand("eval", "score generated sequences against references");
  std::string real, gen_set, report;
  eval->add_option("--real", real, "reference JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--gen", gen_set, "generated JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--report", report, "report JSON (default: <out-dir>/report.json)");

  auto* ablate = app.add_subcommand("ablate", "train and score the ablation grid");

  CLI11_PARSE(app, argc, argv);

  try {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      j = nlohmann::json::parse(in);
    }
    // --preset replaces the file's preset; the file's other keys still apply on top.
    if (!preset.empty()) j["preset"] = preset;
    Config cfg = config_from_json(j);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    const ArtifactPaths paths{cfg.out_dir};
    fs::create_directories(paths.dir);
    std::string name;

    if (*synth) {
      name = "synth-data";
      run_synth_data(n > 0 ? n : cfg.corpus_size, synth_seed.value_or(cfg.seed),
                     synth_out.empty() ? paths.corpus() : fs::path(synth_out),
                     synth_objects.empty() ? paths.objects() : fs::path(synth_objects));
    } else if (*pretrain) {
      name = "pretrain-encoders";
      run_pretrain_encoders(cfg, paths);
    } else if (*train_cvae_cmd) {
      name = "train-cvae";
      const auto rep = run_train_cvae(cfg, paths);
      std::cout << "cvae trained: final loss " << rep.epoch_loss.back() << ", " << rep.seconds << " s\n";
    } else if (*train_ardm_cmd) {
      name = "train-ardm";
      const auto rep = run_train_ardm(cfg, paths);
      std::cout << "ardm trained: final loss " << rep.epoch_loss.back() << ", " << rep.seconds << " s\n";
    } else if (*gen) {
      name = "generate";
      const fs::path out = gen_out.empty() ? paths.dir / "generated.json" : fs::path(gen_out);
      const auto r = run_generate(cfg, paths, text, object, gen_seed.value_or(cfg.seed), xi, out);
      std::cout << r.sequence.frames.size() << " frames, " << r.token_count << " tokens, stop "
                << stop_reason_name(r.stop_reason) << " -> " << out.string() << '\n';
    } else if (*eval) {
      name = "eval";
      const auto rep = run_eval(cfg, paths, real, gen_set, report.empty() ? paths.report() : fs::path(report));
      std::cout << to_json(rep).dump(2) << '\n';
    } else if (*ablate) {
      name = "ablate";
      std::cout << run_ablate(cfg, paths).dump(2) << '\n';
    }
    write_manifest(paths, cfg, name);
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
