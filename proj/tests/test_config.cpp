#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ardhoi/pipeline.hpp"

using namespace ardhoi;
namespace fs = std::filesystem;

TEST_CASE("config keys") {
  CHECK_THROWS_AS(config_from_json({{"no_such_key", 1}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"d_l", "wide"}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"seed", -1}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"context_kind", "rnn"}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"ddim_steps", 2000}}), std::invalid_argument);
  CHECK_THROWS_AS(preset_config("huge"), std::invalid_argument);

  const Config c = config_from_json({{"d_l", 48}, {"denoiser_kind", "transformer"}, {"xi", 3.0}});
  CHECK(c.cvae.d_l == 48);
  CHECK(c.ardm.denoiser_kind == DenoiserKind::transformer);
  CHECK(c.ardm.diffusion.xi == 3.0);

  const auto j = to_json(c);
  CHECK(j.size() == config_keys().size());
  const Config back = config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c) != config_hash(Config{}));
  CHECK(config_hash(c).size() == 64);
  Config moved = c;
  moved.out_dir = "elsewhere";
  CHECK(config_hash(moved) == config_hash(c));
}

TEST_CASE("presets") {
  const Config desk = preset_config("desk");
  CHECK(desk.cvae.tau == doctest::Approx(0.03));
  CHECK(desk.cvae.alpha == 1.0);
  CHECK(desk.cvae.lambda_tri == doctest::Approx(0.1));
  CHECK(desk.cvae.lambda_kl == doctest::Approx(1e-4));
  CHECK(desk.ardm.diffusion.steps == 1000);
  CHECK(desk.ardm.diffusion.ddim_steps == 50);
  CHECK(desk.ardm.diffusion.xi == 2.0);
  CHECK(desk.ardm.diffusion.p_uncond == doctest::Approx(0.1));

  const Config paper = config_from_json({{"preset", "paper"}});
  CHECK(paper.cvae.d_l == 512);
  CHECK(paper.cvae.hidden == 1024);
  CHECK(paper.ardm.context.d == 512);
  CHECK(paper.ardm.context.state == 32);
  CHECK(paper.ardm.context.expand == 2);
  CHECK(paper.ardm.context.layers == 27);
  CHECK(paper.ardm.denoiser_hidden == 1024);
}

TEST_CASE("ablation variants") {
  const Config base;
  CHECK(ablation_rows().front() == "Full");
  CHECK(ablation_rows().size() == 5);
  CHECK(ablation_variant(base, "w.o. Triplet Loss").cvae.lambda_tri == 0.0);
  CHECK(ablation_variant(base, "TRM Context Encoder").ardm.context_kind == ContextKind::transformer);
  CHECK(ablation_variant(base, "TRM Denoiser").ardm.denoiser_kind == DenoiserKind::transformer);
  CHECK(ablation_variant(base, "MSE Loss").ardm.mse_regressor);
  CHECK_THROWS_AS(ablation_variant(base, "Other"), std::invalid_argument);
}

TEST_CASE("phase prerequisites and manifest") {
  const fs::path dir = fs::temp_directory_path() / "ardhoi_test_config";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const ArtifactPaths paths{dir};
  Config cfg;

  try {
    run_train_ardm(cfg, paths);
    FAIL("expected a missing artifact");
  } catch (const MissingArtifact& e) {
    CHECK(std::string(e.what()).find("cVAE checkpoint missing") != std::string::npos);
  }
  CHECK_THROWS_AS(run_train_cvae(cfg, paths), MissingArtifact);

  run_synth_data(6, 3, paths.corpus(), paths.objects());
  CHECK(read_sequences(paths.corpus()).size() == 6);
  write_manifest(paths, cfg, "synth-data");
  std::ifstream in(paths.manifest());
  const auto m = nlohmann::json::parse(in);
  CHECK(m["subcommand"] == "synth-data");
  CHECK(m["config_hash"] == config_hash(cfg));
  CHECK(m["artifacts"].contains("corpus.jsonl"));
  CHECK(m["artifacts"]["corpus.jsonl"].get<std::string>().size() == 40);

  // Empty file: git's well-known empty blob id.
  std::ofstream(dir / "empty").close();
  CHECK(git_blob_hash(dir / "empty") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  fs::remove_all(dir);
}
