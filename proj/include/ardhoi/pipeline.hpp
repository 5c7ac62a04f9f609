#pragma once

// Phase wiring shared by the command-line tool and the acceptance run:
// artifact layout, manifests, batched generation and the ablation grid.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ardhoi/ardm.hpp"
#include "ardhoi/config.hpp"
#include "ardhoi/cvae.hpp"
#include "ardhoi/metrics.hpp"

namespace ardhoi {

class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArtifactPaths {
  std::filesystem::path dir;
  std::filesystem::path corpus() const { return dir / "corpus.jsonl"; }
  std::filesystem::path objects() const { return dir / "objects.json"; }
  std::filesystem::path pointnet() const { return dir / "pointnet.ckpt"; }
  std::filesystem::path evaluator() const { return dir / "evaluator.ckpt"; }
  std::filesystem::path cvae() const { return dir / "cvae.ckpt"; }
  std::filesystem::path ardm() const { return dir / "ardm.ckpt"; }
  std::filesystem::path generated() const { return dir / "generated.jsonl"; }
  std::filesystem::path report() const { return dir / "report.json"; }
  std::filesystem::path timing() const { return dir / "timing.json"; }
  std::filesystem::path manifest() const { return dir / "manifest.json"; }
};

// SHA-1 of "blob <size>\0<content>", as git names file contents.
std::string git_blob_hash(const std::filesystem::path& path);
// Config, its hash, the seed and the content hash of every artifact present.
void write_manifest(const ArtifactPaths& paths, const Config& cfg, const std::string& subcommand);

void save_point_encoder(const PointEncoder& encoder, const std::filesystem::path& path);
PointEncoder load_point_encoder(const std::filesystem::path& path);

// Held-out prompts with their reference motions, drawn from a seed disjoint from the training corpus.
std::vector<HoiSequence> test_split(const Config& cfg, std::span<const ObjectSpec> library);

std::uint64_t prompt_seed(std::uint64_t seed, std::size_t index);

struct BatchGeneration {
  std::vector<GenResult> results;
  double seconds = 0.0;
  std::vector<HoiSequence> sequences() const;
  double null_stop_fraction() const;
};
// One generation per prompt (its text and object), prompt i seeded with prompt_seed(seed, i).
BatchGeneration generate_batch(const Ardm& model, const Cvae& cvae, const PointEncoder& points,
                               std::span<const HoiSequence> prompts, std::span<const ObjectSpec> library,
                               std::uint64_t seed, std::optional<double> xi = {});

// ---- phases -------------------------------------------------------------------------

void run_synth_data(int n, std::uint64_t seed, const std::filesystem::path& out, const std::filesystem::path& objects);
void run_pretrain_encoders(const Config& cfg, const ArtifactPaths& paths);
CvaeTrainReport run_train_cvae(const Config& cfg, const ArtifactPaths& paths);
ArdmTrainReport run_train_ardm(const Config& cfg, const ArtifactPaths& paths);
GenResult run_generate(const Config& cfg, const ArtifactPaths& paths, const std::string& text,
                       const std::string& object, std::uint64_t seed, std::optional<double> xi,
                       const std::filesystem::path& out);
MetricsReport run_eval(const Config& cfg, const ArtifactPaths& paths, const std::filesystem::path& real,
                       const std::filesystem::path& gen, const std::filesystem::path& report);

// Row names of the ablation grid, full model first.
const std::vector<std::string>& ablation_rows();
Config ablation_variant(const Config& base, const std::string& row);
nlohmann::json run_ablate(const Config& cfg, const ArtifactPaths& paths);

}  // namespace ardhoi
