#include "ardhoi/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <openssl/evp.h>

#include "ardhoi/synth.hpp"

namespace ardhoi {

namespace fs = std::filesystem;

namespace {

void require(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw MissingArtifact(what + " missing: " + p.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<ObjectSpec> library_at(const ArtifactPaths& paths) {
  require(paths.objects(), "object library");
  return read_object_library(paths.objects());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_outputs(std::span<const GenResult> results) {
  for (const auto& r : results) {
    const auto bad = check_invariants(r.sequence);
    if (!bad.empty()) throw std::runtime_error("generated sequence violates an invariant: " + bad.front());
  }
}

Evaluator evaluator_for(const Config& cfg, const ArtifactPaths& paths, std::span<const HoiSequence> corpus) {
  if (fs::exists(paths.evaluator())) return Evaluator::load(paths.evaluator());
  Evaluator ev(cfg.evaluator, cfg.seed);
  std::clog << "training evaluator on " << corpus.size() << " sequences\n";
  ev.train(corpus, cfg.seed);
  ev.save(paths.evaluator());
  return ev;
}

std::string slug(const std::string& row) {
  std::string s;
  for (char c : row) {
    if (std::isalnum(static_cast<unsigned char>(c))) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    else if (!s.empty() && s.back() != '_') s += '_';
  }
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s;
}

nlohmann::json stat_row(const MetricsReport& r) { return to_json(r); }

}  // namespace

std::string git_blob_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string content = buf.str();
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return out.str();
}

void write_manifest(const ArtifactPaths& paths, const Config& cfg, const std::string& subcommand) {
  nlohmann::json artifacts = nlohmann::json::object();
  for (const auto& p : {paths.corpus(), paths.objects(), paths.pointnet(), paths.evaluator(), paths.cvae(), paths.ardm(),
                        paths.generated(), paths.report()})
    if (fs::exists(p)) artifacts[p.filename().string()] = git_blob_hash(p);
  write_json(paths.manifest(), {{"subcommand", subcommand},
                                {"seed", cfg.seed},
                                {"config_hash", config_hash(cfg)},
                                {"config", to_json(cfg)},
                                {"artifacts", artifacts}});
}

void save_point_encoder(const PointEncoder& encoder, const fs::path& path) {
  save_checkpoint(path, encoder.params(), {{"kind", "pointnet"}});
}

PointEncoder load_point_encoder(const fs::path& path) {
  const auto meta = read_checkpoint_meta(path);
  if (meta.value("kind", "") != "pointnet") throw std::runtime_error(path.string() + " is not a point encoder checkpoint");
  PointEncoder e;
  load_checkpoint(path, e.params());
  e.params().set_frozen(true);
  return e;
}

std::vector<HoiSequence> test_split(const Config& cfg, std::span<const ObjectSpec> library) {
  return synth::generate_corpus(cfg.test_size, cfg.seed * 7919 + 104729, library);
}

std::uint64_t prompt_seed(std::uint64_t seed, std::size_t index) {
  return seed * 1000003ull + static_cast<std::uint64_t>(index);
}

std::vector<HoiSequence> BatchGeneration::sequences() const {
  std::vector<HoiSequence> out;
  for (const auto& r : results) out.push_back(r.sequence);
  return out;
}

double BatchGeneration::null_stop_fraction() const {
  if (results.empty()) return 0.0;
  int n = 0;
  for (const auto& r : results) n += r.stop_reason == StopReason::null_token;
  return static_cast<double>(n) / static_cast<double>(results.size());
}

BatchGeneration generate_batch(const Ardm& model, const Cvae& cvae, const PointEncoder& points,
                               std::span<const HoiSequence> prompts, std::span<const ObjectSpec> library,
                               std::uint64_t seed, std::optional<double> xi) {
  BatchGeneration out;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    GenRequest req;
    req.text = prompts[i].text;
    req.object = &find_object(library, prompts[i].object);
    req.seed = prompt_seed(seed, i);
    req.xi = xi;
    out.results.push_back(generate(model, cvae, points, req));
  }
  out.seconds = seconds_since(t0);
  return out;
}

// ---- phases -------------------------------------------------------------------------

void run_synth_data(int n, std::uint64_t seed, const fs::path& out, const fs::path& objects) {
  if (n < 1) throw std::invalid_argument("synth-data needs --n >= 1");
  const auto library = synth::default_object_library();
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  if (objects.has_parent_path()) fs::create_directories(objects.parent_path());
  write_object_library(objects, library);
  write_sequences(out, synth::generate_corpus(n, seed, library));
}

void run_pretrain_encoders(const Config& cfg, const ArtifactPaths& paths) {
  require(paths.corpus(), "corpus");
  PointEncoder pe;
  const auto rep = pretrain_point_encoder(pe, cfg.seed, cfg.pointnet_steps);
  std::clog << "point encoder accuracy train " << rep.train_accuracy << " test " << rep.test_accuracy << '\n';
  save_point_encoder(pe, paths.pointnet());
  const auto corpus = read_sequences(paths.corpus());
  Evaluator ev(cfg.evaluator, cfg.seed);
  const double loss = ev.train(corpus, cfg.seed);
  std::clog << "evaluator final loss " << loss << '\n';
  ev.save(paths.evaluator());
}

CvaeTrainReport run_train_cvae(const Config& cfg, const ArtifactPaths& paths) {
  require(paths.corpus(), "corpus");
  require(paths.pointnet(), "point encoder checkpoint");
  const auto library = library_at(paths);
  const auto pe = load_point_encoder(paths.pointnet());
  const auto data = make_cvae_data(read_sequences(paths.corpus()), library, pe);
  Cvae model(cfg.cvae, cfg.seed);
  const auto rep = train_cvae(model, data, cfg.seed, [](int e, double l) {
    std::clog << "cvae epoch " << e << " loss " << l << '\n';
  });
  model.save(paths.cvae(), {{"config_hash", config_hash(cfg)}});
  return rep;
}

ArdmTrainReport run_train_ardm(const Config& cfg, const ArtifactPaths& paths) {
  require(paths.cvae(), "cVAE checkpoint");
  require(paths.corpus(), "corpus");
  require(paths.pointnet(), "point encoder checkpoint");
  const auto library = library_at(paths);
  const Cvae cvae = Cvae::load(paths.cvae());
  const auto pe = load_point_encoder(paths.pointnet());
  const auto data = make_cvae_data(read_sequences(paths.corpus()), library, pe);
  Ardm model(cfg.ardm, cvae.config().d_l, cfg.seed);
  const auto rep = train_ardm(model, cvae, data, cfg.seed, [](int e, double l) {
    std::clog << "ardm epoch " << e << " loss " << l << '\n';
  });
  model.save(paths.ardm(), {{"config_hash", config_hash(cfg)}});
  return rep;
}

GenResult run_generate(const Config& cfg, const ArtifactPaths& paths, const std::string& text, const std::string& object,
                       std::uint64_t seed, std::optional<double> xi, const fs::path& out) {
  require(paths.cvae(), "cVAE checkpoint");
  require(paths.ardm(), "ARDM checkpoint");
  require(paths.pointnet(), "point encoder checkpoint");
  (void)cfg;
  const auto library = library_at(paths);
  const Cvae cvae = Cvae::load(paths.cvae());
  const Ardm model = Ardm::load(paths.ardm());
  const auto pe = load_point_encoder(paths.pointnet());
  GenRequest req;
  req.text = text;
  req.object = &find_object(library, object);
  req.seed = seed;
  req.xi = xi;
  const GenResult r = generate(model, cvae, pe, req);
  check_outputs(std::span<const GenResult>(&r, 1));
  nlohmann::json j = sequence_json(r.sequence);
  j["stop_reason"] = stop_reason_name(r.stop_reason);
  j["token_count"] = r.token_count;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_json(out, j);
  return r;
}

MetricsReport run_eval(const Config& cfg, const ArtifactPaths& paths, const fs::path& real, const fs::path& gen,
                       const fs::path& report) {
  const auto real_set = read_sequences(real);
  const auto gen_set = read_sequences(gen);
  const auto library = fs::exists(paths.objects()) ? read_object_library(paths.objects()) : synth::default_object_library();
  const Evaluator ev = evaluator_for(cfg, paths, real_set);
  const auto rep = evaluate(ev, real_set, gen_set, library, cfg.seed, cfg.eval_runs, cfg.cvae.token_frames);
  if (report.has_parent_path()) fs::create_directories(report.parent_path());
  write_json(report, to_json(rep));
  return rep;
}

const std::vector<std::string>& ablation_rows() {
  static const std::vector<std::string> rows{"Full", "w.o. Triplet Loss", "TRM Context Encoder", "TRM Denoiser",
                                             "MSE Loss"};
  return rows;
}

Config ablation_variant(const Config& base, const std::string& row) {
  Config c = base;
  if (row == "Full") return c;
  if (row == "w.o. Triplet Loss") c.cvae.lambda_tri = 0.0;
  else if (row == "TRM Context Encoder") c.ardm.context_kind = ContextKind::transformer;
  else if (row == "TRM Denoiser") c.ardm.denoiser_kind = DenoiserKind::transformer;
  else if (row == "MSE Loss") c.ardm.mse_regressor = true;
  else throw std::invalid_argument("unknown ablation row '" + row + "'");
  return c;
}

nlohmann::json run_ablate(const Config& cfg, const ArtifactPaths& paths) {
  require(paths.corpus(), "corpus");
  require(paths.pointnet(), "point encoder checkpoint");
  const auto library = library_at(paths);
  const auto corpus = read_sequences(paths.corpus());
  const auto pe = load_point_encoder(paths.pointnet());
  const auto data = make_cvae_data(corpus, library, pe);
  const auto test = test_split(cfg, library);
  const Evaluator ev = evaluator_for(cfg, paths, corpus);

  auto train_cvae_to = [&](const Config& c, const fs::path& p) {
    if (fs::exists(p)) return Cvae::load(p);
    Cvae m(c.cvae, c.seed);
    train_cvae(m, data, c.seed, [](int e, double l) { std::clog << "cvae epoch " << e << " loss " << l << '\n'; });
    m.save(p, {{"config_hash", config_hash(c)}});
    return m;
  };
  auto train_ardm_to = [&](const Config& c, const Cvae& cv, const fs::path& p) {
    if (fs::exists(p)) return Ardm::load(p);
    Ardm m(c.ardm, cv.config().d_l, c.seed);
    train_ardm(m, cv, data, c.seed, [](int e, double l) { std::clog << "ardm epoch " << e << " loss " << l << '\n'; });
    m.save(p, {{"config_hash", config_hash(c)}});
    return m;
  };

  const Cvae base_cvae = train_cvae_to(cfg, paths.cvae());
  nlohmann::json rows = nlohmann::json::array();
  nlohmann::json timing = nlohmann::json::array();
  for (const auto& row : ablation_rows()) {
    std::clog << "ablation row: " << row << '\n';
    const Config c = ablation_variant(cfg, row);
    const fs::path dir = row == "Full" ? paths.dir : paths.dir / "ablate" / slug(row);
    fs::create_directories(dir);
    const bool own_cvae = c.cvae.lambda_tri != cfg.cvae.lambda_tri;
    const Cvae cv = own_cvae ? train_cvae_to(c, dir / "cvae.ckpt") : base_cvae;
    const Ardm model = train_ardm_to(c, cv, dir / "ardm.ckpt");
    const auto gen = generate_batch(model, cv, pe, test, library, cfg.seed);
    check_outputs(gen.results);
    const auto rep = evaluate(ev, test, gen.sequences(), library, cfg.seed, cfg.eval_runs, cfg.cvae.token_frames);
    nlohmann::json r = stat_row(rep);
    r["name"] = row;
    r["null_stop_fraction"] = gen.null_stop_fraction();
    rows.push_back(r);
    timing.push_back({{"name", row}, {"seconds_per_sequence", gen.seconds / static_cast<double>(test.size())}});
  }
  const nlohmann::json report{{"ablation", rows}};
  write_json(paths.report(), report);
  write_json(paths.timing(), {{"ablation", timing}});
  return report;
}

}  // namespace ardhoi
