#include "ardhoi/context.hpp"

#include <cmath>
#include <stdexcept>

namespace ardhoi {

ContextEncoder::ContextEncoder(ParamStore& store, const std::string& name, int text_dims, int point_dims,
                               int token_dims, int width, std::mt19937_64& rng)
    : width_(width),
      text_proj_(store, name + ".text_proj", text_dims, width, rng),
      point_proj_(store, name + ".point_proj", point_dims, width, rng),
      token_proj_(store, name + ".token_proj", token_dims, width, rng) {}

Tensor ContextEncoder::project(std::span<const float> v, const nn::Linear& proj) const {
  return proj(Tensor::from({1, static_cast<int>(v.size())}, std::vector<float>(v.begin(), v.end())));
}

Tensor ContextEncoder::encode(const ContextBatch& batch, ScanMode mode) const {
  const int seqs = static_cast<int>(batch.text.size());
  if (static_cast<int>(batch.point.size()) != seqs || static_cast<int>(batch.token_counts.size()) != seqs)
    throw std::invalid_argument("context batch fields disagree on the sequence count");
  std::vector<float> text, point;
  for (int s = 0; s < seqs; ++s) {
    text.insert(text.end(), batch.text[s].begin(), batch.text[s].end());
    point.insert(point.end(), batch.point[s].begin(), batch.point[s].end());
  }
  std::vector<Tensor> pieces{text_proj_(Tensor::from({seqs, static_cast<int>(batch.text[0].size())}, std::move(text))),
                             point_proj_(Tensor::from({seqs, static_cast<int>(batch.point[0].size())}, std::move(point)))};
  int total_tokens = 0;
  for (int n : batch.token_counts) total_tokens += n;
  if (total_tokens > 0) {
    if (!batch.tokens.defined() || batch.tokens.dim(0) != total_tokens)
      throw std::invalid_argument("context batch token rows do not match token counts");
    pieces.push_back(token_proj_(batch.tokens));
  }
  const Tensor stacked = concat(pieces, 0);

  // Interleave into [text, object, tokens...] per sequence.
  std::vector<int> order, starts, cond_rows;
  int tok = 2 * seqs;
  for (int s = 0; s < seqs; ++s) {
    starts.push_back(static_cast<int>(order.size()));
    order.push_back(s);
    order.push_back(seqs + s);
    for (int i = 0; i < batch.token_counts[s]; ++i) order.push_back(tok++);
    for (int j = 1; j <= batch.token_counts[s] + 1; ++j) cond_rows.push_back(starts.back() + j);
  }
  const Tensor out = trunk(gather_rows(stacked, order), starts, mode);
  return gather_rows(out, cond_rows);
}

ContextState ContextEncoder::start(std::span<const float> text, std::span<const float> point) const {
  NoGradGuard guard;
  ContextState st;
  if (kind() == ContextKind::ssm) st.ssm = static_cast<const SsmContextEncoder*>(this)->stack().initial_state();
  step(project(text, text_proj_), st);
  st.condition = step(project(point, point_proj_), st).to_vector();
  st.position = 1;
  return st;
}

void ContextEncoder::advance(ContextState& state, std::span<const float> token) const {
  NoGradGuard guard;
  state.condition = step(project(token, token_proj_), state).to_vector();
  ++state.position;
}

SsmContextEncoder::SsmContextEncoder(ParamStore& store, const std::string& name, int text_dims, int point_dims,
                                     int token_dims, const SsmConfig& cfg, std::mt19937_64& rng)
    : ContextEncoder(store, name, text_dims, point_dims, token_dims, cfg.d, rng), stack_(store, name + ".ssm", cfg, rng) {}

Tensor SsmContextEncoder::trunk(const Tensor& rows, std::span<const int> starts, ScanMode mode) const {
  return stack_(rows, starts, mode);
}

Tensor SsmContextEncoder::step(const Tensor& row, ContextState& state) const { return stack_.step(row, state.ssm); }

TransformerContextEncoder::TransformerContextEncoder(ParamStore& store, const std::string& name, int text_dims,
                                                     int point_dims, int token_dims, int width, int layers, int heads,
                                                     std::mt19937_64& rng)
    : ContextEncoder(store, name, text_dims, point_dims, token_dims, width, rng), heads_(heads) {
  for (int i = 0; i < layers; ++i)
    blocks_.emplace_back(store, name + ".trm" + std::to_string(i), width, 4 * width, heads, false, rng);
  final_ = nn::LayerNorm(store, name + ".final_norm", width);
}

Tensor TransformerContextEncoder::run(const Tensor& rows) const {
  Tensor h = rows + position_codes(rows.dim(0), width_);
  for (const auto& b : blocks_) h = b(h, Tensor(), true);
  return final_(h);
}

Tensor TransformerContextEncoder::trunk(const Tensor& rows, std::span<const int> starts, ScanMode) const {
  return per_group(rows, starts, [this](const Tensor& g) { return run(g); });
}

Tensor TransformerContextEncoder::step(const Tensor& row, ContextState& state) const {
  state.rows.push_back(row.to_vector());
  std::vector<float> all;
  for (const auto& r : state.rows) all.insert(all.end(), r.begin(), r.end());
  const int len = static_cast<int>(state.rows.size());
  const Tensor out = run(Tensor::from({len, width_}, std::move(all)));
  return slice(out, 0, len - 1, len);
}

int matched_transformer_layers(const SsmConfig& cfg) {
  // Per SSM block: norm, in/x/dt/out projections, A_log and D.
  const long d = cfg.d, e = cfg.d * cfg.expand, n = cfg.state, r = std::max(1, (cfg.d + 15) / 16);
  const long ssm_block = 2 * d + (d * 2 * e + 2 * e) + e * (r + 2 * n) + (r * e + e) + (e * d + d) + e * n + e;
  const long target = ssm_block * cfg.layers;
  const long trm_block = transformer_block_params(cfg.d, 4 * cfg.d, false);
  return std::max(1, static_cast<int>(std::lround(static_cast<double>(target) / trm_block)));
}

std::unique_ptr<ContextEncoder> make_context_encoder(ContextKind kind, ParamStore& store, int text_dims, int point_dims,
                                                     int token_dims, const SsmConfig& cfg, std::mt19937_64& rng) {
  if (kind == ContextKind::ssm)
    return std::make_unique<SsmContextEncoder>(store, "context", text_dims, point_dims, token_dims, cfg, rng);
  return std::make_unique<TransformerContextEncoder>(store, "context", text_dims, point_dims, token_dims, cfg.d,
                                                     matched_transformer_layers(cfg), 4, rng);
}

}  // namespace ardhoi
