#include "rdlm/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rdlm/rng.hpp"

namespace rdlm {

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kRotaryBase = 10000.0;

void rms_norm(const float* x, const float* gain, int n, float* out) {
  double ms = 0.0;
  for (int i = 0; i < n; ++i) ms += static_cast<double>(x[i]) * x[i];
  const double inv = 1.0 / std::sqrt(ms / n + kNormEps);
  for (int i = 0; i < n; ++i) out[i] = static_cast<float>(x[i] * inv * gain[i]);
}

// In-place rotary rotation of one head-major q or k vector at `pos`.
void apply_rotary(float* qk, int num_heads, int head_dim, int pos) {
  for (int h = 0; h < num_heads; ++h) {
    float* v = qk + h * head_dim;
    for (int j = 0; j + 1 < head_dim; j += 2) {
      const double theta = pos * std::pow(kRotaryBase, -static_cast<double>(j) / head_dim);
      const double c = std::cos(theta);
      const double s = std::sin(theta);
      const double a = v[j];
      const double b = v[j + 1];
      v[j] = static_cast<float>(a * c - b * s);
      v[j + 1] = static_cast<float>(a * s + b * c);
    }
  }
}

float silu(float x) {
  return static_cast<float>(x / (1.0 + std::exp(-static_cast<double>(x))));
}

void put_f32_le(std::string& out, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float get_f32_le(const unsigned char* p) {
  const uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                        (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size < 1) throw std::invalid_argument("model: vocab_size must be >= 1");
  if (hidden_dim < 1) throw std::invalid_argument("model: hidden_dim must be >= 1");
  if (num_heads < 1 || hidden_dim % num_heads != 0) {
    throw std::invalid_argument("model: num_heads must divide hidden_dim");
  }
  if (prelude_layers < 1 || recurrent_layers < 1 || coda_layers < 1) {
    throw std::invalid_argument("model: all layer counts must be >= 1");
  }
  if (init_sigma < 0.0f) throw std::invalid_argument("model: init_sigma must be >= 0");
  if (max_seq_len < 1) throw std::invalid_argument("model: max_seq_len must be >= 1");
}

void LatentBlock::drop_front(int n) {
  if (n <= 0) return;
  if (n > rows()) throw std::logic_error("latent block: drop_front past end");
  const int remaining = rows() - n;
  Mat nz(remaining, z.cols);
  for (int i = 0; i < remaining; ++i) {
    std::memcpy(nz.row(i), z.row(i + n), sizeof(float) * z.cols);
  }
  z = std::move(nz);
  steps.erase(steps.begin(), steps.begin() + n);
  recurrences.erase(recurrences.begin(), recurrences.begin() + n);
  first_pos += n;
}

void LatentBlock::append_row(const float* values, int hidden_dim) {
  Mat nz(rows() + 1, hidden_dim);
  if (rows() > 0) std::memcpy(nz.data.data(), z.data.data(), sizeof(float) * z.data.size());
  std::memcpy(nz.row(rows()), values, sizeof(float) * hidden_dim);
  z = std::move(nz);
  steps.push_back(0);
  recurrences.push_back(0);
}

void LatentBlock::require_finite() const {
  if (!z.all_finite()) throw std::logic_error("latent block: non-finite entry");
}

// ---------------------------------------------------------------------------
// ToyTransformer
// ---------------------------------------------------------------------------

ToyTransformer::ToyTransformer(const ModelConfig& cfg, int cache_depth_slots)
    : cfg_(cfg), cache_(cfg.total_layers(), cache_depth_slots, cfg.max_seq_len) {
  cfg_.validate();
  const int h = cfg_.hidden_dim;
  embed_ = Mat(cfg_.vocab_size, h);
  layers_.resize(cfg_.total_layers());
  for (auto& lw : layers_) {
    lw.wq = Mat(h, h);
    lw.wk = Mat(h, h);
    lw.wv = Mat(h, h);
    lw.wo = Mat(h, h);
    lw.w_up = Mat(4 * h, h);
    lw.w_down = Mat(h, 4 * h);
    lw.norm_attn.assign(h, 1.0f);
    lw.norm_mlp.assign(h, 1.0f);
  }
  adapter_ = Mat(h, 2 * h);
  adapter_bias_.assign(h, 0.0f);
  final_norm_.assign(h, 1.0f);
  unembed_ = Mat(cfg_.vocab_size, h);
  init_weights();
}

template <typename Fn>
void ToyTransformer::for_each_weight(Fn&& fn) {
  fn(embed_.data);
  for (auto& lw : layers_) {
    fn(lw.wq.data);
    fn(lw.wk.data);
    fn(lw.wv.data);
    fn(lw.wo.data);
    fn(lw.w_up.data);
    fn(lw.w_down.data);
    fn(lw.norm_attn);
    fn(lw.norm_mlp);
  }
  fn(adapter_.data);
  fn(adapter_bias_);
  fn(final_norm_);
  fn(unembed_.data);
}

template <typename Fn>
void ToyTransformer::for_each_weight_const(Fn&& fn) const {
  const_cast<ToyTransformer*>(this)->for_each_weight(
      [&](std::vector<float>& v) { fn(static_cast<const std::vector<float>&>(v)); });
}

void ToyTransformer::init_weights() {
  constexpr float kWeightStd = 0.08f;
  uint64_t ordinal = 0;
  for_each_weight([&](std::vector<float>& v) {
    const uint64_t key = rng_key(cfg_.seed, RngStream::weights, ordinal++);
    fill_normal(key, v.data(), v.size(), kWeightStd);
  });
  // Gains and bias start at identity / zero on top of the random draw.
  for (auto& lw : layers_) {
    lw.norm_attn.assign(cfg_.hidden_dim, 1.0f);
    lw.norm_mlp.assign(cfg_.hidden_dim, 1.0f);
  }
  final_norm_.assign(cfg_.hidden_dim, 1.0f);
  adapter_bias_.assign(cfg_.hidden_dim, 0.0f);
}

CostProfile ToyTransformer::cost_profile() const {
  const uint64_t h = static_cast<uint64_t>(cfg_.hidden_dim);
  // Dense linears: q,k,v,o projections (4 * 2h^2) plus the MLP (2 * 2 * 4h^2).
  CostProfile p;
  p.flops_per_layer_token = 8 * h * h + 16 * h * h;
  p.prelude_layers = cfg_.prelude_layers;
  p.recurrent_layers = cfg_.recurrent_layers;
  p.coda_layers = cfg_.coda_layers;
  return p;
}

// One transformer layer over rows [first_pos, first_pos + x.rows): pre-norm
// rotary attention against the cache view, then a pre-norm SiLU MLP.
// Phase order matters: all rows write k/v first, then every row attends its
// causal view, so rows of the same pass see each other at the same depth.
void ToyTransformer::layer_pass(int layer_index, Mat& x, int first_pos, SharedKVCache& cache,
                                const std::vector<int>& write_steps) const {
  const int h = cfg_.hidden_dim;
  const int heads = cfg_.num_heads;
  const int hd = cfg_.head_dim();
  const LayerWeights& lw = layers_[layer_index];

  Mat q_all(x.rows, h);
  std::vector<float> normed(h), k(h), v(h);
  for (int i = 0; i < x.rows; ++i) {
    rms_norm(x.row(i), lw.norm_attn.data(), h, normed.data());
    matvec(lw.wq, normed.data(), q_all.row(i));
    matvec(lw.wk, normed.data(), k.data());
    matvec(lw.wv, normed.data(), v.data());
    apply_rotary(q_all.row(i), heads, hd, first_pos + i);
    apply_rotary(k.data(), heads, hd, first_pos + i);
    cache.write(layer_index, first_pos + i, write_steps[i], k.data(), v.data(), h);
  }

  const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<double> scores;
  std::vector<const KvPair*> view;
  std::vector<float> attn_out(h), proj(h);
  for (int i = 0; i < x.rows; ++i) {
    view.clear();
    cache.for_attend_view(layer_index, first_pos + i,
                          [&](int, const KvPair& p) { view.push_back(&p); });
    scores.resize(view.size());
    std::fill(attn_out.begin(), attn_out.end(), 0.0f);
    const float* q = q_all.row(i);
    for (int head = 0; head < heads; ++head) {
      const float* qh = q + head * hd;
      double max_s = -1e300;
      for (size_t j = 0; j < view.size(); ++j) {
        scores[j] = dot(qh, view[j]->k.data() + head * hd, hd) * inv_sqrt_hd;
        if (scores[j] > max_s) max_s = scores[j];
      }
      double denom = 0.0;
      for (size_t j = 0; j < view.size(); ++j) {
        scores[j] = std::exp(scores[j] - max_s);
        denom += scores[j];
      }
      for (int d = 0; d < hd; ++d) {
        double acc = 0.0;
        for (size_t j = 0; j < view.size(); ++j) {
          acc += scores[j] * view[j]->v[head * hd + d];
        }
        attn_out[head * hd + d] = static_cast<float>(acc / denom);
      }
    }
    matvec(lw.wo, attn_out.data(), proj.data());
    float* xi = x.row(i);
    for (int d = 0; d < h; ++d) xi[d] += proj[d];
  }

  std::vector<float> up(4 * h);
  for (int i = 0; i < x.rows; ++i) {
    rms_norm(x.row(i), lw.norm_mlp.data(), h, normed.data());
    matvec(lw.w_up, normed.data(), up.data());
    for (float& u : up) u = silu(u);
    float* xi = x.row(i);
    for (int d = 0; d < h; ++d) {
      xi[d] += static_cast<float>(dot(lw.w_down.row(d), up.data(), 4 * h));
    }
  }
}

Conditioning ToyTransformer::prelude_pass(const TokenSequence& tokens, int first_row,
                                          SharedKVCache& cache) const {
  const int h = cfg_.hidden_dim;
  const int n = static_cast<int>(tokens.size()) - first_row;
  Mat x(n, h);
  for (int i = 0; i < n; ++i) {
    const int id = tokens[first_row + i];
    if (id < 0 || id >= cfg_.vocab_size) {
      throw std::invalid_argument("model: token id out of range: " + std::to_string(id));
    }
    std::memcpy(x.row(i), embed_.row(id), sizeof(float) * h);
  }
  const std::vector<int> zero_steps(n, 0);
  for (int l = 0; l < cfg_.prelude_layers; ++l) {
    layer_pass(l, x, first_row, cache, zero_steps);
  }
  return x;
}

Conditioning ToyTransformer::prelude(const TokenSequence& tokens) const {
  if (tokens.empty()) throw std::invalid_argument("model: prelude on empty sequence");
  if (static_cast<int>(tokens.size()) > cfg_.max_seq_len) {
    throw std::invalid_argument("model: sequence longer than max_seq_len");
  }
  SharedKVCache scratch(cfg_.total_layers(), 1, cfg_.max_seq_len);
  return prelude_pass(tokens, 0, scratch);
}

void ToyTransformer::reset_stream() { cache_.reset(); }

Conditioning ToyTransformer::prelude_rows(const TokenSequence& tokens, int first_row) {
  if (tokens.empty()) throw std::invalid_argument("model: prelude on empty sequence");
  if (static_cast<int>(tokens.size()) > cfg_.max_seq_len) {
    throw std::invalid_argument("model: sequence longer than max_seq_len");
  }
  if (first_row < 0 || first_row >= static_cast<int>(tokens.size())) {
    throw std::logic_error("model: prelude_rows first_row out of range");
  }
  return prelude_pass(tokens, first_row, cache_);
}

LatentBlock ToyTransformer::init_state(int n, float alpha, int first_pos) const {
  if (n < 1) throw std::invalid_argument("model: init_state needs n >= 1");
  LatentBlock b;
  b.z = Mat(n, cfg_.hidden_dim);
  b.steps.assign(n, 0);
  b.recurrences.assign(n, 0);
  b.first_pos = first_pos;
  const float stddev = alpha * cfg_.init_sigma;
  for (int i = 0; i < n; ++i) {
    const uint64_t key = rng_key(cfg_.seed, RngStream::state_init, static_cast<uint64_t>(first_pos + i));
    fill_normal(key, b.z.row(i), static_cast<size_t>(cfg_.hidden_dim), stddev);
  }
  return b;
}

void ToyTransformer::recur_step(LatentBlock& z, const Conditioning& e_rows) {
  const int h = cfg_.hidden_dim;
  if (z.z.cols != h || e_rows.cols != h || e_rows.rows != z.rows()) {
    throw std::logic_error("model: recur_step shape mismatch between state and conditioning");
  }
  // Input injection: the conditioning enters through the adapter on every call.
  Mat x(z.rows(), h);
  std::vector<float> cat(2 * h);
  for (int i = 0; i < z.rows(); ++i) {
    std::memcpy(cat.data(), z.z.row(i), sizeof(float) * h);
    std::memcpy(cat.data() + h, e_rows.row(i), sizeof(float) * h);
    float* xi = x.row(i);
    for (int d = 0; d < h; ++d) {
      xi[d] = static_cast<float>(dot(adapter_.row(d), cat.data(), 2 * h) + adapter_bias_[d]);
    }
  }
  for (int l = 0; l < cfg_.recurrent_layers; ++l) {
    layer_pass(cfg_.prelude_layers + l, x, z.first_pos, cache_, z.recurrences);
  }
  z.z = std::move(x);
  for (int& r : z.recurrences) ++r;
  z.require_finite();
}

Logits ToyTransformer::coda(const LatentBlock& z) {
  if (z.rows() < 1) throw std::invalid_argument("model: coda on empty latent block");
  const int h = cfg_.hidden_dim;
  Mat x = z.z;
  const std::vector<int> zero_steps(z.rows(), 0);
  for (int l = 0; l < cfg_.coda_layers; ++l) {
    layer_pass(cfg_.prelude_layers + cfg_.recurrent_layers + l, x, z.first_pos, cache_, zero_steps);
  }
  Logits out(z.rows(), cfg_.vocab_size);
  std::vector<float> normed(h);
  for (int i = 0; i < z.rows(); ++i) {
    rms_norm(x.row(i), final_norm_.data(), h, normed.data());
    matvec(unembed_, normed.data(), out.row(i));
  }
  if (!out.all_finite()) throw std::logic_error("model: non-finite logits");
  return out;
}

void ToyTransformer::commit_through(int position) { cache_.commit(position); }
void ToyTransformer::evict_beyond(int position) { cache_.evict_beyond(position); }

// ---------------------------------------------------------------------------
// Checkpoint format: text header (magic, config as key=value decimal lines,
// param_count), a DATA marker, then the flat little-endian f32 payload in
// fixed traversal order.
// ---------------------------------------------------------------------------

void ToyTransformer::save_checkpoint(const std::string& path) const {
  uint64_t count = 0;
  for_each_weight_const([&](const std::vector<float>& v) { count += v.size(); });

  std::ostringstream head;
  head << "RDLM01\n";
  head << "vocab_size=" << cfg_.vocab_size << '\n';
  head << "hidden_dim=" << cfg_.hidden_dim << '\n';
  head << "num_heads=" << cfg_.num_heads << '\n';
  head << "prelude_layers=" << cfg_.prelude_layers << '\n';
  head << "recurrent_layers=" << cfg_.recurrent_layers << '\n';
  head << "coda_layers=" << cfg_.coda_layers << '\n';
  char sig[64];
  std::snprintf(sig, sizeof(sig), "%.9g", static_cast<double>(cfg_.init_sigma));
  head << "init_sigma=" << sig << '\n';
  head << "max_seq_len=" << cfg_.max_seq_len << '\n';
  head << "seed=" << cfg_.seed << '\n';
  head << "param_count=" << count << '\n';
  head << "DATA\n";

  std::string payload;
  payload.reserve(count * 4);
  for_each_weight_const([&](const std::vector<float>& v) {
    for (float f : v) put_f32_le(payload, f);
  });

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  out << head.str() << payload;
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::unique_ptr<ToyTransformer> ToyTransformer::load_checkpoint(const std::string& path,
                                                                int cache_depth_slots) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);

  std::string line;
  if (!std::getline(in, line) || line != "RDLM01") {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  ModelConfig cfg;
  uint64_t declared_count = 0;
  while (std::getline(in, line)) {
    if (line == "DATA") break;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("checkpoint: malformed header line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "vocab_size") cfg.vocab_size = std::stoi(val);
    else if (key == "hidden_dim") cfg.hidden_dim = std::stoi(val);
    else if (key == "num_heads") cfg.num_heads = std::stoi(val);
    else if (key == "prelude_layers") cfg.prelude_layers = std::stoi(val);
    else if (key == "recurrent_layers") cfg.recurrent_layers = std::stoi(val);
    else if (key == "coda_layers") cfg.coda_layers = std::stoi(val);
    else if (key == "init_sigma") cfg.init_sigma = std::stof(val);
    else if (key == "max_seq_len") cfg.max_seq_len = std::stoi(val);
    else if (key == "seed") cfg.seed = std::stoull(val);
    else if (key == "param_count") declared_count = std::stoull(val);
    else throw std::runtime_error("checkpoint: unknown header key: " + key);
  }
  if (line != "DATA") throw std::runtime_error("checkpoint: missing DATA marker in " + path);
  cfg.validate();

  auto model = std::make_unique<ToyTransformer>(cfg, cache_depth_slots);
  uint64_t have = 0;
  model->for_each_weight([&](std::vector<float>& v) { have += v.size(); });
  if (declared_count != have) {
    throw std::runtime_error("checkpoint: param_count does not match config-derived shape");
  }

  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (payload.size() != have * 4) {
    throw std::runtime_error("checkpoint: payload size mismatch in " + path);
  }
  const unsigned char* p = reinterpret_cast<const unsigned char*>(payload.data());
  model->for_each_weight([&](std::vector<float>& v) {
    for (float& f : v) {
      f = get_f32_le(p);
      p += 4;
    }
  });
  return model;
}

void save_checkpoint(const ToyTransformer& model, const std::string& path) {
  model.save_checkpoint(path);
}

// ---------------------------------------------------------------------------
// Prefill
// ---------------------------------------------------------------------------

PrefillResult prefill(RecurrentModel& model, const TokenSequence& prompt, int r, float alpha) {
  if (prompt.empty()) throw std::invalid_argument("prefill: empty prompt");
  if (static_cast<int>(prompt.size()) > model.config().max_seq_len) {
    throw std::invalid_argument("prefill: prompt longer than max_seq_len");
  }
  if (r < 1) throw std::invalid_argument("prefill: r must be >= 1");

  model.reset_stream();
  PrefillResult res;
  res.e = model.prelude_rows(prompt, 0);
  res.latents = model.init_state(static_cast<int>(prompt.size()), alpha, 0);
  for (int i = 0; i < r; ++i) {
    model.recur_step(res.latents, res.e);
  }
  // Coda runs once over the whole prompt so the frozen prefix has coda-layer
  // KV entries; the logits themselves are not needed here.
  (void)model.coda(res.latents);
  model.commit_through(static_cast<int>(prompt.size()) - 1);
  return res;
}

}  // namespace rdlm
