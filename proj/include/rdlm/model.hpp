#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rdlm/kvcache.hpp"
#include "rdlm/tensor.hpp"

namespace rdlm {

using TokenSequence = std::vector<int>;
using Conditioning = Mat;  // rows x hidden_dim, one row per conditioned position
using Logits = Mat;        // rows x vocab_size

struct ModelConfig {
  int vocab_size = 256;
  int hidden_dim = 64;
  int num_heads = 2;
  int prelude_layers = 1;
  int recurrent_layers = 2;
  int coda_layers = 1;
  float init_sigma = 1.0f;  // stddev of random latent state init
  int max_seq_len = 512;
  uint64_t seed = 0;

  int head_dim() const { return hidden_dim / num_heads; }
  int total_layers() const { return prelude_layers + recurrent_layers + coda_layers; }
  void validate() const;  // throws std::invalid_argument
};

// The active wavefront: one latent row per not-yet-frozen position.
// Row i sits at absolute position first_pos + i; it is conditioned on the
// token at that position and decodes the draft for the next one.
struct LatentBlock {
  Mat z;                          // rows x hidden_dim
  std::vector<int> steps;         // sampler steps completed per row
  std::vector<int> recurrences;   // recurrent-block passes applied per row
  int first_pos = 0;

  int rows() const { return z.rows; }
  void drop_front(int n);
  void append_row(const float* values, int hidden_dim);
  void require_finite() const;  // throws std::logic_error on NaN/Inf
};

// Accounting profile, in units of one recurrent-block pass on one token.
// FLOPs count the dense linear layers only; attention score/value FLOPs are
// tracked separately by the theory module's prefill cost model.
struct CostProfile {
  uint64_t flops_per_layer_token = 0;
  int prelude_layers = 0;
  int recurrent_layers = 0;
  int coda_layers = 0;

  uint64_t f_unit() const { return flops_per_layer_token * static_cast<uint64_t>(recurrent_layers); }
};

// Contract shared by the toy transformer and the synthetic contraction
// model: prelude -> repeated recur_step with input injection -> coda.
// A model instance carries the cache for one generation stream; use one
// stream at a time per instance.
class RecurrentModel {
 public:
  virtual ~RecurrentModel() = default;

  virtual const ModelConfig& config() const = 0;
  virtual CostProfile cost_profile() const = 0;

  // Full-sequence conditioning as a pure function (fresh scratch cache).
  virtual Conditioning prelude(const TokenSequence& tokens) const = 0;

  // Streamed ops; these share the per-stream cache.
  virtual void reset_stream() = 0;
  // Recompute conditioning rows [first_row, tokens.size()) against the cached
  // prefix, refreshing those rows' prelude KV entries.
  virtual Conditioning prelude_rows(const TokenSequence& tokens, int first_row) = 0;
  virtual LatentBlock init_state(int n, float alpha, int first_pos) const = 0;
  // One pass of the recurrent block over all rows of z, injecting e (aligned
  // with z's rows) at the block input. Overwrites the rows' recurrent KV.
  virtual void recur_step(LatentBlock& z, const Conditioning& e_rows) = 0;
  virtual Logits coda(const LatentBlock& z) = 0;
  // Cache positions [0, position) become frozen.
  virtual void commit_through(int position) = 0;
  virtual void evict_beyond(int position) = 0;
  virtual const SharedKVCache* cache() const { return nullptr; }
};

// Miniature recurrent-depth transformer: embedding + prelude stack, a
// recurrent stack entered through a learned [state, conditioning] adapter,
// and a coda stack with final norm + unembedding. Rotary attention, RMS
// norms, SiLU MLPs. Weights are random but fully seeded.
class ToyTransformer : public RecurrentModel {
 public:
  explicit ToyTransformer(const ModelConfig& cfg, int cache_depth_slots = 1);

  const ModelConfig& config() const override { return cfg_; }
  CostProfile cost_profile() const override;

  Conditioning prelude(const TokenSequence& tokens) const override;
  void reset_stream() override;
  Conditioning prelude_rows(const TokenSequence& tokens, int first_row) override;
  LatentBlock init_state(int n, float alpha, int first_pos) const override;
  void recur_step(LatentBlock& z, const Conditioning& e_rows) override;
  Logits coda(const LatentBlock& z) override;
  void commit_through(int position) override;
  void evict_beyond(int position) override;
  const SharedKVCache* cache() const override { return &cache_; }

  void save_checkpoint(const std::string& path) const;
  static std::unique_ptr<ToyTransformer> load_checkpoint(const std::string& path,
                                                         int cache_depth_slots = 1);

 private:
  struct LayerWeights {
    Mat wq, wk, wv, wo;       // hidden x hidden
    Mat w_up, w_down;         // (4h x h), (h x 4h)
    std::vector<float> norm_attn, norm_mlp;
  };

  void init_weights();
  void layer_pass(int layer_index, Mat& x, int first_pos, SharedKVCache& cache,
                  const std::vector<int>& write_steps) const;
  Conditioning prelude_pass(const TokenSequence& tokens, int first_row, SharedKVCache& cache) const;

  template <typename Fn> void for_each_weight(Fn&& fn);
  template <typename Fn> void for_each_weight_const(Fn&& fn) const;

  ModelConfig cfg_;
  Mat embed_;                  // vocab x h
  std::vector<LayerWeights> layers_;  // prelude, then recurrent, then coda
  Mat adapter_;                // h x 2h
  std::vector<float> adapter_bias_;
  std::vector<float> final_norm_;
  Mat unembed_;                // vocab x h
  SharedKVCache cache_;
};

struct PrefillResult {
  Conditioning e;       // one row per prompt position
  LatentBlock latents;  // depth-r states for every prompt position
};

// Runs prelude once over the whole prompt, r recurrences over all positions
// simultaneously, then a coda pass, populating the cache for every prompt
// position. Commits everything except the last position, which the samplers
// re-enter as the first wavefront row.
PrefillResult prefill(RecurrentModel& model, const TokenSequence& prompt, int r, float alpha);

void save_checkpoint(const ToyTransformer& model, const std::string& path);

}  // namespace rdlm
