#pragma once

#include <cstdint>
#include <vector>

#include "rdlm/bench.hpp"
#include "rdlm/model.hpp"

namespace rdlm {

// ---------------------------------------------------------------------------
// Depth/width ledger: depth counts serial block forward passes, width counts
// hidden states processed in parallel; width changes only through token
// entries and state exits.
// ---------------------------------------------------------------------------

struct LedgerStepEvent {
  int entries = 0;
  int exits = 0;
};

struct DepthWidthLedger {
  std::vector<int> depth;  // depth[t] == t by construction
  std::vector<int> width;  // width[0] == initial width

  static DepthWidthLedger replay(const std::vector<LedgerStepEvent>& events, int initial_width);
};

// Maps a recorded pass log into ledger events: each pass is one serial step,
// entries/exits attached where the sampler recorded them.
std::vector<LedgerStepEvent> ledger_events_from_passes(const std::vector<PassEvent>& passes,
                                                       Phase phase);
// Width trajectory consistency: replayed widths must equal pass widths.
void check_ledger_against_passes(const std::vector<PassEvent>& passes, Phase phase);
int width_at_pass(const std::vector<PassEvent>& passes, Phase phase, uint64_t t);

// ---------------------------------------------------------------------------
// Width-scaling attention masks. Tokens i in [0, L), copies j in [0, s); the
// replicated sequence flattens pair (i, j) to index i*s + j.
//   no_share: copy (i, j) attends every copy of tokens before i, plus the
//     first j copies of token i.
//   kv_share: copy (i, j) attends only the last copy of each token before i,
//     plus the first j copies of token i.
// Self-attention pairs are not part of the relation.
// ---------------------------------------------------------------------------

enum class WidthVariant { no_share, kv_share };

struct WidthScalingMask {
  WidthVariant variant = WidthVariant::no_share;
  int L = 1;
  int s = 1;

  bool allowed(int qi, int qj, int ki, int kj) const;
  int flat(int i, int j) const { return i * s + j; }
  int size() const { return L * s; }
};

WidthScalingMask build_mask(WidthVariant variant, int L, int s);
uint64_t mask_pair_count(WidthVariant variant, int L, int s);      // closed form
uint64_t mask_pair_count_enumerated(const WidthScalingMask& mask); // brute force
bool mask_is_causal(const WidthScalingMask& mask);  // no pair points forward in flattened order

// ---------------------------------------------------------------------------
// Prefill cost model. Linear cost is s*L recurrent-block-equivalent token
// passes for every architecture; the attention term is the priced pair count
// of the architecture's mask (for depth scaling, the causal mask over L).
// ---------------------------------------------------------------------------

enum class PrefillArch { depth, width_kv_share, width_no_share };

struct ModelDims {
  int hidden_dim = 64;
  uint64_t f_unit = 0;  // FLOPs of one recurrent-block pass on one token
};

struct PrefillCost {
  double linear_flops = 0.0;
  double attention_flops = 0.0;
  double total() const { return linear_flops + attention_flops; }
};

PrefillCost prefill_cost(PrefillArch arch, int L, int s, const ModelDims& dims);

struct ParallelismReport {
  double depth_parallelism = 0.0;
  double width_parallelism = 0.0;
  double ratio = 0.0;  // width / depth
  bool saturated = false;
};

// Below the device saturation width L*, width scaling buys an s^2 parallelism
// factor; at or past L* both schemes saturate.
ParallelismReport parallelism_profile(int L, int s, const LatencyModel& hardware);

// Fraction of prompt lengths at or above the saturation threshold.
double prob_depth_wins(const std::vector<int>& prompt_lengths, int l_star);

// ---------------------------------------------------------------------------
// Instrumented replicated forward pass (single-head attention under a
// width-scaling mask): one serial pass over L*s states, reduced back to L by
// selecting the last copy.
// ---------------------------------------------------------------------------

struct MaskedForwardStats {
  int serial_passes = 0;
  int width = 0;
  Mat reduced;  // L x h
};

MaskedForwardStats masked_replicated_forward(const Mat& states, WidthVariant variant, int s,
                                             uint64_t seed);

// ---------------------------------------------------------------------------
// Contraction oracle: a drop-in model whose recurrent step is
//   z <- lambda * A z + B e,   ||A||_2 = 1 (spectral-normalized),
// with a causal bigram embedding as the prelude and a linear decoder as the
// coda. Its fixed point (I - lambda A)^{-1} B e is computable in closed form,
// which gives the convergence tests an independent ground truth.
// ---------------------------------------------------------------------------

class ContractionOracle : public RecurrentModel {
 public:
  ContractionOracle(int hidden_dim, double lambda, uint64_t seed, int vocab_size = 256,
                    int max_seq_len = 2048);

  const ModelConfig& config() const override { return cfg_; }
  CostProfile cost_profile() const override;

  Conditioning prelude(const TokenSequence& tokens) const override;
  void reset_stream() override { frozen_ = 0; }
  Conditioning prelude_rows(const TokenSequence& tokens, int first_row) override;
  LatentBlock init_state(int n, float alpha, int first_pos) const override;
  void recur_step(LatentBlock& z, const Conditioning& e_rows) override;
  Logits coda(const LatentBlock& z) override;
  void commit_through(int position) override;
  void evict_beyond(int) override {}

  double lambda() const { return lambda_; }
  const Mat& contraction_map() const { return a_; }
  const Mat& injection_map() const { return b_; }

  // Closed-form fixed point per position, by direct linear solve.
  Mat fixed_points(const TokenSequence& tokens) const;
  // Greedy autoregressive reference decoded from closed-form fixed points
  // (no recurrence is run at all).
  TokenSequence reference_output(const TokenSequence& prompt, int max_new_tokens) const;

 private:
  ModelConfig cfg_;
  double lambda_;
  Mat a_, b_;        // hidden x hidden
  Mat emb_;          // vocab x hidden
  Mat dec_;          // vocab x hidden
  int frozen_ = 0;
  // LU factorization of (I - lambda A), kept for fixed-point solves.
  std::vector<double> lu_;
  std::vector<int> pivot_;
};

std::unique_ptr<ContractionOracle> make_contraction_oracle(int hidden_dim, double lambda,
                                                           uint64_t seed);

}  // namespace rdlm
