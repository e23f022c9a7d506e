#pragma once

#include <string>
#include <vector>

#include "rdlm/bench.hpp"
#include "rdlm/model.hpp"

namespace rdlm {

enum class HeadwayFill { random_token, pad_token };

struct SamplerConfig {
  int r = 32;             // total recurrences per token (and prefill depth; adaptive r_max)
  int r_inner = 4;        // recurrent-block passes per sampler step
  int max_steps = 4096;   // sampler step budget T
  int max_new_tokens = 64;
  float alpha = 1.0f;     // state init scale
  float beta_max = 0.0f;  // peak of the linear noise ramp
  float eta = 0.1f;       // conditioning momentum
  float epsilon = 0.03f;  // freeze threshold on the normalized latent distance
  int wavefront_max = 128;
  int headway = 1;
  HeadwayFill headway_fill = HeadwayFill::random_token;
  int pad_token = 0;
  bool continuous_compute = false;
  float temperature = 0.0f;
  float top_p = 1.0f;
  int stop_token = -1;  // < 0 disables
  uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
  std::string snapshot() const;  // key=value lines, enough to reproduce a run
};

// Working state of a wavefront sampler. y_current holds the committed prefix
// followed by the active drafts; frozen_len marks the boundary, so the frozen
// sequence is always a prefix of the current one by construction.
struct GenerationState {
  TokenSequence y_current;
  int frozen_len = 0;
  LatentBlock z;
  Mat z_prev;  // previous-step latents, aligned with z rows
  Conditioning e_prev;
  int e_prev_first_pos = 0;
  int step = 0;

  TokenSequence y_frozen() const {
    return TokenSequence(y_current.begin(), y_current.begin() + frozen_len);
  }
  int wavefront() const { return z.rows(); }
  // Post-decode alignment rules; throws std::logic_error on violation.
  void check_invariants() const;
};

struct ConvergenceReport {
  std::vector<double> deltas;
  int k_star = 0;  // longest prefix with every delta below epsilon
};

// Normalized per-row latent distance between consecutive sampler steps.
// Rows whose current norm underflows 1e-12 fall back to the unnormalized
// distance.
ConvergenceReport compute_deltas(const LatentBlock& z, const Mat& z_prev, double epsilon);

// Linear noise ramp: beta_max * (1 - t / total_steps), clamped to [0, 1];
// t counts sampler steps already spent at the position.
double beta_schedule(int t, int total_steps, double beta_max);

// z <- (1 - beta) z + beta noise, elementwise.
void blend_noise(LatentBlock& z, double beta, const Mat& noise);

// Rowwise EMA on positions present in both conditionings; rows that are new
// in e_new pass through untouched. eta == 0 returns e_new bit-identically.
Conditioning momentum_embed(const Conditioning& e_prev, int prev_first_pos,
                            const Conditioning& e_new, int new_first_pos, double eta);

struct GenerationResult {
  TokenSequence output;  // prompt followed by committed tokens
  int new_tokens = 0;
  bool partial = false;          // budget or context ended the run early
  std::string stop_reason;       // max_new_tokens | stop_token | max_steps | context_overflow
  CostLedger ledger;
  Trace trace;
};

// The five generation strategies. All of them prefill the prompt at depth
// cfg.r, then differ only in how they schedule recurrences over the wavefront.
GenerationResult generate_static_ar(RecurrentModel& model, const TokenSequence& prompt,
                                    const SamplerConfig& cfg);
// Per token: recur until the step-to-step delta drops below cfg.epsilon or
// cfg.r passes were spent, then commit.
GenerationResult generate_adaptive_ar(RecurrentModel& model, const TokenSequence& prompt,
                                      const SamplerConfig& cfg);
// Draft a few tokens cheaply, then re-derive them at full depth with an
// early-exit verification sweep; emitted tokens are always exactly what
// static AR at cfg.r would have produced.
GenerationResult generate_self_speculative(RecurrentModel& model, const TokenSequence& prompt,
                                           const SamplerConfig& cfg, int draft_len = 4,
                                           int draft_r = 4);
// Diffusion-forcing wavefront with the fixed exit rule: a position freezes
// after ceil(r / r_inner) sampler steps, i.e. r recurrences.
GenerationResult generate_diffusion_simple(RecurrentModel& model, const TokenSequence& prompt,
                                           const SamplerConfig& cfg);
// Diffusion-forcing wavefront with latent-difference freezing: the maximal
// converged prefix freezes each step, the wavefront is capped at
// cfg.wavefront_max, and a full wavefront stalls instead of appending.
GenerationResult generate_diffusion_adaptive(RecurrentModel& model, const TokenSequence& prompt,
                                             const SamplerConfig& cfg);

// Appends up to cfg.headway fresh latent rows (cap, token budget and context
// permitting). Fill tokens for rows beyond the first appended position follow
// cfg.headway_fill. Returns the number of rows appended.
int advance_headway(RecurrentModel& model, const SamplerConfig& cfg, TokenSequence& y,
                    LatentBlock& z, int frozen_count, int prompt_len);

// Initial values for a freshly appended row at `pos`: a copy of the current
// last row under continuous compute, otherwise (or on an empty wavefront) a
// fresh random state.
std::vector<float> continuous_init_row(const RecurrentModel& model, const SamplerConfig& cfg,
                                       const LatentBlock& z, int pos);

const char* sampler_name(const std::string& key);  // validates a CLI sampler key

}  // namespace rdlm
