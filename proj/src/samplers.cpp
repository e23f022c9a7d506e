#include "rdlm/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "rdlm/rng.hpp"
#include "rdlm/sampling.hpp"

namespace rdlm {

void SamplerConfig::validate() const {
  if (r < 1) throw std::invalid_argument("config: r must be >= 1");
  if (r_inner < 1) throw std::invalid_argument("config: r_inner must be >= 1");
  if (r_inner > r) throw std::invalid_argument("config: r_inner must not exceed r");
  if (max_steps < 1) throw std::invalid_argument("config: max_steps must be >= 1");
  if (max_new_tokens < 0) throw std::invalid_argument("config: max_new_tokens must be >= 0");
  if (alpha < 0.0f) throw std::invalid_argument("config: alpha must be >= 0");
  if (beta_max < 0.0f || beta_max > 1.0f) throw std::invalid_argument("config: beta_max must be in [0, 1]");
  if (eta < 0.0f || eta > 1.0f) throw std::invalid_argument("config: eta must be in [0, 1]");
  if (!(epsilon > 0.0f)) throw std::invalid_argument("config: epsilon must be > 0");
  if (wavefront_max < 1) throw std::invalid_argument("config: wavefront must be >= 1");
  if (headway < 1) throw std::invalid_argument("config: headway must be >= 1");
  if (headway > wavefront_max) throw std::invalid_argument("config: headway must not exceed wavefront");
  if (pad_token < 0) throw std::invalid_argument("config: pad_token must be >= 0");
  if (temperature < 0.0f) throw std::invalid_argument("config: temperature must be >= 0");
  if (!(top_p > 0.0f) || top_p > 1.0f) throw std::invalid_argument("config: top_p must be in (0, 1]");
}

std::string SamplerConfig::snapshot() const {
  std::ostringstream ss;
  ss << "r=" << r << '\n'
     << "r_inner=" << r_inner << '\n'
     << "max_steps=" << max_steps << '\n'
     << "max_new_tokens=" << max_new_tokens << '\n'
     << "alpha=" << alpha << '\n'
     << "beta_max=" << beta_max << '\n'
     << "eta=" << eta << '\n'
     << "epsilon=" << epsilon << '\n'
     << "wavefront=" << wavefront_max << '\n'
     << "headway=" << headway << '\n'
     << "headway_fill=" << (headway_fill == HeadwayFill::random_token ? "random" : "pad") << '\n'
     << "pad_token=" << pad_token << '\n'
     << "continuous_compute=" << (continuous_compute ? 1 : 0) << '\n'
     << "temperature=" << temperature << '\n'
     << "top_p=" << top_p << '\n'
     << "stop_token=" << stop_token << '\n'
     << "seed=" << seed << '\n';
  return ss.str();
}

// ---------------------------------------------------------------------------
// Sampler building blocks
// ---------------------------------------------------------------------------

double beta_schedule(int t, int total_steps, double beta_max) {
  if (total_steps < 1) throw std::invalid_argument("beta_schedule: total_steps must be >= 1");
  const double b = beta_max * (1.0 - static_cast<double>(t) / total_steps);
  return std::clamp(b, 0.0, 1.0);
}

void blend_noise(LatentBlock& z, double beta, const Mat& noise) {
  if (noise.rows != z.rows() || noise.cols != z.z.cols) {
    throw std::logic_error("blend_noise: shape mismatch");
  }
  if (beta == 0.0) return;
  for (int i = 0; i < z.rows(); ++i) {
    float* zi = z.z.row(i);
    const float* ni = noise.row(i);
    for (int d = 0; d < z.z.cols; ++d) {
      zi[d] = static_cast<float>((1.0 - beta) * zi[d] + beta * ni[d]);
    }
  }
}

Conditioning momentum_embed(const Conditioning& e_prev, int prev_first_pos,
                            const Conditioning& e_new, int new_first_pos, double eta) {
  if (eta == 0.0 || e_prev.rows == 0) return e_new;
  if (e_prev.cols != e_new.cols) throw std::logic_error("momentum_embed: width mismatch");
  Conditioning out = e_new;
  for (int i = 0; i < e_new.rows; ++i) {
    const int pos = new_first_pos + i;
    const int j = pos - prev_first_pos;
    if (j < 0 || j >= e_prev.rows) continue;  // brand-new rows bypass momentum
    float* o = out.row(i);
    const float* p = e_prev.row(j);
    const float* n = e_new.row(i);
    for (int d = 0; d < e_new.cols; ++d) {
      o[d] = static_cast<float>(eta * p[d] + (1.0 - eta) * n[d]);
    }
  }
  return out;
}

void GenerationState::check_invariants() const {
  if (frozen_len < 0 || frozen_len > static_cast<int>(y_current.size())) {
    throw std::logic_error("state: frozen prefix outside the current sequence");
  }
  if (static_cast<int>(y_current.size()) - frozen_len != z.rows()) {
    throw std::logic_error("state: wavefront size disagrees with the draft count");
  }
  if (z.rows() > 0 && z.first_pos != frozen_len - 1) {
    throw std::logic_error("state: wavefront misaligned with the frozen prefix");
  }
}

ConvergenceReport compute_deltas(const LatentBlock& z, const Mat& z_prev, double epsilon) {
  if (z_prev.rows != z.rows() || z_prev.cols != z.z.cols) {
    throw std::logic_error("compute_deltas: shape mismatch");
  }
  ConvergenceReport rep;
  rep.deltas.resize(z.rows());
  for (int i = 0; i < z.rows(); ++i) {
    const double dist = l2_dist(z.z.row(i), z_prev.row(i), z.z.cols);
    const double norm = l2_norm(z.z.row(i), z.z.cols);
    rep.deltas[i] = norm < 1e-12 ? dist : dist / norm;
  }
  rep.k_star = 0;
  while (rep.k_star < z.rows() && rep.deltas[rep.k_star] < epsilon) ++rep.k_star;
  return rep;
}

std::vector<float> continuous_init_row(const RecurrentModel& model, const SamplerConfig& cfg,
                                       const LatentBlock& z, int pos) {
  const int h = model.config().hidden_dim;
  if (cfg.continuous_compute && z.rows() > 0) {
    const float* last = z.z.row(z.rows() - 1);
    return std::vector<float>(last, last + h);
  }
  const LatentBlock fresh = model.init_state(1, cfg.alpha, pos);
  return std::vector<float>(fresh.z.row(0), fresh.z.row(0) + h);
}

int advance_headway(RecurrentModel& model, const SamplerConfig& cfg, TokenSequence& y,
                    LatentBlock& z, int frozen_count, int prompt_len) {
  (void)frozen_count;
  const int last_useful_pos = std::min(prompt_len + cfg.max_new_tokens - 2,
                                       model.config().max_seq_len - 2);
  int appended = 0;
  while (appended < cfg.headway && z.rows() < cfg.wavefront_max) {
    const int pos = z.first_pos + z.rows();
    if (pos > last_useful_pos) break;
    while (pos >= static_cast<int>(y.size())) {
      // No decoded draft exists for this slot yet; fill it.
      int fill = cfg.pad_token;
      if (cfg.headway_fill == HeadwayFill::random_token) {
        fill = uniform_int(rng_key(cfg.seed, RngStream::headway_fill,
                                   static_cast<uint64_t>(y.size())),
                           0, model.config().vocab_size);
      }
      y.push_back(fill);
    }
    const std::vector<float> row = continuous_init_row(model, cfg, z, pos);
    z.append_row(row.data(), model.config().hidden_dim);
    ++appended;
  }
  return appended;
}

const char* sampler_name(const std::string& key) {
  static const char* names[] = {"static", "adaptive", "speculative", "df-simple", "df-adaptive"};
  for (const char* n : names) {
    if (key == n) return n;
  }
  throw std::invalid_argument("unknown sampler: " + key +
                              " (expected static|adaptive|speculative|df-simple|df-adaptive)");
}

// ---------------------------------------------------------------------------
// Shared run machinery
// ---------------------------------------------------------------------------

namespace {

struct RunContext {
  RecurrentModel& model;
  const SamplerConfig& cfg;
  CostLedger ledger;
  Trace trace;
  TokenSequence y;
  int prompt_len;
  int frozen;  // committed token count

  RunContext(RecurrentModel& m, const TokenSequence& prompt, const SamplerConfig& c)
      : model(m), cfg(c), ledger(m.cost_profile()), y(prompt),
        prompt_len(static_cast<int>(prompt.size())), frozen(static_cast<int>(prompt.size())) {
    trace.seed = c.seed;
    trace.wavefront_cap = c.wavefront_max;
    trace.config_snapshot = c.snapshot();
  }
};

void record_prefill_passes(CostLedger& ledger, int width, int r) {
  ledger.add_pass(PassKind::prelude, Phase::prefill, width, width, 0);
  for (int i = 0; i < r; ++i) ledger.add_pass(PassKind::recurrent, Phase::prefill, width);
  ledger.add_pass(PassKind::coda, Phase::prefill, width);
}

int pick_token(const Logits& logits, int row, const SamplerConfig& cfg, int decoded_pos, int age) {
  if (cfg.temperature == 0.0f) return greedy_argmax(logits.row(row), logits.cols);
  Mat one(1, logits.cols);
  std::memcpy(one.row(0), logits.row(row), sizeof(float) * logits.cols);
  const std::vector<double> u{uniform_at(
      rng_key(cfg.seed, RngStream::token_sample, static_cast<uint64_t>(decoded_pos),
              static_cast<uint64_t>(age)),
      0)};
  return sample_tokens(one, cfg.temperature, cfg.top_p, u)[0];
}

GenerationResult finalize(RunContext& ctx, const char* reason) {
  GenerationResult res;
  const int want = ctx.cfg.max_new_tokens;
  const int budget_end = std::min(ctx.frozen, ctx.prompt_len + want);
  int end = budget_end;
  int stop_at = -1;
  if (ctx.cfg.stop_token >= 0) {
    for (int i = ctx.prompt_len; i < budget_end; ++i) {
      if (ctx.y[i] == ctx.cfg.stop_token) {
        stop_at = i;
        break;
      }
    }
  }
  if (stop_at >= 0) {
    end = stop_at + 1;
    res.stop_reason = "stop_token";
    res.partial = false;
  } else {
    res.partial = budget_end - ctx.prompt_len < want;
    res.stop_reason = res.partial ? reason : "max_new_tokens";
  }
  res.new_tokens = end - ctx.prompt_len;
  res.output.assign(ctx.y.begin(), ctx.y.begin() + end);
  ctx.ledger.tokens_emitted = res.new_tokens;
  res.ledger = std::move(ctx.ledger);
  res.trace = std::move(ctx.trace);
  return res;
}

}  // namespace

// ---------------------------------------------------------------------------
// Static autoregressive sampler: one fresh state per token, r recurrences,
// decode, commit.
// ---------------------------------------------------------------------------

GenerationResult generate_static_ar(RecurrentModel& model, const TokenSequence& prompt,
                                    const SamplerConfig& cfg) {
  cfg.validate();
  RunContext ctx(model, prompt, cfg);
  if (cfg.max_new_tokens == 0) return finalize(ctx, "max_new_tokens");
  prefill(model, prompt, cfg.r, cfg.alpha);
  record_prefill_passes(ctx.ledger, ctx.prompt_len, cfg.r);

  bool first = true;
  while (ctx.frozen - ctx.prompt_len < cfg.max_new_tokens) {
    const int pos = ctx.frozen - 1;
    if (pos + 1 >= model.config().max_seq_len) return finalize(ctx, "context_overflow");
    const Conditioning e = model.prelude_rows(ctx.y, pos);
    ctx.ledger.add_pass(PassKind::prelude, Phase::generate, 1, 1, first ? 0 : 1);
    first = false;
    LatentBlock z = model.init_state(1, cfg.alpha, pos);
    for (int k = 0; k < cfg.r; ++k) {
      model.recur_step(z, e);
      ctx.ledger.add_pass(PassKind::recurrent, Phase::generate, 1);
    }
    const Logits logits = model.coda(z);
    ctx.ledger.add_pass(PassKind::coda, Phase::generate, 1);
    const int tok = pick_token(logits, 0, cfg, pos + 1, 1);
    ctx.y.push_back(tok);
    ctx.frozen += 1;
    model.commit_through(ctx.frozen - 1);

    const int step = ctx.frozen - ctx.prompt_len;
    ctx.trace.cells.push_back(TraceCell{step, pos + 1, tok, 0.0, true, 1});
    ctx.trace.steps.push_back(TraceStep{step, 1, 1, 1 >= cfg.wavefront_max});
    if (cfg.stop_token >= 0 && tok == cfg.stop_token) return finalize(ctx, "stop_token");
  }
  return finalize(ctx, "max_new_tokens");
}

// ---------------------------------------------------------------------------
// Adaptive-compute autoregressive sampler: recur until the normalized latent
// distance falls below epsilon, or r passes were spent.
// ---------------------------------------------------------------------------

GenerationResult generate_adaptive_ar(RecurrentModel& model, const TokenSequence& prompt,
                                      const SamplerConfig& cfg) {
  cfg.validate();
  RunContext ctx(model, prompt, cfg);
  if (cfg.max_new_tokens == 0) return finalize(ctx, "max_new_tokens");
  prefill(model, prompt, cfg.r, cfg.alpha);
  record_prefill_passes(ctx.ledger, ctx.prompt_len, cfg.r);

  bool first = true;
  while (ctx.frozen - ctx.prompt_len < cfg.max_new_tokens) {
    const int pos = ctx.frozen - 1;
    if (pos + 1 >= model.config().max_seq_len) return finalize(ctx, "context_overflow");
    const Conditioning e = model.prelude_rows(ctx.y, pos);
    ctx.ledger.add_pass(PassKind::prelude, Phase::generate, 1, 1, first ? 0 : 1);
    first = false;
    LatentBlock z = model.init_state(1, cfg.alpha, pos);
    Mat z_snapshot = z.z;
    double delta = 0.0;
    int spent = 0;
    for (int k = 0; k < cfg.r; ++k) {
      model.recur_step(z, e);
      ctx.ledger.add_pass(PassKind::recurrent, Phase::generate, 1);
      ++spent;
      delta = compute_deltas(z, z_snapshot, cfg.epsilon).deltas[0];
      z_snapshot = z.z;
      if (delta < cfg.epsilon) break;
    }
    const Logits logits = model.coda(z);
    ctx.ledger.add_pass(PassKind::coda, Phase::generate, 1);
    const int tok = pick_token(logits, 0, cfg, pos + 1, 1);
    ctx.y.push_back(tok);
    ctx.frozen += 1;
    model.commit_through(ctx.frozen - 1);

    const int step = ctx.frozen - ctx.prompt_len;
    ctx.trace.cells.push_back(TraceCell{step, pos + 1, tok, delta, true, spent});
    ctx.trace.steps.push_back(TraceStep{step, 1, 1, 1 >= cfg.wavefront_max});
    if (cfg.stop_token >= 0 && tok == cfg.stop_token) return finalize(ctx, "stop_token");
  }
  return finalize(ctx, "max_new_tokens");
}

// ---------------------------------------------------------------------------
// Self-speculative sampler. Drafting runs the model at draft_r; verification
// re-derives tokens at cfg.r in a sequential early-exit sweep, so each
// committed token (and its cache entries) is bit-identical to what static AR
// at cfg.r would have produced. Parallel same-depth verification is not
// output-equivalent for a cache-sharing recurrent model, hence the sweep.
// ---------------------------------------------------------------------------

GenerationResult generate_self_speculative(RecurrentModel& model, const TokenSequence& prompt,
                                           const SamplerConfig& cfg, int draft_len, int draft_r) {
  cfg.validate();
  if (draft_len < 1) throw std::invalid_argument("speculative: draft_len must be >= 1");
  if (draft_r < 1) throw std::invalid_argument("speculative: draft_r must be >= 1");
  RunContext ctx(model, prompt, cfg);
  if (cfg.max_new_tokens == 0) return finalize(ctx, "max_new_tokens");
  prefill(model, prompt, cfg.r, cfg.alpha);
  record_prefill_passes(ctx.ledger, ctx.prompt_len, cfg.r);

  const int verify_r = cfg.r;
  bool first = true;
  int round = 0;
  while (ctx.frozen - ctx.prompt_len < cfg.max_new_tokens) {
    ++round;
    const int round_start = ctx.frozen;

    // Draft phase: draft_len tokens autoregressively at draft_r.
    TokenSequence y_draft = ctx.y;
    int drafted = 0;
    for (int j = 0; j < draft_len; ++j) {
      const int pos = round_start - 1 + j;
      if (pos + 1 >= model.config().max_seq_len) break;
      const Conditioning e = model.prelude_rows(y_draft, pos);
      ctx.ledger.add_pass(PassKind::prelude, Phase::generate, 1, 1, first ? 0 : 1);
      first = false;
      LatentBlock z = model.init_state(1, cfg.alpha, pos);
      for (int k = 0; k < draft_r; ++k) {
        model.recur_step(z, e);
        ctx.ledger.add_pass(PassKind::recurrent, Phase::generate, 1);
      }
      const Logits logits = model.coda(z);
      ctx.ledger.add_pass(PassKind::coda, Phase::generate, 1);
      y_draft.push_back(pick_token(logits, 0, cfg, pos + 1, 1));
      ++drafted;
    }
    if (drafted == 0) return finalize(ctx, "context_overflow");

    // Verification sweep: positions are re-derived at verify_r against fully
    // verified context, stopping at the first token that contradicts its
    // draft. The contradicting (or bonus) token is itself a verified emission.
    while (true) {
      const int pos = ctx.frozen - 1;
      if (pos + 1 >= model.config().max_seq_len) return finalize(ctx, "context_overflow");
      const Conditioning e = model.prelude_rows(ctx.y, pos);
      ctx.ledger.add_pass(PassKind::prelude, Phase::generate, 1, 1, 1);
      LatentBlock z = model.init_state(1, cfg.alpha, pos);
      for (int k = 0; k < verify_r; ++k) {
        model.recur_step(z, e);
        ctx.ledger.add_pass(PassKind::recurrent, Phase::generate, 1);
      }
      const Logits logits = model.coda(z);
      ctx.ledger.add_pass(PassKind::coda, Phase::generate, 1);
      const int verified = pick_token(logits, 0, cfg, pos + 1, 1);

      const int slot = pos + 1;
      ctx.y.push_back(verified);
      ctx.frozen += 1;
      model.commit_through(ctx.frozen - 1);
      ctx.trace.cells.push_back(TraceCell{round, slot, verified, 0.0, true, 1});

      if (cfg.stop_token >= 0 && verified == cfg.stop_token) {
        model.evict_beyond(ctx.frozen - 1);
        return finalize(ctx, "stop_token");
      }
      if (ctx.frozen - ctx.prompt_len >= cfg.max_new_tokens) break;

      const int draft_index = slot - round_start;
      const bool matches_draft = draft_index < drafted &&
                                 verified == y_draft[static_cast<size_t>(round_start) + draft_index];
      if (!matches_draft) break;  // bonus token (all drafts consumed) or correction
    }
    ctx.trace.steps.push_back(TraceStep{round, 1, ctx.frozen - round_start, false});
    model.evict_beyond(ctx.frozen - 1);
  }
  return finalize(ctx, "max_new_tokens");
}

// ---------------------------------------------------------------------------
// Diffusion-forcing wavefront engine, shared by the simple (fixed-exit) and
// adaptive (latent-difference-exit) samplers.
// ---------------------------------------------------------------------------

namespace {

GenerationResult run_diffusion(RecurrentModel& model, const TokenSequence& prompt,
                               const SamplerConfig& cfg, bool adaptive) {
  cfg.validate();
  RunContext ctx(model, prompt, cfg);
  if (cfg.max_new_tokens == 0) return finalize(ctx, "max_new_tokens");
  prefill(model, prompt, cfg.r, cfg.alpha);
  record_prefill_passes(ctx.ledger, ctx.prompt_len, cfg.r);

  const int h = model.config().hidden_dim;
  const int steps_per_position = (cfg.r + cfg.r_inner - 1) / cfg.r_inner;

  // The wavefront starts with a single fresh state at the last prompt
  // position, drafting the first new token.
  GenerationState st;
  st.y_current = prompt;
  st.frozen_len = ctx.prompt_len;
  st.z = model.init_state(1, cfg.alpha, ctx.prompt_len - 1);
  st.z_prev = st.z.z;
  int pending_entries = 1;
  int pending_exits = 0;

  const auto done = [&](const char* reason) {
    ctx.y = st.y_current;
    ctx.frozen = st.frozen_len;
    return finalize(ctx, reason);
  };

  for (st.step = 1; st.step <= cfg.max_steps; ++st.step) {
    const int w = st.z.rows();
    const int first_pos = st.z.first_pos;

    // Conditioning: recompute the wavefront rows (their tokens may have
    // changed), then blend with the previous conditioning.
    const TokenSequence cond_tokens(st.y_current.begin(), st.y_current.begin() + first_pos + w);
    const Conditioning e_new = model.prelude_rows(cond_tokens, first_pos);
    ctx.ledger.add_pass(PassKind::prelude, Phase::generate, w, pending_entries, pending_exits);
    pending_entries = pending_exits = 0;
    const Conditioning e = momentum_embed(st.e_prev, st.e_prev_first_pos, e_new, first_pos, cfg.eta);

    // Noise, scheduled per position age, injected once before the inner
    // recurrences.
    if (cfg.beta_max > 0.0f) {
      for (int i = 0; i < w; ++i) {
        const double beta = beta_schedule(st.z.steps[i], steps_per_position, cfg.beta_max);
        if (beta <= 0.0) continue;
        const uint64_t key = rng_key(cfg.seed, RngStream::state_noise,
                                     static_cast<uint64_t>(first_pos + i),
                                     static_cast<uint64_t>(st.z.steps[i]));
        std::vector<float> noise(h);
        fill_normal(key, noise.data(), noise.size(), cfg.alpha * model.config().init_sigma);
        float* zi = st.z.z.row(i);
        for (int d = 0; d < h; ++d) {
          zi[d] = static_cast<float>((1.0 - beta) * zi[d] + beta * noise[d]);
        }
      }
    }

    for (int j = 0; j < cfg.r_inner; ++j) {
      model.recur_step(st.z, e);
      ctx.ledger.add_pass(PassKind::recurrent, Phase::generate, w);
    }
    for (int i = 0; i < w; ++i) st.z.steps[i] += 1;

    // Decode the whole wavefront into refreshed drafts.
    const Logits logits = model.coda(st.z);
    ctx.ledger.add_pass(PassKind::coda, Phase::generate, w);
    std::vector<double> uniforms;
    if (cfg.temperature > 0.0f) {
      uniforms.resize(w);
      for (int i = 0; i < w; ++i) {
        uniforms[i] = uniform_at(rng_key(cfg.seed, RngStream::token_sample,
                                         static_cast<uint64_t>(first_pos + i + 1),
                                         static_cast<uint64_t>(st.z.steps[i])),
                                 0);
      }
    }
    const TokenSequence drafts = sample_tokens(logits, cfg.temperature, cfg.top_p, uniforms);
    for (int i = 0; i < w; ++i) {
      const size_t slot = static_cast<size_t>(first_pos) + i + 1;
      if (slot == st.y_current.size()) {
        st.y_current.push_back(drafts[i]);
      } else {
        st.y_current[slot] = drafts[i];
      }
    }
    st.check_invariants();

    const ConvergenceReport rep = compute_deltas(st.z, st.z_prev, cfg.epsilon);
    for (int i = 0; i < w; ++i) {
      ctx.trace.cells.push_back(TraceCell{st.step, first_pos + i + 1,
                                          st.y_current[first_pos + i + 1], rep.deltas[i], false,
                                          st.z.steps[i]});
    }

    // Freeze: the adaptive rule takes the converged prefix, the simple rule
    // the prefix of positions that have spent their recurrence budget.
    int k = 0;
    if (adaptive) {
      k = rep.k_star;
    } else {
      while (k < w && st.z.steps[k] >= steps_per_position) ++k;
    }
    if (k > 0) {
      for (int i = 0; i < k; ++i) {
        ctx.trace.cells.push_back(TraceCell{st.step, first_pos + i + 1,
                                            st.y_current[first_pos + i + 1], rep.deltas[i], true,
                                            st.z.steps[i]});
      }
      st.frozen_len += k;
      st.z.drop_front(k);
      model.commit_through(st.frozen_len - 1);
      pending_exits += k;
    }
    ctx.trace.steps.push_back(TraceStep{st.step, w, k, w >= cfg.wavefront_max});

    if (cfg.stop_token >= 0 && k > 0) {
      for (int i = st.frozen_len - k; i < st.frozen_len; ++i) {
        if (st.y_current[i] == cfg.stop_token) return done("stop_token");
      }
    }
    if (st.frozen_len - ctx.prompt_len >= cfg.max_new_tokens) return done("max_new_tokens");

    pending_entries +=
        advance_headway(model, cfg, st.y_current, st.z, st.frozen_len, ctx.prompt_len);
    if (st.z.rows() == 0) {
      // Nothing left to refine and no useful position to append.
      return done("context_overflow");
    }

    st.z_prev = st.z.z;
    st.e_prev = e;
    st.e_prev_first_pos = first_pos;
  }
  return done("max_steps");
}

}  // namespace

GenerationResult generate_diffusion_simple(RecurrentModel& model, const TokenSequence& prompt,
                                           const SamplerConfig& cfg) {
  return run_diffusion(model, prompt, cfg, /*adaptive=*/false);
}

GenerationResult generate_diffusion_adaptive(RecurrentModel& model, const TokenSequence& prompt,
                                             const SamplerConfig& cfg) {
  return run_diffusion(model, prompt, cfg, /*adaptive=*/true);
}

}  // namespace rdlm
