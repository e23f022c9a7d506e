#include "rdlm/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rdlm/rng.hpp"

namespace rdlm {

// ---------------------------------------------------------------------------
// Ledger
// ---------------------------------------------------------------------------

DepthWidthLedger DepthWidthLedger::replay(const std::vector<LedgerStepEvent>& events,
                                          int initial_width) {
  DepthWidthLedger led;
  led.depth.reserve(events.size() + 1);
  led.width.reserve(events.size() + 1);
  led.depth.push_back(0);
  led.width.push_back(initial_width);
  for (size_t t = 0; t < events.size(); ++t) {
    const int w = led.width.back() + events[t].entries - events[t].exits;
    if (w < 0) {
      throw std::runtime_error("ledger: width would go negative at step " + std::to_string(t));
    }
    led.depth.push_back(static_cast<int>(t) + 1);
    led.width.push_back(w);
  }
  return led;
}

std::vector<LedgerStepEvent> ledger_events_from_passes(const std::vector<PassEvent>& passes,
                                                       Phase phase) {
  std::vector<LedgerStepEvent> events;
  for (const PassEvent& p : passes) {
    if (p.phase != phase) continue;
    events.push_back(LedgerStepEvent{p.entries, p.exits});
  }
  return events;
}

void check_ledger_against_passes(const std::vector<PassEvent>& passes, Phase phase) {
  const auto events = ledger_events_from_passes(passes, phase);
  const auto led = DepthWidthLedger::replay(events, 0);
  size_t t = 0;
  for (const PassEvent& p : passes) {
    if (p.phase != phase) continue;
    // Width after this step's entries/exits must equal the processed width.
    if (led.width[t + 1] != p.width) {
      throw std::logic_error("ledger: replayed width " + std::to_string(led.width[t + 1]) +
                             " != pass width " + std::to_string(p.width) + " at step " +
                             std::to_string(t));
    }
    ++t;
  }
}

int width_at_pass(const std::vector<PassEvent>& passes, Phase phase, uint64_t t) {
  uint64_t i = 0;
  for (const PassEvent& p : passes) {
    if (p.phase != phase) continue;
    if (i == t) return p.width;
    ++i;
  }
  throw std::out_of_range("ledger: pass index out of range");
}

// ---------------------------------------------------------------------------
// Width-scaling masks
// ---------------------------------------------------------------------------

bool WidthScalingMask::allowed(int qi, int qj, int ki, int kj) const {
  if (qi < 0 || qi >= L || ki < 0 || ki >= L || qj < 0 || qj >= s || kj < 0 || kj >= s) {
    return false;
  }
  if (ki == qi) return kj < qj;  // first qj copies of the same token
  if (ki > qi) return false;
  if (variant == WidthVariant::no_share) return true;  // every copy of earlier tokens
  return kj == s - 1;                                  // only the last copy
}

WidthScalingMask build_mask(WidthVariant variant, int L, int s) {
  if (L < 1 || s < 1) throw std::invalid_argument("mask: L and s must be >= 1");
  return WidthScalingMask{variant, L, s};
}

uint64_t mask_pair_count(WidthVariant variant, int L, int s) {
  const uint64_t ll = static_cast<uint64_t>(L);
  const uint64_t ss = static_cast<uint64_t>(s);
  const uint64_t cross = ll * (ll - 1) / 2;  // ordered earlier-token pairs
  const uint64_t intra = ll * (ss * (ss - 1) / 2);
  if (variant == WidthVariant::no_share) return ss * ss * cross + intra;
  return ss * cross + intra;
}

uint64_t mask_pair_count_enumerated(const WidthScalingMask& mask) {
  uint64_t n = 0;
  for (int qi = 0; qi < mask.L; ++qi)
    for (int qj = 0; qj < mask.s; ++qj)
      for (int ki = 0; ki < mask.L; ++ki)
        for (int kj = 0; kj < mask.s; ++kj)
          if (mask.allowed(qi, qj, ki, kj)) ++n;
  return n;
}

bool mask_is_causal(const WidthScalingMask& mask) {
  for (int qi = 0; qi < mask.L; ++qi)
    for (int qj = 0; qj < mask.s; ++qj)
      for (int ki = 0; ki < mask.L; ++ki)
        for (int kj = 0; kj < mask.s; ++kj)
          if (mask.allowed(qi, qj, ki, kj) && mask.flat(ki, kj) >= mask.flat(qi, qj)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Prefill cost + parallelism
// ---------------------------------------------------------------------------

PrefillCost prefill_cost(PrefillArch arch, int L, int s, const ModelDims& dims) {
  if (L < 1 || s < 1) throw std::invalid_argument("prefill_cost: L and s must be >= 1");
  PrefillCost c;
  c.linear_flops = static_cast<double>(s) * L * static_cast<double>(dims.f_unit);
  const double per_pair = 4.0 * dims.hidden_dim;  // q.k dot plus value accumulation
  uint64_t pairs = 0;
  switch (arch) {
    case PrefillArch::depth:
      // Recurrent passes share one L-sized cache; the attention term is the
      // causal pair count over the unreplicated sequence.
      pairs = static_cast<uint64_t>(L) * (L - 1) / 2;
      break;
    case PrefillArch::width_kv_share:
      pairs = mask_pair_count(WidthVariant::kv_share, L, s);
      break;
    case PrefillArch::width_no_share:
      pairs = mask_pair_count(WidthVariant::no_share, L, s);
      break;
  }
  c.attention_flops = per_pair * static_cast<double>(pairs);
  return c;
}

ParallelismReport parallelism_profile(int L, int s, const LatencyModel& hardware) {
  if (L < 1 || s < 1) throw std::invalid_argument("parallelism_profile: L and s must be >= 1");
  ParallelismReport r;
  const int l_star = hardware.saturation_width;
  r.saturated = L >= l_star;
  r.depth_parallelism = std::min(L, l_star);
  r.ratio = r.saturated ? 1.0 : static_cast<double>(s) * s;
  r.width_parallelism = r.depth_parallelism * r.ratio;
  return r;
}

double prob_depth_wins(const std::vector<int>& prompt_lengths, int l_star) {
  if (prompt_lengths.empty()) throw std::invalid_argument("prob_depth_wins: empty length sample");
  size_t n = 0;
  for (int l : prompt_lengths) {
    if (l >= l_star) ++n;
  }
  return static_cast<double>(n) / prompt_lengths.size();
}

// ---------------------------------------------------------------------------
// Instrumented replicated forward
// ---------------------------------------------------------------------------

MaskedForwardStats masked_replicated_forward(const Mat& states, WidthVariant variant, int s,
                                             uint64_t seed) {
  const int L = states.rows;
  const int h = states.cols;
  const WidthScalingMask mask = build_mask(variant, L, s);

  Mat wq(h, h), wk(h, h), wv(h, h);
  fill_normal(rng_key(seed, RngStream::weights, 101), wq.data.data(), wq.data.size(),
              1.0f / std::sqrt(static_cast<float>(h)));
  fill_normal(rng_key(seed, RngStream::weights, 102), wk.data.data(), wk.data.size(),
              1.0f / std::sqrt(static_cast<float>(h)));
  fill_normal(rng_key(seed, RngStream::weights, 103), wv.data.data(), wv.data.size(),
              1.0f / std::sqrt(static_cast<float>(h)));

  // Replicate: flat index (i, j) -> i*s + j.
  const int n = L * s;
  Mat x(n, h), q(n, h), k(n, h), v(n, h);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < s; ++j)
      std::copy(states.row(i), states.row(i) + h, x.row(mask.flat(i, j)));
  for (int r = 0; r < n; ++r) {
    matvec(wq, x.row(r), q.row(r));
    matvec(wk, x.row(r), k.row(r));
    matvec(wv, x.row(r), v.row(r));
  }

  Mat out(n, h);
  std::vector<double> scores(n);
  const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(h));
  for (int qi = 0; qi < L; ++qi) {
    for (int qj = 0; qj < s; ++qj) {
      const int qr = mask.flat(qi, qj);
      int count = 0;
      double max_s = -1e300;
      for (int ki = 0; ki < L; ++ki) {
        for (int kj = 0; kj < s; ++kj) {
          if (!mask.allowed(qi, qj, ki, kj)) continue;
          const int kr = mask.flat(ki, kj);
          scores[count] = dot(q.row(qr), k.row(kr), h) * inv_sqrt_h;
          max_s = std::max(max_s, scores[count]);
          ++count;
        }
      }
      float* o = out.row(qr);
      std::copy(x.row(qr), x.row(qr) + h, o);  // residual
      if (count == 0) continue;                // first copy of the first token
      double denom = 0.0;
      for (int c = 0; c < count; ++c) {
        scores[c] = std::exp(scores[c] - max_s);
        denom += scores[c];
      }
      int c = 0;
      std::vector<double> acc(h, 0.0);
      for (int ki = 0; ki < L; ++ki) {
        for (int kj = 0; kj < s; ++kj) {
          if (!mask.allowed(qi, qj, ki, kj)) continue;
          const float* vr = v.row(mask.flat(ki, kj));
          for (int d = 0; d < h; ++d) acc[d] += scores[c] * vr[d];
          ++c;
        }
      }
      for (int d = 0; d < h; ++d) o[d] += static_cast<float>(acc[d] / denom);
    }
  }

  MaskedForwardStats stats;
  stats.serial_passes = 1;
  stats.width = n;
  stats.reduced = Mat(L, h);
  for (int i = 0; i < L; ++i) {
    std::copy(out.row(mask.flat(i, s - 1)), out.row(mask.flat(i, s - 1)) + h,
              stats.reduced.row(i));
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Contraction oracle
// ---------------------------------------------------------------------------

namespace {

// Spectral norm by power iteration on A^T A.
double spectral_norm(const Mat& a, uint64_t seed) {
  const int n = a.cols;
  std::vector<double> v(n), av(a.rows), atav(n);
  for (int i = 0; i < n; ++i) v[i] = uniform_at(rng_key(seed, RngStream::probe, 7), i) - 0.5;
  double norm = 0.0;
  for (int it = 0; it < 200; ++it) {
    for (int i = 0; i < a.rows; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += static_cast<double>(a.at(i, j)) * v[j];
      av[i] = acc;
    }
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int i = 0; i < a.rows; ++i) acc += static_cast<double>(a.at(i, j)) * av[i];
      atav[j] = acc;
    }
    double mag = 0.0;
    for (double x : atav) mag += x * x;
    mag = std::sqrt(mag);
    if (mag == 0.0) return 0.0;
    for (int j = 0; j < n; ++j) v[j] = atav[j] / mag;
    norm = std::sqrt(mag);
  }
  return norm;
}

void lu_factor(std::vector<double>& m, std::vector<int>& pivot, int n) {
  pivot.resize(n);
  for (int col = 0; col < n; ++col) {
    int best = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(m[r * n + col]) > std::abs(m[best * n + col])) best = r;
    }
    pivot[col] = best;
    if (best != col) {
      for (int c = 0; c < n; ++c) std::swap(m[col * n + c], m[best * n + c]);
    }
    const double diag = m[col * n + col];
    if (diag == 0.0) throw std::runtime_error("oracle: singular system in fixed-point solve");
    for (int r = col + 1; r < n; ++r) {
      const double f = m[r * n + col] / diag;
      m[r * n + col] = f;
      for (int c = col + 1; c < n; ++c) m[r * n + c] -= f * m[col * n + c];
    }
  }
}

void lu_solve(const std::vector<double>& m, const std::vector<int>& pivot, int n,
              std::vector<double>& b) {
  for (int col = 0; col < n; ++col) {
    if (pivot[col] != col) std::swap(b[col], b[pivot[col]]);
    for (int r = col + 1; r < n; ++r) b[r] -= m[r * n + col] * b[col];
  }
  for (int r = n - 1; r >= 0; --r) {
    for (int c = r + 1; c < n; ++c) b[r] -= m[r * n + c] * b[c];
    b[r] /= m[r * n + r];
  }
}

}  // namespace

ContractionOracle::ContractionOracle(int hidden_dim, double lambda, uint64_t seed, int vocab_size,
                                     int max_seq_len)
    : lambda_(lambda) {
  if (lambda < 0.0 || lambda >= 1.0) {
    throw std::invalid_argument("oracle: lambda must lie in [0, 1)");
  }
  cfg_.vocab_size = vocab_size;
  cfg_.hidden_dim = hidden_dim;
  cfg_.num_heads = 1;
  cfg_.prelude_layers = 1;
  cfg_.recurrent_layers = 2;  // accounting shape: prelude+coda together cost one f
  cfg_.coda_layers = 1;
  cfg_.init_sigma = 1.0f;
  cfg_.max_seq_len = max_seq_len;
  cfg_.seed = seed;
  cfg_.validate();

  const float sd = 1.0f / std::sqrt(static_cast<float>(hidden_dim));
  a_ = Mat(hidden_dim, hidden_dim);
  b_ = Mat(hidden_dim, hidden_dim);
  emb_ = Mat(vocab_size, hidden_dim);
  dec_ = Mat(vocab_size, hidden_dim);
  fill_normal(rng_key(seed, RngStream::weights, 1), a_.data.data(), a_.data.size(), sd);
  fill_normal(rng_key(seed, RngStream::weights, 2), b_.data.data(), b_.data.size(), sd);
  fill_normal(rng_key(seed, RngStream::weights, 3), emb_.data.data(), emb_.data.size(), 1.0f);
  fill_normal(rng_key(seed, RngStream::weights, 4), dec_.data.data(), dec_.data.size(), sd);

  const double norm = spectral_norm(a_, seed);
  for (float& x : a_.data) x = static_cast<float>(x / norm);

  // Factor (I - lambda A) once for the closed-form fixed-point solves.
  lu_.assign(static_cast<size_t>(hidden_dim) * hidden_dim, 0.0);
  for (int i = 0; i < hidden_dim; ++i) {
    for (int j = 0; j < hidden_dim; ++j) {
      lu_[static_cast<size_t>(i) * hidden_dim + j] =
          (i == j ? 1.0 : 0.0) - lambda_ * a_.at(i, j);
    }
  }
  lu_factor(lu_, pivot_, hidden_dim);
}

CostProfile ContractionOracle::cost_profile() const {
  const uint64_t h = static_cast<uint64_t>(cfg_.hidden_dim);
  CostProfile p;
  p.flops_per_layer_token = 2 * h * h;  // one of the two matvecs per step
  p.prelude_layers = cfg_.prelude_layers;
  p.recurrent_layers = cfg_.recurrent_layers;
  p.coda_layers = cfg_.coda_layers;
  return p;
}

Conditioning ContractionOracle::prelude(const TokenSequence& tokens) const {
  if (tokens.empty()) throw std::invalid_argument("oracle: prelude on empty sequence");
  const int h = cfg_.hidden_dim;
  Mat e(static_cast<int>(tokens.size()), h);
  for (size_t p = 0; p < tokens.size(); ++p) {
    const int id = tokens[p];
    if (id < 0 || id >= cfg_.vocab_size) {
      throw std::invalid_argument("oracle: token id out of range");
    }
    float* row = e.row(static_cast<int>(p));
    const float* cur = emb_.row(id);
    for (int d = 0; d < h; ++d) row[d] = cur[d];
    if (p > 0) {
      const float* prev = emb_.row(tokens[p - 1]);
      for (int d = 0; d < h; ++d) row[d] += 0.5f * prev[d];
    }
  }
  return e;
}

Conditioning ContractionOracle::prelude_rows(const TokenSequence& tokens, int first_row) {
  const Conditioning full = prelude(tokens);
  const int n = static_cast<int>(tokens.size()) - first_row;
  Mat e(n, cfg_.hidden_dim);
  for (int i = 0; i < n; ++i) {
    std::copy(full.row(first_row + i), full.row(first_row + i) + cfg_.hidden_dim, e.row(i));
  }
  return e;
}

LatentBlock ContractionOracle::init_state(int n, float alpha, int first_pos) const {
  if (n < 1) throw std::invalid_argument("oracle: init_state needs n >= 1");
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

void ContractionOracle::recur_step(LatentBlock& z, const Conditioning& e_rows) {
  const int h = cfg_.hidden_dim;
  if (z.z.cols != h || e_rows.cols != h || e_rows.rows != z.rows()) {
    throw std::logic_error("oracle: recur_step shape mismatch");
  }
  std::vector<float> next(h);
  for (int i = 0; i < z.rows(); ++i) {
    const float* zi = z.z.row(i);
    const float* ei = e_rows.row(i);
    for (int d = 0; d < h; ++d) {
      next[d] = static_cast<float>(lambda_ * dot(a_.row(d), zi, h) + dot(b_.row(d), ei, h));
    }
    std::copy(next.begin(), next.end(), z.z.row(i));
  }
  for (int& r : z.recurrences) ++r;
  z.require_finite();
}

Logits ContractionOracle::coda(const LatentBlock& z) {
  if (z.rows() < 1) throw std::invalid_argument("oracle: coda on empty latent block");
  Logits out(z.rows(), cfg_.vocab_size);
  for (int i = 0; i < z.rows(); ++i) matvec(dec_, z.z.row(i), out.row(i));
  return out;
}

void ContractionOracle::commit_through(int position) {
  if (position < frozen_) throw std::logic_error("oracle: commit would regress frozen length");
  frozen_ = position;
}

Mat ContractionOracle::fixed_points(const TokenSequence& tokens) const {
  const Conditioning e = prelude(tokens);
  const int h = cfg_.hidden_dim;
  Mat out(e.rows, h);
  std::vector<double> rhs(h);
  for (int p = 0; p < e.rows; ++p) {
    for (int d = 0; d < h; ++d) rhs[d] = dot(b_.row(d), e.row(p), h);
    lu_solve(lu_, pivot_, h, rhs);
    for (int d = 0; d < h; ++d) out.at(p, d) = static_cast<float>(rhs[d]);
  }
  return out;
}

TokenSequence ContractionOracle::reference_output(const TokenSequence& prompt,
                                                  int max_new_tokens) const {
  TokenSequence y = prompt;
  const int h = cfg_.hidden_dim;
  std::vector<double> rhs(h);
  std::vector<float> z(h), logits(cfg_.vocab_size);
  for (int n = 0; n < max_new_tokens; ++n) {
    const size_t p = y.size() - 1;
    // e_p without materializing the whole prelude
    std::vector<float> e(emb_.row(y[p]), emb_.row(y[p]) + h);
    if (p > 0) {
      const float* prev = emb_.row(y[p - 1]);
      for (int d = 0; d < h; ++d) e[d] += 0.5f * prev[d];
    }
    for (int d = 0; d < h; ++d) rhs[d] = dot(b_.row(d), e.data(), h);
    lu_solve(lu_, pivot_, h, rhs);
    for (int d = 0; d < h; ++d) z[d] = static_cast<float>(rhs[d]);
    matvec(dec_, z.data(), logits.data());
    int best = 0;
    for (int i = 1; i < cfg_.vocab_size; ++i) {
      if (logits[i] > logits[best]) best = i;
    }
    y.push_back(best);
  }
  return y;
}

std::unique_ptr<ContractionOracle> make_contraction_oracle(int hidden_dim, double lambda,
                                                           uint64_t seed) {
  return std::make_unique<ContractionOracle>(hidden_dim, lambda, seed);
}

}  // namespace rdlm
