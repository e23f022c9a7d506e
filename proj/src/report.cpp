#include "rdlm/report.hpp"

#include <algorithm>
#include <stdexcept>

#include "rdlm/rng.hpp"

namespace rdlm {

GenerationResult run_sampler(const std::string& name, RecurrentModel& model,
                             const TokenSequence& prompt, const SamplerConfig& cfg,
                             int draft_len, int draft_r) {
  const std::string key = sampler_name(name);
  if (key == "static") return generate_static_ar(model, prompt, cfg);
  if (key == "adaptive") return generate_adaptive_ar(model, prompt, cfg);
  if (key == "speculative") return generate_self_speculative(model, prompt, cfg, draft_len, draft_r);
  if (key == "df-simple") return generate_diffusion_simple(model, prompt, cfg);
  return generate_diffusion_adaptive(model, prompt, cfg);
}

TokenSequence random_prompt(int length, int vocab_size, uint64_t seed, uint64_t index) {
  if (length < 1) throw std::invalid_argument("random_prompt: length must be >= 1");
  TokenSequence t(length);
  const uint64_t key = rng_key(seed, RngStream::prompt, index);
  for (int i = 0; i < length; ++i) t[i] = uniform_int(key, static_cast<uint64_t>(i), vocab_size);
  return t;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<SamplerReport> compare_samplers(RecurrentModel& model,
                                            const std::vector<TokenSequence>& prompts,
                                            const std::vector<CompareSpec>& specs,
                                            const LatencyModel& latency) {
  if (prompts.empty()) throw std::invalid_argument("compare_samplers: need at least one prompt");

  std::vector<SamplerReport> rows;
  for (const CompareSpec& spec : specs) {
    SamplerConfig ref_cfg = spec.cfg;
    ref_cfg.temperature = 0.0f;
    ref_cfg.top_p = 1.0f;

    SamplerReport row;
    row.name = spec.label.empty() ? spec.name : spec.label;
    std::vector<double> throughput;
    double flops_f = 0.0;
    long total_tokens = 0;
    long matches = 0;
    long steps_total = 0;
    long steps_stalled = 0;
    double wavefront_sum = 0.0;

    for (const TokenSequence& prompt : prompts) {
      const GenerationResult ref = generate_static_ar(model, prompt, ref_cfg);
      GenerationResult got = run_sampler(spec.name, model, prompt, spec.cfg,
                                         spec.draft_len, spec.draft_r);
      if (got.output == ref.output) ++matches;

      const SimResult sim = simulate_time(got.ledger, latency, Phase::generate);
      throughput.push_back(sim.tokens_per_sec);
      flops_f += static_cast<double>(got.ledger.flops_total(Phase::generate)) /
                 static_cast<double>(got.ledger.f_unit());
      total_tokens += got.new_tokens;
      for (const TraceStep& s : got.trace.steps) {
        ++steps_total;
        wavefront_sum += s.wavefront;
        if (s.frozen_this_step == 0) ++steps_stalled;
      }
    }

    row.tokens_per_sec_sim = median(throughput);
    row.flops_per_token = total_tokens > 0 ? flops_f / total_tokens : 0.0;
    row.match_rate = static_cast<double>(matches) / prompts.size();
    row.mean_wavefront = steps_total > 0 ? wavefront_sum / steps_total : 0.0;
    row.stall_fraction = steps_total > 0 ? static_cast<double>(steps_stalled) / steps_total : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace rdlm
