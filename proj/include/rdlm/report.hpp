#pragma once

#include <string>
#include <vector>

#include "rdlm/bench.hpp"
#include "rdlm/samplers.hpp"

namespace rdlm {

struct CompareSpec {
  std::string name;  // sampler key: static|adaptive|speculative|df-simple|df-adaptive
  std::string label; // report row label; defaults to name
  SamplerConfig cfg;
  int draft_len = 4;
  int draft_r = 4;
};

GenerationResult run_sampler(const std::string& name, RecurrentModel& model,
                             const TokenSequence& prompt, const SamplerConfig& cfg,
                             int draft_len = 4, int draft_r = 4);

// Runs every configured sampler over every prompt on a freshly reset stream.
// Each report row carries: median simulated throughput, FLOPs per token in
// units of f, exact-sequence match rate against the greedy static-AR
// reference at the same r, mean wavefront, and the fraction of steps that
// froze nothing.
std::vector<SamplerReport> compare_samplers(RecurrentModel& model,
                                            const std::vector<TokenSequence>& prompts,
                                            const std::vector<CompareSpec>& specs,
                                            const LatencyModel& latency);

TokenSequence random_prompt(int length, int vocab_size, uint64_t seed, uint64_t index = 0);

}  // namespace rdlm
