#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdio>

#include "rdlm/bench.hpp"
#include "rdlm/report.hpp"
#include "rdlm/samplers.hpp"
#include "rdlm/theory.hpp"
#include "rdlm/util.hpp"

using namespace rdlm;

namespace {

CostProfile toy_profile() {
  CostProfile p;
  p.flops_per_layer_token = 100;
  p.prelude_layers = 1;
  p.recurrent_layers = 2;
  p.coda_layers = 1;
  return p;
}

}  // namespace

TEST_CASE("ledger FLOP accounting per block kind") {
  CostLedger led(toy_profile());
  CHECK(led.flops_total(Phase::generate) == 0);  // zero tokens, zero FLOPs
  led.add_pass(PassKind::prelude, Phase::generate, 3);
  led.add_pass(PassKind::recurrent, Phase::generate, 3);
  led.add_pass(PassKind::coda, Phase::generate, 3);
  CHECK(led.f_unit() == 200);
  CHECK(led.flops_prelude(Phase::generate) == 300);
  CHECK(led.flops_recurrent(Phase::generate) == 600);
  CHECK(led.flops_coda(Phase::generate) == 300);
  // Prelude + coda together cost one recurrent-block pass.
  CHECK(led.flops_prelude(Phase::generate) + led.flops_coda(Phase::generate) ==
        led.f_unit() * 3);
  CHECK(led.flops_total(Phase::prefill) == 0);
}

TEST_CASE("latency model: single pass time and saturation clamp") {
  LatencyModel m;
  m.fixed_overhead_us = 1000;
  m.per_token_us = 1;
  m.saturation_width = 128;
  CHECK(m.pass_time_us(1) == doctest::Approx(1001.0));
  CHECK(m.pass_time_us(128) == doctest::Approx(1128.0));
  CHECK(m.pass_time_us(500) == doctest::Approx(1128.0));
  double prev = 0.0;
  for (int w = 1; w <= 300; w += 7) {
    CHECK(m.pass_time_us(w) >= prev);
    prev = m.pass_time_us(w);
  }

  CostLedger led(toy_profile());
  led.add_pass(PassKind::recurrent, Phase::generate, 1);
  led.tokens_emitted = 1;
  const SimResult sim = simulate_time(led, m, Phase::generate);
  CHECK(sim.total_us == doctest::Approx(1001.0));
}

TEST_CASE("profile files parse and reject junk") {
  const std::string path = "/tmp/rdlm_profile_test.txt";
  write_text_file(path, "fixed_overhead_us=250\nper_token_us=0.5\nsaturation_width=64\n");
  const LatencyModel m = LatencyModel::from_file(path);
  CHECK(m.fixed_overhead_us == doctest::Approx(250.0));
  CHECK(m.per_token_us == doctest::Approx(0.5));
  CHECK(m.saturation_width == 64);
  write_text_file(path, "fixed_overhead_us=250\nwhat=1\n");
  CHECK_THROWS_AS(LatencyModel::from_file(path), std::runtime_error);
}

TEST_CASE("memory-bound profile rewards the wavefront; compute-bound does not") {
  ContractionOracle oracle(32, 0.5, 13);
  SamplerConfig cfg;
  cfg.r = 32;
  cfg.r_inner = 4;
  cfg.max_new_tokens = 40;
  cfg.max_steps = 10000;
  const TokenSequence prompt = random_prompt(6, oracle.config().vocab_size, 13);
  const GenerationResult ar = generate_static_ar(oracle, prompt, cfg);
  const GenerationResult df = generate_diffusion_adaptive(oracle, prompt, cfg);
  REQUIRE(df.new_tokens == cfg.max_new_tokens);

  LatencyModel memory_bound{1000.0, 1.0, 128};
  const double ar_tps = simulate_time(ar.ledger, memory_bound).tokens_per_sec;
  const double df_tps = simulate_time(df.ledger, memory_bound).tokens_per_sec;
  const double speedup = df_tps / ar_tps;
  CHECK(speedup >= 3.5);
  CHECK(speedup <= 8.0);

  // Compute-bound control: pass overhead on par with per-token cost. The
  // FLOP-matched fixed-exit sampler loses its parallelization edge here.
  const GenerationResult df_fixed = generate_diffusion_simple(oracle, prompt, cfg);
  LatencyModel compute_bound{1.0, 1.0, 128};
  const double flat = simulate_time(df_fixed.ledger, compute_bound).tokens_per_sec /
                      simulate_time(ar.ledger, compute_bound).tokens_per_sec;
  CHECK(flat > 0.5);
  CHECK(flat < 2.0);

  // Speedup is nondecreasing in the overhead-to-bandwidth ratio.
  double prev = 0.0;
  for (double fixed : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
    LatencyModel lm{fixed, 1.0, 128};
    const double s = simulate_time(df.ledger, lm).tokens_per_sec /
                     simulate_time(ar.ledger, lm).tokens_per_sec;
    CHECK(s >= prev);
    prev = s;
  }
}

TEST_CASE("trace CSV round-trips exactly and invariants are enforced") {
  Trace t;
  t.wavefront_cap = 4;
  t.cells = {
      {1, 5, 10, 0.5, false, 1},
      {1, 6, 11, 0.25, false, 1},
      {2, 5, 10, 0.001953125, true, 2},
      {2, 6, 12, 0.125, false, 2},
  };
  const std::string path = "/tmp/rdlm_trace_test.csv";
  export_trace_csv(t, path);
  const Trace back = import_trace_csv(path);
  REQUIRE(back.cells.size() == t.cells.size());
  for (size_t i = 0; i < t.cells.size(); ++i) {
    CHECK(back.cells[i].step == t.cells[i].step);
    CHECK(back.cells[i].position == t.cells[i].position);
    CHECK(back.cells[i].token_id == t.cells[i].token_id);
    CHECK(back.cells[i].delta == t.cells[i].delta);
    CHECK(back.cells[i].frozen == t.cells[i].frozen);
    CHECK(back.cells[i].steps_at_position == t.cells[i].steps_at_position);
  }
  CHECK_NOTHROW(check_trace_invariants(back));

  Trace bad = t;
  bad.cells.push_back({3, 5, 99, 0.0, true, 3});  // frozen token changed
  CHECK_THROWS_AS(check_trace_invariants(bad), std::logic_error);
  bad = t;
  bad.cells.push_back({3, 5, 10, 0.0, false, 3});  // frozen flag retracted
  CHECK_THROWS_AS(check_trace_invariants(bad), std::logic_error);
}

TEST_CASE("stall detection on a synthetic step log and a capped hard run") {
  Trace t;
  t.wavefront_cap = 4;
  t.steps = {
      {1, 2, 1, false}, {2, 4, 0, true}, {3, 4, 0, true}, {4, 4, 2, true}, {5, 3, 1, false},
  };
  const auto episodes = detect_stalls(t);
  REQUIRE(episodes.size() == 1);
  CHECK(episodes[0].start_step == 2);
  CHECK(episodes[0].length == 2);

  // Slow contraction + tight threshold + tiny cap: the wavefront must fill
  // and hold before the first freeze lands.
  ContractionOracle oracle(32, 0.9, 2);
  SamplerConfig cfg;
  cfg.r = 32;
  cfg.r_inner = 2;
  cfg.epsilon = 1e-4f;
  cfg.wavefront_max = 4;
  cfg.max_new_tokens = 8;
  cfg.max_steps = 4000;
  const GenerationResult run =
      generate_diffusion_adaptive(oracle, random_prompt(4, 256, 2), cfg);
  REQUIRE(run.new_tokens == cfg.max_new_tokens);
  CHECK(!detect_stalls(run.trace).empty());
  // Re-derived summaries from the cell grid agree on the stall verdict.
  Trace imported;
  imported.cells = run.trace.cells;
  imported.wavefront_cap = cfg.wavefront_max;
  CHECK(!detect_stalls(imported).empty());
}

TEST_CASE("compare_samplers: equivalence row, FLOPs-vs-throughput, determinism") {
  ContractionOracle oracle(32, 0.5, 19);
  SamplerConfig base;
  base.r = 16;
  base.r_inner = 4;
  base.max_new_tokens = 16;
  base.eta = 0.0f;

  SamplerConfig df_equal = base;
  df_equal.r_inner = base.r;

  const std::vector<TokenSequence> prompts{
      random_prompt(5, 256, 1), random_prompt(5, 256, 2), random_prompt(5, 256, 3)};
  const std::vector<CompareSpec> specs{
      {"static", "ar", base, 4, 4},
      {"df-simple", "df_equal_depth", df_equal, 4, 4},
      {"df-simple", "df_fast", base, 4, 4},
  };
  const LatencyModel lm{1000.0, 1.0, 128};
  const auto rows = compare_samplers(oracle, prompts, specs, lm);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].match_rate == 1.0);
  CHECK(rows[1].match_rate == 1.0);  // r_inner == r is the AR path, exactly

  // The fast diffusion row burns more FLOPs per token yet emits tokens
  // faster under the memory-bound profile.
  CHECK(rows[2].flops_per_token > rows[0].flops_per_token);
  CHECK(rows[2].tokens_per_sec_sim > rows[0].tokens_per_sec_sim);
  CHECK(rows[2].mean_wavefront > rows[0].mean_wavefront);

  const auto again = compare_samplers(oracle, prompts, specs, lm);
  CHECK(report_to_json(again) == report_to_json(rows));
}

TEST_CASE("report JSON carries the declared fields") {
  std::vector<SamplerReport> rows{{"ar", 10.0, 33.0, 1.0, 1.0, 0.0}};
  const std::string j = report_to_json(rows);
  for (const char* key : {"samplers", "name", "tokens_per_sec_sim", "flops_per_token",
                          "match_rate", "mean_wavefront", "stall_fraction"}) {
    CHECK(j.find(key) != std::string::npos);
  }
}

TEST_CASE("ppm heatmap export writes a plausible image") {
  Trace t;
  t.cells = {{0, 0, 1, 0.0, false, 1}, {1, 1, 2, 0.0, true, 2}};
  const std::string path = "/tmp/rdlm_trace_test.ppm";
  export_trace_ppm(t, path);
  FILE* f = std::fopen(path.c_str(), "rb");
  REQUIRE(f != nullptr);
  char magic[3] = {0, 0, 0};
  REQUIRE(std::fread(magic, 1, 2, f) == 2);
  std::fclose(f);
  CHECK(magic[0] == 'P');
  CHECK(magic[1] == '6');
}
