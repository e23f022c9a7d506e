#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <set>

#include "rdlm/report.hpp"
#include "rdlm/rng.hpp"
#include "rdlm/samplers.hpp"
#include "rdlm/theory.hpp"

using namespace rdlm;

TEST_CASE("ledger replay: identity trajectory and the depth law") {
  const std::vector<LedgerStepEvent> quiet(5);
  const DepthWidthLedger led = DepthWidthLedger::replay(quiet, 3);
  REQUIRE(led.width.size() == 6);
  for (int w : led.width) CHECK(w == 3);
  for (size_t t = 0; t < led.depth.size(); ++t) CHECK(led.depth[t] == static_cast<int>(t));

  const std::vector<LedgerStepEvent> bad{{0, 4}};
  CHECK_THROWS_AS(DepthWidthLedger::replay(bad, 3), std::runtime_error);
}

TEST_CASE("instrumented sampler runs replay consistently; DF is wider than AR") {
  ContractionOracle oracle(32, 0.5, 5);
  SamplerConfig cfg;
  cfg.r = 16;
  cfg.r_inner = 2;
  cfg.max_new_tokens = 20;
  const TokenSequence prompt = random_prompt(6, oracle.config().vocab_size, 5);

  const GenerationResult ar = generate_static_ar(oracle, prompt, cfg);
  const GenerationResult df = generate_diffusion_simple(oracle, prompt, cfg);
  check_ledger_against_passes(ar.ledger.passes(), Phase::generate);
  check_ledger_against_passes(df.ledger.passes(), Phase::generate);
  check_ledger_against_passes(ar.ledger.passes(), Phase::prefill);

  // AR width sits at 1 for every generate pass.
  for (const PassEvent& p : ar.ledger.passes()) {
    if (p.phase == Phase::generate) CHECK(p.width == 1);
  }

  // Equal serial budget inside both runs' steady state: same depth (one
  // block pass per step for both), strictly wider diffusion wavefront.
  const uint64_t budget = std::min(ar.ledger.forward_pass_count(Phase::generate),
                                   df.ledger.forward_pass_count(Phase::generate)) / 2;
  const int w_ar = width_at_pass(ar.ledger.passes(), Phase::generate, budget);
  const int w_df = width_at_pass(df.ledger.passes(), Phase::generate, budget);
  CHECK(w_ar == 1);
  CHECK(w_df > w_ar);
  CHECK(w_df == 8);  // ceil(16/2) steady state
}

TEST_CASE("mask enumeration matches the declared examples") {
  const WidthScalingMask ns = build_mask(WidthVariant::no_share, 2, 2);
  const WidthScalingMask kv = build_mask(WidthVariant::kv_share, 2, 2);
  // Keys visible to the second copy of the second token (0-based (1,1)).
  std::set<std::pair<int, int>> ns_keys, kv_keys;
  for (int ki = 0; ki < 2; ++ki)
    for (int kj = 0; kj < 2; ++kj) {
      if (ns.allowed(1, 1, ki, kj)) ns_keys.insert({ki, kj});
      if (kv.allowed(1, 1, ki, kj)) kv_keys.insert({ki, kj});
    }
  CHECK(ns_keys == std::set<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 0}});
  CHECK(kv_keys == std::set<std::pair<int, int>>{{0, 1}, {1, 0}});
}

TEST_CASE("mask pair counts: closed form == enumeration, causality, strict ordering") {
  for (int L = 1; L <= 8; ++L) {
    for (int s = 1; s <= 8; ++s) {
      for (WidthVariant v : {WidthVariant::no_share, WidthVariant::kv_share}) {
        const WidthScalingMask mask = build_mask(v, L, s);
        CHECK(mask_pair_count(v, L, s) == mask_pair_count_enumerated(mask));
        CHECK(mask_is_causal(mask));
      }
      const uint64_t ns = mask_pair_count(WidthVariant::no_share, L, s);
      const uint64_t kv = mask_pair_count(WidthVariant::kv_share, L, s);
      if (L >= 2 && s >= 2) CHECK(ns > kv);
      else CHECK(ns == kv);
    }
  }
  // Single token: only intra-token copy pairs.
  CHECK(mask_pair_count(WidthVariant::no_share, 1, 6) == 6 * 5 / 2);
  CHECK(mask_pair_count(WidthVariant::kv_share, 1, 6) == 6 * 5 / 2);
  // No replication: both variants collapse to the strictly-lower-triangular
  // causal relation over L.
  CHECK(mask_pair_count(WidthVariant::no_share, 7, 1) == 7 * 6 / 2);
  for (WidthVariant v : {WidthVariant::no_share, WidthVariant::kv_share}) {
    const WidthScalingMask flat = build_mask(v, 7, 1);
    for (int q = 0; q < 7; ++q)
      for (int k = 0; k < 7; ++k) CHECK(flat.allowed(q, 0, k, 0) == (k < q));
  }
}

TEST_CASE("prefill cost ordering and the s^2 attention gap") {
  const ModelDims dims{64, 24ull * 64 * 64 * 2};
  for (int L : {8, 16, 64, 256, 512}) {
    for (int s : {2, 4, 8}) {
      const double d = prefill_cost(PrefillArch::depth, L, s, dims).total();
      const double kv = prefill_cost(PrefillArch::width_kv_share, L, s, dims).total();
      const double ns = prefill_cost(PrefillArch::width_no_share, L, s, dims).total();
      CHECK(d <= kv);
      CHECK(kv < ns);
    }
    const double d1 = prefill_cost(PrefillArch::depth, L, 1, dims).total();
    const double kv1 = prefill_cost(PrefillArch::width_kv_share, L, 1, dims).total();
    const double ns1 = prefill_cost(PrefillArch::width_no_share, L, 1, dims).total();
    CHECK(d1 == kv1);
    CHECK(kv1 == ns1);
  }

  // Attention ratio no_share/depth grows like s^2 at fixed L: fit the
  // exponent between s=2 and s=8.
  const int L = 64;
  const double r2 = prefill_cost(PrefillArch::width_no_share, L, 2, dims).attention_flops /
                    prefill_cost(PrefillArch::depth, L, 2, dims).attention_flops;
  const double r8 = prefill_cost(PrefillArch::width_no_share, L, 8, dims).attention_flops /
                    prefill_cost(PrefillArch::depth, L, 8, dims).attention_flops;
  const double exponent = std::log(r8 / r2) / std::log(8.0 / 2.0);
  CHECK(exponent > 1.9);
  CHECK(exponent < 2.1);
}

TEST_CASE("parallelism profile: s^2 below saturation, flat above") {
  LatencyModel hw;
  hw.saturation_width = 512;
  const ParallelismReport below = parallelism_profile(128, 2, hw);
  CHECK(below.ratio == 4.0);
  CHECK_FALSE(below.saturated);
  const ParallelismReport above = parallelism_profile(512, 2, hw);
  CHECK(above.ratio == 1.0);
  CHECK(above.saturated);

  const std::vector<int> lengths{100, 600, 700, 100, 900};
  CHECK(prob_depth_wins(lengths, 512) == doctest::Approx(0.6));
}

TEST_CASE("replicated masked forward: same serial depth, width scaled by s") {
  Mat states(5, 16);
  for (size_t i = 0; i < states.data.size(); ++i) {
    states.data[i] = static_cast<float>((i * 37 % 11)) * 0.1f - 0.5f;
  }
  for (WidthVariant v : {WidthVariant::no_share, WidthVariant::kv_share}) {
    const MaskedForwardStats base = masked_replicated_forward(states, v, 1, 99);
    const MaskedForwardStats wide = masked_replicated_forward(states, v, 4, 99);
    CHECK(base.serial_passes == 1);
    CHECK(wide.serial_passes == base.serial_passes);  // depth unchanged
    CHECK(base.width == 5);
    CHECK(wide.width == 5 * 4);  // width scaled by s
    CHECK(wide.reduced.rows == 5);
    CHECK(wide.reduced.cols == 16);
    CHECK(wide.reduced.all_finite());
  }
}

TEST_CASE("contraction oracle: Lipschitz probe, fixed point, degenerate lambda") {
  ContractionOracle oracle(32, 0.5, 77);
  const TokenSequence toks{4, 9};
  const Conditioning e = oracle.prelude(toks);

  // ||R(z1) - R(z2)|| <= lambda ||z1 - z2|| over random probe pairs.
  for (uint64_t probe = 0; probe < 100; ++probe) {
    LatentBlock z1 = oracle.init_state(2, 1.0f, 0);
    LatentBlock z2 = oracle.init_state(2, 1.0f, 0);
    for (size_t i = 0; i < z2.z.data.size(); ++i) {
      z2.z.data[i] += normal_at(rng_key(probe, RngStream::probe, 3), i) * 0.7f;
    }
    double before = 0.0;
    for (int r = 0; r < 2; ++r) before += l2_dist(z1.z.row(r), z2.z.row(r), 32);
    oracle.recur_step(z1, e);
    oracle.recur_step(z2, e);
    double after = 0.0;
    for (int r = 0; r < 2; ++r) after += l2_dist(z1.z.row(r), z2.z.row(r), 32);
    CHECK(after <= oracle.lambda() * before * (1.0 + 1e-5));
  }

  // Iteration limit vs direct linear solve, within 1e-6 relative error.
  const Mat star = oracle.fixed_points(toks);
  LatentBlock z = oracle.init_state(2, 1.0f, 0);
  for (int k = 0; k < 80; ++k) oracle.recur_step(z, e);
  for (int r = 0; r < 2; ++r) {
    const double err = l2_dist(z.z.row(r), star.row(r), 32);
    const double scale = l2_norm(star.row(r), 32);
    CHECK(err / scale < 1e-6);
  }

  // lambda = 0 degenerates to a one-step solve: iterate 2 equals iterate 1.
  ContractionOracle flat(16, 0.0, 3);
  const Conditioning fe = flat.prelude({1});
  LatentBlock fz = flat.init_state(1, 1.0f, 0);
  flat.recur_step(fz, fe);
  const Mat once = fz.z;
  flat.recur_step(fz, fe);
  CHECK(fz.z.data == once.data);

  CHECK_THROWS_AS(ContractionOracle(16, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(ContractionOracle(16, -0.1, 1), std::invalid_argument);
}
