#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdio>

#include "rdlm/model.hpp"
#include "rdlm/rng.hpp"
#include "rdlm/samplers.hpp"
#include "rdlm/sampling.hpp"
#include "rdlm/theory.hpp"

using namespace rdlm;

namespace {

ModelConfig tiny_config(uint64_t seed = 11) {
  ModelConfig cfg;
  cfg.seed = seed;
  cfg.max_seq_len = 96;
  return cfg;
}

bool rows_equal(const Mat& a, const Mat& b, int row) {
  for (int d = 0; d < a.cols; ++d) {
    if (a.at(row, d) != b.at(row, d)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("config invariants are enforced") {
  ModelConfig cfg = tiny_config();
  cfg.recurrent_layers = 0;
  CHECK_THROWS_AS(ToyTransformer{cfg}, std::invalid_argument);
  cfg = tiny_config();
  cfg.num_heads = 3;  // does not divide 64
  CHECK_THROWS_AS(ToyTransformer{cfg}, std::invalid_argument);
}

TEST_CASE("prelude shape, determinism and causality") {
  ToyTransformer model(tiny_config());
  const TokenSequence prompt{5, 9, 13, 2, 40};
  const Conditioning e1 = model.prelude(prompt);
  CHECK(e1.rows == 5);
  CHECK(e1.cols == 64);
  const Conditioning e2 = model.prelude(prompt);
  CHECK(e1.data == e2.data);  // bit-for-bit

  // [a, b] vs [a, c]: the first row cannot see the change.
  const Conditioning ab = model.prelude({7, 8});
  const Conditioning ac = model.prelude({7, 9});
  CHECK(rows_equal(ab, ac, 0));
  CHECK_FALSE(rows_equal(ab, ac, 1));

  CHECK_THROWS_AS(model.prelude({300}), std::invalid_argument);  // id out of range
  CHECK_THROWS_AS(model.prelude({}), std::invalid_argument);
}

TEST_CASE("init_state: zero scale, reproducibility, spread") {
  ToyTransformer model(tiny_config());
  const LatentBlock zero = model.init_state(3, 0.0f, 0);
  for (float v : zero.z.data) CHECK(v == 0.0f);

  const LatentBlock a = model.init_state(2, 1.0f, 4);
  const LatentBlock b = model.init_state(2, 1.0f, 4);
  CHECK(a.z.data == b.z.data);

  // Empirical stddev of one h-sized row within 3/sqrt(h) relative of sigma.
  const LatentBlock one = model.init_state(1, 1.0f, 0);
  double ss = 0.0;
  for (float v : one.z.data) ss += static_cast<double>(v) * v;
  const double sd = std::sqrt(ss / one.z.cols);
  const double sigma = model.config().init_sigma;
  CHECK(std::abs(sd - sigma) / sigma < 3.0 / std::sqrt(static_cast<double>(one.z.cols)));
}

TEST_CASE("recur_step: injection every call, causality over rows, shape checks") {
  ToyTransformer model(tiny_config());
  const TokenSequence toks{1, 2, 3, 4};
  Conditioning e = model.prelude_rows(toks, 0);
  LatentBlock z = model.init_state(4, 1.0f, 0);

  // Perturbing e at row 2 after a few recurrences changes later iterates for
  // rows >= 2 and leaves rows < 2 untouched.
  LatentBlock z_ref = z;
  model.reset_stream();
  Conditioning e_ref = model.prelude_rows(toks, 0);
  for (int k = 0; k < 3; ++k) model.recur_step(z_ref, e_ref);
  Conditioning e_pert = e_ref;
  e_pert.at(2, 0) += 0.25f;
  LatentBlock z_a = z_ref, z_b = z_ref;
  model.recur_step(z_a, e_ref);
  // Stale wavefront KV from the z_a pass gets overwritten by the z_b pass at
  // the same positions, so the comparison is clean.
  model.recur_step(z_b, e_pert);
  CHECK(rows_equal(z_a.z, z_b.z, 0));
  CHECK(rows_equal(z_a.z, z_b.z, 1));
  CHECK_FALSE(rows_equal(z_a.z, z_b.z, 2));
  CHECK_FALSE(rows_equal(z_a.z, z_b.z, 3));

  Conditioning short_e(2, 64);
  CHECK_THROWS_AS(model.recur_step(z, short_e), std::logic_error);
}

TEST_CASE("iterates keep contracting on the synthetic contraction model") {
  ContractionOracle oracle(32, 0.6, 3);
  const TokenSequence toks{1, 2, 3};
  const Conditioning e = oracle.prelude(toks);
  LatentBlock z = oracle.init_state(3, 1.0f, 0);
  Mat prev = z.z;
  double last_diff = -1.0;
  for (int k = 0; k < 12; ++k) {
    oracle.recur_step(z, e);
    double diff = 0.0;
    for (int i = 0; i < z.rows(); ++i) diff += l2_dist(z.z.row(i), prev.row(i), z.z.cols);
    if (last_diff >= 0.0) CHECK(diff < last_diff);
    last_diff = diff;
    prev = z.z;
  }
}

TEST_CASE("coda: shape, determinism, stress finiteness") {
  ToyTransformer model(tiny_config());
  LatentBlock z = model.init_state(1, 1.0f, 0);
  const Logits l1 = model.coda(z);
  CHECK(l1.rows == 1);
  CHECK(l1.cols == model.config().vocab_size);
  const Logits l2 = model.coda(z);
  CHECK(l1.data == l2.data);

  for (int d = 0; d < z.z.cols; ++d) z.z.at(0, d) = (d % 2 ? 1.0f : -1.0f) * 1000.0f;
  const Logits stressed = model.coda(z);
  CHECK(stressed.all_finite());
}

TEST_CASE("prefill populates each layer exactly once per position at r=1") {
  // A deep slot ring exposes double-writes: one write per layer leaves one
  // occupied slot per (layer, position).
  ToyTransformer model(tiny_config(), /*cache_depth_slots=*/8);
  const TokenSequence prompt{3, 1, 4, 1, 5};
  prefill(model, prompt, 1, 1.0f);
  const SharedKVCache* cache = model.cache();
  REQUIRE(cache != nullptr);
  for (int layer = 0; layer < model.config().total_layers(); ++layer) {
    CHECK(cache->stored_pairs(layer) == prompt.size());
  }
  CHECK(cache->frozen_len() == static_cast<int>(prompt.size()) - 1);
}

TEST_CASE("prefill rejects bad prompts") {
  ToyTransformer model(tiny_config());
  CHECK_THROWS_AS(prefill(model, {}, 4, 1.0f), std::invalid_argument);
  const TokenSequence long_prompt(model.config().max_seq_len + 1, 1);
  CHECK_THROWS_AS(prefill(model, long_prompt, 4, 1.0f), std::invalid_argument);
}

TEST_CASE("prefill handoff: hand-rolled continuation equals the one-shot sampler") {
  ToyTransformer model(tiny_config());
  const TokenSequence prompt{9, 2, 31, 7};
  SamplerConfig cfg;
  cfg.r = 6;
  cfg.max_new_tokens = 8;
  const GenerationResult oneshot = generate_static_ar(model, prompt, cfg);

  // Independent re-implementation of the static-AR cycle on top of prefill.
  prefill(model, prompt, cfg.r, cfg.alpha);
  TokenSequence y = prompt;
  for (int n = 0; n < cfg.max_new_tokens; ++n) {
    const int pos = static_cast<int>(y.size()) - 1;
    const Conditioning e = model.prelude_rows(y, pos);
    LatentBlock z = model.init_state(1, cfg.alpha, pos);
    for (int k = 0; k < cfg.r; ++k) model.recur_step(z, e);
    const Logits logits = model.coda(z);
    y.push_back(greedy_argmax(logits.row(0), logits.cols));
    model.commit_through(static_cast<int>(y.size()) - 1);
  }
  CHECK(y == oneshot.output);
}

TEST_CASE("checkpoint round-trips bit-exactly and validates its header") {
  ModelConfig cfg = tiny_config(77);
  cfg.init_sigma = 0.625f;
  ToyTransformer model(cfg);
  const std::string path = "/tmp/rdlm_test_ckpt.bin";
  model.save_checkpoint(path);
  const auto loaded = ToyTransformer::load_checkpoint(path);
  CHECK(loaded->config().init_sigma == cfg.init_sigma);
  CHECK(loaded->config().seed == cfg.seed);

  const TokenSequence prompt{1, 2, 3};
  const Conditioning e1 = model.prelude(prompt);
  const Conditioning e2 = loaded->prelude(prompt);
  CHECK(e1.data == e2.data);

  // Corrupt the magic line.
  std::string payload;
  {
    FILE* f = std::fopen(path.c_str(), "rb");
    REQUIRE(f != nullptr);
    char c;
    while (std::fread(&c, 1, 1, f) == 1) payload.push_back(c);
    std::fclose(f);
  }
  payload[0] = 'X';
  {
    FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    std::fwrite(payload.data(), 1, payload.size(), f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(ToyTransformer::load_checkpoint(path), std::runtime_error);
}
