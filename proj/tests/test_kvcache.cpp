#include <doctest.h>

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdlm/kvcache.hpp"

using namespace rdlm;

namespace {

std::vector<float> vec(float a, float b) { return {a, b}; }

void write_pair(SharedKVCache& c, int layer, int pos, int step, float tag) {
  const auto k = vec(tag, tag + 1);
  const auto v = vec(-tag, -tag - 1);
  c.write(layer, pos, step, k.data(), v.data(), 2);
}

}  // namespace

TEST_CASE("depth_slots=1 overwrites a single slot") {
  SharedKVCache c(1, 1, 16);
  for (int step = 0; step < 10; ++step) write_pair(c, 0, 3, step, static_cast<float>(step));
  CHECK(c.stored_pairs(0) == 1);
  const auto view = c.attend_view(0, 3);
  REQUIRE(view.size() == 1);
  CHECK(view[0].second->k[0] == doctest::Approx(9.0f));  // most recent write wins
}

TEST_CASE("depth_slots=4 keeps a ring of four") {
  SharedKVCache c(1, 4, 16);
  for (int step = 0; step < 10; ++step) write_pair(c, 0, 3, step, static_cast<float>(step));
  CHECK(c.stored_pairs(0) == 4);
  const auto view = c.attend_view(0, 3);
  REQUIRE(view.size() == 1);  // attention still reads one pair per position
  CHECK(view[0].second->k[0] == doctest::Approx(9.0f));
}

TEST_CASE("frozen positions reject writes, commits never regress") {
  SharedKVCache c(2, 1, 16);
  write_pair(c, 0, 0, 0, 1.0f);
  write_pair(c, 0, 1, 0, 2.0f);
  c.commit(2);
  CHECK_THROWS_AS(write_pair(c, 0, 1, 1, 9.0f), std::logic_error);
  CHECK_THROWS_AS(c.commit(1), std::logic_error);
  CHECK_NOTHROW(c.commit(2));  // idempotent
  CHECK(c.frozen_len() == 2);
  write_pair(c, 0, 2, 0, 3.0f);  // past the frozen prefix is fine
}

TEST_CASE("attend_view is causal and grows with the query position") {
  SharedKVCache c(1, 1, 16);
  CHECK(c.attend_view(0, 0).empty());  // fresh stream
  for (int pos = 0; pos < 6; ++pos) write_pair(c, 0, pos, 0, static_cast<float>(pos));
  c.commit(4);
  CHECK(c.attend_view(0, 4).size() == 5);
  size_t prev = 0;
  for (int q = 0; q < 6; ++q) {
    const auto view = c.attend_view(0, q);
    CHECK(view.size() == static_cast<size_t>(q) + 1);
    CHECK(view.size() > prev);
    for (size_t i = 0; i < view.size(); ++i) CHECK(view[i].first == static_cast<int>(i));
    prev = view.size();
  }
}

TEST_CASE("replay determinism: identical op sequences give identical views") {
  SharedKVCache a(2, 2, 16), b(2, 2, 16);
  for (SharedKVCache* c : {&a, &b}) {
    for (int pos = 0; pos < 5; ++pos)
      for (int step = 0; step < 3; ++step)
        write_pair(*c, pos % 2, pos, step, static_cast<float>(pos * 10 + step));
    c->commit(3);
  }
  for (int layer = 0; layer < 2; ++layer) {
    const auto va = a.attend_view(layer, 4);
    const auto vb = b.attend_view(layer, 4);
    REQUIRE(va.size() == vb.size());
    for (size_t i = 0; i < va.size(); ++i) {
      CHECK(va[i].first == vb[i].first);
      CHECK(va[i].second->k == vb[i].second->k);
      CHECK(va[i].second->v == vb[i].second->v);
    }
  }
}

TEST_CASE("committed prefix footprint stays put over a long run") {
  SharedKVCache c(3, 1, 256);
  const int k = 10;
  for (int layer = 0; layer < 3; ++layer)
    for (int pos = 0; pos < k; ++pos) write_pair(c, layer, pos, 0, 1.0f);
  c.commit(k);
  const size_t prefix_bytes = c.bytes();
  // 200 steps of wavefront churn past the prefix.
  for (int step = 0; step < 200; ++step) {
    for (int layer = 0; layer < 3; ++layer)
      for (int pos = k; pos < k + 4; ++pos) write_pair(c, layer, pos, step, 2.0f);
  }
  for (int layer = 0; layer < 3; ++layer) {
    size_t prefix_pairs = 0;
    for (const auto& [pos, pair] : c.attend_view(layer, k - 1)) {
      (void)pair;
      if (pos < k) ++prefix_pairs;
    }
    CHECK(prefix_pairs == static_cast<size_t>(k));
  }
  // Total = prefix + wavefront, independent of how many steps ran.
  CHECK(c.bytes() == prefix_bytes + 3 * 4 * 2 * 2 * sizeof(float));
}

TEST_CASE("debug dump lists one row per stored pair") {
  SharedKVCache c(2, 2, 8);
  write_pair(c, 0, 0, 0, 1.0f);
  write_pair(c, 0, 0, 1, 2.0f);
  write_pair(c, 1, 1, 0, 3.0f);
  const std::string path = "/tmp/rdlm_kv_dump.csv";
  c.dump_csv(path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  int rows = 0;
  std::getline(in, line);
  CHECK(line == "layer,position,slot,k_norm,v_norm");
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("eviction drops stale uncommitted tails only") {
  SharedKVCache c(1, 1, 32);
  for (int pos = 0; pos < 8; ++pos) write_pair(c, 0, pos, 0, 1.0f);
  c.commit(4);
  c.evict_beyond(6);
  CHECK(c.stored_pairs(0) == 6);
  c.evict_beyond(0);  // clamped to the frozen prefix
  CHECK(c.stored_pairs(0) == 4);
}
