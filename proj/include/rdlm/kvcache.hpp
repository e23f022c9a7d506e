#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace rdlm {

struct KvPair {
  std::vector<float> k;
  std::vector<float> v;
};

// Per-layer, per-position key/value store for a single generation stream.
//
// depth_slots controls how recurrence depths share the cache:
//   depth_slots == 1: every recurrence overwrites the position's single slot,
//     so the cache size depends on sequence length only, never on how many
//     recurrences were executed.
//   depth_slots == k: write `step` lands in ring slot (step mod k). Attention
//     always reads the most recently written slot; the other slots exist for
//     memory accounting, which is what the sharing ablation measures.
//
// Positions below frozen_len are committed and immutable. Uncommitted
// positions (the active wavefront, plus speculative drafts) may be
// overwritten freely.
class SharedKVCache {
 public:
  SharedKVCache(int num_layers, int depth_slots, int max_positions);

  void write(int layer, int position, int step, const float* k, const float* v, int dim);
  // Positions [0, up_to_position) become read-only. Must not regress.
  void commit(int up_to_position);
  // Drop uncommitted entries at positions >= position (stale drafts after a
  // wavefront shrink or a rejected speculation round).
  void evict_beyond(int position);
  void reset();

  int frozen_len() const { return frozen_len_; }
  int num_layers() const { return num_layers_; }
  int depth_slots() const { return depth_slots_; }

  // Causal attention view: the most recent pair of every populated position
  // <= query_position, in position order.
  std::vector<std::pair<int, const KvPair*>> attend_view(int layer, int query_position) const;

  template <typename Fn>
  void for_attend_view(int layer, int query_position, Fn&& fn) const {
    const auto& lay = layers_[layer];
    const int last = std::min<int>(query_position, static_cast<int>(lay.size()) - 1);
    for (int pos = 0; pos <= last; ++pos) {
      const PosSlots& ps = lay[pos];
      if (ps.newest >= 0) fn(pos, ps.slots[ps.newest]);
    }
  }

  size_t stored_pairs(int layer) const;
  size_t stored_pairs_total() const;
  size_t bytes() const;

  // Debug dump: one CSV per call, rows of layer,position,slot,k_norm,v_norm.
  void dump_csv(const std::string& path) const;

 private:
  struct PosSlots {
    std::vector<KvPair> slots;
    int newest = -1;
  };

  int num_layers_;
  int depth_slots_;
  int max_positions_;
  int frozen_len_ = 0;
  std::vector<std::vector<PosSlots>> layers_;  // [layer][position]
};

}  // namespace rdlm
