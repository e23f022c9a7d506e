#include "rdlm/kvcache.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "rdlm/tensor.hpp"

namespace rdlm {

SharedKVCache::SharedKVCache(int num_layers, int depth_slots, int max_positions)
    : num_layers_(num_layers), depth_slots_(depth_slots), max_positions_(max_positions) {
  if (num_layers < 1) throw std::invalid_argument("kvcache: num_layers must be >= 1");
  if (depth_slots < 1) throw std::invalid_argument("kvcache: depth_slots must be >= 1");
  if (max_positions < 1) throw std::invalid_argument("kvcache: max_positions must be >= 1");
  layers_.resize(num_layers_);
}

void SharedKVCache::write(int layer, int position, int step, const float* k, const float* v, int dim) {
  if (layer < 0 || layer >= num_layers_) throw std::logic_error("kvcache: layer out of range");
  if (position < 0 || position >= max_positions_) throw std::logic_error("kvcache: position out of range");
  if (position < frozen_len_) {
    throw std::logic_error("kvcache: write to frozen position " + std::to_string(position));
  }
  auto& lay = layers_[layer];
  if (static_cast<int>(lay.size()) <= position) lay.resize(position + 1);
  PosSlots& ps = lay[position];
  const int slot = depth_slots_ == 1 ? 0 : step % depth_slots_;
  if (static_cast<int>(ps.slots.size()) <= slot) ps.slots.resize(slot + 1);
  ps.slots[slot].k.assign(k, k + dim);
  ps.slots[slot].v.assign(v, v + dim);
  ps.newest = slot;
}

void SharedKVCache::commit(int up_to_position) {
  if (up_to_position < frozen_len_) {
    throw std::logic_error("kvcache: commit would regress frozen_len");
  }
  frozen_len_ = up_to_position;
}

void SharedKVCache::evict_beyond(int position) {
  const int from = std::max(position, frozen_len_);
  for (auto& lay : layers_) {
    for (int pos = from; pos < static_cast<int>(lay.size()); ++pos) {
      lay[pos].slots.clear();
      lay[pos].newest = -1;
    }
  }
}

void SharedKVCache::reset() {
  frozen_len_ = 0;
  for (auto& lay : layers_) lay.clear();
}

std::vector<std::pair<int, const KvPair*>> SharedKVCache::attend_view(int layer, int query_position) const {
  std::vector<std::pair<int, const KvPair*>> out;
  for_attend_view(layer, query_position, [&](int pos, const KvPair& p) { out.emplace_back(pos, &p); });
  return out;
}

size_t SharedKVCache::stored_pairs(int layer) const {
  size_t n = 0;
  for (const PosSlots& ps : layers_[layer]) {
    for (const KvPair& p : ps.slots) {
      if (!p.k.empty()) ++n;
    }
  }
  return n;
}

size_t SharedKVCache::stored_pairs_total() const {
  size_t n = 0;
  for (int l = 0; l < num_layers_; ++l) n += stored_pairs(l);
  return n;
}

size_t SharedKVCache::bytes() const {
  size_t b = 0;
  for (const auto& lay : layers_) {
    for (const PosSlots& ps : lay) {
      for (const KvPair& p : ps.slots) {
        b += (p.k.size() + p.v.size()) * sizeof(float);
      }
    }
  }
  return b;
}

void SharedKVCache::dump_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("kvcache dump: cannot open " + path);
  out << "layer,position,slot,k_norm,v_norm\n";
  for (int l = 0; l < num_layers_; ++l) {
    const auto& lay = layers_[l];
    for (int pos = 0; pos < static_cast<int>(lay.size()); ++pos) {
      const PosSlots& ps = lay[pos];
      for (int s = 0; s < static_cast<int>(ps.slots.size()); ++s) {
        const KvPair& p = ps.slots[s];
        if (p.k.empty()) continue;
        out << l << ',' << pos << ',' << s << ','
            << l2_norm(p.k.data(), static_cast<int>(p.k.size())) << ','
            << l2_norm(p.v.data(), static_cast<int>(p.v.size())) << '\n';
      }
    }
  }
  if (!out) throw std::runtime_error("kvcache dump: write failed for " + path);
}

}  // namespace rdlm
