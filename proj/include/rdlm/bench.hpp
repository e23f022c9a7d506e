#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdlm/model.hpp"

namespace rdlm {

enum class PassKind { prelude, recurrent, coda };
enum class Phase { prefill, generate };

// One serial block forward pass. `width` is the number of positions the pass
// processed; entries/exits record wavefront changes since the previous pass
// and feed the depth/width ledger of the theory module.
struct PassEvent {
  PassKind kind;
  Phase phase;
  int width = 0;
  int entries = 0;
  int exits = 0;
};

// FLOP and pass accounting for one generation stream. FLOPs are charged per
// block pass at `width` positions from the model's cost profile; one
// recurrent-block pass on one token costs f_unit(). Attention score FLOPs are
// deliberately excluded here (the theory module prices attention separately).
class CostLedger {
 public:
  CostLedger() = default;
  explicit CostLedger(const CostProfile& profile) : profile_(profile) {}

  void add_pass(PassKind kind, Phase phase, int width, int entries = 0, int exits = 0);

  uint64_t f_unit() const { return profile_.f_unit(); }
  uint64_t flops_total(Phase phase) const;
  uint64_t flops_prelude(Phase phase) const;
  uint64_t flops_recurrent(Phase phase) const;
  uint64_t flops_coda(Phase phase) const;
  uint64_t forward_pass_count(Phase phase) const;
  const std::vector<PassEvent>& passes() const { return passes_; }
  const CostProfile& profile() const { return profile_; }

  int tokens_emitted = 0;
  double simulated_us = 0.0;  // filled in by simulate_time

 private:
  CostProfile profile_;
  std::vector<PassEvent> passes_;
  uint64_t flops_[2][3] = {{0, 0, 0}, {0, 0, 0}};  // [phase][kind]
  uint64_t pass_count_[2] = {0, 0};
};

// Memory-bound latency model: a forward pass costs a fixed overhead (weight
// streaming) plus a per-position term that stops growing at the device
// saturation width.
struct LatencyModel {
  double fixed_overhead_us = 1000.0;
  double per_token_us = 1.0;
  int saturation_width = 128;

  double pass_time_us(int width) const {
    const int w = width < saturation_width ? width : saturation_width;
    return fixed_overhead_us + per_token_us * w;
  }

  static LatencyModel from_file(const std::string& path);
  std::string to_text() const;
};

struct SimResult {
  double total_us = 0.0;
  double tokens_per_sec = 0.0;
  uint64_t passes = 0;
};

// Replays the pass log against a latency model; throughput counts generated
// tokens against generate-phase time.
SimResult simulate_time(const CostLedger& ledger, const LatencyModel& model,
                        Phase phase = Phase::generate);

// ---------------------------------------------------------------------------
// Trace: (step x position) grid of sampler behaviour plus per-step summaries.
// ---------------------------------------------------------------------------

struct TraceCell {
  int step = 0;
  int position = 0;  // token slot in the output sequence
  int token_id = 0;
  double delta = 0.0;
  bool frozen = false;
  int steps_at_position = 0;
};

struct TraceStep {
  int step = 0;
  int wavefront = 0;
  int frozen_this_step = 0;
  bool at_cap = false;
};

struct Trace {
  std::vector<TraceCell> cells;
  std::vector<TraceStep> steps;
  std::string config_snapshot;  // key=value lines
  uint64_t seed = 0;
  int wavefront_cap = 0;
};

// CSV schema: step,position,token_id,delta,frozen,steps_at_position
void export_trace_csv(const Trace& trace, const std::string& path);
Trace import_trace_csv(const std::string& path);
// Config snapshot and seed, written next to the CSV.
void export_trace_meta(const Trace& trace, const std::string& path);
// Rasterized heatmap (PPM): steps top-to-bottom, positions left-to-right,
// cell colour indexes the token id, frozen cells at full brightness.
void export_trace_ppm(const Trace& trace, const std::string& path);

// Throws std::logic_error if a frozen cell's token ever changes afterwards or
// a frozen flag is retracted.
void check_trace_invariants(const Trace& trace);

// A stall: consecutive steps pinned at the wavefront cap freezing nothing,
// resolved by a later step that freezes again.
struct StallEpisode {
  int start_step = 0;
  int length = 0;
};
std::vector<StallEpisode> detect_stalls(const Trace& trace);
// Derives per-step summaries from cells (used after CSV import, where only
// the cell grid survives).
std::vector<TraceStep> derive_steps(const std::vector<TraceCell>& cells, int wavefront_cap);

// Per-sampler comparison row; serialized by write_report_json.
struct SamplerReport {
  std::string name;
  double tokens_per_sec_sim = 0.0;
  double flops_per_token = 0.0;  // in units of f
  double match_rate = 0.0;       // exact-sequence match vs the static-AR reference
  double mean_wavefront = 0.0;
  double stall_fraction = 0.0;
};

void write_report_json(const std::vector<SamplerReport>& rows, const std::string& path);
std::string report_to_json(const std::vector<SamplerReport>& rows);

}  // namespace rdlm
