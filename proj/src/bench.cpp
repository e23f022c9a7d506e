#include "rdlm/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rdlm/rng.hpp"
#include "rdlm/util.hpp"

namespace rdlm {

void CostLedger::add_pass(PassKind kind, Phase phase, int width, int entries, int exits) {
  if (width < 1) throw std::logic_error("ledger: pass width must be >= 1");
  passes_.push_back(PassEvent{kind, phase, width, entries, exits});
  int layers = 0;
  switch (kind) {
    case PassKind::prelude: layers = profile_.prelude_layers; break;
    case PassKind::recurrent: layers = profile_.recurrent_layers; break;
    case PassKind::coda: layers = profile_.coda_layers; break;
  }
  flops_[static_cast<int>(phase)][static_cast<int>(kind)] +=
      profile_.flops_per_layer_token * static_cast<uint64_t>(layers) * static_cast<uint64_t>(width);
  pass_count_[static_cast<int>(phase)] += 1;
}

uint64_t CostLedger::flops_prelude(Phase phase) const { return flops_[static_cast<int>(phase)][0]; }
uint64_t CostLedger::flops_recurrent(Phase phase) const { return flops_[static_cast<int>(phase)][1]; }
uint64_t CostLedger::flops_coda(Phase phase) const { return flops_[static_cast<int>(phase)][2]; }

uint64_t CostLedger::flops_total(Phase phase) const {
  return flops_prelude(phase) + flops_recurrent(phase) + flops_coda(phase);
}

uint64_t CostLedger::forward_pass_count(Phase phase) const {
  return pass_count_[static_cast<int>(phase)];
}

LatencyModel LatencyModel::from_file(const std::string& path) {
  const auto kv = parse_kv_file(path);
  LatencyModel m;
  for (const auto& [key, val] : kv) {
    if (key == "fixed_overhead_us") m.fixed_overhead_us = std::stod(val);
    else if (key == "per_token_us") m.per_token_us = std::stod(val);
    else if (key == "saturation_width") m.saturation_width = std::stoi(val);
    else throw std::runtime_error("profile: unknown key " + key);
  }
  if (m.fixed_overhead_us < 0 || m.per_token_us < 0 || m.saturation_width < 1) {
    throw std::runtime_error("profile: invalid values in " + path);
  }
  return m;
}

std::string LatencyModel::to_text() const {
  std::ostringstream ss;
  ss << "fixed_overhead_us=" << fixed_overhead_us << '\n'
     << "per_token_us=" << per_token_us << '\n'
     << "saturation_width=" << saturation_width << '\n';
  return ss.str();
}

SimResult simulate_time(const CostLedger& ledger, const LatencyModel& model, Phase phase) {
  SimResult r;
  for (const PassEvent& ev : ledger.passes()) {
    if (ev.phase != phase) continue;
    r.total_us += model.pass_time_us(ev.width);
    r.passes += 1;
  }
  if (r.total_us > 0.0) {
    r.tokens_per_sec = ledger.tokens_emitted / (r.total_us / 1e6);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

void export_trace_csv(const Trace& trace, const std::string& path) {
  check_trace_invariants(trace);  // frozen cells must still be immutable
  std::ofstream out(path);
  if (!out) throw std::runtime_error("trace export: cannot open " + path);
  out << "step,position,token_id,delta,frozen,steps_at_position\n";
  char buf[64];
  for (const TraceCell& c : trace.cells) {
    std::snprintf(buf, sizeof(buf), "%.9g", c.delta);
    out << c.step << ',' << c.position << ',' << c.token_id << ',' << buf << ','
        << (c.frozen ? 1 : 0) << ',' << c.steps_at_position << '\n';
  }
  if (!out) throw std::runtime_error("trace export: write failed for " + path);
}

Trace import_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("trace import: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "step,position,token_id,delta,frozen,steps_at_position") {
    throw std::runtime_error("trace import: unexpected header in " + path);
  }
  Trace t;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw std::runtime_error("trace import: malformed row: " + line);
    TraceCell c;
    c.step = std::stoi(f[0]);
    c.position = std::stoi(f[1]);
    c.token_id = std::stoi(f[2]);
    c.delta = std::stod(f[3]);
    c.frozen = std::stoi(f[4]) != 0;
    c.steps_at_position = std::stoi(f[5]);
    t.cells.push_back(c);
  }
  return t;
}

void export_trace_meta(const Trace& trace, const std::string& path) {
  std::ostringstream ss;
  ss << "seed=" << trace.seed << '\n';
  ss << "wavefront_cap=" << trace.wavefront_cap << '\n';
  ss << trace.config_snapshot;
  write_text_file(path, ss.str());
}

void export_trace_ppm(const Trace& trace, const std::string& path) {
  if (trace.cells.empty()) throw std::runtime_error("trace image: empty trace");
  int max_step = 0, max_pos = 0;
  for (const TraceCell& c : trace.cells) {
    max_step = std::max(max_step, c.step);
    max_pos = std::max(max_pos, c.position);
  }
  const int w = max_pos + 1;
  const int h = max_step + 1;
  std::vector<unsigned char> img(static_cast<size_t>(w) * h * 3, 16);
  for (const TraceCell& c : trace.cells) {
    const uint64_t k = splitmix64(static_cast<uint64_t>(c.token_id) + 0x1234);
    unsigned char r = static_cast<unsigned char>(64 + (k & 0x7f));
    unsigned char g = static_cast<unsigned char>(64 + ((k >> 8) & 0x7f));
    unsigned char b = static_cast<unsigned char>(64 + ((k >> 16) & 0x7f));
    if (c.frozen) {
      r = static_cast<unsigned char>(std::min(255, r + 96));
      g = static_cast<unsigned char>(std::min(255, g + 96));
      b = static_cast<unsigned char>(std::min(255, b + 96));
    }
    const size_t idx = (static_cast<size_t>(c.step) * w + c.position) * 3;
    img[idx] = r;
    img[idx + 1] = g;
    img[idx + 2] = b;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("trace image: cannot open " + path);
  out << "P6\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (!out) throw std::runtime_error("trace image: write failed for " + path);
}

void check_trace_invariants(const Trace& trace) {
  // Once a position is frozen its token id must never change and the flag
  // must never be retracted in later steps.
  struct Frozen { int step; int token; };
  std::vector<TraceCell> cells = trace.cells;
  std::stable_sort(cells.begin(), cells.end(), [](const TraceCell& a, const TraceCell& b) {
    return a.step < b.step;
  });
  std::map<int, Frozen> frozen;
  for (const TraceCell& c : cells) {
    auto it = frozen.find(c.position);
    if (it != frozen.end() && c.step >= it->second.step) {
      if (!c.frozen) {
        throw std::logic_error("trace: frozen flag retracted at position " +
                               std::to_string(c.position));
      }
      if (c.token_id != it->second.token) {
        throw std::logic_error("trace: frozen token changed at position " +
                               std::to_string(c.position));
      }
    }
    if (c.frozen && it == frozen.end()) {
      frozen[c.position] = Frozen{c.step, c.token_id};
    }
  }
}

std::vector<TraceStep> derive_steps(const std::vector<TraceCell>& cells, int wavefront_cap) {
  std::map<int, TraceStep> by_step;
  for (const TraceCell& c : cells) {
    TraceStep& s = by_step[c.step];
    s.step = c.step;
    if (c.frozen) {
      s.frozen_this_step += 1;
    } else {
      s.wavefront += 1;
    }
  }
  std::vector<TraceStep> out;
  out.reserve(by_step.size());
  for (auto& [step, s] : by_step) {
    s.at_cap = wavefront_cap > 0 && s.wavefront >= wavefront_cap;
    out.push_back(s);
  }
  return out;
}

std::vector<StallEpisode> detect_stalls(const Trace& trace) {
  const std::vector<TraceStep>& steps =
      trace.steps.empty() ? derive_steps(trace.cells, trace.wavefront_cap) : trace.steps;
  std::vector<StallEpisode> out;
  int run_start = -1;
  int run_len = 0;
  for (const TraceStep& s : steps) {
    if (s.at_cap && s.frozen_this_step == 0) {
      if (run_start < 0) run_start = s.step;
      ++run_len;
    } else {
      if (run_start >= 0 && s.frozen_this_step > 0) {
        out.push_back(StallEpisode{run_start, run_len});
      }
      if (!(s.at_cap && s.frozen_this_step == 0)) {
        run_start = -1;
        run_len = 0;
      }
    }
  }
  return out;
}

std::string report_to_json(const std::vector<SamplerReport>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const SamplerReport& r : rows) {
    arr.push_back({{"name", r.name},
                   {"tokens_per_sec_sim", r.tokens_per_sec_sim},
                   {"flops_per_token", r.flops_per_token},
                   {"match_rate", r.match_rate},
                   {"mean_wavefront", r.mean_wavefront},
                   {"stall_fraction", r.stall_fraction}});
  }
  return nlohmann::json{{"samplers", arr}}.dump(2);
}

void write_report_json(const std::vector<SamplerReport>& rows, const std::string& path) {
  write_text_file(path, report_to_json(rows) + "\n");
}

}  // namespace rdlm
