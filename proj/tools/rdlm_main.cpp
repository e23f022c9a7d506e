// rdlm: desk-scale inference engine for recurrent-depth language models.
// Subcommands: generate | sweep | theory | make-model

#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rdlm/bench.hpp"
#include "rdlm/model.hpp"
#include "rdlm/report.hpp"
#include "rdlm/rng.hpp"
#include "rdlm/samplers.hpp"
#include "rdlm/theory.hpp"
#include "rdlm/util.hpp"

namespace {

using namespace rdlm;

struct ModelOpts {
  std::string checkpoint;
  std::string kind = "toy";  // toy | oracle
  double lambda = 0.5;
  int vocab = 256;
  int hidden = 64;
  int heads = 2;
  int prelude_layers = 1;
  int recurrent_layers = 2;
  int coda_layers = 1;
  double sigma = 1.0;
  int max_seq = 512;
  uint64_t model_seed = 0;
  int depth_slots = 1;
};

void add_model_options(CLI::App* cmd, ModelOpts& m) {
  cmd->add_option("--checkpoint", m.checkpoint, "load a toy-model checkpoint file");
  cmd->add_option("--model", m.kind, "model kind: toy|oracle")->check(CLI::IsMember({"toy", "oracle"}));
  cmd->add_option("--lambda", m.lambda, "contraction factor for --model oracle");
  cmd->add_option("--vocab", m.vocab, "vocabulary size");
  cmd->add_option("--hidden", m.hidden, "hidden dimension");
  cmd->add_option("--heads", m.heads, "attention heads");
  cmd->add_option("--prelude-layers", m.prelude_layers, "prelude layer count");
  cmd->add_option("--recurrent-layers", m.recurrent_layers, "recurrent layer count");
  cmd->add_option("--coda-layers", m.coda_layers, "coda layer count");
  cmd->add_option("--sigma", m.sigma, "state init stddev");
  cmd->add_option("--max-seq", m.max_seq, "maximum sequence length");
  cmd->add_option("--model-seed", m.model_seed, "weight init seed");
  cmd->add_option("--depth-slots", m.depth_slots, "KV slots per position (1 = full sharing)");
}

ModelConfig toy_config(const ModelOpts& m) {
  ModelConfig cfg;
  cfg.vocab_size = m.vocab;
  cfg.hidden_dim = m.hidden;
  cfg.num_heads = m.heads;
  cfg.prelude_layers = m.prelude_layers;
  cfg.recurrent_layers = m.recurrent_layers;
  cfg.coda_layers = m.coda_layers;
  cfg.init_sigma = static_cast<float>(m.sigma);
  cfg.max_seq_len = m.max_seq;
  cfg.seed = m.model_seed;
  return cfg;
}

std::unique_ptr<RecurrentModel> build_model(const ModelOpts& m) {
  if (!m.checkpoint.empty()) return ToyTransformer::load_checkpoint(m.checkpoint, m.depth_slots);
  if (m.kind == "oracle") {
    return std::make_unique<ContractionOracle>(m.hidden, m.lambda, m.model_seed, m.vocab, m.max_seq);
  }
  return std::make_unique<ToyTransformer>(toy_config(m), m.depth_slots);
}

struct SamplerOpts {
  std::string sampler = "df-adaptive";
  SamplerConfig cfg;
  int draft_len = 4;
  int draft_r = 4;
  std::string headway_fill = "random";
};

void add_sampler_options(CLI::App* cmd, SamplerOpts& s) {
  cmd->add_option("--sampler", s.sampler, "static|adaptive|speculative|df-simple|df-adaptive");
  cmd->add_option("--r", s.cfg.r, "total recurrences per token");
  cmd->add_option("--r-inner", s.cfg.r_inner, "inner recurrences per sampler step");
  cmd->add_option("--epsilon", s.cfg.epsilon, "freeze threshold on the latent distance");
  cmd->add_option("--beta-max", s.cfg.beta_max, "peak of the linear noise ramp");
  cmd->add_option("--eta", s.cfg.eta, "conditioning momentum");
  cmd->add_option("--alpha", s.cfg.alpha, "state init scale");
  cmd->add_option("--wavefront", s.cfg.wavefront_max, "maximum wavefront size");
  cmd->add_option("--headway", s.cfg.headway, "positions appended per step");
  cmd->add_option("--headway-fill", s.headway_fill, "random|pad")
      ->check(CLI::IsMember({"random", "pad"}));
  cmd->add_option("--pad-token", s.cfg.pad_token, "pad filler token id");
  cmd->add_flag("--continuous-compute", s.cfg.continuous_compute,
                "initialize appended states from the previous position");
  cmd->add_option("--temperature", s.cfg.temperature, "sampling temperature (0 = greedy)");
  cmd->add_option("--top-p", s.cfg.top_p, "nucleus truncation");
  cmd->add_option("--max-new-tokens", s.cfg.max_new_tokens, "tokens to generate");
  cmd->add_option("--max-steps", s.cfg.max_steps, "sampler step budget");
  cmd->add_option("--stop-token", s.cfg.stop_token, "stop once this id freezes (-1 disables)");
  cmd->add_option("--seed", s.cfg.seed, "run seed");
  cmd->add_option("--draft-len", s.draft_len, "speculative draft length");
  cmd->add_option("--draft-r", s.draft_r, "speculative draft recurrences");
}

SamplerConfig resolve_sampler_cfg(SamplerOpts& s) {
  s.cfg.headway_fill = s.headway_fill == "pad" ? HeadwayFill::pad_token : HeadwayFill::random_token;
  s.cfg.validate();
  return s.cfg;
}

TokenSequence parse_token_csv(const std::string& text) {
  TokenSequence out;
  for (const std::string& part : split(text, ',')) {
    const std::string t = trim(part);
    if (t.empty()) continue;
    out.push_back(std::stoi(t));
  }
  return out;
}

struct PromptOpts {
  std::string inline_ids;
  std::string file;
  int random_len = 0;
};

void add_prompt_options(CLI::App* cmd, PromptOpts& p) {
  cmd->add_option("--prompt", p.inline_ids, "inline prompt as comma-separated token ids");
  cmd->add_option("--prompt-file", p.file, "file with one comma-separated prompt per line");
  cmd->add_option("--random-prompt", p.random_len, "random prompt of this length (uses --seed)");
}

std::vector<TokenSequence> resolve_prompts(const PromptOpts& p, int vocab, uint64_t seed,
                                           int how_many) {
  const int sources = (!p.inline_ids.empty() ? 1 : 0) + (!p.file.empty() ? 1 : 0) +
                      (p.random_len > 0 ? 1 : 0);
  if (sources != 1) {
    throw CLI::ValidationError("prompt", "exactly one of --prompt/--prompt-file/--random-prompt is required");
  }
  std::vector<TokenSequence> prompts;
  if (!p.inline_ids.empty()) {
    prompts.push_back(parse_token_csv(p.inline_ids));
  } else if (!p.file.empty()) {
    std::istringstream in(read_text_file(p.file));
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.empty() || line[0] == '#') continue;
      prompts.push_back(parse_token_csv(line));
    }
    if (prompts.empty()) throw CLI::ValidationError("prompt", "prompt file holds no prompts");
  } else {
    for (int i = 0; i < how_many; ++i) {
      prompts.push_back(random_prompt(p.random_len, vocab, seed, static_cast<uint64_t>(i)));
    }
  }
  for (const TokenSequence& t : prompts) {
    if (t.empty()) throw CLI::ValidationError("prompt", "empty prompt");
    for (int id : t) {
      if (id < 0 || id >= vocab) throw CLI::ValidationError("prompt", "token id out of vocabulary");
    }
  }
  return prompts;
}

LatencyModel resolve_profile(const std::string& path) {
  if (!path.empty()) return LatencyModel::from_file(path);
  return LatencyModel{};
}

std::string tokens_to_text(const TokenSequence& t) {
  std::ostringstream ss;
  for (size_t i = 0; i < t.size(); ++i) {
    if (i) ss << ' ';
    ss << t[i];
  }
  ss << '\n';
  return ss.str();
}

std::string snapshot_text(const ModelOpts& m, const SamplerOpts& s, const TokenSequence& prompt) {
  std::ostringstream ss;
  ss << "[generate]\n";
  ss << "sampler=" << s.sampler << '\n';
  if (!m.checkpoint.empty()) {
    ss << "checkpoint=" << m.checkpoint << '\n';
  } else {
    ss << "model=" << m.kind << '\n';
    if (m.kind == "oracle") ss << "lambda=" << m.lambda << '\n';
    ss << "vocab=" << m.vocab << "\nhidden=" << m.hidden << "\nheads=" << m.heads
       << "\nprelude-layers=" << m.prelude_layers << "\nrecurrent-layers=" << m.recurrent_layers
       << "\ncoda-layers=" << m.coda_layers << "\nsigma=" << m.sigma << "\nmax-seq=" << m.max_seq
       << "\nmodel-seed=" << m.model_seed << '\n';
  }
  ss << "depth-slots=" << m.depth_slots << '\n';
  std::ostringstream ids;
  for (size_t i = 0; i < prompt.size(); ++i) {
    if (i) ids << ',';
    ids << prompt[i];
  }
  ss << "prompt=\"" << ids.str() << "\"\n";  // quoted: commas are not an array here
  ss << "r=" << s.cfg.r << "\nr-inner=" << s.cfg.r_inner << "\nepsilon=" << s.cfg.epsilon
     << "\nbeta-max=" << s.cfg.beta_max << "\neta=" << s.cfg.eta << "\nalpha=" << s.cfg.alpha
     << "\nwavefront=" << s.cfg.wavefront_max << "\nheadway=" << s.cfg.headway
     << "\nheadway-fill=" << s.headway_fill << "\npad-token=" << s.cfg.pad_token
     << "\ntemperature=" << s.cfg.temperature << "\ntop-p=" << s.cfg.top_p
     << "\nmax-new-tokens=" << s.cfg.max_new_tokens << "\nmax-steps=" << s.cfg.max_steps
     << "\nstop-token=" << s.cfg.stop_token << "\nseed=" << s.cfg.seed
     << "\ndraft-len=" << s.draft_len << "\ndraft-r=" << s.draft_r << '\n';
  if (s.cfg.continuous_compute) ss << "continuous-compute=true\n";
  return ss.str();
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

int cmd_generate(const ModelOpts& m_in, SamplerOpts& s, const PromptOpts& p,
                 const std::string& profile_path, const std::string& tokens_out,
                 const std::string& trace_out, const std::string& trace_image,
                 const std::string& report_out, const std::string& snapshot_out,
                 const std::string& vocab_map, const std::string& cache_dump) {
  const SamplerConfig cfg = resolve_sampler_cfg(s);  // flag validation before model load
  const std::string key = sampler_name(s.sampler);
  const int vocab = m_in.checkpoint.empty() ? m_in.vocab : 1 << 30;  // checked after load
  std::vector<TokenSequence> prompts = resolve_prompts(p, vocab, cfg.seed, 1);
  const TokenSequence prompt = prompts.front();

  auto model = build_model(m_in);
  for (int id : prompt) {
    if (id >= model->config().vocab_size) {
      throw CLI::ValidationError("prompt", "token id out of the model's vocabulary");
    }
  }

  const LatencyModel latency = resolve_profile(profile_path);
  GenerationResult res = run_sampler(key, *model, prompt, cfg, s.draft_len, s.draft_r);
  const SimResult sim = simulate_time(res.ledger, latency, Phase::generate);

  std::cout << tokens_to_text(res.output);
  if (!vocab_map.empty()) {
    std::map<int, std::string> words;
    std::istringstream in(read_text_file(vocab_map));
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      int id;
      std::string w;
      if (ls >> id >> w) words[id] = w;
    }
    std::ostringstream text;
    for (int id : res.output) text << (words.count(id) ? words[id] : "?") << ' ';
    std::cout << text.str() << '\n';
  }
  std::cerr << "sampler=" << key << " new_tokens=" << res.new_tokens
            << " stop=" << res.stop_reason << (res.partial ? " (partial)" : "")
            << " flops_f=" << static_cast<double>(res.ledger.flops_total(Phase::generate)) /
                                  res.ledger.f_unit()
            << " tok_per_sec_sim=" << sim.tokens_per_sec << '\n';

  if (!tokens_out.empty()) write_text_file(tokens_out, tokens_to_text(res.output));
  if (!trace_out.empty()) {
    export_trace_csv(res.trace, trace_out);
    export_trace_meta(res.trace, trace_out + ".meta");
  }
  if (!trace_image.empty()) export_trace_ppm(res.trace, trace_image);
  if (!report_out.empty()) {
    nlohmann::json j;
    j["sampler"] = key;
    j["new_tokens"] = res.new_tokens;
    j["partial"] = res.partial;
    j["stop_reason"] = res.stop_reason;
    j["f_unit"] = res.ledger.f_unit();
    j["flops_generate"] = res.ledger.flops_total(Phase::generate);
    j["flops_prefill"] = res.ledger.flops_total(Phase::prefill);
    j["forward_passes"] = res.ledger.forward_pass_count(Phase::generate);
    j["simulated_us"] = sim.total_us;
    j["tokens_per_sec_sim"] = sim.tokens_per_sec;
    write_text_file(report_out, j.dump(2) + "\n");
  }
  if (!snapshot_out.empty()) write_text_file(snapshot_out, snapshot_text(m_in, s, prompt));
  if (!cache_dump.empty()) {
    if (model->cache() == nullptr) {
      std::cerr << "warning: this model kind has no KV cache to dump\n";
    } else {
      model->cache()->dump_csv(cache_dump);
    }
  }
  return res.partial ? 2 : 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

void apply_grid_value(SamplerConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "r") cfg.r = std::stoi(value);
  else if (key == "r_inner") cfg.r_inner = std::stoi(value);
  else if (key == "epsilon") cfg.epsilon = std::stof(value);
  else if (key == "beta_max") cfg.beta_max = std::stof(value);
  else if (key == "eta") cfg.eta = std::stof(value);
  else if (key == "alpha") cfg.alpha = std::stof(value);
  else if (key == "wavefront") cfg.wavefront_max = std::stoi(value);
  else if (key == "headway") cfg.headway = std::stoi(value);
  else if (key == "temperature") cfg.temperature = std::stof(value);
  else throw CLI::ValidationError("grid", "unknown grid key: " + key);
}

int cmd_sweep(const ModelOpts& m_in, SamplerOpts& s, const PromptOpts& p,
              const std::vector<std::string>& grid_specs, const std::vector<std::string>& samplers,
              int num_prompts, const std::string& profile_path, const std::string& out_path) {
  const SamplerConfig base_cfg = resolve_sampler_cfg(s);
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;
  for (const std::string& spec : grid_specs) {
    const size_t eq = spec.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("grid", "expected key=v1,v2,...");
    std::vector<std::string> values;
    for (const std::string& v : split(spec.substr(eq + 1), ',')) values.push_back(trim(v));
    if (values.empty()) throw CLI::ValidationError("grid", "empty grid axis");
    grid.emplace_back(trim(spec.substr(0, eq)), values);
  }
  if (grid.empty()) grid.emplace_back("r_inner", std::vector<std::string>{std::to_string(base_cfg.r_inner)});

  auto model = build_model(m_in);
  const std::vector<TokenSequence> prompts =
      resolve_prompts(p, model->config().vocab_size, base_cfg.seed, num_prompts);
  const LatencyModel latency = resolve_profile(profile_path);

  // Cartesian product over grid axes.
  std::vector<std::map<std::string, std::string>> points{{}};
  for (const auto& [key, values] : grid) {
    std::vector<std::map<std::string, std::string>> next;
    for (const auto& pt : points) {
      for (const std::string& v : values) {
        auto q = pt;
        q[key] = v;
        next.push_back(q);
      }
    }
    points = std::move(next);
  }

  nlohmann::json out = nlohmann::json::array();
  struct FrontierRow {
    std::string label;
    double match;
    double tps;
  };
  std::vector<FrontierRow> frontier_rows;
  std::cout << "grid_point | sampler | match_rate | tok/s_sim | flops/token(f) | mean_wavefront | stall\n";
  for (const auto& pt : points) {
    SamplerConfig cfg = base_cfg;
    std::string label;
    for (const auto& [k, v] : pt) {
      apply_grid_value(cfg, k, v);
      label += (label.empty() ? "" : " ") + k + "=" + v;
    }
    try {
      cfg.validate();
    } catch (const std::exception& e) {
      std::cerr << "skipping grid point (" << label << "): " << e.what() << '\n';
      continue;
    }
    std::vector<CompareSpec> specs;
    for (const std::string& name : samplers) {
      specs.push_back(CompareSpec{sampler_name(name), name, cfg, s.draft_len, s.draft_r});
    }
    const std::vector<SamplerReport> rows = compare_samplers(*model, prompts, specs, latency);
    nlohmann::json point;
    point["grid"] = pt;
    point["report"] = nlohmann::json::parse(report_to_json(rows));
    out.push_back(point);
    for (const SamplerReport& r : rows) {
      std::printf("%-24s | %-11s | %.3f | %10.2f | %8.2f | %6.2f | %.3f\n", label.c_str(),
                  r.name.c_str(), r.match_rate, r.tokens_per_sec_sim, r.flops_per_token,
                  r.mean_wavefront, r.stall_fraction);
      frontier_rows.push_back(FrontierRow{label + " " + r.name, r.match_rate, r.tokens_per_sec_sim});
    }
  }

  // Pareto frontier over (match rate, simulated throughput): rows no other
  // row strictly dominates.
  std::vector<FrontierRow> frontier;
  for (const FrontierRow& a : frontier_rows) {
    bool dominated = false;
    for (const FrontierRow& b : frontier_rows) {
      if (b.match >= a.match && b.tps >= a.tps && (b.match > a.match || b.tps > a.tps)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) frontier.push_back(a);
  }
  std::sort(frontier.begin(), frontier.end(),
            [](const FrontierRow& a, const FrontierRow& b) { return a.tps < b.tps; });
  std::cout << "\npareto frontier (match_rate vs tok/s_sim):\n";
  nlohmann::json pareto = nlohmann::json::array();
  for (const FrontierRow& r : frontier) {
    std::printf("  %-36s match=%.3f tok/s=%.2f\n", r.label.c_str(), r.match, r.tps);
    pareto.push_back({{"point", r.label}, {"match_rate", r.match}, {"tokens_per_sec_sim", r.tps}});
  }

  if (!out_path.empty()) {
    nlohmann::json doc;
    doc["points"] = out;
    doc["pareto"] = pareto;
    write_text_file(out_path, doc.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// theory
// ---------------------------------------------------------------------------

int cmd_theory(const std::vector<int>& l_list, const std::vector<int>& s_list, int hidden,
               const std::string& profile_path, const std::string& lengths_file,
               const std::string& out_path) {
  ModelConfig cfg;
  cfg.hidden_dim = hidden;
  const uint64_t h = static_cast<uint64_t>(hidden);
  const ModelDims dims{hidden, 24 * h * h * 2};
  const LatencyModel latency = resolve_profile(profile_path);

  nlohmann::json out;
  std::cout << "prefill cost (FLOPs): L s | depth | kv_share | no_share | ordering\n";
  nlohmann::json costs = nlohmann::json::array();
  for (int L : l_list) {
    for (int s : s_list) {
      const PrefillCost d = prefill_cost(PrefillArch::depth, L, s, dims);
      const PrefillCost kv = prefill_cost(PrefillArch::width_kv_share, L, s, dims);
      const PrefillCost ns = prefill_cost(PrefillArch::width_no_share, L, s, dims);
      const bool ordered = d.total() <= kv.total() && (s == 1 || L == 1 || kv.total() < ns.total());
      std::printf("%5d %2d | %12.0f | %12.0f | %12.0f | %s\n", L, s, d.total(), kv.total(),
                  ns.total(), ordered ? "ok" : "VIOLATED");
      costs.push_back({{"L", L}, {"s", s}, {"depth", d.total()}, {"kv_share", kv.total()},
                       {"no_share", ns.total()}, {"ordered", ordered}});
    }
  }
  out["prefill_costs"] = costs;

  std::cout << "\nmask pair counts: L s | kv_share | no_share\n";
  nlohmann::json masks = nlohmann::json::array();
  for (int L : l_list) {
    for (int s : s_list) {
      const uint64_t kv = mask_pair_count(WidthVariant::kv_share, L, s);
      const uint64_t ns = mask_pair_count(WidthVariant::no_share, L, s);
      std::printf("%5d %2d | %10llu | %10llu\n", L, s, static_cast<unsigned long long>(kv),
                  static_cast<unsigned long long>(ns));
      masks.push_back({{"L", L}, {"s", s}, {"kv_share", kv}, {"no_share", ns}});
    }
  }
  out["mask_pairs"] = masks;

  std::cout << "\nparallelism: L s | depth | width | ratio | saturated\n";
  nlohmann::json par = nlohmann::json::array();
  for (int L : l_list) {
    for (int s : s_list) {
      const ParallelismReport r = parallelism_profile(L, s, latency);
      std::printf("%5d %2d | %8.0f | %8.0f | %5.1f | %s\n", L, s, r.depth_parallelism,
                  r.width_parallelism, r.ratio, r.saturated ? "yes" : "no");
      par.push_back({{"L", L}, {"s", s}, {"ratio", r.ratio}, {"saturated", r.saturated}});
    }
  }
  out["parallelism"] = par;

  if (!lengths_file.empty()) {
    std::vector<int> lengths;
    std::istringstream in(read_text_file(lengths_file));
    int v;
    while (in >> v) lengths.push_back(v);
    const double prob = prob_depth_wins(lengths, latency.saturation_width);
    std::cout << "\nPr[L >= L*] over " << lengths.size() << " lengths: " << prob << '\n';
    out["prob_depth_wins"] = prob;
  }

  // Decoding ledger comparison on the contraction oracle: equal pass budget,
  // wider wavefront for the diffusion sampler.
  ContractionOracle oracle(hidden, 0.5, 7);
  SamplerConfig run_cfg;
  run_cfg.r = 32;
  run_cfg.r_inner = 4;
  run_cfg.max_new_tokens = 24;
  const TokenSequence prompt = random_prompt(8, oracle.config().vocab_size, 7);
  const GenerationResult ar = generate_static_ar(oracle, prompt, run_cfg);
  const GenerationResult df = generate_diffusion_simple(oracle, prompt, run_cfg);
  const uint64_t budget = std::min(ar.ledger.forward_pass_count(Phase::generate),
                                   df.ledger.forward_pass_count(Phase::generate)) / 2;
  const int w_ar = width_at_pass(ar.ledger.passes(), Phase::generate, budget);
  const int w_df = width_at_pass(df.ledger.passes(), Phase::generate, budget);
  std::cout << "\ndecode ledger at equal pass budget T=" << budget << ": depth equal, width AR="
            << w_ar << " DF=" << w_df << '\n';
  out["decode_ledger"] = {{"budget", budget}, {"w_ar", w_ar}, {"w_df", w_df}};

  if (!out_path.empty()) write_text_file(out_path, out.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale inference engine for recurrent-depth language models"};
  app.require_subcommand(1);
  // One root-level config option; files use a [generate] or [sweep] section
  // holding key=value lines that mirror the flags. Flags override the file.
  app.set_config("--config", "", "key=value file mirroring the flags (flags override)");

  // generate
  auto* gen = app.add_subcommand("generate", "run one sampler on one prompt");
  gen->fallthrough();
  ModelOpts gm;
  SamplerOpts gs;
  PromptOpts gp;
  std::string g_profile, g_tokens_out, g_trace_out, g_trace_image, g_report_out, g_snapshot_out,
      g_vocab_map, g_cache_dump;
  add_model_options(gen, gm);
  add_sampler_options(gen, gs);
  add_prompt_options(gen, gp);
  gen->add_option("--profile", g_profile, "hardware profile file")->envname("RDLM_PROFILE");
  gen->add_option("--tokens-out", g_tokens_out, "write output token ids here");
  gen->add_option("--trace-out", g_trace_out, "write the trace CSV here");
  gen->add_option("--trace-image", g_trace_image, "write a PPM heatmap here");
  gen->add_option("--report-out", g_report_out, "write the run ledger JSON here");
  gen->add_option("--snapshot-out", g_snapshot_out, "write a reproducible config snapshot here");
  gen->add_option("--vocab-map", g_vocab_map, "id-to-word file for readable output");
  gen->add_option("--cache-dump", g_cache_dump, "write a KV-cache norm dump CSV here");

  // sweep
  auto* sw = app.add_subcommand("sweep", "compare samplers over a hyperparameter grid");
  sw->fallthrough();
  ModelOpts sm;
  SamplerOpts ss;
  PromptOpts sp;
  std::vector<std::string> sw_grid, sw_samplers{"static", "df-adaptive"};
  int sw_prompts = 8;
  std::string sw_profile, sw_out;
  add_model_options(sw, sm);
  add_sampler_options(sw, ss);
  add_prompt_options(sw, sp);
  sw->add_option("--grid", sw_grid, "grid axis key=v1,v2,... (repeatable)");
  sw->add_option("--samplers", sw_samplers, "samplers to compare")->delimiter(',');
  sw->add_option("--prompts", sw_prompts, "number of random prompts (with --random-prompt)");
  sw->add_option("--profile", sw_profile, "hardware profile file")->envname("RDLM_PROFILE");
  sw->add_option("--out", sw_out, "write the sweep report JSON here");

  // theory
  auto* th = app.add_subcommand("theory", "prefill cost, mask and ledger tables");
  std::vector<int> th_l{8, 16, 32, 64, 128, 256, 512}, th_s{1, 2, 4, 8};
  int th_hidden = 64;
  std::string th_profile, th_lengths, th_out;
  th->add_option("--L-list", th_l, "sequence lengths")->delimiter(',');
  th->add_option("--s-list", th_s, "scaling factors")->delimiter(',');
  th->add_option("--hidden", th_hidden, "hidden dimension for the cost model");
  th->add_option("--profile", th_profile, "hardware profile file")->envname("RDLM_PROFILE");
  th->add_option("--lengths-file", th_lengths, "whitespace-separated prompt lengths");
  th->add_option("--out", th_out, "write the tables as JSON here");

  // make-model
  auto* mk = app.add_subcommand("make-model", "write a seeded toy-model checkpoint");
  ModelOpts mm;
  std::string mk_out;
  add_model_options(mk, mm);
  mk->add_option("--out", mk_out, "checkpoint path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_generate(gm, gs, gp, g_profile, g_tokens_out, g_trace_out, g_trace_image,
                          g_report_out, g_snapshot_out, g_vocab_map, g_cache_dump);
    }
    if (sw->parsed()) {
      return cmd_sweep(sm, ss, sp, sw_grid, sw_samplers, sw_prompts, sw_profile, sw_out);
    }
    if (th->parsed()) {
      return cmd_theory(th_l, th_s, th_hidden, th_profile, th_lengths, th_out);
    }
    if (mk->parsed()) {
      ToyTransformer model(toy_config(mm), mm.depth_slots);
      model.save_checkpoint(mk_out);
      std::cout << "wrote " << mk_out << '\n';
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
