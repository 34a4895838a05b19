/* Copyright 2026 The tiersim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


#include "tiersim/config.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tiersim/errors.h"
#include "tiersim/text_io.h"

namespace tiersim {

namespace pt = boost::property_tree;

namespace {

struct ArchPresetRow {
  const char* name;
  ModelArch arch;
};

// h, n, s, n_kv, m, L, b, d, tp
const ArchPresetRow kArchPresets[] = {
    {"mistral-7b", {4096, 32, 128, 8, 14336, 32, 128, 2, 1}},
    {"llama3.1-8b", {4096, 32, 128, 8, 14336, 32, 128, 2, 1}},
    {"qwen-14b", {5120, 40, 128, 40, 13696, 40, 128, 2, 1}},
};

const std::vector<std::string> kSections = {
    "arch", "latency", "topology", "slo", "scheduler", "workload", "engine"};

// Reads typed values from one INI section and remembers which keys were
// consumed so leftovers can be reported.
class Section {
 public:
  Section(const pt::ptree* node, std::string name)
      : node_(node), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    if (node_ == nullptr) return std::nullopt;
    const auto child = node_->get_child_optional(pt::ptree::path_type(key, '\0'));
    if (!child) return std::nullopt;
    return boost::algorithm::trim_copy(child->data());
  }

  std::string str(const std::string& key, const std::string& def) {
    return raw(key).value_or(def);
  }

  double num(const std::string& key, double def) {
    const auto v = raw(key);
    if (!v) return def;
    try {
      return parse_double(*v, path(key));
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
  }

  int64_t integer(const std::string& key, int64_t def) {
    const auto v = raw(key);
    if (!v) return def;
    try {
      return parse_int(*v, path(key));
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
  }

  bool flag(const std::string& key, bool def) {
    const auto v = raw(key);
    if (!v) return def;
    const std::string s = boost::algorithm::to_lower_copy(*v);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(path(key) + ": expected a boolean, got '" + *v + "'");
  }

  bool has(const std::string& key) const {
    return node_ != nullptr &&
           node_->get_child_optional(pt::ptree::path_type(key, '\0'));
  }

  void reject_unknown() const {
    if (node_ == nullptr) return;
    for (const auto& [key, child] : *node_) {
      if (used_.count(key) == 0) {
        throw ConfigError("unknown config key '" + path(key) + "'");
      }
    }
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

 private:
  const pt::ptree* node_;
  std::string name_;
  std::set<std::string> used_;
};

std::string bool_text(bool b) { return b ? "true" : "false"; }

void put(pt::ptree& tree, const std::string& section, const std::string& key,
         const std::string& value) {
  tree.put(pt::ptree::path_type(section + '\x1f' + key, '\x1f'), value);
}

void apply_overrides(pt::ptree& tree, const ConfigOverrides& o) {
  if (o.qps) put(tree, "workload", "qps", format_double(*o.qps));
  if (o.seed) put(tree, "workload", "seed", std::to_string(*o.seed));
  if (o.duration) put(tree, "workload", "duration", format_double(*o.duration));
  if (o.scheduler) put(tree, "scheduler", "variant", *o.scheduler);
  if (o.policy) put(tree, "scheduler", "policy", *o.policy);
  if (o.slo_scale) put(tree, "slo", "scale", format_double(*o.slo_scale));
  if (o.drop) put(tree, "scheduler", "drop", bool_text(*o.drop));
  if (o.elastic) put(tree, "scheduler", "elastic", bool_text(*o.elastic));
  if (o.tickets) put(tree, "scheduler", "tickets", bool_text(*o.tickets));
}

const pt::ptree* section_node(const pt::ptree& tree, const std::string& name) {
  const auto child = tree.get_child_optional(pt::ptree::path_type(name, '\0'));
  return child ? &*child : nullptr;
}

std::filesystem::path resolve_path(const std::string& text,
                                   const std::filesystem::path& base_dir) {
  std::filesystem::path p(text);
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return p;
}

SimConfig resolve(const pt::ptree& tree, const std::filesystem::path& base_dir) {
  for (const auto& [name, child] : tree) {
    if (std::find(kSections.begin(), kSections.end(), name) == kSections.end()) {
      if (child.empty()) {
        throw ConfigError("unknown config key '" + name +
                          "' outside any section");
      }
      throw ConfigError("unknown config section '[" + name + "]'");
    }
  }
  SimConfig c;

  Section arch(section_node(tree, "arch"), "arch");
  c.model = arch.str("preset", c.model);
  c.arch = arch_preset(c.model);
  c.arch.hidden_size = arch.integer("hidden_size", c.arch.hidden_size);
  c.arch.num_heads = arch.integer("num_heads", c.arch.num_heads);
  c.arch.head_size = arch.integer("head_size", c.arch.head_size);
  c.arch.num_kv_heads = arch.integer("num_kv_heads", c.arch.num_kv_heads);
  c.arch.ffn_intermediate =
      arch.integer("ffn_intermediate", c.arch.ffn_intermediate);
  c.arch.num_layers = arch.integer("num_layers", c.arch.num_layers);
  c.arch.attn_block_size = arch.integer("attn_block_size", c.arch.attn_block_size);
  c.arch.dtype_bytes = arch.integer("dtype_bytes", c.arch.dtype_bytes);
  c.arch.tp_degree = arch.integer("tp_degree", c.arch.tp_degree);
  arch.reject_unknown();

  Section lat(section_node(tree, "latency"), "latency");
  const auto model_file = lat.raw("model_file");
  const bool explicit_coeffs =
      lat.has("c1") || lat.has("c2") || lat.has("c3") || lat.has("c4") ||
      lat.has("c5") || lat.has("flops_per_s") || lat.has("mem_bytes_per_s");
  if (model_file && explicit_coeffs) {
    throw ConfigError(
        "latency.model_file cannot be combined with explicit coefficients");
  }
  if (model_file) {
    try {
      c.latency = load_model(resolve_path(*model_file, base_dir));
    } catch (const ParseError& e) {
      throw ConfigError(std::string("latency.model_file: ") + e.what());
    }
  } else {
    Coefficients k = kDefaultCoefficients;
    for (std::size_t i = 0; i < k.size(); ++i) {
      k[i] = lat.num("c" + std::to_string(i + 1), k[i]);
    }
    HardwareCaps caps;
    caps.flops_per_s = lat.num("flops_per_s", caps.flops_per_s);
    caps.mem_bytes_per_s = lat.num("mem_bytes_per_s", caps.mem_bytes_per_s);
    c.latency = LatencyModel(k, caps);
  }
  lat.reject_unknown();

  Section topo(section_node(tree, "topology"), "topology");
  TopologyConfig& t = c.topology;
  t.num_lp = static_cast<int>(topo.integer("num_lp", t.num_lp));
  t.num_hp = static_cast<int>(topo.integer("num_hp", t.num_hp));
  t.kv_cache_bytes = topo.num("kv_cache_bytes", t.kv_cache_bytes);
  t.block_size_tokens = topo.integer("block_size_tokens", t.block_size_tokens);
  t.lp_max_batch_requests =
      topo.integer("lp_max_batch_requests", t.lp_max_batch_requests);
  t.lp_token_budget = topo.integer("lp_token_budget", t.lp_token_budget);
  t.hp_max_batch_requests =
      topo.integer("hp_max_batch_requests", t.hp_max_batch_requests);
  t.hp_token_budget = topo.integer("hp_token_budget", t.hp_token_budget);
  t.baseline_max_batch_requests =
      topo.integer("baseline_max_batch_requests", t.baseline_max_batch_requests);
  t.vllm_token_budget = topo.integer("vllm_token_budget", t.vllm_token_budget);
  t.sarathi_token_budget =
      topo.integer("sarathi_token_budget", t.sarathi_token_budget);
  t.transfer_delay = topo.num("transfer_delay", t.transfer_delay);
  topo.reject_unknown();

  Section work(section_node(tree, "workload"), "workload");
  WorkloadConfig& w = c.workload;
  w.dataset = work.str("dataset", w.dataset);
  if (const auto trace = work.raw("trace"); trace && !trace->empty()) {
    w.trace = resolve_path(*trace, base_dir);
  }
  w.qps = work.num("qps", w.qps);
  w.duration = work.num("duration", w.duration);
  const int64_t seed = work.integer("seed", static_cast<int64_t>(w.seed));
  if (seed < 0) throw ConfigError("workload.seed must be >= 0");
  w.seed = static_cast<uint64_t>(seed);
  work.reject_unknown();

  Section slo(section_node(tree, "slo"), "slo");
  const bool has_ttft = slo.has("ttft");
  const bool has_tbt = slo.has("tbt");
  if (!has_ttft || !has_tbt) c.slo = slo_preset(c.model, w.dataset);
  c.slo.ttft_slo = slo.num("ttft", c.slo.ttft_slo);
  c.slo.tbt_slo = slo.num("tbt", c.slo.tbt_slo);
  c.slo.slo_scale = slo.num("scale", c.slo.slo_scale);
  slo.reject_unknown();

  Section sched(section_node(tree, "scheduler"), "scheduler");
  SchedulerConfig& s = c.scheduler;
  s.variant = parse_scheduler(sched.str("variant", "ascendra"));
  s.policy = parse_policy(sched.str("policy", "edf")).kind;
  s.drop = sched.flag("drop", s.drop);
  s.elastic = sched.flag("elastic", s.elastic);
  s.tickets = sched.flag("tickets", s.tickets);
  s.offload = sched.flag("offload", s.offload);
  s.offload_margin = sched.num("offload_margin", s.offload_margin);
  s.decode_reserve_tokens =
      sched.integer("decode_reserve_tokens", s.decode_reserve_tokens);
  const int64_t history =
      sched.integer("decode_history", static_cast<int64_t>(s.decode_history));
  if (history < 0) throw ConfigError("scheduler.decode_history must be >= 0");
  s.decode_history = static_cast<std::size_t>(history);
  s.default_decode_len = sched.integer("default_decode_len", s.default_decode_len);
  s.elastic_free_fraction =
      sched.num("elastic_free_fraction", s.elastic_free_fraction);
  sched.reject_unknown();

  Section eng(section_node(tree, "engine"), "engine");
  EngineConfig& e = c.engine;
  e.warmup = eng.num("warmup", e.warmup);
  e.check_invariants = eng.flag("check_invariants", e.check_invariants);
  e.deep_checks = eng.flag("deep_checks", e.deep_checks);
  e.record_events = eng.flag("record_events", e.record_events);
  eng.reject_unknown();

  validate(c);
  return c;
}

}  // namespace

ModelArch arch_preset(std::string_view name) {
  for (const auto& row : kArchPresets) {
    if (name == row.name) return row.arch;
  }
  throw ConfigError("unknown arch preset '" + std::string(name) +
                    "' (expected mistral-7b, llama3.1-8b or qwen-14b)");
}

std::vector<std::string> arch_preset_names() {
  std::vector<std::string> out;
  for (const auto& row : kArchPresets) out.emplace_back(row.name);
  return out;
}

SimConfig parse_config_text(std::string_view text,
                            const ConfigOverrides& overrides,
                            const std::filesystem::path& base_dir) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  apply_overrides(tree, overrides);
  return resolve(tree, base_dir);
}

SimConfig parse_config(const std::filesystem::path& path,
                       const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str(), overrides, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string canonical_text(const SimConfig& c) {
  std::ostringstream o;
  auto kv = [&o](const char* key, const std::string& value) {
    o << key << " = " << value << '\n';
  };
  auto i64 = [](int64_t v) { return std::to_string(v); };
  const ModelArch& a = c.arch;
  o << "[arch]\n";
  kv("preset", c.model);
  kv("hidden_size", i64(a.hidden_size));
  kv("num_heads", i64(a.num_heads));
  kv("head_size", i64(a.head_size));
  kv("num_kv_heads", i64(a.num_kv_heads));
  kv("ffn_intermediate", i64(a.ffn_intermediate));
  kv("num_layers", i64(a.num_layers));
  kv("attn_block_size", i64(a.attn_block_size));
  kv("dtype_bytes", i64(a.dtype_bytes));
  kv("tp_degree", i64(a.tp_degree));
  o << "\n[latency]\n";
  const auto& k = c.latency.coefficients();
  for (std::size_t i = 0; i < k.size(); ++i) {
    o << 'c' << i + 1 << " = " << format_double(k[i]) << '\n';
  }
  kv("flops_per_s", format_double(c.latency.caps().flops_per_s));
  kv("mem_bytes_per_s", format_double(c.latency.caps().mem_bytes_per_s));
  const TopologyConfig& t = c.topology;
  o << "\n[topology]\n";
  kv("num_lp", i64(t.num_lp));
  kv("num_hp", i64(t.num_hp));
  kv("kv_cache_bytes", format_double(t.kv_cache_bytes));
  kv("block_size_tokens", i64(t.block_size_tokens));
  kv("lp_max_batch_requests", i64(t.lp_max_batch_requests));
  kv("lp_token_budget", i64(t.lp_token_budget));
  kv("hp_max_batch_requests", i64(t.hp_max_batch_requests));
  kv("hp_token_budget", i64(t.hp_token_budget));
  kv("baseline_max_batch_requests", i64(t.baseline_max_batch_requests));
  kv("vllm_token_budget", i64(t.vllm_token_budget));
  kv("sarathi_token_budget", i64(t.sarathi_token_budget));
  kv("transfer_delay", format_double(t.transfer_delay));
  o << "\n[slo]\n";
  kv("ttft", format_double(c.slo.ttft_slo));
  kv("tbt", format_double(c.slo.tbt_slo));
  kv("scale", format_double(c.slo.slo_scale));
  const SchedulerConfig& s = c.scheduler;
  o << "\n[scheduler]\n";
  kv("variant", std::string(to_string(s.variant)));
  kv("policy", std::string(to_string(s.policy)));
  kv("drop", bool_text(s.drop));
  kv("elastic", bool_text(s.elastic));
  kv("tickets", bool_text(s.tickets));
  kv("offload", bool_text(s.offload));
  kv("offload_margin", format_double(s.offload_margin));
  kv("decode_reserve_tokens", i64(s.decode_reserve_tokens));
  kv("decode_history", std::to_string(s.decode_history));
  kv("default_decode_len", i64(s.default_decode_len));
  kv("elastic_free_fraction", format_double(s.elastic_free_fraction));
  const WorkloadConfig& w = c.workload;
  o << "\n[workload]\n";
  kv("dataset", w.dataset);
  if (w.trace) kv("trace", w.trace->string());
  kv("qps", format_double(w.qps));
  kv("duration", format_double(w.duration));
  kv("seed", std::to_string(w.seed));
  const EngineConfig& e = c.engine;
  o << "\n[engine]\n";
  kv("warmup", format_double(e.warmup));
  kv("check_invariants", bool_text(e.check_invariants));
  kv("deep_checks", bool_text(e.deep_checks));
  kv("record_events", bool_text(e.record_events));
  return o.str();
}

std::string config_hash(const SimConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_text(config))));
  return buf;
}

std::string config_reference() {
  static const std::map<std::string, std::string> kDocs = {
      {"preset", "model shape preset; explicit fields below override it"},
      {"attn_block_size", "KV block of the attention kernel (tokens)"},
      {"tp_degree", "tensor-parallel degree; costs use the per-GPU shard"},
      {"c1", "coefficient of t_M + t_F"},
      {"c2", "coefficient of max(t_M, t_F)"},
      {"c3", "coefficient of t_M"},
      {"c4", "coefficient of t_F"},
      {"c5", "constant term (seconds)"},
      {"flops_per_s", "peak compute, FLOP/s"},
      {"mem_bytes_per_s", "peak memory bandwidth, bytes/s"},
      {"kv_cache_bytes", "KV cache capacity per instance"},
      {"lp_token_budget", "max prefill tokens per LP batch"},
      {"hp_token_budget", "base prefill token budget of HP batches"},
      {"vllm_token_budget", "prefill token budget of the vllm baseline"},
      {"sarathi_token_budget", "tokens per batch of the sarathi baseline"},
      {"transfer_delay", "LP to HP prompt transfer time (seconds)"},
      {"ttft", "TTFT target (seconds); defaults to the model/dataset preset"},
      {"tbt", "mean TBT target (seconds); defaults to the preset"},
      {"scale", "multiplies both targets"},
      {"variant", "ascendra | vllm | sarathi"},
      {"policy", "LP value policy: edf | sjf | fcfs | ljf"},
      {"drop", "drop queued requests whose TTFT deadline passed"},
      {"elastic", "widen the HP token budget from free KV memory"},
      {"tickets", "let an idle HP instance take the next arrival"},
      {"offload", "move at-risk LP requests to HP"},
      {"offload_margin", "extra slack (seconds) in the offload test"},
      {"decode_reserve_tokens", "KV tokens reserved per admission"},
      {"decode_history", "completed decode lengths kept for the elastic budget"},
      {"default_decode_len", "decode length assumed before any history"},
      {"elastic_free_fraction", "free KV share that triggers expansion"},
      {"dataset", "sharegpt | longbench"},
      {"trace", "prompt_len,output_len file replacing the synthetic dataset"},
      {"qps", "Poisson arrival rate"},
      {"duration", "arrival window (seconds); the run drains afterwards"},
      {"warmup", "arrivals before this time are excluded from metrics"},
      {"check_invariants", "verify conservation and the KV ledger per event"},
      {"deep_checks", "also verify per-request queue membership per event"},
      {"record_events", "keep the event log"},
  };
  std::istringstream in(canonical_text(SimConfig{}));
  std::ostringstream out;
  out << "# tiersim configuration reference. Values shown are defaults.\n";
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) {
      const auto doc = kDocs.find(line.substr(0, eq));
      if (doc != kDocs.end()) out << "# " << doc->second << '\n';
    }
    out << line << '\n';
  }
  return out.str();
}

ResultRow make_result_row(const SimConfig& config, const RunResult& result,
                          double slo_factor) {
  ResultRow row;
  row.config_hash = config_hash(config);
  row.qps = config.workload.qps;
  row.scheduler = std::string(to_string(config.scheduler.variant));
  row.policy = std::string(to_string(config.scheduler.policy));
  row.slo_scale = config.slo.slo_scale * slo_factor;
  row.seed = config.workload.seed;
  auto outcomes = result.outcomes();
  if (slo_factor != 1.0) outcomes = rescale_slo(outcomes, slo_factor);
  row.stats = summarize(outcomes, result.window(config));
  return row;
}

std::string_view to_string(RunSpec::Axis axis) {
  switch (axis) {
    case RunSpec::Axis::kNone:
      return "none";
    case RunSpec::Axis::kQps:
      return "qps";
    case RunSpec::Axis::kSloScale:
      return "slo_scale";
  }
  return "unknown";
}

RunSpec::Axis parse_axis(std::string_view name) {
  if (name == "none") return RunSpec::Axis::kNone;
  if (name == "qps") return RunSpec::Axis::kQps;
  if (name == "slo_scale" || name == "slo-scale") return RunSpec::Axis::kSloScale;
  throw ConfigError("unknown sweep axis '" + std::string(name) +
                    "' (expected qps or slo_scale)");
}

namespace {

struct SweepTask {
  SimConfig config;
  // (row index, slo factor) judged from this run
  std::vector<std::pair<std::size_t, double>> rows;
};

}  // namespace

std::vector<ResultRow> run_sweep(const RunSpec& spec) {
  std::vector<double> values = spec.values;
  if (spec.axis == RunSpec::Axis::kNone) {
    values = {0.0};
  } else {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    for (double v : values) {
      if (!(v > 0.0)) throw ConfigError("sweep values must be positive");
    }
    std::sort(values.begin(), values.end());
  }
  std::vector<uint64_t> seeds = spec.seeds;
  if (seeds.empty()) seeds = {spec.base.workload.seed};
  std::sort(seeds.begin(), seeds.end());

  std::vector<ResultRow> rows(values.size() * seeds.size());
  std::vector<SweepTask> tasks;
  const bool post_hoc =
      spec.axis == RunSpec::Axis::kSloScale && !spec.resimulate;
  if (post_hoc) {
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      SweepTask task{spec.base, {}};
      task.config.workload.seed = seeds[s];
      for (std::size_t v = 0; v < values.size(); ++v) {
        task.rows.emplace_back(v * seeds.size() + s,
                               values[v] / spec.base.slo.slo_scale);
      }
      tasks.push_back(std::move(task));
    }
  } else {
    for (std::size_t v = 0; v < values.size(); ++v) {
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        SweepTask task{spec.base, {{v * seeds.size() + s, 1.0}}};
        task.config.workload.seed = seeds[s];
        if (spec.axis == RunSpec::Axis::kQps) task.config.workload.qps = values[v];
        if (spec.axis == RunSpec::Axis::kSloScale) {
          task.config.slo.slo_scale = values[v];
        }
        tasks.push_back(std::move(task));
      }
    }
  }

  auto fail = [&rows](const SimConfig& config, std::size_t index,
                      double factor, const std::string& message) {
    ResultRow& row = rows[index];
    row.config_hash = config_hash(config);
    row.qps = config.workload.qps;
    row.scheduler = std::string(to_string(config.scheduler.variant));
    row.policy = std::string(to_string(config.scheduler.policy));
    row.slo_scale = config.slo.slo_scale * factor;
    row.seed = config.workload.seed;
    row.error = message;
  };
  auto execute = [&rows, &fail](const SweepTask& task) {
    std::optional<RunResult> result;
    try {
      result = simulate(task.config);
    } catch (const std::exception& e) {
      for (const auto& [index, factor] : task.rows) {
        fail(task.config, index, factor, e.what());
      }
      return;
    }
    for (const auto& [index, factor] : task.rows) {
      try {
        rows[index] = make_result_row(task.config, *result, factor);
      } catch (const std::exception& e) {
        fail(task.config, index, factor, e.what());
      }
    }
  };

  const std::size_t workers = std::min<std::size_t>(
      std::max(1, spec.jobs), tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) execute(tasks[i]);
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

}  // namespace tiersim
