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


#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tiersim/arch_cost.h"
#include "tiersim/event_log.h"
#include "tiersim/latency_model.h"
#include "tiersim/metrics.h"
#include "tiersim/scheduler.h"
#include "tiersim/workload.h"

namespace tiersim {

enum class SchedulerVariant { kTwoTier, kVllm, kSarathi };

std::string_view to_string(SchedulerVariant v);
// "ascendra" | "vllm" | "sarathi"; ConfigError otherwise.
SchedulerVariant parse_scheduler(std::string_view name);

struct TopologyConfig {
  int num_lp = 2;
  int num_hp = 1;
  // KV cache capacity per instance.
  // 25,000 blocks of 16 tokens for the 7B/8B presets.
  double kv_cache_bytes = 52.4288e9;
  int64_t block_size_tokens = 16;
  int64_t lp_max_batch_requests = 128;
  int64_t lp_token_budget = 4096;
  // Applies only with elastic batching off; elastic HP is memory-bound.
  int64_t hp_max_batch_requests = 256;
  int64_t hp_token_budget = 2048;
  // Baselines run num_lp + num_hp identical instances.
  int64_t baseline_max_batch_requests = 256;
  int64_t vllm_token_budget = 4096;
  int64_t sarathi_token_budget = 512;
  double transfer_delay = 0.0;
};

struct SchedulerConfig {
  SchedulerVariant variant = SchedulerVariant::kTwoTier;
  ValuePolicy::Kind policy = ValuePolicy::Kind::kEdf;
  bool drop = false;
  bool elastic = true;
  bool tickets = true;
  bool offload = true;
  double offload_margin = 0.1;
  int64_t decode_reserve_tokens = 1;
  std::size_t decode_history = 1024;
  int64_t default_decode_len = 256;
  double elastic_free_fraction = 0.10;
};

struct WorkloadConfig {
  std::string dataset = "sharegpt";
  // Replaces the synthetic dataset when set.
  std::optional<std::filesystem::path> trace;
  double qps = 2.0;
  double duration = 300.0;
  uint64_t seed = 1;
};

struct EngineConfig {
  double warmup = 30.0;
  bool check_invariants = true;
  // Also verifies per-request queue membership on every event. O(requests).
  bool deep_checks = false;
  bool record_events = true;
};

struct SimConfig {
  std::string model = "mistral-7b";
  ModelArch arch{4096, 32, 128, 8, 14336, 32, 128, 2, 1};
  LatencyModel latency;
  TopologyConfig topology;
  SloSpec slo;
  SchedulerConfig scheduler;
  WorkloadConfig workload;
  EngineConfig engine;
};

// Throws ConfigError describing the first invalid field.
void validate(const SimConfig& config);

// Per-purpose streams derived from one seed.
uint64_t derive_seed(uint64_t seed, uint64_t stream);

// The request list a config describes. Depends only on the workload, SLO
// and seed, so every scheduler sees the same requests.
std::vector<Request> generate_requests(const SimConfig& config);

struct RunCounters {
  int64_t arrivals = 0;
  int64_t batches = 0;
  int64_t preemptions = 0;
  int64_t offloads = 0;
  int64_t tickets_issued = 0;
  int64_t ticket_routed = 0;
  int64_t dropped = 0;
  int64_t rejected = 0;
  int64_t clamped_predictions = 0;
  int64_t invariant_checks = 0;

  bool operator==(const RunCounters&) const = default;
};

struct RunResult {
  std::vector<Request> requests;
  std::vector<EventRecord> events;
  std::vector<bool> instance_is_hp;
  RunCounters counters;
  double end_time = 0.0;

  std::vector<RequestOutcome> outcomes() const;
  MetricsWindow window(const SimConfig& config) const;
};

class Simulation {
 public:
  explicit Simulation(const SimConfig& config);
  Simulation(const SimConfig& config, std::vector<Request> requests);

  // Runs to drain: every request ends Completed or Dropped.
  RunResult run();

 private:
  SimConfig config_;
  std::vector<Request> requests_;
};

RunResult simulate(const SimConfig& config);

}  // namespace tiersim
