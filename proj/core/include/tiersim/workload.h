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

namespace tiersim {

using RequestId = int64_t;
using InstanceId = int32_t;

inline constexpr InstanceId kNoInstance = -1;

enum class RequestState { kQueued, kPrefilling, kDecoding, kCompleted, kDropped };

std::string_view to_string(RequestState state);

// Transitions the engine may perform. Anything else is a simulator bug.
bool is_allowed_transition(RequestState from, RequestState to);

struct Request {
  RequestId id = 0;
  double arrival_time = 0.0;
  int64_t prompt_len = 0;
  // Ground truth. Only the engine reads it; batch formation never does.
  int64_t output_len = 0;
  double ttft_slo = 0.0;
  double tbt_slo = 0.0;

  RequestState state = RequestState::kQueued;
  int64_t tokens_prefilled = 0;
  int64_t tokens_decoded = 0;
  // prompt_len plus tokens folded back into the prompt by preemption
  int64_t effective_prompt_len = 0;

  std::optional<double> first_token_time;
  std::optional<double> completion_time;
  std::optional<double> prefill_start_time;
  std::optional<double> last_token_time;
  // When the request entered the queue of the instance it was prefilled on
  // (arrival for routed requests, transfer completion for offloads).
  double enqueue_time = 0.0;

  InstanceId home_instance = kNoInstance;
  bool offloaded = false;
  int32_t preemption_count = 0;
  int64_t tbt_sample_count = 0;

  double deadline() const { return arrival_time + ttft_slo; }
  int64_t remaining_prefill() const {
    return effective_prompt_len - tokens_prefilled;
  }

  // Throws InvariantViolation on a transition outside the state machine.
  void transition(RequestState to);
};

struct TraceEntry {
  int64_t prompt_len = 0;
  int64_t output_len = 0;

  bool operator==(const TraceEntry&) const = default;
};

struct SloSpec {
  double ttft_slo = 1.0;
  double tbt_slo = 0.15;
  double slo_scale = 1.0;

  double scaled_ttft() const { return ttft_slo * slo_scale; }
  double scaled_tbt() const { return tbt_slo * slo_scale; }
};

// TTFT / TBT targets per (model, dataset). Throws ConfigError for an
// unknown pair.
SloSpec slo_preset(std::string_view model, std::string_view dataset);
std::vector<std::pair<std::string, std::string>> slo_preset_names();

// Sorted arrival times in [0, duration) with exponential(rate) gaps.
std::vector<double> poisson_arrivals(double rate_qps, double duration_s,
                                     uint64_t seed);

// Two-column delimited file: prompt_len, output_len. Header optional.
std::vector<TraceEntry> load_trace(const std::filesystem::path& path);
void save_trace(const std::filesystem::path& path,
                const std::vector<TraceEntry>& entries);

struct LengthComponent {
  enum class Kind { kLognormal, kUniform };
  Kind kind = Kind::kLognormal;
  double weight = 1.0;
  double a = 0.0;  // lognormal mu | uniform low
  double b = 1.0;  // lognormal sigma | uniform high
};

// Mixture of lognormal / uniform components.
struct LengthDist {
  std::vector<LengthComponent> components;
};

struct TraceDistSpec {
  LengthDist prompt;
  LengthDist output;
  int64_t max_prompt_len = 8192;
  int64_t max_output_len = 2048;
};

// Shapes resembling the two evaluation datasets: "sharegpt" (chat) and
// "longbench" (long summarization prompts, short outputs).
TraceDistSpec dataset_preset(std::string_view dataset);

void validate(const TraceDistSpec& spec);

std::vector<TraceEntry> synth_trace(const TraceDistSpec& spec,
                                    std::size_t count, uint64_t seed);

// One Queued request per arrival, ids dense in arrival order. Entries are
// used in order when there are enough of them, otherwise sampled with
// replacement under `seed`.
std::vector<Request> build_requests(const std::vector<TraceEntry>& entries,
                                    const std::vector<double>& arrivals,
                                    const SloSpec& slo, uint64_t seed);

}  // namespace tiersim
