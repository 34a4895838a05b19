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
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tiersim/arch_cost.h"
#include "tiersim/latency_model.h"
#include "tiersim/workload.h"

namespace tiersim {

// Requests are owned by the engine and addressed by id (== index).
using RequestTable = std::vector<Request>;

enum class Role { kLowPriority, kHighPriority };

std::string_view to_string(Role role);

// Batch former used by an instance.
enum class BatchFormer { kTwoTier, kVllmLike, kSarathiLike };

class PrefillEstimator;

// Higher value = served earlier. Ties are broken by request id ascending.
struct ValuePolicy {
  enum class Kind { kEdf, kSjf, kFcfs, kLjf, kCustom };
  Kind kind = Kind::kEdf;
  std::function<double(const Request&, double now, const PrefillEstimator&)>
      custom;

  static ValuePolicy edf() { return {Kind::kEdf, {}}; }
  static ValuePolicy sjf() { return {Kind::kSjf, {}}; }
  static ValuePolicy fcfs() { return {Kind::kFcfs, {}}; }
  static ValuePolicy ljf() { return {Kind::kLjf, {}}; }
};

// "edf" | "sjf" | "fcfs" | "ljf"; throws ConfigError otherwise.
ValuePolicy parse_policy(std::string_view name);
std::string_view to_string(ValuePolicy::Kind kind);

// Standalone prefill time and KV footprint of a queued request.
class PrefillEstimator {
 public:
  PrefillEstimator(const ModelArch& arch, const LatencyModel& model,
                   int64_t block_size_tokens, int64_t decode_reserve_tokens);

  // predict(prefill_cost([remaining prompt])).
  double standalone_seconds(const Request& r) const;
  // ceil((effective_prompt_len + decode_reserve_tokens) / block_size)
  int64_t blocks_for(const Request& r) const;

  const ModelArch& arch() const { return *arch_; }
  const LatencyModel& model() const { return *model_; }
  int64_t block_size_tokens() const { return block_size_tokens_; }

 private:
  const ModelArch* arch_;
  const LatencyModel* model_;
  int64_t block_size_tokens_;
  int64_t decode_reserve_tokens_;
};

double value_of(const ValuePolicy& policy, const Request& r, double now,
                const PrefillEstimator& estimator);

struct PrefillCandidate {
  RequestId id = 0;
  double value = 0.0;
  double compute = 0.0;  // predicted standalone prefill seconds
  int64_t memory = 0;    // KV blocks
  int64_t tokens = 0;    // prefill tokens
};

struct SelectionBudgets {
  double compute = 0.0;
  int64_t memory = 0;
  int64_t tokens = 0;
};

// Sorts by value (descending, id ascending on ties), then scans in that
// order taking a candidate only while every remaining budget strictly
// exceeds its cost. The scan stops at the first candidate that does not
// fit. Returns ids in scan order.
std::vector<RequestId> select_prefills(std::vector<PrefillCandidate> candidates,
                                       const SelectionBudgets& budgets);

// Annotates `waiting` with policy values and estimator costs, then runs
// the selection above.
std::vector<RequestId> select_prefills(const std::vector<RequestId>& waiting,
                                       const RequestTable& table,
                                       const SelectionBudgets& budgets,
                                       const ValuePolicy& policy,
                                       const PrefillEstimator& estimator,
                                       double now);

struct InstanceConfig {
  Role role = Role::kLowPriority;
  BatchFormer former = BatchFormer::kTwoTier;
  int64_t kv_blocks_total = 0;
  int64_t block_size_tokens = 16;
  int64_t max_batch_requests = 128;
  // Prefill tokens per batch. For the chunked baseline this budget also
  // covers one token per decode.
  int64_t token_budget = 4096;
  bool elastic_enabled = true;
  std::size_t decode_history_capacity = 1024;
  int64_t default_decode_len = 256;
  double elastic_free_fraction = 0.10;
};

struct PrefillSelection {
  RequestId id = 0;
  int64_t chunk = 0;
};

struct BatchPlan {
  std::vector<PrefillSelection> prefills;
  std::vector<RequestId> decodes;
  BatchComposition composition;
  double predicted_latency = 0.0;
  // Side effects of forming this plan, for the engine's event log.
  std::vector<RequestId> preempted;
  std::vector<RequestId> rejected;  // can never fit in this instance's KV

  bool empty() const { return prefills.empty() && decodes.empty(); }
};

class InstanceState {
 public:
  InstanceState(InstanceId id, const InstanceConfig& config);

  InstanceId id() const { return id_; }
  Role role() const { return config_.role; }
  const InstanceConfig& config() const { return config_; }
  InstanceConfig& mutable_config() { return config_; }

  // Queued requests, kept sorted by (arrival_time, id).
  std::vector<RequestId> waiting;
  // Partially prefilled requests holding KV (chunked baseline only).
  std::vector<RequestId> prefilling;
  // Decoding requests in admission order.
  std::vector<RequestId> decoding;
  std::vector<RequestId> offload_outbox;

  bool ticket_outstanding = false;
  std::deque<int64_t> decode_len_history;

  bool busy = false;
  double busy_until = 0.0;
  std::optional<BatchPlan> in_flight;

  int64_t kv_blocks_total() const { return config_.kv_blocks_total; }
  int64_t kv_blocks_free() const { return kv_blocks_free_; }
  int64_t blocks_held(RequestId id) const;
  const std::map<RequestId, int64_t>& kv_ledger() const { return held_; }

  // Grows the request's allocation to `blocks` (never shrinks). Throws
  // InvariantViolation if that would overdraw the pool.
  void ensure_blocks(RequestId id, int64_t blocks);
  void release(RequestId id);

  void enqueue_waiting(RequestId id, const RequestTable& table);
  void record_decode_len(int64_t len);

  // Free + held == total and free >= 0.
  void check_ledger() const;

 private:
  InstanceId id_;
  InstanceConfig config_;
  int64_t kv_blocks_free_ = 0;
  std::map<RequestId, int64_t> held_;
};

struct FormContext {
  const PrefillEstimator* estimator = nullptr;
  ValuePolicy policy;
  double tbt_slo = 0.15;
  double now = 0.0;
};

// KV blocks a decoding request must hold after its next step.
int64_t decode_step_blocks(const Request& r, int64_t block_size_tokens);

// Evicts the latest-arrived decoding request: its generated tokens are
// folded into the prompt, its KV is freed and it returns to `waiting`.
// Throws PreconditionError when nothing is decoding.
RequestId preempt(InstanceState& inst, RequestTable& table);

// Queued requests (not yet served a first token) whose TTFT deadline has
// passed move to Dropped. No-op when `enabled` is false.
std::vector<RequestId> drop_expired(InstanceState& inst, RequestTable& table,
                                    double now, bool enabled);

// Running-request cap. An elastic HP instance has none; KV memory bounds
// it instead.
int64_t request_cap(const InstanceState& inst);

// HP prefill token limit: the base budget, widened by the KV space left
// after reserving mean-decode-length tokens for every decoding request plus
// one, once that space exceeds the free-fraction trigger.
int64_t elastic_limit(const InstanceState& inst, const RequestTable& table);

// Low-priority instance: all decodes first, then prefills chosen by value
// under the residual TBT budget.
BatchPlan form_batch_lp(InstanceState& inst, RequestTable& table,
                        const FormContext& ctx);

// Moves unselected, not-yet-started requests whose slack is within the
// offload threshold to offload_outbox. Returns the moved ids.
std::vector<RequestId> flag_offloads(InstanceState& inst,
                                     const RequestTable& table,
                                     const PrefillEstimator& estimator,
                                     double now, int64_t hp_token_budget,
                                     double margin);

// High-priority instance: FCFS prefill-only batch when anything waits,
// decode-only batch otherwise.
BatchPlan form_batch_hp(InstanceState& inst, RequestTable& table,
                        const FormContext& ctx);

// Prefill-prioritizing FCFS baseline with a fixed token budget.
BatchPlan form_batch_vllm_like(InstanceState& inst, RequestTable& table,
                               const FormContext& ctx);

// Chunked-prefill baseline: decodes plus FCFS prefill chunks filling the
// token budget.
BatchPlan form_batch_sarathi_like(InstanceState& inst, RequestTable& table,
                                  const FormContext& ctx);

// Dispatches on the instance's role and former.
BatchPlan form_batch(InstanceState& inst, RequestTable& table,
                     const FormContext& ctx);

}  // namespace tiersim
