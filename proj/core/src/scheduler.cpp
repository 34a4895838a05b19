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

#include "tiersim/scheduler.h"

#include <algorithm>
#include <limits>
#include <numeric>

#include "tiersim/errors.h"

namespace tiersim {

std::string_view to_string(Role role) {
  return role == Role::kLowPriority ? "lp" : "hp";
}

ValuePolicy parse_policy(std::string_view name) {
  if (name == "edf") return ValuePolicy::edf();
  if (name == "sjf") return ValuePolicy::sjf();
  if (name == "fcfs") return ValuePolicy::fcfs();
  if (name == "ljf") return ValuePolicy::ljf();
  throw ConfigError("unknown policy '" + std::string(name) +
                    "' (expected edf, sjf, fcfs or ljf)");
}

std::string_view to_string(ValuePolicy::Kind kind) {
  switch (kind) {
    case ValuePolicy::Kind::kEdf:
      return "edf";
    case ValuePolicy::Kind::kSjf:
      return "sjf";
    case ValuePolicy::Kind::kFcfs:
      return "fcfs";
    case ValuePolicy::Kind::kLjf:
      return "ljf";
    case ValuePolicy::Kind::kCustom:
      return "custom";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// PrefillEstimator

PrefillEstimator::PrefillEstimator(const ModelArch& arch,
                                   const LatencyModel& model,
                                   int64_t block_size_tokens,
                                   int64_t decode_reserve_tokens)
    : arch_(&arch),
      model_(&model),
      block_size_tokens_(block_size_tokens),
      decode_reserve_tokens_(decode_reserve_tokens) {
  if (block_size_tokens < 1 || decode_reserve_tokens < 0) {
    throw ConfigError("block_size_tokens must be >= 1 and "
                      "decode_reserve_tokens >= 0");
  }
}

double PrefillEstimator::standalone_seconds(const Request& r) const {
  const int64_t tokens = r.remaining_prefill();
  if (tokens < 1) return 0.0;
  const int64_t prompt[] = {tokens};
  return model_->predict(prefill_cost(*arch_, prompt));
}

int64_t PrefillEstimator::blocks_for(const Request& r) const {
  return (r.effective_prompt_len + decode_reserve_tokens_ +
          block_size_tokens_ - 1) /
         block_size_tokens_;
}

double value_of(const ValuePolicy& policy, const Request& r, double now,
                const PrefillEstimator& estimator) {
  switch (policy.kind) {
    case ValuePolicy::Kind::kEdf:
      return -r.deadline();
    case ValuePolicy::Kind::kSjf:
      return -estimator.standalone_seconds(r);
    case ValuePolicy::Kind::kLjf:
      return estimator.standalone_seconds(r);
    case ValuePolicy::Kind::kFcfs:
      return -r.arrival_time;
    case ValuePolicy::Kind::kCustom:
      if (!policy.custom) throw ConfigError("custom policy without a rule");
      return policy.custom(r, now, estimator);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Out-of-order selection

std::vector<RequestId> select_prefills(std::vector<PrefillCandidate> candidates,
                                       const SelectionBudgets& budgets) {
  // Max-heap on (value, -id); popping yields the fully sorted order, and
  // the scan usually stops long before the heap is exhausted.
  auto lower_priority = [](const PrefillCandidate& a,
                           const PrefillCandidate& b) {
    if (a.value != b.value) return a.value < b.value;
    return a.id > b.id;
  };
  std::make_heap(candidates.begin(), candidates.end(), lower_priority);

  double compute = budgets.compute;
  int64_t memory = budgets.memory;
  int64_t tokens = budgets.tokens;
  std::vector<RequestId> selected;
  auto end = candidates.end();
  while (end != candidates.begin()) {
    std::pop_heap(candidates.begin(), end, lower_priority);
    --end;
    const PrefillCandidate& c = *end;
    if (!(compute > 0.0 && memory > 0 && tokens > 0)) break;
    if (compute > c.compute && memory > c.memory && tokens > c.tokens) {
      selected.push_back(c.id);
      compute -= c.compute;
      memory -= c.memory;
      tokens -= c.tokens;
    } else {
      break;
    }
  }
  return selected;
}

namespace {

std::vector<PrefillCandidate> annotate(const std::vector<RequestId>& waiting,
                                       const RequestTable& table,
                                       const ValuePolicy& policy,
                                       const PrefillEstimator& estimator,
                                       double now) {
  std::vector<PrefillCandidate> out;
  out.reserve(waiting.size());
  for (RequestId id : waiting) {
    const Request& r = table[static_cast<std::size_t>(id)];
    out.push_back({id, value_of(policy, r, now, estimator),
                   estimator.standalone_seconds(r), estimator.blocks_for(r),
                   r.remaining_prefill()});
  }
  return out;
}

}  // namespace

std::vector<RequestId> select_prefills(const std::vector<RequestId>& waiting,
                                       const RequestTable& table,
                                       const SelectionBudgets& budgets,
                                       const ValuePolicy& policy,
                                       const PrefillEstimator& estimator,
                                       double now) {
  return select_prefills(annotate(waiting, table, policy, estimator, now),
                         budgets);
}

// ---------------------------------------------------------------------------
// InstanceState

InstanceState::InstanceState(InstanceId id, const InstanceConfig& config)
    : id_(id), config_(config), kv_blocks_free_(config.kv_blocks_total) {
  if (config.kv_blocks_total < 1 || config.block_size_tokens < 1 ||
      config.max_batch_requests < 1 || config.token_budget < 1) {
    throw ConfigError("instance " + std::to_string(id) +
                      ": KV blocks, block size, batch size and token budget "
                      "must be positive");
  }
}

int64_t InstanceState::blocks_held(RequestId id) const {
  const auto it = held_.find(id);
  return it == held_.end() ? 0 : it->second;
}

void InstanceState::ensure_blocks(RequestId id, int64_t blocks) {
  int64_t& held = held_[id];
  if (blocks <= held) return;
  const int64_t extra = blocks - held;
  if (extra > kv_blocks_free_) {
    throw InvariantViolation("instance " + std::to_string(id_) +
                             ": KV overdraw for request " + std::to_string(id));
  }
  kv_blocks_free_ -= extra;
  held = blocks;
}

void InstanceState::release(RequestId id) {
  const auto it = held_.find(id);
  if (it == held_.end()) return;
  kv_blocks_free_ += it->second;
  held_.erase(it);
}

void InstanceState::enqueue_waiting(RequestId id, const RequestTable& table) {
  const auto key = [&table](RequestId x) {
    const Request& r = table[static_cast<std::size_t>(x)];
    return std::pair{r.arrival_time, r.id};
  };
  const auto k = key(id);
  const auto pos = std::upper_bound(
      waiting.begin(), waiting.end(), k,
      [&key](const auto& lhs, RequestId rhs) { return lhs < key(rhs); });
  waiting.insert(pos, id);
}

void InstanceState::record_decode_len(int64_t len) {
  if (config_.decode_history_capacity == 0) return;
  decode_len_history.push_back(len);
  while (decode_len_history.size() > config_.decode_history_capacity) {
    decode_len_history.pop_front();
  }
}

void InstanceState::check_ledger() const {
  int64_t held = 0;
  for (const auto& [id, blocks] : held_) {
    if (blocks < 0) {
      throw InvariantViolation("negative KV allocation for request " +
                               std::to_string(id));
    }
    held += blocks;
  }
  if (kv_blocks_free_ < 0 || kv_blocks_free_ > config_.kv_blocks_total ||
      held + kv_blocks_free_ != config_.kv_blocks_total) {
    throw InvariantViolation(
        "instance " + std::to_string(id_) + ": KV ledger unbalanced (held=" +
        std::to_string(held) + ", free=" + std::to_string(kv_blocks_free_) +
        ", total=" + std::to_string(config_.kv_blocks_total) + ")");
  }
}

// ---------------------------------------------------------------------------
// Shared batch-formation steps

int64_t decode_step_blocks(const Request& r, int64_t block_size_tokens) {
  return (r.prompt_len + r.tokens_decoded + block_size_tokens - 1) /
         block_size_tokens;
}

RequestId preempt(InstanceState& inst, RequestTable& table) {
  if (inst.decoding.empty()) {
    throw PreconditionError("cannot preempt: no decoding requests");
  }
  auto victim_it = std::max_element(
      inst.decoding.begin(), inst.decoding.end(),
      [&table](RequestId a, RequestId b) {
        const Request& ra = table[static_cast<std::size_t>(a)];
        const Request& rb = table[static_cast<std::size_t>(b)];
        return std::pair{ra.arrival_time, ra.id} <
               std::pair{rb.arrival_time, rb.id};
      });
  const RequestId victim = *victim_it;
  inst.decoding.erase(victim_it);
  inst.release(victim);
  Request& r = table[static_cast<std::size_t>(victim)];
  r.effective_prompt_len = r.prompt_len + r.tokens_decoded;
  r.tokens_prefilled = 0;
  r.transition(RequestState::kQueued);
  ++r.preemption_count;
  inst.enqueue_waiting(victim, table);
  return victim;
}

std::vector<RequestId> drop_expired(InstanceState& inst, RequestTable& table,
                                    double now, bool enabled) {
  std::vector<RequestId> dropped;
  if (!enabled) return dropped;
  std::vector<RequestId> keep;
  keep.reserve(inst.waiting.size());
  for (RequestId id : inst.waiting) {
    Request& r = table[static_cast<std::size_t>(id)];
    if (r.state == RequestState::kQueued && !r.first_token_time &&
        now > r.deadline()) {
      r.transition(RequestState::kDropped);
      dropped.push_back(id);
    } else {
      keep.push_back(id);
    }
  }
  inst.waiting = std::move(keep);
  return dropped;
}

int64_t elastic_limit(const InstanceState& inst, const RequestTable& table) {
  (void)table;
  const InstanceConfig& cfg = inst.config();
  if (!cfg.elastic_enabled) return cfg.token_budget;
  double mean_decode = static_cast<double>(cfg.default_decode_len);
  if (!inst.decode_len_history.empty()) {
    const double sum = std::accumulate(inst.decode_len_history.begin(),
                                       inst.decode_len_history.end(), 0.0);
    mean_decode = sum / static_cast<double>(inst.decode_len_history.size());
  }
  const double reserve =
      mean_decode * static_cast<double>(inst.decoding.size() + 1);
  const double bs = static_cast<double>(cfg.block_size_tokens);
  const double free_tokens = static_cast<double>(inst.kv_blocks_free()) * bs;
  const double total_tokens = static_cast<double>(inst.kv_blocks_total()) * bs;
  const double available = free_tokens - reserve;
  if (available > cfg.elastic_free_fraction * total_tokens) {
    return cfg.token_budget + static_cast<int64_t>(available);
  }
  return cfg.token_budget;
}

int64_t request_cap(const InstanceState& inst) {
  const InstanceConfig& cfg = inst.config();
  if (cfg.role == Role::kHighPriority && cfg.elastic_enabled) {
    return std::numeric_limits<int64_t>::max();
  }
  return cfg.max_batch_requests;
}

namespace {

Request& at(RequestTable& table, RequestId id) {
  return table[static_cast<std::size_t>(id)];
}

// Requests that cannot fit even in an empty KV pool would block their
// queue forever.
void reject_unservable(InstanceState& inst, RequestTable& table,
                       const PrefillEstimator& est, BatchPlan& plan) {
  auto it = std::remove_if(
      inst.waiting.begin(), inst.waiting.end(), [&](RequestId id) {
        Request& r = at(table, id);
        if (est.blocks_for(r) <= inst.kv_blocks_total()) return false;
        r.transition(RequestState::kDropped);
        plan.rejected.push_back(id);
        return true;
      });
  inst.waiting.erase(it, inst.waiting.end());
}

void take_decodes(InstanceState& inst, RequestTable& table, BatchPlan& plan) {
  const int64_t bs = inst.config().block_size_tokens;
  const auto cap = static_cast<std::size_t>(request_cap(inst));
  auto limit = [&inst, cap] {
    return std::min<std::size_t>(inst.decoding.size(), cap);
  };
  while (!inst.decoding.empty()) {
    int64_t extra = 0;
    for (std::size_t i = 0; i < limit(); ++i) {
      const RequestId id = inst.decoding[i];
      extra += std::max<int64_t>(
          0, decode_step_blocks(at(table, id), bs) - inst.blocks_held(id));
    }
    if (extra <= inst.kv_blocks_free()) break;
    plan.preempted.push_back(preempt(inst, table));
  }
  const std::size_t n = limit();
  for (std::size_t i = 0; i < n; ++i) {
    const RequestId id = inst.decoding[i];
    const Request& r = at(table, id);
    inst.ensure_blocks(id, decode_step_blocks(r, bs));
    plan.decodes.push_back(id);
    plan.composition.decode_contexts.push_back(r.prompt_len + r.tokens_decoded);
  }
}

// Marks the request as admitted for `chunk` prefill tokens. The caller
// removes it from whichever queue it came from.
void admit_prefill(InstanceState& inst, RequestTable& table,
                   const PrefillEstimator& est, RequestId id, int64_t chunk,
                   double now, BatchPlan& plan) {
  Request& r = at(table, id);
  inst.ensure_blocks(id, est.blocks_for(r));
  if (r.state == RequestState::kQueued) r.transition(RequestState::kPrefilling);
  if (!r.prefill_start_time) r.prefill_start_time = now;
  plan.prefills.push_back({id, chunk});
  plan.composition.prefill_chunks.push_back(
      {r.tokens_prefilled, chunk, r.effective_prompt_len});
}

void erase_ids(std::vector<RequestId>& from,
               const std::vector<RequestId>& ids) {
  if (ids.empty()) return;
  std::vector<RequestId> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  auto it = std::remove_if(from.begin(), from.end(), [&sorted](RequestId id) {
    return std::binary_search(sorted.begin(), sorted.end(), id);
  });
  from.erase(it, from.end());
}

void finish_plan(const InstanceState& inst, const PrefillEstimator& est,
                 BatchPlan& plan) {
  (void)inst;
  if (!plan.empty()) {
    plan.predicted_latency =
        est.model().predict(hybrid_cost(est.arch(), plan.composition));
  }
}

// FCFS whole-prompt admission up to `limit` tokens; the first request is
// admitted alone even when it exceeds the limit.
void admit_fcfs_whole(InstanceState& inst, RequestTable& table,
                      const PrefillEstimator& est, int64_t limit, double now,
                      BatchPlan& plan) {
  int64_t cumulative = 0;
  std::vector<RequestId> admitted;
  // max_batch_requests bounds running requests, decodes included.
  const int64_t slots =
      request_cap(inst) - static_cast<int64_t>(inst.decoding.size());
  for (RequestId id : inst.waiting) {
    const Request& r = at(table, id);
    const int64_t tokens = r.remaining_prefill();
    if (static_cast<int64_t>(admitted.size()) >= slots) break;
    if (est.blocks_for(r) > inst.kv_blocks_free()) break;
    if (!admitted.empty() && cumulative + tokens > limit) break;
    admit_prefill(inst, table, est, id, tokens, now, plan);
    admitted.push_back(id);
    cumulative += tokens;
  }
  erase_ids(inst.waiting, admitted);
}

}  // namespace

BatchPlan form_batch_lp(InstanceState& inst, RequestTable& table,
                        const FormContext& ctx) {
  if (inst.role() != Role::kLowPriority) {
    throw PreconditionError("form_batch_lp on a high-priority instance");
  }
  const PrefillEstimator& est = *ctx.estimator;
  BatchPlan plan;
  reject_unservable(inst, table, est, plan);
  take_decodes(inst, table, plan);

  double compute = ctx.tbt_slo;
  if (!plan.decodes.empty()) {
    const double decode_only = est.model().predict(
        decode_cost(est.arch(), plan.composition.decode_contexts));
    compute = std::max(0.0, ctx.tbt_slo - decode_only);
  }
  const int64_t slots = inst.config().max_batch_requests -
                        static_cast<int64_t>(plan.decodes.size());
  if (slots > 0 && !inst.waiting.empty()) {
    auto candidates = annotate(inst.waiting, table, ctx.policy, est, ctx.now);
    std::vector<RequestId> selected = select_prefills(
        candidates,
        {compute, inst.kv_blocks_free(), inst.config().token_budget});
    if (static_cast<int64_t>(selected.size()) > slots) {
      selected.resize(static_cast<std::size_t>(slots));
    }
    if (selected.empty() && plan.decodes.empty()) {
      // Nothing else would run: admit the top-valued request alone so an
      // idle instance always makes progress.
      const auto best = std::max_element(
          candidates.begin(), candidates.end(),
          [](const PrefillCandidate& a, const PrefillCandidate& b) {
            if (a.value != b.value) return a.value < b.value;
            return a.id > b.id;
          });
      if (best->memory <= inst.kv_blocks_free()) selected.push_back(best->id);
    }
    for (RequestId id : selected) {
      admit_prefill(inst, table, est, id, at(table, id).remaining_prefill(),
                    ctx.now, plan);
    }
    erase_ids(inst.waiting, selected);
  }
  finish_plan(inst, est, plan);
  return plan;
}

std::vector<RequestId> flag_offloads(InstanceState& inst,
                                     const RequestTable& table,
                                     const PrefillEstimator& estimator,
                                     double now, int64_t hp_token_budget,
                                     double margin) {
  if (inst.role() != Role::kLowPriority) {
    throw PreconditionError("flag_offloads on a high-priority instance");
  }
  std::vector<RequestId> moved;
  if (inst.waiting.empty()) return moved;
  const double hp_worst = worst_case_batch_latency(
      estimator.model(), estimator.arch(), hp_token_budget);
  std::vector<RequestId> keep;
  keep.reserve(inst.waiting.size());
  for (RequestId id : inst.waiting) {
    const Request& r = table[static_cast<std::size_t>(id)];
    const bool eligible = r.state == RequestState::kQueued &&
                          r.tokens_prefilled == 0 && !r.first_token_time;
    if (eligible) {
      const double slack = r.deadline() - now;
      if (slack <= estimator.standalone_seconds(r) + hp_worst + margin) {
        moved.push_back(id);
        continue;
      }
    }
    keep.push_back(id);
  }
  inst.waiting = std::move(keep);
  inst.offload_outbox.insert(inst.offload_outbox.end(), moved.begin(),
                             moved.end());
  return moved;
}

BatchPlan form_batch_hp(InstanceState& inst, RequestTable& table,
                        const FormContext& ctx) {
  if (inst.role() != Role::kHighPriority) {
    throw PreconditionError("form_batch_hp on a low-priority instance");
  }
  const PrefillEstimator& est = *ctx.estimator;
  BatchPlan plan;
  reject_unservable(inst, table, est, plan);
  if (!inst.waiting.empty()) {
    admit_fcfs_whole(inst, table, est, elastic_limit(inst, table), ctx.now,
                     plan);
  }
  if (plan.prefills.empty()) take_decodes(inst, table, plan);
  finish_plan(inst, est, plan);
  return plan;
}

BatchPlan form_batch_vllm_like(InstanceState& inst, RequestTable& table,
                               const FormContext& ctx) {
  const PrefillEstimator& est = *ctx.estimator;
  BatchPlan plan;
  reject_unservable(inst, table, est, plan);
  if (!inst.waiting.empty()) {
    admit_fcfs_whole(inst, table, est, inst.config().token_budget, ctx.now,
                     plan);
  }
  if (plan.prefills.empty()) take_decodes(inst, table, plan);
  finish_plan(inst, est, plan);
  return plan;
}

BatchPlan form_batch_sarathi_like(InstanceState& inst, RequestTable& table,
                                  const FormContext& ctx) {
  const PrefillEstimator& est = *ctx.estimator;
  BatchPlan plan;
  reject_unservable(inst, table, est, plan);
  take_decodes(inst, table, plan);

  int64_t remaining = inst.config().token_budget -
                      static_cast<int64_t>(plan.decodes.size());
  int64_t slots = inst.config().max_batch_requests -
                  static_cast<int64_t>(inst.decoding.size());

  // Requests already mid-prompt go first; they hold KV.
  std::vector<RequestId> continued;
  for (RequestId id : inst.prefilling) {
    if (remaining <= 0 || slots <= 0) break;
    const int64_t chunk = std::min(remaining, at(table, id).remaining_prefill());
    admit_prefill(inst, table, est, id, chunk, ctx.now, plan);
    continued.push_back(id);
    remaining -= chunk;
    --slots;
  }
  erase_ids(inst.prefilling, continued);

  std::vector<RequestId> started;
  for (RequestId id : inst.waiting) {
    if (remaining <= 0 || slots <= 0) break;
    const Request& r = at(table, id);
    if (est.blocks_for(r) > inst.kv_blocks_free()) break;
    const int64_t chunk = std::min(remaining, r.remaining_prefill());
    admit_prefill(inst, table, est, id, chunk, ctx.now, plan);
    started.push_back(id);
    remaining -= chunk;
    --slots;
  }
  erase_ids(inst.waiting, started);
  finish_plan(inst, est, plan);
  return plan;
}

BatchPlan form_batch(InstanceState& inst, RequestTable& table,
                     const FormContext& ctx) {
  switch (inst.config().former) {
    case BatchFormer::kTwoTier:
      return inst.role() == Role::kLowPriority
                 ? form_batch_lp(inst, table, ctx)
                 : form_batch_hp(inst, table, ctx);
    case BatchFormer::kVllmLike:
      return form_batch_vllm_like(inst, table, ctx);
    case BatchFormer::kSarathiLike:
      return form_batch_sarathi_like(inst, table, ctx);
  }
  return {};
}

}  // namespace tiersim
