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


#include "tiersim/sim_engine.h"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <tuple>

#include "tiersim/controller.h"
#include "tiersim/errors.h"

namespace tiersim {

std::string_view to_string(SchedulerVariant v) {
  switch (v) {
    case SchedulerVariant::kTwoTier:
      return "ascendra";
    case SchedulerVariant::kVllm:
      return "vllm";
    case SchedulerVariant::kSarathi:
      return "sarathi";
  }
  return "unknown";
}

SchedulerVariant parse_scheduler(std::string_view name) {
  if (name == "ascendra") return SchedulerVariant::kTwoTier;
  if (name == "vllm") return SchedulerVariant::kVllm;
  if (name == "sarathi") return SchedulerVariant::kSarathi;
  throw ConfigError("unknown scheduler '" + std::string(name) +
                    "' (expected ascendra, vllm or sarathi)");
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

int64_t kv_blocks_per_instance(const SimConfig& c) {
  const ModelArch shard = apply_tensor_parallel(c.arch);
  const double per_block = static_cast<double>(kv_bytes_per_token(shard)) *
                           static_cast<double>(c.topology.block_size_tokens);
  return static_cast<int64_t>(std::floor(c.topology.kv_cache_bytes / per_block));
}

}  // namespace

void validate(const SimConfig& c) {
  validate(c.arch);
  apply_tensor_parallel(c.arch);
  const TopologyConfig& t = c.topology;
  require(t.num_lp >= 0 && t.num_hp >= 0, "topology: instance counts must be >= 0");
  require(t.num_lp + t.num_hp >= 1, "topology: need at least one instance");
  require(t.kv_cache_bytes > 0.0, "topology.kv_cache_bytes must be > 0");
  require(t.block_size_tokens >= 1, "topology.block_size_tokens must be >= 1");
  require(t.lp_max_batch_requests >= 1 && t.hp_max_batch_requests >= 1 &&
              t.baseline_max_batch_requests >= 1,
          "topology: max batch requests must be >= 1");
  require(t.lp_token_budget >= 1 && t.hp_token_budget >= 1 &&
              t.vllm_token_budget >= 1 && t.sarathi_token_budget >= 1,
          "topology: token budgets must be >= 1");
  require(t.transfer_delay >= 0.0, "topology.transfer_delay must be >= 0");
  require(kv_blocks_per_instance(c) >= 1,
          "topology.kv_cache_bytes holds less than one KV block");
  require(c.slo.ttft_slo > 0.0 && c.slo.tbt_slo > 0.0 && c.slo.slo_scale > 0.0,
          "slo: targets and scale must be > 0");
  const SchedulerConfig& s = c.scheduler;
  if (s.variant == SchedulerVariant::kTwoTier) {
    require(t.num_lp >= 1, "topology.num_lp must be >= 1 when variant = ascendra");
    require(!(s.offload && t.num_hp == 0),
            "scheduler.offload needs at least one HP instance "
            "(set offload = false for LP-only topologies)");
  }
  require(s.policy != ValuePolicy::Kind::kCustom,
          "scheduler.policy: custom policies are not configurable");
  require(s.offload_margin >= 0.0, "scheduler.offload_margin must be >= 0");
  require(s.decode_reserve_tokens >= 0,
          "scheduler.decode_reserve_tokens must be >= 0");
  require(s.default_decode_len >= 1, "scheduler.default_decode_len must be >= 1");
  require(s.elastic_free_fraction >= 0.0 && s.elastic_free_fraction <= 1.0,
          "scheduler.elastic_free_fraction must be in [0, 1]");
  require(c.workload.qps >= 0.0, "workload.qps must be >= 0");
  require(c.workload.duration >= 0.0, "workload.duration must be >= 0");
  if (!c.workload.trace) dataset_preset(c.workload.dataset);
  require(c.engine.warmup >= 0.0, "engine.warmup must be >= 0");
}

uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  // splitmix64 finalizer
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<Request> generate_requests(const SimConfig& c) {
  const uint64_t seed = c.workload.seed;
  const auto arrivals =
      poisson_arrivals(c.workload.qps, c.workload.duration, derive_seed(seed, 1));
  std::vector<TraceEntry> entries;
  if (c.workload.trace) {
    entries = load_trace(*c.workload.trace);
  } else {
    entries = synth_trace(dataset_preset(c.workload.dataset), arrivals.size(),
                          derive_seed(seed, 2));
  }
  return build_requests(entries, arrivals, c.slo, derive_seed(seed, 3));
}

std::vector<RequestOutcome> RunResult::outcomes() const {
  std::vector<RequestOutcome> out;
  out.reserve(requests.size());
  for (const auto& r : requests) {
    const bool hp = r.home_instance >= 0 &&
                    instance_is_hp[static_cast<std::size_t>(r.home_instance)];
    out.push_back(outcome_of(r, hp));
  }
  return out;
}

MetricsWindow RunResult::window(const SimConfig& config) const {
  const double end = config.workload.duration;
  const double start = config.engine.warmup < end ? config.engine.warmup : 0.0;
  return {start, end};
}

namespace {

enum class EvKind { kArrival, kBatchComplete, kOffloadArrive, kEndOfRun };

struct Ev {
  double time = 0.0;
  uint64_t seq = 0;
  EvKind kind = EvKind::kArrival;
  RequestId request = -1;
  InstanceId instance = kNoInstance;
};

struct Later {
  bool operator()(const Ev& a, const Ev& b) const {
    return std::tie(a.time, a.seq) > std::tie(b.time, b.seq);
  }
};

class Runner {
 public:
  Runner(const SimConfig& config, std::vector<Request> requests)
      : cfg_(config),
        shard_(apply_tensor_parallel(config.arch)),
        table_(std::move(requests)),
        estimator_(shard_, config.latency, config.topology.block_size_tokens,
                   config.scheduler.decode_reserve_tokens),
        policy_{config.scheduler.policy, {}},
        two_tier_(config.scheduler.variant == SchedulerVariant::kTwoTier) {
    for (std::size_t i = 0; i < table_.size(); ++i) {
      if (table_[i].id != static_cast<RequestId>(i)) {
        throw PreconditionError("request ids must equal their index");
      }
      if (table_[i].state != RequestState::kQueued) {
        throw PreconditionError("requests must start Queued");
      }
    }
    build_instances();
  }

  RunResult run();

 private:
  void build_instances();
  void push(double time, EvKind kind, RequestId request, InstanceId instance) {
    queue_.push({time, seq_++, kind, request, instance});
  }
  void log(InstanceId inst, EventKind kind, RequestId request,
           int64_t detail = 0) {
    if (cfg_.engine.record_events) {
      result_.events.push_back({now_, inst, kind, request, detail});
    }
  }
  Request& req(RequestId id) { return table_[static_cast<std::size_t>(id)]; }
  InstanceState& inst(InstanceId id) {
    return instances_[static_cast<std::size_t>(id)];
  }

  void on_arrival(RequestId id);
  void on_offload_arrive(RequestId id, InstanceId target);
  void on_batch_complete(InstanceId id);
  void step(InstanceState& in, bool after_completion);
  void maybe_issue_ticket(InstanceState& in);
  void apply(InstanceState& in);
  void emit_token(InstanceState& in, Request& r);
  void complete(InstanceState& in, Request& r);
  void finish_ticket(InstanceState& in, RequestId id);
  void check();
  void deep_check();
  void final_check();

  const SimConfig& cfg_;
  ModelArch shard_;
  RequestTable table_;
  PrefillEstimator estimator_;
  ValuePolicy policy_;
  bool two_tier_;
  std::vector<InstanceState> instances_;
  RoutingState routing_;
  std::priority_queue<Ev, std::vector<Ev>, Later> queue_;
  uint64_t seq_ = 0;
  double now_ = 0.0;
  int64_t arrived_ = 0;
  int64_t completed_ = 0;
  int64_t dropped_ = 0;
  std::set<RequestId> in_transfer_;
  // Per instance: the ticket-routed request still being served.
  std::vector<std::optional<RequestId>> ticketed_;
  RunResult result_;
};

void Runner::build_instances() {
  const TopologyConfig& t = cfg_.topology;
  const SchedulerConfig& s = cfg_.scheduler;
  const int64_t blocks = kv_blocks_per_instance(cfg_);
  const int total = t.num_lp + t.num_hp;
  for (int i = 0; i < total; ++i) {
    InstanceConfig ic;
    ic.kv_blocks_total = blocks;
    ic.block_size_tokens = t.block_size_tokens;
    ic.decode_history_capacity = s.decode_history;
    ic.default_decode_len = s.default_decode_len;
    ic.elastic_free_fraction = s.elastic_free_fraction;
    ic.elastic_enabled = false;
    const auto id = static_cast<InstanceId>(i);
    if (two_tier_) {
      ic.former = BatchFormer::kTwoTier;
      if (i < t.num_lp) {
        ic.role = Role::kLowPriority;
        ic.max_batch_requests = t.lp_max_batch_requests;
        ic.token_budget = t.lp_token_budget;
        routing_.lp_instances.push_back(id);
      } else {
        ic.role = Role::kHighPriority;
        ic.max_batch_requests = t.hp_max_batch_requests;
        ic.token_budget = t.hp_token_budget;
        ic.elastic_enabled = s.elastic;
        routing_.hp_instances.push_back(id);
      }
    } else {
      ic.role = Role::kLowPriority;
      ic.max_batch_requests = t.baseline_max_batch_requests;
      if (s.variant == SchedulerVariant::kVllm) {
        ic.former = BatchFormer::kVllmLike;
        ic.token_budget = t.vllm_token_budget;
      } else {
        ic.former = BatchFormer::kSarathiLike;
        ic.token_budget = t.sarathi_token_budget;
      }
      routing_.lp_instances.push_back(id);
    }
    instances_.emplace_back(id, ic);
    ticketed_.emplace_back();
    result_.instance_is_hp.push_back(ic.role == Role::kHighPriority);
  }
}

RunResult Runner::run() {
  for (const auto& r : table_) push(r.arrival_time, EvKind::kArrival, r.id, -1);
  push(cfg_.workload.duration, EvKind::kEndOfRun, -1, -1);
  for (auto& in : instances_) {
    if (in.role() == Role::kHighPriority) maybe_issue_ticket(in);
  }
  double last = 0.0;
  while (!queue_.empty()) {
    const Ev ev = queue_.top();
    queue_.pop();
    if (ev.time < last) {
      throw InvariantViolation("event time went backwards");
    }
    last = now_ = ev.time;
    switch (ev.kind) {
      case EvKind::kArrival:
        on_arrival(ev.request);
        break;
      case EvKind::kOffloadArrive:
        on_offload_arrive(ev.request, ev.instance);
        break;
      case EvKind::kBatchComplete:
        on_batch_complete(ev.instance);
        break;
      case EvKind::kEndOfRun:
        break;
    }
    if (cfg_.engine.check_invariants) check();
    if (cfg_.engine.deep_checks) deep_check();
  }
  result_.end_time = std::max(now_, cfg_.workload.duration);
  if (cfg_.engine.check_invariants) final_check();
  result_.counters.arrivals = arrived_;
  result_.requests = std::move(table_);
  return std::move(result_);
}

void Runner::on_arrival(RequestId id) {
  Request& r = req(id);
  const std::size_t tickets = routing_.pending_tickets.size();
  const InstanceId target = route_arrival(routing_);
  InstanceState& in = inst(target);
  if (routing_.pending_tickets.size() < tickets) {
    ticketed_[static_cast<std::size_t>(target)] = id;
    ++result_.counters.ticket_routed;
  }
  ++arrived_;
  r.home_instance = target;
  r.enqueue_time = now_;
  in.enqueue_waiting(id, table_);
  log(target, EventKind::kArrival, id);
  if (!in.busy) step(in, false);
}

void Runner::on_offload_arrive(RequestId id, InstanceId target) {
  in_transfer_.erase(id);
  Request& r = req(id);
  InstanceState& in = inst(target);
  r.home_instance = target;
  r.offloaded = true;
  r.enqueue_time = now_;
  in.enqueue_waiting(id, table_);
  log(target, EventKind::kOffloadArrive, id);
  if (!in.busy) step(in, false);
}

void Runner::on_batch_complete(InstanceId id) {
  InstanceState& in = inst(id);
  apply(in);
  step(in, true);
}

void Runner::step(InstanceState& in, bool after_completion) {
  const SchedulerConfig& s = cfg_.scheduler;
  if (s.drop) {
    for (RequestId id : drop_expired(in, table_, now_, true)) {
      ++dropped_;
      ++result_.counters.dropped;
      log(in.id(), EventKind::kDrop, id, 0);
      finish_ticket(in, id);
    }
  }
  FormContext ctx{&estimator_, policy_, cfg_.slo.scaled_tbt(), now_};
  BatchPlan plan = form_batch(in, table_, ctx);
  for (RequestId id : plan.preempted) {
    ++result_.counters.preemptions;
    log(in.id(), EventKind::kPreempt, id);
  }
  for (RequestId id : plan.rejected) {
    ++dropped_;
    ++result_.counters.dropped;
    ++result_.counters.rejected;
    log(in.id(), EventKind::kDrop, id, 1);
    finish_ticket(in, id);
  }
  if (two_tier_ && s.offload && in.role() == Role::kLowPriority) {
    flag_offloads(in, table_, estimator_, now_, cfg_.topology.hp_token_budget,
                  s.offload_margin);
    const auto assignments = dispatch_offloads(
        routing_, in.offload_outbox, now_, cfg_.topology.transfer_delay);
    in.offload_outbox.clear();
    for (const auto& a : assignments) {
      ++result_.counters.offloads;
      log(in.id(), EventKind::kOffload, a.request);
      in_transfer_.insert(a.request);
      push(a.arrive_time, EvKind::kOffloadArrive, a.request, a.instance);
    }
  }
  const bool hp = in.role() == Role::kHighPriority;
  if (plan.empty()) {
    in.busy = false;
    in.in_flight.reset();
    if (hp) maybe_issue_ticket(in);
    return;
  }
  const Prediction pred =
      cfg_.latency.predict_checked(hybrid_cost(shard_, plan.composition));
  if (pred.clamped) ++result_.counters.clamped_predictions;
  for (const auto& sel : plan.prefills) {
    const Request& r = req(sel.id);
    if (r.preemption_count == 0 && r.tokens_prefilled == 0) {
      log(in.id(), EventKind::kPrefillStart, sel.id, hp ? 1 : 0);
    }
  }
  log(in.id(), EventKind::kBatch, -1,
      static_cast<int64_t>(plan.prefills.size() + plan.decodes.size()));
  ++result_.counters.batches;
  plan.predicted_latency = pred.seconds;
  in.busy = true;
  in.busy_until = now_ + pred.seconds;
  in.in_flight = std::move(plan);
  push(in.busy_until, EvKind::kBatchComplete, -1, in.id());
  if (hp && after_completion) maybe_issue_ticket(in);
}

void Runner::maybe_issue_ticket(InstanceState& in) {
  if (!two_tier_ || !cfg_.scheduler.tickets || in.ticket_outstanding) return;
  if (issue_ticket(routing_, in.id(), in.waiting.empty())) {
    in.ticket_outstanding = true;
    ++result_.counters.tickets_issued;
    log(in.id(), EventKind::kTicket, -1);
  }
}

void Runner::emit_token(InstanceState& in, Request& r) {
  if (!r.first_token_time) {
    r.first_token_time = now_;
    log(in.id(), EventKind::kFirstToken, r.id);
  } else {
    ++r.tbt_sample_count;
  }
  r.last_token_time = now_;
  ++r.tokens_decoded;
}

void Runner::complete(InstanceState& in, Request& r) {
  r.transition(RequestState::kCompleted);
  r.completion_time = now_;
  in.release(r.id);
  ++completed_;
  if (in.role() == Role::kHighPriority) in.record_decode_len(r.output_len);
  log(in.id(), EventKind::kComplete, r.id, r.output_len);
  finish_ticket(in, r.id);
}

void Runner::finish_ticket(InstanceState& in, RequestId id) {
  auto& held = ticketed_[static_cast<std::size_t>(in.id())];
  if (held && *held == id) {
    held.reset();
    in.ticket_outstanding = false;
  }
}

void Runner::apply(InstanceState& in) {
  if (!in.in_flight) {
    throw InvariantViolation("batch completion on an idle instance");
  }
  const BatchPlan plan = std::move(*in.in_flight);
  in.in_flight.reset();
  in.busy = false;
  for (const auto& sel : plan.prefills) {
    Request& r = req(sel.id);
    r.tokens_prefilled += sel.chunk;
    if (r.tokens_prefilled < r.effective_prompt_len) {
      in.prefilling.push_back(sel.id);
      continue;
    }
    r.transition(RequestState::kDecoding);
    emit_token(in, r);
    if (r.tokens_decoded >= r.output_len) {
      complete(in, r);
    } else {
      in.decoding.push_back(sel.id);
    }
  }
  bool any_done = false;
  for (RequestId id : plan.decodes) {
    Request& r = req(id);
    emit_token(in, r);
    if (r.tokens_decoded >= r.output_len) {
      complete(in, r);
      any_done = true;
    }
  }
  if (any_done) {
    auto it = std::remove_if(in.decoding.begin(), in.decoding.end(),
                             [this](RequestId id) {
                               return req(id).state == RequestState::kCompleted;
                             });
    in.decoding.erase(it, in.decoding.end());
  }
}

void Runner::check() {
  ++result_.counters.invariant_checks;
  int64_t live = static_cast<int64_t>(in_transfer_.size());
  for (const auto& in : instances_) {
    in.check_ledger();
    live += static_cast<int64_t>(in.waiting.size() + in.prefilling.size() +
                                 in.decoding.size());
    if (in.in_flight) {
      live += static_cast<int64_t>(in.in_flight->prefills.size());
    }
    if (!in.busy && (!in.waiting.empty() || !in.prefilling.empty() ||
                     !in.decoding.empty())) {
      throw InvariantViolation("instance " + std::to_string(in.id()) +
                               " parked with pending work");
    }
    if (in.busy != in.in_flight.has_value()) {
      throw InvariantViolation("instance " + std::to_string(in.id()) +
                               " busy flag out of sync");
    }
  }
  if (arrived_ != completed_ + dropped_ + live) {
    throw InvariantViolation(
        "conservation: arrived=" + std::to_string(arrived_) + " completed=" +
        std::to_string(completed_) + " dropped=" + std::to_string(dropped_) +
        " live=" + std::to_string(live));
  }
}

void Runner::deep_check() {
  std::vector<int> seen(table_.size(), 0);
  auto mark = [&seen](RequestId id) { ++seen[static_cast<std::size_t>(id)]; };
  for (RequestId id : in_transfer_) mark(id);
  for (const auto& in : instances_) {
    for (RequestId id : in.waiting) mark(id);
    for (RequestId id : in.prefilling) mark(id);
    for (RequestId id : in.decoding) mark(id);
    if (in.in_flight) {
      for (const auto& sel : in.in_flight->prefills) mark(sel.id);
    }
    for (const auto& [id, blocks] : in.kv_ledger()) {
      const Request& r = req(id);
      if (r.state == RequestState::kCompleted ||
          r.state == RequestState::kDropped || r.home_instance != in.id()) {
        throw InvariantViolation("request " + std::to_string(id) +
                                 " holds KV it should not");
      }
      (void)blocks;
    }
  }
  for (std::size_t i = 0; i < table_.size(); ++i) {
    const Request& r = table_[i];
    const bool arrived = r.home_instance != kNoInstance;
    const bool terminal = r.state == RequestState::kCompleted ||
                          r.state == RequestState::kDropped;
    const int expected = arrived && !terminal ? 1 : 0;
    if (seen[i] != expected) {
      throw InvariantViolation("request " + std::to_string(i) + " appears " +
                               std::to_string(seen[i]) +
                               " times in instance queues");
    }
  }
}

void Runner::final_check() {
  for (const auto& r : table_) {
    if (r.state == RequestState::kDropped) continue;
    if (r.state != RequestState::kCompleted) {
      throw InvariantViolation("request " + std::to_string(r.id) +
                               " not finished at end of run");
    }
    if (r.tokens_decoded != r.output_len ||
        r.tbt_sample_count != r.output_len - 1) {
      throw InvariantViolation("request " + std::to_string(r.id) +
                               ": token or TBT sample count mismatch");
    }
    if (!(r.arrival_time <= *r.first_token_time &&
          *r.first_token_time <= *r.completion_time)) {
      throw InvariantViolation("request " + std::to_string(r.id) +
                               ": timestamps out of order");
    }
  }
  for (const auto& in : instances_) {
    if (in.kv_blocks_free() != in.kv_blocks_total()) {
      throw InvariantViolation("instance " + std::to_string(in.id()) +
                               " holds KV after drain");
    }
  }
}

}  // namespace

Simulation::Simulation(const SimConfig& config)
    : Simulation(config, generate_requests(config)) {}

Simulation::Simulation(const SimConfig& config, std::vector<Request> requests)
    : config_(config), requests_(std::move(requests)) {
  validate(config_);
}

RunResult Simulation::run() { return Runner(config_, requests_).run(); }

RunResult simulate(const SimConfig& config) { return Simulation(config).run(); }

}  // namespace tiersim
