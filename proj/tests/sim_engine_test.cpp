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

#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <vector>

#include "tiersim/config.h"
#include "tiersim/errors.h"

namespace tiersim {
namespace {

// Two LP instances, no HP, every batch takes exactly 0.125 s.
SimConfig HandTraceConfig() {
  SimConfig c;
  c.model = "tiny";
  c.arch = {4, 2, 2, 2, 8, 1, 2, 1, 1};
  c.latency = LatencyModel({0, 0, 0, 0, 0.125}, {});
  c.topology.num_lp = 2;
  c.topology.num_hp = 0;
  c.topology.kv_cache_bytes = 128000.0;  // 1000 blocks of 16 tokens
  c.scheduler.offload = false;
  c.scheduler.tickets = false;
  c.slo = {1.0, 1.0, 1.0};
  c.workload.duration = 1.0;
  c.engine.warmup = 0.0;
  c.engine.deep_checks = true;
  return c;
}

std::vector<Request> HandTraceRequests(const SimConfig& c) {
  const std::vector<TraceEntry> entries = {
      {4, 3}, {4, 2}, {4, 1}, {4, 2}, {4, 1}};
  const std::vector<double> arrivals = {0.0, 0.0625, 0.078125, 0.140625,
                                        0.375};
  return build_requests(entries, arrivals, c.slo, 1);
}

TEST(SimulationTest, HandSteppedTrace) {
  const SimConfig c = HandTraceConfig();
  const RunResult res = Simulation(c, HandTraceRequests(c)).run();
  struct Expect {
    InstanceId home;
    double prefill_start, first_token, completion;
  };
  const Expect want[] = {
      {0, 0.0, 0.125, 0.375},      {1, 0.0625, 0.1875, 0.3125},
      {0, 0.125, 0.25, 0.25},      {1, 0.1875, 0.3125, 0.4375},
      {0, 0.375, 0.5, 0.5},
  };
  ASSERT_EQ(res.requests.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    const Request& r = res.requests[i];
    SCOPED_TRACE(i);
    EXPECT_EQ(r.state, RequestState::kCompleted);
    EXPECT_EQ(r.home_instance, want[i].home);
    EXPECT_EQ(*r.prefill_start_time, want[i].prefill_start);
    EXPECT_EQ(*r.first_token_time, want[i].first_token);
    EXPECT_EQ(*r.completion_time, want[i].completion);
    EXPECT_EQ(r.tokens_decoded, r.output_len);
    EXPECT_EQ(r.tbt_sample_count, r.output_len - 1);
  }
  const auto out = res.outcomes();
  EXPECT_EQ(*out[0].mean_tbt, 0.125);
  EXPECT_EQ(*out[2].ttft, 0.171875);
  EXPECT_EQ(*out[3].scheduling_delay, 0.046875);
  EXPECT_EQ(res.counters.batches, 7);
  EXPECT_EQ(res.counters.arrivals, 5);
  EXPECT_EQ(res.counters.preemptions, 0);
  EXPECT_EQ(res.end_time, 1.0);
}

TEST(SimulationTest, SingleRequestWalk) {
  SimConfig c;
  c.topology.num_lp = 1;
  c.topology.num_hp = 0;
  c.scheduler.offload = false;
  c.scheduler.tickets = false;
  c.workload.duration = 10.0;
  c.engine.warmup = 0.0;
  const auto reqs =
      build_requests({{700, 5}}, {0.0}, slo_preset("mistral-7b", "sharegpt"), 1);
  const RunResult res = Simulation(c, reqs).run();
  const Request& r = res.requests[0];
  const int64_t p[] = {700};
  double t = c.latency.predict(prefill_cost(c.arch, p));
  EXPECT_EQ(*r.prefill_start_time, 0.0);
  EXPECT_EQ(*r.first_token_time, t);
  for (int64_t k = 1; k < 5; ++k) {
    const int64_t ctx[] = {700 + k};
    t += c.latency.predict(decode_cost(c.arch, ctx));
  }
  EXPECT_EQ(*r.completion_time, t);
  EXPECT_EQ(r.tokens_decoded, 5);
  EXPECT_EQ(r.tbt_sample_count, 4);
}

TEST(SimulationTest, NoRequests) {
  SimConfig c;
  c.workload.qps = 0.0;
  c.workload.duration = 50.0;
  const RunResult res = simulate(c);
  EXPECT_TRUE(res.requests.empty());
  EXPECT_EQ(res.end_time, 50.0);
  EXPECT_EQ(res.counters.batches, 0);
}

TEST(SimulationTest, RejectsBadRequestTable) {
  SimConfig c;
  auto reqs = build_requests({{10, 2}}, {0.0}, c.slo, 1);
  reqs[0].id = 3;
  EXPECT_THROW(Simulation(c, reqs).run(), PreconditionError);
}

SimConfig Loaded(SchedulerVariant v, double qps) {
  SimConfig c;
  c.scheduler.variant = v;
  c.workload.qps = qps;
  c.workload.duration = 60.0;
  c.engine.warmup = 0.0;
  c.engine.deep_checks = true;
  return c;
}

void ExpectDrained(const RunResult& res) {
  int64_t done = 0;
  int64_t dropped = 0;
  for (const Request& r : res.requests) {
    ASSERT_TRUE(r.state == RequestState::kCompleted ||
                r.state == RequestState::kDropped);
    if (r.state == RequestState::kCompleted) {
      ++done;
      EXPECT_EQ(r.tokens_decoded, r.output_len);
      EXPECT_EQ(r.tbt_sample_count, r.output_len - 1);
      EXPECT_LE(r.arrival_time, *r.first_token_time);
      EXPECT_LE(*r.first_token_time, *r.completion_time);
    } else {
      ++dropped;
    }
  }
  EXPECT_EQ(done + dropped, res.counters.arrivals);
  EXPECT_EQ(dropped, res.counters.dropped);
  EXPECT_GT(res.counters.invariant_checks, 0);
}

TEST(SimulationTest, EveryVariantDrains) {
  for (auto v : {SchedulerVariant::kTwoTier, SchedulerVariant::kVllm,
                 SchedulerVariant::kSarathi}) {
    SCOPED_TRACE(std::string(to_string(v)));
    ExpectDrained(simulate(Loaded(v, 30.0)));
  }
}

TEST(SimulationTest, OverloadExercisesOffloadAndTickets) {
  const RunResult res = simulate(Loaded(SchedulerVariant::kTwoTier, 45.0));
  ExpectDrained(res);
  EXPECT_GT(res.counters.offloads, 0);
  EXPECT_GT(res.counters.tickets_issued, 0);
  EXPECT_GT(res.counters.ticket_routed, 0);
  EXPECT_LE(res.counters.ticket_routed, res.counters.tickets_issued);
}

TEST(SimulationTest, SmallKvForcesPreemption) {
  for (auto v : {SchedulerVariant::kTwoTier, SchedulerVariant::kVllm,
                 SchedulerVariant::kSarathi}) {
    SCOPED_TRACE(std::string(to_string(v)));
    SimConfig c = Loaded(v, 20.0);
    c.topology.kv_cache_bytes = 1500.0 * 16 * 131072;
    const RunResult res = simulate(c);
    ExpectDrained(res);
    EXPECT_GT(res.counters.preemptions, 0);
  }
}

TEST(SimulationTest, DropModeDropsUnderOverload) {
  SimConfig c = Loaded(SchedulerVariant::kTwoTier, 70.0);
  c.scheduler.drop = true;
  const RunResult res = simulate(c);
  ExpectDrained(res);
  EXPECT_GT(res.counters.dropped, 0);
  EXPECT_EQ(res.counters.rejected, 0);
}

TEST(SimulationTest, SameSeedIsBitIdentical) {
  const SimConfig c = Loaded(SchedulerVariant::kTwoTier, 40.0);
  const RunResult a = simulate(c);
  const RunResult b = simulate(c);
  EXPECT_EQ(a.events, b.events);
  EXPECT_EQ(a.counters, b.counters);
  EXPECT_EQ(format_result_row(make_result_row(c, a)),
            format_result_row(make_result_row(c, b)));
  SimConfig other = c;
  other.workload.seed = 2;
  EXPECT_NE(simulate(other).events, a.events);
}

TEST(SimulationTest, SchedulersSeeTheSameWorkload) {
  SimConfig a = Loaded(SchedulerVariant::kTwoTier, 10.0);
  SimConfig b = Loaded(SchedulerVariant::kVllm, 10.0);
  const auto ra = generate_requests(a);
  const auto rb = generate_requests(b);
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    EXPECT_EQ(ra[i].arrival_time, rb[i].arrival_time);
    EXPECT_EQ(ra[i].prompt_len, rb[i].prompt_len);
    EXPECT_EQ(ra[i].output_len, rb[i].output_len);
  }
}

TEST(SimulationTest, EventLogReproducesSummary) {
  SimConfig c = Loaded(SchedulerVariant::kTwoTier, 42.0);
  c.engine.warmup = 10.0;
  const RunResult res = simulate(c);
  const auto path =
      std::filesystem::path(::testing::TempDir()) / "engine_events.csv";
  write_event_log(path, res.events);
  const auto events = read_event_log(path);
  ASSERT_EQ(events, res.events);
  const auto rebuilt = outcomes_from_events(events, c.slo.scaled_ttft(),
                                            c.slo.scaled_tbt());
  ASSERT_EQ(rebuilt.size(), res.requests.size());
  ResultRow live = make_result_row(c, res);
  ResultRow replay = live;
  replay.stats = summarize(rebuilt, res.window(c));
  EXPECT_EQ(format_result_row(replay), format_result_row(live));
  EXPECT_EQ(replay.stats.mean_sched_delay_by_instance,
            live.stats.mean_sched_delay_by_instance);
}

TEST(SimulationTest, TransferDelayShiftsOffloadArrival) {
  SimConfig c = Loaded(SchedulerVariant::kTwoTier, 45.0);
  c.topology.transfer_delay = 0.01;
  const RunResult res = simulate(c);
  std::map<RequestId, double> sent;
  int checked = 0;
  for (const auto& e : res.events) {
    if (e.kind == EventKind::kOffload) sent[e.request] = e.time;
    if (e.kind == EventKind::kOffloadArrive) {
      EXPECT_DOUBLE_EQ(e.time, sent.at(e.request) + 0.01);
      ++checked;
    }
  }
  EXPECT_GT(checked, 0);
}

TEST(SimulationTest, WarmupWindow) {
  SimConfig c;
  c.workload.duration = 100.0;
  c.engine.warmup = 30.0;
  const RunResult res;
  EXPECT_EQ(res.window(c).start, 30.0);
  EXPECT_EQ(res.window(c).end, 100.0);
  c.engine.warmup = 200.0;
  EXPECT_EQ(res.window(c).start, 0.0);
}

}  // namespace
}  // namespace tiersim
