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


// Microbenchmarks for the cost model, prefill selection and a short run.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "tiersim/arch_cost.h"
#include "tiersim/config.h"
#include "tiersim/latency_model.h"
#include "tiersim/scheduler.h"
#include "tiersim/sim_engine.h"

namespace tiersim {
namespace {

void BM_HybridCost(benchmark::State& state) {
  const ModelArch arch = arch_preset("mistral-7b");
  BatchComposition batch;
  batch.prefill_chunks.push_back({0, 512, 512});
  batch.decode_contexts.assign(static_cast<std::size_t>(state.range(0)), 700);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hybrid_cost(arch, batch));
  }
}
BENCHMARK(BM_HybridCost)->Arg(1)->Arg(32)->Arg(256);

void BM_Predict(benchmark::State& state) {
  const ModelArch arch = arch_preset("mistral-7b");
  const LatencyModel model;
  BatchComposition batch;
  batch.decode_contexts.assign(64, 1000);
  const CostBreakdown cost = hybrid_cost(arch, batch);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.predict(cost));
  }
}
BENCHMARK(BM_Predict);

void BM_SelectPrefills(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PrefillCandidate> queue(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < queue.size(); ++i) {
    queue[i] = {static_cast<RequestId>(i), u(rng), 1e-3 * u(rng), 4, 300};
  }
  const SelectionBudgets budgets{0.05, 1000, 4096};
  for (auto _ : state) {
    benchmark::DoNotOptimize(select_prefills(queue, budgets));
  }
}
BENCHMARK(BM_SelectPrefills)->Arg(16)->Arg(256)->Arg(4096);

void BM_Simulate(benchmark::State& state) {
  SimConfig config;
  config.workload.qps = 40.0;
  config.workload.duration = 30.0;
  config.engine.warmup = 0.0;
  config.engine.record_events = false;
  config.scheduler.variant = static_cast<SchedulerVariant>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate(config));
  }
}
BENCHMARK(BM_Simulate)
    ->Arg(static_cast<int>(SchedulerVariant::kTwoTier))
    ->Arg(static_cast<int>(SchedulerVariant::kVllm))
    ->Arg(static_cast<int>(SchedulerVariant::kSarathi))
    ->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace tiersim

BENCHMARK_MAIN();
