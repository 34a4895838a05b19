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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tiersim/event_log.h"
#include "tiersim/workload.h"

namespace tiersim {

struct RequestOutcome {
  RequestId id = 0;
  double arrival_time = 0.0;
  int64_t output_len = 0;
  double ttft_slo = 0.0;
  double tbt_slo = 0.0;

  bool completed = false;
  bool dropped = false;
  std::optional<double> ttft;
  // (completion - first token) / (output_len - 1); unset when output_len
  // is 1 or the request did not complete.
  std::optional<double> mean_tbt;
  // prefill start - arrival
  std::optional<double> scheduling_delay;
  // prefill start - arrival at the instance that served it. Differs from
  // scheduling_delay only for offloaded requests.
  std::optional<double> queue_delay;
  int64_t tokens_generated = 0;

  InstanceId home_instance = kNoInstance;
  bool offloaded = false;
  bool served_on_hp = false;
};

RequestOutcome outcome_of(const Request& r, bool served_on_hp);

// Rebuilds outcomes from an event log alone. Requests share one SLO pair.
std::vector<RequestOutcome> outcomes_from_events(
    const std::vector<EventRecord>& events, double ttft_slo, double tbt_slo);

// Completed within the TTFT target with a mean TBT within the TBT target.
bool meets_slo(const RequestOutcome& o);

// Fraction of outcomes meeting their SLOs; dropped and unfinished requests
// count in the denominator. Throws UndefinedMetricError when empty.
double goodput(std::span<const RequestOutcome> outcomes);

// Same outcomes judged against SLO targets multiplied by `scale`.
std::vector<RequestOutcome> rescale_slo(std::span<const RequestOutcome> outcomes,
                                        double scale);

// Nearest rank: the ceil(q/100 * n)-th smallest value (the minimum for
// q = 0). Throws UndefinedMetricError when empty, PreconditionError for q
// outside [0, 100].
double percentile(std::vector<double> values, double q);

// Requests arriving in [start, end) are counted.
struct MetricsWindow {
  double start = 0.0;
  double end = 0.0;
};

struct SummaryStats {
  int64_t counted = 0;
  int64_t completed = 0;
  int64_t dropped = 0;
  int64_t violated = 0;  // completed, but outside the SLO
  int64_t good = 0;
  double goodput = 0.0;
  double throughput_tokens_s = 0.0;
  double throughput_requests_s = 0.0;
  double mean_ttft = 0.0;
  double p50_ttft = 0.0;
  double p90_ttft = 0.0;
  double p99_ttft = 0.0;
  double mean_tbt = 0.0;
  // Mean queue delay on each path; NaN when no request took the path.
  double mean_sched_delay_lp = 0.0;
  double mean_sched_delay_hp = 0.0;
  std::map<InstanceId, double> mean_sched_delay_by_instance;
};

// Throws UndefinedMetricError when no request arrived in the window and
// PreconditionError for an empty or inverted window.
SummaryStats summarize(std::span<const RequestOutcome> outcomes,
                       const MetricsWindow& window);

struct ResultRow {
  std::string config_hash;
  double qps = 0.0;
  std::string scheduler;
  std::string policy;
  double slo_scale = 1.0;
  uint64_t seed = 0;
  SummaryStats stats;
  std::string error;  // empty on success
};

std::string result_header();
std::string format_result_row(const ResultRow& row);
void write_results(const std::filesystem::path& path,
                   const std::vector<ResultRow>& rows, bool append);
void write_outcomes(const std::filesystem::path& path,
                    std::span<const RequestOutcome> outcomes);

}  // namespace tiersim
