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


#include "tiersim/metrics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "tiersim/errors.h"
#include "tiersim/text_io.h"

namespace tiersim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_or_nan(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

std::optional<double> mean_tbt_of(double first, double completion,
                                  int64_t output_len) {
  if (output_len <= 1) return std::nullopt;
  return (completion - first) / static_cast<double>(output_len - 1);
}

std::string csv_field(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

RequestOutcome outcome_of(const Request& r, bool served_on_hp) {
  RequestOutcome o;
  o.id = r.id;
  o.arrival_time = r.arrival_time;
  o.output_len = r.output_len;
  o.ttft_slo = r.ttft_slo;
  o.tbt_slo = r.tbt_slo;
  o.completed = r.state == RequestState::kCompleted;
  o.dropped = r.state == RequestState::kDropped;
  if (r.first_token_time) o.ttft = *r.first_token_time - r.arrival_time;
  if (o.completed && r.first_token_time && r.completion_time) {
    o.mean_tbt = mean_tbt_of(*r.first_token_time, *r.completion_time,
                             r.output_len);
  }
  if (r.prefill_start_time) {
    o.scheduling_delay = *r.prefill_start_time - r.arrival_time;
    o.queue_delay = *r.prefill_start_time - r.enqueue_time;
  }
  o.tokens_generated = r.tokens_decoded;
  o.home_instance = r.home_instance;
  o.offloaded = r.offloaded;
  o.served_on_hp = served_on_hp;
  return o;
}

std::vector<RequestOutcome> outcomes_from_events(
    const std::vector<EventRecord>& events, double ttft_slo, double tbt_slo) {
  std::unordered_map<RequestId, RequestOutcome> by_id;
  std::unordered_map<RequestId, double> enqueue;
  std::unordered_map<RequestId, double> first_token;
  for (const auto& e : events) {
    if (e.kind == EventKind::kTicket || e.kind == EventKind::kBatch) continue;
    if (e.kind == EventKind::kArrival) {
      RequestOutcome& o = by_id[e.request];
      o.id = e.request;
      o.arrival_time = e.time;
      o.ttft_slo = ttft_slo;
      o.tbt_slo = tbt_slo;
      o.home_instance = e.instance;
      enqueue[e.request] = e.time;
      continue;
    }
    const auto it = by_id.find(e.request);
    if (it == by_id.end()) {
      throw ParseError("event '" + std::string(to_string(e.kind)) +
                       "' for request " + std::to_string(e.request) +
                       " before its arrival");
    }
    RequestOutcome& o = it->second;
    switch (e.kind) {
      case EventKind::kOffloadArrive:
        o.offloaded = true;
        o.home_instance = e.instance;
        enqueue[e.request] = e.time;
        break;
      case EventKind::kPrefillStart:
        o.scheduling_delay = e.time - o.arrival_time;
        o.queue_delay = e.time - enqueue[e.request];
        o.served_on_hp = e.detail == 1;
        break;
      case EventKind::kFirstToken:
        first_token[e.request] = e.time;
        o.ttft = e.time - o.arrival_time;
        break;
      case EventKind::kComplete: {
        o.completed = true;
        o.output_len = e.detail;
        o.tokens_generated = e.detail;
        const auto ft = first_token.find(e.request);
        if (ft == first_token.end()) {
          throw ParseError("request " + std::to_string(e.request) +
                           " completed without a first token");
        }
        o.mean_tbt = mean_tbt_of(ft->second, e.time, e.detail);
        break;
      }
      case EventKind::kDrop:
        o.dropped = true;
        break;
      default:
        break;
    }
  }
  std::vector<RequestOutcome> out;
  out.reserve(by_id.size());
  for (auto& [id, o] : by_id) out.push_back(o);
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

bool meets_slo(const RequestOutcome& o) {
  if (!o.completed || !o.ttft || *o.ttft > o.ttft_slo) return false;
  if (o.output_len <= 1) return true;
  return o.mean_tbt && *o.mean_tbt <= o.tbt_slo;
}

double goodput(std::span<const RequestOutcome> outcomes) {
  if (outcomes.empty()) {
    throw UndefinedMetricError("goodput of an empty outcome set");
  }
  const auto good = std::count_if(outcomes.begin(), outcomes.end(), meets_slo);
  return static_cast<double>(good) / static_cast<double>(outcomes.size());
}

std::vector<RequestOutcome> rescale_slo(std::span<const RequestOutcome> outcomes,
                                        double scale) {
  if (!(scale > 0.0)) throw PreconditionError("slo scale must be positive");
  std::vector<RequestOutcome> out(outcomes.begin(), outcomes.end());
  for (auto& o : out) {
    o.ttft_slo *= scale;
    o.tbt_slo *= scale;
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw UndefinedMetricError("percentile of no values");
  if (!(q >= 0.0 && q <= 100.0)) {
    throw PreconditionError("percentile q must be in [0, 100]");
  }
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

SummaryStats summarize(std::span<const RequestOutcome> outcomes,
                       const MetricsWindow& window) {
  if (!(window.end > window.start)) {
    throw PreconditionError("metrics window must have end > start");
  }
  std::vector<RequestOutcome> in;
  for (const auto& o : outcomes) {
    if (o.arrival_time >= window.start && o.arrival_time < window.end) {
      in.push_back(o);
    }
  }
  SummaryStats s;
  s.goodput = goodput(in);
  const double span_s = window.end - window.start;
  std::vector<double> ttfts, tbts, lp_delay, hp_delay;
  std::map<InstanceId, std::vector<double>> by_instance;
  int64_t tokens = 0;
  for (const auto& o : in) {
    ++s.counted;
    if (o.completed) ++s.completed;
    if (o.dropped) ++s.dropped;
    if (meets_slo(o)) {
      ++s.good;
    } else if (o.completed) {
      ++s.violated;
    }
    tokens += o.tokens_generated;
    if (o.ttft) ttfts.push_back(*o.ttft);
    if (o.mean_tbt) tbts.push_back(*o.mean_tbt);
    if (o.queue_delay) {
      (o.served_on_hp ? hp_delay : lp_delay).push_back(*o.queue_delay);
      by_instance[o.home_instance].push_back(*o.queue_delay);
    }
  }
  s.throughput_tokens_s = static_cast<double>(tokens) / span_s;
  s.throughput_requests_s = static_cast<double>(s.completed) / span_s;
  s.mean_ttft = mean_or_nan(ttfts);
  if (!ttfts.empty()) {
    s.p50_ttft = percentile(ttfts, 50);
    s.p90_ttft = percentile(ttfts, 90);
    s.p99_ttft = percentile(ttfts, 99);
  } else {
    s.p50_ttft = s.p90_ttft = s.p99_ttft = kNaN;
  }
  s.mean_tbt = mean_or_nan(tbts);
  s.mean_sched_delay_lp = mean_or_nan(lp_delay);
  s.mean_sched_delay_hp = mean_or_nan(hp_delay);
  for (const auto& [id, v] : by_instance) {
    s.mean_sched_delay_by_instance[id] = mean_or_nan(v);
  }
  return s;
}

std::string result_header() {
  return "config_hash,qps,scheduler,policy,slo_scale,seed,goodput,p99_ttft,"
         "mean_tbt,throughput_tokens_s,dropped,violated,completed,counted,"
         "mean_sched_delay_lp,mean_sched_delay_hp,error";
}

std::string format_result_row(const ResultRow& row) {
  std::ostringstream out;
  const SummaryStats& s = row.stats;
  out << row.config_hash << ',' << format_double(row.qps) << ','
      << row.scheduler << ',' << row.policy << ','
      << format_double(row.slo_scale) << ',' << row.seed << ',';
  if (row.error.empty()) {
    out << format_double(s.goodput) << ',' << format_double(s.p99_ttft) << ','
        << format_double(s.mean_tbt) << ','
        << format_double(s.throughput_tokens_s) << ',' << s.dropped << ','
        << s.violated << ',' << s.completed << ',' << s.counted << ','
        << format_double(s.mean_sched_delay_lp) << ','
        << format_double(s.mean_sched_delay_hp) << ',';
  } else {
    out << ",,,,,,,,,," << csv_field(row.error);
  }
  return out.str();
}

void write_results(const std::filesystem::path& path,
                   const std::vector<ResultRow>& rows, bool append) {
  const bool fresh = !append || !std::filesystem::exists(path) ||
                     std::filesystem::file_size(path) == 0;
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  if (fresh) out << result_header() << '\n';
  for (const auto& row : rows) out << format_result_row(row) << '\n';
}

void write_outcomes(const std::filesystem::path& path,
                    std::span<const RequestOutcome> outcomes) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << "id,arrival_time,output_len,completed,dropped,ttft,mean_tbt,"
         "scheduling_delay,queue_delay,home_instance,offloaded,served_on_hp,"
         "meets_slo\n";
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (const auto& o : outcomes) {
    out << o.id << ',' << format_double(o.arrival_time) << ',' << o.output_len
        << ',' << o.completed << ',' << o.dropped << ',' << opt(o.ttft) << ','
        << opt(o.mean_tbt) << ',' << opt(o.scheduling_delay) << ','
        << opt(o.queue_delay) << ',' << o.home_instance << ',' << o.offloaded
        << ',' << o.served_on_hp << ',' << meets_slo(o) << '\n';
  }
}

}  // namespace tiersim
