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

#include "tiersim/workload.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "tiersim/errors.h"
#include "tiersim/text_io.h"

namespace tiersim {

std::string_view to_string(RequestState state) {
  switch (state) {
    case RequestState::kQueued:
      return "queued";
    case RequestState::kPrefilling:
      return "prefilling";
    case RequestState::kDecoding:
      return "decoding";
    case RequestState::kCompleted:
      return "completed";
    case RequestState::kDropped:
      return "dropped";
  }
  return "unknown";
}

bool is_allowed_transition(RequestState from, RequestState to) {
  using S = RequestState;
  switch (from) {
    case S::kQueued:
      return to == S::kPrefilling || to == S::kDropped;
    case S::kPrefilling:
      return to == S::kDecoding || to == S::kQueued;
    case S::kDecoding:
      return to == S::kQueued || to == S::kCompleted;
    case S::kCompleted:
    case S::kDropped:
      return false;
  }
  return false;
}

void Request::transition(RequestState to) {
  if (!is_allowed_transition(state, to)) {
    throw InvariantViolation("request " + std::to_string(id) +
                             ": illegal transition " +
                             std::string(to_string(state)) + " -> " +
                             std::string(to_string(to)));
  }
  state = to;
}

namespace {

struct SloRow {
  const char* model;
  const char* dataset;
  double ttft;
  double tbt;
};

// Evaluation SLO table (seconds).
constexpr SloRow kSloTable[] = {
    {"mistral-7b", "sharegpt", 1.0, 0.15},
    {"llama3.1-8b", "sharegpt", 1.0, 0.15},
    {"qwen-14b", "sharegpt", 1.5, 0.15},
    {"mistral-7b", "longbench", 2.5, 0.15},
    {"llama3.1-8b", "longbench", 2.5, 0.15},
    {"qwen-14b", "longbench", 3.0, 0.15},
};

int64_t clamp_len(double v, int64_t max_len) {
  if (!(v >= 1.0)) return 1;
  if (v >= static_cast<double>(max_len)) return max_len;
  return static_cast<int64_t>(std::llround(v));
}

double sample_length(const LengthDist& dist, std::mt19937_64& rng) {
  double total = 0.0;
  for (const auto& c : dist.components) total += c.weight;
  std::uniform_real_distribution<double> pick(0.0, total);
  double u = pick(rng);
  const LengthComponent* chosen = &dist.components.back();
  for (const auto& c : dist.components) {
    if (u < c.weight) {
      chosen = &c;
      break;
    }
    u -= c.weight;
  }
  if (chosen->kind == LengthComponent::Kind::kLognormal) {
    std::lognormal_distribution<double> d(chosen->a, chosen->b);
    return d(rng);
  }
  std::uniform_real_distribution<double> d(chosen->a, chosen->b);
  return d(rng);
}

void validate(const LengthDist& dist, const char* which) {
  if (dist.components.empty()) {
    throw ConfigError(std::string(which) + " length distribution is empty");
  }
  for (const auto& c : dist.components) {
    if (!(c.weight > 0.0)) {
      throw ConfigError(std::string(which) + ": component weight must be > 0");
    }
    if (c.kind == LengthComponent::Kind::kLognormal && !(c.b > 0.0)) {
      throw ConfigError(std::string(which) + ": lognormal sigma must be > 0");
    }
    if (c.kind == LengthComponent::Kind::kUniform && !(c.b >= c.a)) {
      throw ConfigError(std::string(which) + ": uniform needs low <= high");
    }
  }
}

}  // namespace

SloSpec slo_preset(std::string_view model, std::string_view dataset) {
  for (const auto& row : kSloTable) {
    if (model == row.model && dataset == row.dataset) {
      return SloSpec{row.ttft, row.tbt, 1.0};
    }
  }
  throw ConfigError("no SLO preset for model '" + std::string(model) +
                    "' and dataset '" + std::string(dataset) + "'");
}

std::vector<std::pair<std::string, std::string>> slo_preset_names() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& row : kSloTable) out.emplace_back(row.model, row.dataset);
  return out;
}

std::vector<double> poisson_arrivals(double rate_qps, double duration_s,
                                     uint64_t seed) {
  if (rate_qps < 0.0 || duration_s < 0.0) {
    throw PreconditionError("arrival rate and duration must be >= 0");
  }
  std::vector<double> times;
  if (rate_qps == 0.0 || duration_s == 0.0) return times;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate_qps);
  double t = gap(rng);
  while (t < duration_s) {
    times.push_back(t);
    t += gap(rng);
  }
  return times;
}

std::vector<TraceEntry> load_trace(const std::filesystem::path& path) {
  const auto rows = read_delimited(path, 2);
  std::vector<TraceEntry> entries;
  entries.reserve(rows.size());
  for (const auto& row : rows) {
    TraceEntry e{row.integer(0), row.integer(1)};
    if (e.prompt_len < 1 || e.output_len < 1) {
      throw ParseError(row.where() + ": lengths must be >= 1");
    }
    entries.push_back(e);
  }
  return entries;
}

void save_trace(const std::filesystem::path& path,
                const std::vector<TraceEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << "prompt_len,output_len\n";
  for (const auto& e : entries) out << e.prompt_len << ',' << e.output_len << '\n';
}

TraceDistSpec dataset_preset(std::string_view dataset) {
  using K = LengthComponent::Kind;
  TraceDistSpec spec;
  if (dataset == "sharegpt") {
    spec.prompt.components = {{K::kLognormal, 0.8, 5.3, 1.0},
                              {K::kUniform, 0.2, 800.0, 2400.0}};
    spec.output.components = {{K::kLognormal, 1.0, 5.2, 0.8}};
    spec.max_prompt_len = 4096;
    spec.max_output_len = 2048;
  } else if (dataset == "longbench") {
    spec.prompt.components = {{K::kLognormal, 1.0, 8.0, 0.5}};
    spec.output.components = {{K::kLognormal, 1.0, 5.0, 0.3}};
    spec.max_prompt_len = 8192;
    spec.max_output_len = 512;
  } else {
    throw ConfigError("unknown dataset '" + std::string(dataset) +
                      "' (expected sharegpt or longbench)");
  }
  return spec;
}

void validate(const TraceDistSpec& spec) {
  validate(spec.prompt, "prompt");
  validate(spec.output, "output");
  if (spec.max_prompt_len < 1 || spec.max_output_len < 1) {
    throw ConfigError("max lengths must be >= 1");
  }
}

std::vector<TraceEntry> synth_trace(const TraceDistSpec& spec,
                                    std::size_t count, uint64_t seed) {
  validate(spec);
  std::mt19937_64 rng(seed);
  std::vector<TraceEntry> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double p = sample_length(spec.prompt, rng);
    const double o = sample_length(spec.output, rng);
    out.push_back({clamp_len(p, spec.max_prompt_len),
                   clamp_len(o, spec.max_output_len)});
  }
  return out;
}

std::vector<Request> build_requests(const std::vector<TraceEntry>& entries,
                                    const std::vector<double>& arrivals,
                                    const SloSpec& slo, uint64_t seed) {
  if (!arrivals.empty() && entries.empty()) {
    throw PreconditionError("build_requests: no trace entries");
  }
  if (!(slo.ttft_slo > 0.0) || !(slo.tbt_slo > 0.0) || !(slo.slo_scale > 0.0)) {
    throw ConfigError("SLO values and slo_scale must be positive");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(
      0, entries.empty() ? 0 : entries.size() - 1);
  const bool sample = entries.size() < arrivals.size();
  std::vector<Request> out;
  out.reserve(arrivals.size());
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    const TraceEntry& e = sample ? entries[pick(rng)] : entries[i];
    Request r;
    r.id = static_cast<RequestId>(i);
    r.arrival_time = arrivals[i];
    r.prompt_len = e.prompt_len;
    r.output_len = e.output_len;
    r.effective_prompt_len = e.prompt_len;
    r.ttft_slo = slo.scaled_ttft();
    r.tbt_slo = slo.scaled_tbt();
    r.enqueue_time = arrivals[i];
    out.push_back(r);
  }
  return out;
}

}  // namespace tiersim
