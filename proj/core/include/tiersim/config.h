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

#include "tiersim/metrics.h"
#include "tiersim/sim_engine.h"

namespace tiersim {

// Model shapes: "mistral-7b", "llama3.1-8b", "qwen-14b".
ModelArch arch_preset(std::string_view name);
std::vector<std::string> arch_preset_names();

// Command-line overrides; each one is applied to the parsed INI tree
// before resolution, so it behaves exactly like the matching config key.
struct ConfigOverrides {
  std::optional<double> qps;
  std::optional<uint64_t> seed;
  std::optional<double> duration;
  std::optional<std::string> scheduler;
  std::optional<std::string> policy;
  std::optional<double> slo_scale;
  std::optional<bool> drop;
  std::optional<bool> elastic;
  std::optional<bool> tickets;
};

// INI sections: [arch] [latency] [topology] [slo] [scheduler] [workload]
// [engine]. Unknown sections or keys are errors naming "section.key".
// Relative file paths inside the config resolve against `base_dir`.
SimConfig parse_config_text(std::string_view text,
                            const ConfigOverrides& overrides = {},
                            const std::filesystem::path& base_dir = {});
SimConfig parse_config(const std::filesystem::path& path,
                       const ConfigOverrides& overrides = {});

// Every resolved field, in a fixed order. Parsing it back yields the same
// config.
std::string canonical_text(const SimConfig& config);
// 16 hex digits of FNV-1a over canonical_text.
std::string config_hash(const SimConfig& config);

// Reference of every key with its default, as INI comments.
std::string config_reference();

// Summary row for one finished run, with SLOs judged at `slo_factor` times
// the run's own targets.
ResultRow make_result_row(const SimConfig& config, const RunResult& result,
                          double slo_factor = 1.0);

struct RunSpec {
  enum class Axis { kNone, kQps, kSloScale };

  SimConfig base;
  Axis axis = Axis::kNone;
  std::vector<double> values;
  std::vector<uint64_t> seeds;
  int jobs = 1;
  // For the slo_scale axis: simulate each point instead of re-judging one
  // run per seed at every scale.
  bool resimulate = false;
};

std::string_view to_string(RunSpec::Axis axis);
RunSpec::Axis parse_axis(std::string_view name);

// One row per (value, seed), sorted by value then seed. A failed run yields
// a row with `error` set; the sweep continues.
std::vector<ResultRow> run_sweep(const RunSpec& spec);

}  // namespace tiersim
