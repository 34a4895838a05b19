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


// tiersim: command-line front end for the serving simulator.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tiersim/config.h"
#include "tiersim/errors.h"
#include "tiersim/latency_model.h"
#include "tiersim/metrics.h"
#include "tiersim/sim_engine.h"
#include "tiersim/text_io.h"

namespace fs = std::filesystem;
using namespace tiersim;

namespace {

struct CommonOptions {
  std::string config;
  ConfigOverrides overrides;
};

void add_run_options(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "INI config file")->check(CLI::ExistingFile);
  app->add_option("--qps", o.overrides.qps, "arrival rate");
  app->add_option("--seed", o.overrides.seed, "workload seed");
  app->add_option("--duration", o.overrides.duration, "arrival window (s)");
  app->add_option("--scheduler", o.overrides.scheduler, "ascendra|vllm|sarathi");
  app->add_option("--policy", o.overrides.policy, "edf|sjf|fcfs|ljf");
  app->add_option("--slo-scale", o.overrides.slo_scale, "multiplies SLO targets");
  app->add_option("--drop", o.overrides.drop, "drop expired queued requests");
  app->add_option("--elastic", o.overrides.elastic, "elastic HP batch size");
  app->add_option("--tickets", o.overrides.tickets, "HP ticket entry");
}

SimConfig load(const CommonOptions& o) {
  if (o.config.empty()) return parse_config_text("", o.overrides);
  return parse_config(o.config, o.overrides);
}

void print_summary(const ResultRow& row) {
  const SummaryStats& s = row.stats;
  std::printf(
      "config %s  scheduler=%s policy=%s qps=%s slo_scale=%s seed=%llu\n"
      "  requests %lld  completed %lld  dropped %lld  violated %lld\n"
      "  goodput %.4f  p99 ttft %.4f s  mean tbt %.4f s  throughput %.1f "
      "tok/s\n"
      "  queue delay  lp %.4f s  hp %.4f s\n",
      row.config_hash.c_str(), row.scheduler.c_str(), row.policy.c_str(),
      format_double(row.qps).c_str(), format_double(row.slo_scale).c_str(),
      static_cast<unsigned long long>(row.seed),
      static_cast<long long>(s.counted), static_cast<long long>(s.completed),
      static_cast<long long>(s.dropped), static_cast<long long>(s.violated),
      s.goodput, s.p99_ttft, s.mean_tbt, s.throughput_tokens_s,
      s.mean_sched_delay_lp, s.mean_sched_delay_hp);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::string item;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == ',') {
      if (!item.empty()) out.push_back(parse_double(item, "--values"));
      item.clear();
    } else {
      item += text[i];
    }
  }
  return out;
}

int cmd_run(const CommonOptions& o, const std::string& out_dir, bool events,
            bool details) {
  const SimConfig config = load(o);
  const RunResult result = Simulation(config).run();
  const ResultRow row = make_result_row(config, result);
  print_summary(row);
  std::printf("  batches %lld  preemptions %lld  offloads %lld  tickets %lld  "
              "rejected %lld  clamped %lld\n",
              static_cast<long long>(result.counters.batches),
              static_cast<long long>(result.counters.preemptions),
              static_cast<long long>(result.counters.offloads),
              static_cast<long long>(result.counters.ticket_routed),
              static_cast<long long>(result.counters.rejected),
              static_cast<long long>(result.counters.clamped_predictions));
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_results(fs::path(out_dir) / "results.csv", {row}, true);
    if (events) write_event_log(fs::path(out_dir) / "events.csv", result.events);
    if (details) {
      const auto outcomes = result.outcomes();
      write_outcomes(fs::path(out_dir) / "requests.csv", outcomes);
    }
  }
  return 0;
}

int cmd_sweep(const CommonOptions& o, const std::string& axis,
              const std::string& values, const std::vector<uint64_t>& seeds,
              int jobs, bool resimulate, const std::string& out_dir) {
  RunSpec spec;
  spec.base = load(o);
  spec.axis = parse_axis(axis);
  spec.values = parse_list(values);
  spec.seeds = seeds;
  spec.jobs = jobs;
  spec.resimulate = resimulate;
  const auto rows = run_sweep(spec);
  std::cout << result_header() << '\n';
  int failures = 0;
  for (const auto& row : rows) {
    std::cout << format_result_row(row) << '\n';
    if (!row.error.empty()) {
      ++failures;
      std::cerr << "run failed (" << to_string(spec.axis) << " qps="
                << format_double(row.qps) << " slo_scale="
                << format_double(row.slo_scale) << " seed=" << row.seed
                << "): " << row.error << '\n';
    }
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_results(fs::path(out_dir) / "results.csv", rows, true);
  }
  return failures == 0 ? 0 : 1;
}

int cmd_fit(const std::string& records_path, const HardwareCaps& caps,
            double holdout, const std::string& out) {
  const auto records = read_records(records_path);
  const auto n_test = static_cast<std::size_t>(
      static_cast<double>(records.size()) * holdout);
  const std::span<const ObservedBatchRecord> all(records);
  const auto train = all.first(records.size() - n_test);
  const auto test = all.last(n_test);
  const FitResult fitted = fit(train, caps);
  save_model(out, fitted.model);
  std::printf("fitted on %zu records, in-sample median error %.2f%%\n",
              train.size(), 100.0 * fitted.median_rel_error);
  if (!test.empty()) {
    std::printf("held-out (%zu records): median error %.2f%%, %.1f%% within "
                "10%%\n",
                test.size(), 100.0 * median_relative_error(fitted.model, test),
                100.0 * fraction_within(fitted.model, test, 0.10));
  }
  std::printf("model written to %s\n", out.c_str());
  return 0;
}

int cmd_presets(bool reference) {
  if (reference) {
    std::cout << config_reference();
    return 0;
  }
  std::cout << "arch presets:\n";
  for (const auto& name : arch_preset_names()) {
    const ModelArch a = arch_preset(name);
    std::printf("  %-12s h=%lld n=%lld s=%lld n_kv=%lld m=%lld L=%lld "
                "kv/token=%lld B\n",
                name.c_str(), static_cast<long long>(a.hidden_size),
                static_cast<long long>(a.num_heads),
                static_cast<long long>(a.head_size),
                static_cast<long long>(a.num_kv_heads),
                static_cast<long long>(a.ffn_intermediate),
                static_cast<long long>(a.num_layers),
                static_cast<long long>(kv_bytes_per_token(a)));
  }
  std::cout << "slo presets (ttft, tbt seconds):\n";
  for (const auto& [model, dataset] : slo_preset_names()) {
    const SloSpec s = slo_preset(model, dataset);
    std::printf("  %-12s %-10s %s %s\n", model.c_str(), dataset.c_str(),
                format_double(s.ttft_slo).c_str(),
                format_double(s.tbt_slo).c_str());
  }
  std::cout << "datasets: sharegpt longbench\n"
               "schedulers: ascendra vllm sarathi\n"
               "policies: edf sjf fcfs ljf\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tiersim: batch-level simulator for two-tier LLM serving"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  std::string run_out;
  bool run_events = false;
  bool run_details = false;
  auto* run = app.add_subcommand("run", "simulate one configuration");
  add_run_options(run, run_opts);
  run->add_option("--out", run_out, "output directory");
  run->add_flag("--events", run_events, "also write events.csv");
  run->add_flag("--details", run_details, "also write requests.csv");

  CommonOptions sweep_opts;
  std::string axis = "qps";
  std::string values;
  std::vector<uint64_t> seeds;
  int jobs = 1;
  bool resimulate = false;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "sweep qps or slo_scale");
  add_run_options(sweep, sweep_opts);
  sweep->add_option("--axis", axis, "qps | slo_scale")->capture_default_str();
  sweep->add_option("--values", values, "comma-separated sweep values")
      ->required();
  sweep->add_option("--seeds", seeds, "seeds (default: config seed)")
      ->delimiter(',');
  sweep->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);
  sweep->add_flag("--resimulate", resimulate,
                  "simulate every slo_scale point instead of re-judging");
  sweep->add_option("--out", sweep_out, "output directory");

  std::string records;
  std::string model_out = "latency_model.ini";
  HardwareCaps caps;
  double holdout = 0.2;
  auto* fitcmd = app.add_subcommand("fit-model", "fit the latency regression");
  fitcmd->add_option("--records", records, "observed batch records")
      ->required()
      ->check(CLI::ExistingFile);
  fitcmd->add_option("--flops-per-s", caps.flops_per_s)->capture_default_str();
  fitcmd->add_option("--mem-bytes-per-s", caps.mem_bytes_per_s)
      ->capture_default_str();
  fitcmd->add_option("--holdout", holdout, "fraction held out for evaluation")
      ->check(CLI::Range(0.0, 0.9))
      ->capture_default_str();
  fitcmd->add_option("--out", model_out, "model file")->capture_default_str();

  std::string synth_out = "records.csv";
  std::string synth_arch = "mistral-7b";
  std::size_t synth_count = 500;
  double synth_noise = 0.05;
  uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand(
      "synth-records", "write synthetic batch records from the default model");
  synth->add_option("--arch", synth_arch)->capture_default_str();
  synth->add_option("--count", synth_count)->capture_default_str();
  synth->add_option("--noise", synth_noise)->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--out", synth_out)->capture_default_str();

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand(
      "validate-config", "check a config and print its resolved form");
  validate_cmd->add_option("--config", validate_path)
      ->required()
      ->check(CLI::ExistingFile);

  bool reference = false;
  auto* presets = app.add_subcommand("presets", "list built-in presets");
  presets->add_flag("--reference", reference,
                    "print every config key with its default");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_opts, run_out, run_events, run_details);
    if (*sweep) {
      return cmd_sweep(sweep_opts, axis, values, seeds, jobs, resimulate,
                       sweep_out);
    }
    if (*fitcmd) return cmd_fit(records, caps, holdout, model_out);
    if (*synth) {
      const ModelArch arch = apply_tensor_parallel(arch_preset(synth_arch));
      write_records(synth_out, synth_records(arch, LatencyModel{}, synth_count,
                                             synth_noise, synth_seed));
      std::printf("wrote %zu records to %s\n", synth_count, synth_out.c_str());
      return 0;
    }
    if (*validate_cmd) {
      const SimConfig config = parse_config(validate_path);
      std::cout << "# hash " << config_hash(config) << '\n'
                << canonical_text(config);
      return 0;
    }
    if (*presets) return cmd_presets(reference);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
