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


#include "tiersim/config.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "tiersim/errors.h"

namespace tiersim {
namespace {

constexpr char kMinimal[] = R"(
[arch]
preset = mistral-7b

[topology]
num_lp = 2
num_hp = 1

[workload]
dataset = sharegpt
qps = 1.0
)";

std::string ErrorOf(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(ParseConfigTest, MinimalConfig) {
  const SimConfig c = parse_config_text(kMinimal);
  EXPECT_EQ(c.arch, arch_preset("mistral-7b"));
  EXPECT_EQ(c.topology.num_lp, 2);
  EXPECT_EQ(c.topology.num_hp, 1);
  EXPECT_EQ(c.slo.ttft_slo, 1.0);
  EXPECT_EQ(c.slo.tbt_slo, 0.15);
  EXPECT_EQ(c.workload.qps, 1.0);
  EXPECT_EQ(c.scheduler.variant, SchedulerVariant::kTwoTier);
  EXPECT_EQ(c.scheduler.policy, ValuePolicy::Kind::kEdf);
  EXPECT_NO_THROW(validate(c));
}

TEST(ParseConfigTest, UnknownKeyIsNamed) {
  const std::string err = ErrorOf("[topology]\nbatchsize = 64\n");
  EXPECT_NE(err.find("topology.batchsize"), std::string::npos) << err;
}

TEST(ParseConfigTest, UnknownSection) {
  EXPECT_NE(ErrorOf("[gpu]\ncount = 3\n").find("gpu"), std::string::npos);
}

TEST(ParseConfigTest, UnknownPreset) {
  EXPECT_NE(ErrorOf("[arch]\npreset = gpt-5\n").find("gpt-5"),
            std::string::npos);
}

TEST(ParseConfigTest, BadValues) {
  EXPECT_FALSE(ErrorOf("[scheduler]\ndrop = maybe\n").empty());
  EXPECT_FALSE(ErrorOf("[workload]\nqps = fast\n").empty());
  EXPECT_FALSE(ErrorOf("[scheduler]\npolicy = random\n").empty());
  EXPECT_FALSE(ErrorOf("[scheduler]\nvariant = orca\n").empty());
  EXPECT_FALSE(ErrorOf("[latency]\nmodel_file = m.ini\nc1 = 1\n").empty());
}

TEST(ParseConfigTest, OverridesSupersedeFile) {
  ConfigOverrides o;
  o.qps = 3.0;
  o.seed = 9;
  o.scheduler = "vllm";
  o.policy = "sjf";
  o.drop = true;
  o.elastic = false;
  o.slo_scale = 0.5;
  const SimConfig c = parse_config_text(kMinimal, o);
  EXPECT_EQ(c.workload.qps, 3.0);
  EXPECT_EQ(c.workload.seed, 9u);
  EXPECT_EQ(c.scheduler.variant, SchedulerVariant::kVllm);
  EXPECT_EQ(c.scheduler.policy, ValuePolicy::Kind::kSjf);
  EXPECT_TRUE(c.scheduler.drop);
  EXPECT_FALSE(c.scheduler.elastic);
  EXPECT_EQ(c.slo.slo_scale, 0.5);
}

TEST(ParseConfigTest, SloPresetFollowsModelAndDataset) {
  const SimConfig c = parse_config_text(
      "[arch]\npreset = qwen-14b\n[workload]\ndataset = longbench\n");
  EXPECT_EQ(c.slo.ttft_slo, 3.0);
  EXPECT_EQ(c.slo.tbt_slo, 0.15);
  const SimConfig d = parse_config_text(
      "[arch]\npreset = qwen-14b\n[slo]\nttft = 0.7\ntbt = 0.05\n");
  EXPECT_EQ(d.slo.ttft_slo, 0.7);
  EXPECT_EQ(d.slo.tbt_slo, 0.05);
}

TEST(ParseConfigTest, ExplicitArchFieldsOverridePreset) {
  const SimConfig c =
      parse_config_text("[arch]\npreset = llama3.1-8b\nnum_kv_heads = 32\n");
  EXPECT_EQ(c.arch.num_kv_heads, 32);
  EXPECT_EQ(c.arch.hidden_size, 4096);
}

TEST(ParseConfigTest, ModelFileRelativeToConfig) {
  const auto dir = std::filesystem::path(::testing::TempDir()) / "cfgdir";
  std::filesystem::create_directories(dir);
  save_model(dir / "model.ini", LatencyModel({0.5, 0.5, 0, 0, 1e-3}, {}));
  std::ofstream(dir / "run.ini") << "[latency]\nmodel_file = model.ini\n";
  const SimConfig c = parse_config(dir / "run.ini");
  EXPECT_EQ(c.latency.coefficients()[0], 0.5);
  EXPECT_EQ(c.latency.coefficients()[4], 1e-3);
}

TEST(ParseConfigTest, MissingFile) {
  EXPECT_THROW(parse_config("/nonexistent/run.ini"), ConfigError);
}

TEST(CanonicalTextTest, RoundTripsAndHashes) {
  ConfigOverrides o;
  o.qps = 7.25;
  const SimConfig c = parse_config_text(kMinimal, o);
  const std::string text = canonical_text(c);
  const SimConfig back = parse_config_text(text);
  EXPECT_EQ(canonical_text(back), text);
  const std::string h = config_hash(c);
  EXPECT_EQ(h.size(), 16u);
  EXPECT_EQ(h, config_hash(back));
  EXPECT_NE(h, config_hash(parse_config_text(kMinimal)));
}

TEST(CanonicalTextTest, ReferenceParsesToDefaults) {
  const std::string ref = config_reference();
  EXPECT_NE(ref.find("[scheduler]"), std::string::npos);
  EXPECT_EQ(canonical_text(parse_config_text(ref)), canonical_text(SimConfig{}));
}

TEST(ValidateTest, RejectsInvalidTopology) {
  SimConfig c;
  c.topology.num_lp = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = SimConfig{};
  c.topology.num_hp = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c.scheduler.offload = false;
  c.scheduler.tickets = false;
  EXPECT_NO_THROW(validate(c));
}

SimConfig SmallRun() {
  SimConfig c;
  c.workload.duration = 20.0;
  c.engine.warmup = 0.0;
  return c;
}

TEST(RunSweepTest, QpsBySeedsRowsInOrder) {
  RunSpec spec;
  spec.base = SmallRun();
  spec.axis = RunSpec::Axis::kQps;
  spec.values = {2.0, 1.0, 1.5};
  spec.seeds = {2, 1};
  const auto rows = run_sweep(spec);
  ASSERT_EQ(rows.size(), 6u);
  const double qps[] = {1.0, 1.0, 1.5, 1.5, 2.0, 2.0};
  const uint64_t seeds[] = {1, 2, 1, 2, 1, 2};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].qps, qps[i]);
    EXPECT_EQ(rows[i].seed, seeds[i]);
    EXPECT_TRUE(rows[i].error.empty()) << rows[i].error;
  }
}

TEST(RunSweepTest, RerunAndParallelismGiveIdenticalTable) {
  RunSpec spec;
  spec.base = SmallRun();
  spec.axis = RunSpec::Axis::kQps;
  spec.values = {1.0, 4.0};
  spec.seeds = {1, 2, 3};
  auto table = [](const std::vector<ResultRow>& rows) {
    std::string s;
    for (const auto& r : rows) s += format_result_row(r) + "\n";
    return s;
  };
  const std::string serial = table(run_sweep(spec));
  EXPECT_EQ(table(run_sweep(spec)), serial);
  spec.jobs = 3;
  EXPECT_EQ(table(run_sweep(spec)), serial);
}

TEST(RunSweepTest, SloScaleGoodputMonotone) {
  RunSpec spec;
  spec.base = SmallRun();
  spec.base.workload.qps = 20.0;
  spec.axis = RunSpec::Axis::kSloScale;
  spec.values = {0.25, 0.5, 1.0, 2.0, 4.0};
  spec.seeds = {1};
  const auto rows = run_sweep(spec);
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LE(rows[i - 1].stats.goodput, rows[i].stats.goodput);
    EXPECT_EQ(rows[i].slo_scale, spec.values[i]);
  }
}

TEST(RunSweepTest, FailedRunRecordedPerRow) {
  RunSpec spec;
  spec.base = SmallRun();
  spec.base.workload.duration = 1.0;
  spec.axis = RunSpec::Axis::kQps;
  spec.values = {1e-6, 50.0};
  const auto rows = run_sweep(spec);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].error.empty());
  EXPECT_TRUE(rows[1].error.empty()) << rows[1].error;
}

TEST(RunSweepTest, InvalidSpec) {
  RunSpec spec;
  spec.axis = RunSpec::Axis::kQps;
  EXPECT_THROW(run_sweep(spec), ConfigError);
  spec.values = {-1.0};
  EXPECT_THROW(run_sweep(spec), ConfigError);
  EXPECT_THROW(parse_axis("batch"), ConfigError);
}

}  // namespace
}  // namespace tiersim
