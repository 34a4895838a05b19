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


#include "tiersim/arch_cost.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "tiersim/errors.h"

namespace tiersim {
namespace {

// h=4, n=2, s=2, n_kv=2, m=8, L=1, b=2, d=1.
ModelArch TinyArch() { return {4, 2, 2, 2, 8, 1, 2, 1, 1}; }

ModelArch Llama8b() { return {4096, 32, 128, 8, 14336, 32, 128, 2, 1}; }

TEST(ArchValidateTest, AcceptsPresetShape) {
  EXPECT_NO_THROW(validate(Llama8b()));
  EXPECT_NO_THROW(validate(TinyArch()));
}

TEST(ArchValidateTest, RejectsBadFields) {
  ModelArch a = TinyArch();
  a.hidden_size = 5;
  EXPECT_THROW(validate(a), ConfigError);
  a = TinyArch();
  a.num_kv_heads = 3;
  a.num_heads = 2;
  EXPECT_THROW(validate(a), ConfigError);
  a = TinyArch();
  a.dtype_bytes = 0;
  EXPECT_THROW(validate(a), ConfigError);
}

TEST(TensorParallelTest, DividesShardedDimensions) {
  ModelArch a = Llama8b();
  a.tp_degree = 2;
  const ModelArch out = apply_tensor_parallel(a);
  EXPECT_EQ(out.hidden_size, 2048);
  EXPECT_EQ(out.num_heads, 16);
  EXPECT_EQ(out.ffn_intermediate, 7168);
  EXPECT_EQ(out.tp_degree, 1);
  EXPECT_EQ(out.head_size, 128);
}

TEST(TensorParallelTest, DegreeOneIsIdentity) {
  EXPECT_EQ(apply_tensor_parallel(Llama8b()), Llama8b());
}

TEST(TensorParallelTest, NonDivisibleDegreeFails) {
  ModelArch a = Llama8b();
  a.tp_degree = 3;
  EXPECT_THROW(apply_tensor_parallel(a), ConfigError);
}

TEST(KvBytesTest, GoldenValues) {
  EXPECT_EQ(kv_bytes_per_token({4096, 32, 128, 32, 14336, 32, 128, 2, 1}),
            524288);
  EXPECT_EQ(kv_bytes_per_token({1, 1, 1, 1, 1, 1, 1, 1, 1}), 2);
  EXPECT_EQ(kv_bytes_per_token(Llama8b()), 131072);
}

TEST(KvBytesTest, TwoThousandTokensNearTableValue) {
  const double gb = 2000.0 * static_cast<double>(kv_bytes_per_token(Llama8b())) /
                    1e9;
  EXPECT_NEAR(gb, 0.262144, 1e-9);
  EXPECT_LE(std::abs(gb - 0.24) / 0.24, 0.10);
}

TEST(PrefillCostTest, TinyArchSinglePrompt) {
  const std::vector<int64_t> p = {2};
  const CostBreakdown c = prefill_cost(TinyArch(), p);
  EXPECT_EQ(c.gemm_flops, 256.0);
  EXPECT_EQ(c.attn_flops, 32.0);
  EXPECT_EQ(c.flops, 288.0);
  EXPECT_EQ(c.gemm_mem, 224.0);
  EXPECT_EQ(c.attn_mem, 40.0);
  EXPECT_EQ(c.mem_bytes, 264.0);
}

TEST(PrefillCostTest, TwoPromptsScaleGemmAndDoubleAttention) {
  const std::vector<int64_t> one = {2};
  const std::vector<int64_t> two = {2, 2};
  const std::vector<int64_t> four = {4};
  const CostBreakdown a = prefill_cost(TinyArch(), one);
  const CostBreakdown b = prefill_cost(TinyArch(), two);
  const CostBreakdown c = prefill_cost(TinyArch(), four);
  EXPECT_EQ(b.attn_flops, 2.0 * a.attn_flops);
  EXPECT_EQ(b.attn_mem, 2.0 * a.attn_mem);
  EXPECT_EQ(b.gemm_flops, c.gemm_flops);
  EXPECT_EQ(b.gemm_mem, c.gemm_mem);
}

TEST(PrefillCostTest, EmptyListFails) {
  EXPECT_THROW(prefill_cost(TinyArch(), std::vector<int64_t>{}),
               PreconditionError);
}

TEST(DecodeCostTest, TinyArchSingleContext) {
  const std::vector<int64_t> ctx = {3};
  const CostBreakdown c = decode_cost(TinyArch(), ctx);
  EXPECT_EQ(c.gemm_flops, 128.0);
  EXPECT_EQ(c.attn_flops, 24.0);
  EXPECT_EQ(c.flops, 152.0);
  EXPECT_EQ(c.gemm_mem, 176.0);
  EXPECT_EQ(c.attn_mem, 32.0);
  EXPECT_EQ(c.mem_bytes, 208.0);
}

TEST(DecodeCostTest, IdenticalContextsDoubleAttention) {
  const std::vector<int64_t> one = {3};
  const std::vector<int64_t> two = {3, 3};
  const CostBreakdown a = decode_cost(TinyArch(), one);
  const CostBreakdown b = decode_cost(TinyArch(), two);
  EXPECT_EQ(b.attn_flops, 2.0 * a.attn_flops);
  EXPECT_EQ(b.attn_mem, 2.0 * a.attn_mem);
  EXPECT_GT(b.gemm_flops, a.gemm_flops);
}

TEST(DecodeCostTest, GemmIndependentOfContext) {
  const std::vector<int64_t> shortc = {1};
  const std::vector<int64_t> longc = {1000};
  const CostBreakdown a = decode_cost(Llama8b(), shortc);
  const CostBreakdown b = decode_cost(Llama8b(), longc);
  EXPECT_EQ(a.gemm_flops, b.gemm_flops);
  EXPECT_EQ(a.gemm_mem, b.gemm_mem);
  EXPECT_EQ(b.attn_flops, 1000.0 * a.attn_flops);
}

TEST(DecodeCostTest, EmptyListFails) {
  EXPECT_THROW(decode_cost(TinyArch(), std::vector<int64_t>{}),
               PreconditionError);
}

TEST(HybridCostTest, TinyArchChunkPlusDecode) {
  BatchComposition b;
  b.prefill_chunks = {{2, 2, 4}};
  b.decode_contexts = {3};
  const CostBreakdown c = hybrid_cost(TinyArch(), b);
  EXPECT_EQ(c.flops, 440.0);
  EXPECT_EQ(c.gemm_mem, 272.0);
  EXPECT_EQ(c.attn_mem, 72.0);
  EXPECT_EQ(c.mem_bytes, 344.0);
}

TEST(HybridCostTest, ReducesToDecodeCost) {
  BatchComposition b;
  b.decode_contexts = {3, 17, 5};
  const CostBreakdown h = hybrid_cost(Llama8b(), b);
  const CostBreakdown d = decode_cost(Llama8b(), b.decode_contexts);
  EXPECT_EQ(h.flops, d.flops);
  EXPECT_EQ(h.mem_bytes, d.mem_bytes);
}

TEST(HybridCostTest, ReducesToPrefillCost) {
  BatchComposition b;
  b.prefill_chunks = {{0, 300, 300}};
  const std::vector<int64_t> p = {300};
  const CostBreakdown h = hybrid_cost(Llama8b(), b);
  const CostBreakdown f = prefill_cost(Llama8b(), p);
  EXPECT_EQ(h.flops, f.flops);
  EXPECT_EQ(h.mem_bytes, f.mem_bytes);
}

TEST(HybridCostTest, InvalidChunkFails) {
  BatchComposition b;
  b.prefill_chunks = {{3, 2, 4}};
  EXPECT_THROW(hybrid_cost(TinyArch(), b), PreconditionError);
  EXPECT_THROW(hybrid_cost(TinyArch(), BatchComposition{}), PreconditionError);
}

TEST(HybridCostTest, ChunkedGemmSumsToWholePrompt) {
  const ModelArch a = Llama8b();
  const std::vector<int64_t> chunks = {512, 512, 512, 464};
  double gemm = 0.0;
  double attn = 0.0;
  double expected_gap = 0.0;
  int64_t done = 0;
  for (int64_t c : chunks) {
    BatchComposition b;
    b.prefill_chunks = {{done, c, 2000}};
    const CostBreakdown cost = hybrid_cost(a, b);
    gemm += cost.gemm_flops;
    attn += cost.attn_flops;
    if (done > 0) {
      expected_gap += static_cast<double>(c * c + done * c);
    }
    done += c;
  }
  const std::vector<int64_t> whole = {2000};
  const CostBreakdown w = prefill_cost(a, whole);
  // GEMM rows are linear in tokens; the weight read is per batch.
  const double per_row = 4.0 * 4096 * 4096 + 2.0 * 4096 * 14336;
  EXPECT_DOUBLE_EQ(gemm, 2000.0 * per_row * 32);
  EXPECT_DOUBLE_EQ(w.gemm_flops, gemm);
  EXPECT_LE(attn, w.attn_flops);
  EXPECT_DOUBLE_EQ(w.attn_flops - attn, 32.0 * 32.0 * 2.0 * 128.0 *
                                            expected_gap);
}

TEST(ArchScalingTest, LayersAndDtype) {
  ModelArch a = Llama8b();
  BatchComposition b;
  b.prefill_chunks = {{0, 100, 100}, {50, 25, 200}};
  b.decode_contexts = {40, 900};
  const CostBreakdown base = hybrid_cost(a, b);
  a.num_layers *= 2;
  const CostBreakdown layers = hybrid_cost(a, b);
  EXPECT_EQ(layers.flops, 2.0 * base.flops);
  EXPECT_EQ(layers.mem_bytes, 2.0 * base.mem_bytes);
  a = Llama8b();
  a.dtype_bytes *= 2;
  const CostBreakdown dtype = hybrid_cost(a, b);
  EXPECT_EQ(dtype.flops, base.flops);
  EXPECT_EQ(dtype.mem_bytes, 2.0 * base.mem_bytes);
}

TEST(ArchScalingTest, AddingRequestIncreasesCost) {
  BatchComposition b;
  b.prefill_chunks = {{0, 100, 100}};
  b.decode_contexts = {40};
  const CostBreakdown base = hybrid_cost(Llama8b(), b);
  BatchComposition more = b;
  more.decode_contexts.push_back(1);
  const CostBreakdown c1 = hybrid_cost(Llama8b(), more);
  EXPECT_GT(c1.flops, base.flops);
  EXPECT_GT(c1.mem_bytes, base.mem_bytes);
  more = b;
  more.prefill_chunks.push_back({0, 1, 1});
  const CostBreakdown c2 = hybrid_cost(Llama8b(), more);
  EXPECT_GT(c2.flops, base.flops);
  EXPECT_GT(c2.mem_bytes, base.mem_bytes);
}

TEST(ArchScalingTest, FiniteAtMillionTokens) {
  const std::vector<int64_t> p = {1000000};
  const CostBreakdown c = prefill_cost(Llama8b(), p);
  EXPECT_TRUE(std::isfinite(c.flops));
  EXPECT_TRUE(std::isfinite(c.mem_bytes));
  EXPECT_GT(c.flops, 0.0);
}

TEST(HybridCostTest, RandomReductionsAreBitIdentical) {
  std::mt19937_64 rng(7);
  auto pick = [&rng](int64_t lo, int64_t hi) {
    return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
  };
  for (int i = 0; i < 1000; ++i) {
    ModelArch a;
    a.num_kv_heads = pick(1, 4);
    a.num_heads = a.num_kv_heads * pick(1, 4);
    a.head_size = pick(1, 16);
    a.hidden_size = a.num_heads * a.head_size;
    a.ffn_intermediate = pick(1, 64);
    a.num_layers = pick(1, 8);
    a.attn_block_size = pick(1, 32);
    a.dtype_bytes = pick(1, 4);
    std::vector<int64_t> prompts(static_cast<std::size_t>(pick(1, 6)));
    BatchComposition pb;
    for (auto& p : prompts) {
      p = pick(1, 500);
      pb.prefill_chunks.push_back({0, p, p});
    }
    std::vector<int64_t> ctx(static_cast<std::size_t>(pick(1, 6)));
    for (auto& c : ctx) c = pick(1, 5000);
    BatchComposition db;
    db.decode_contexts = ctx;
    const CostBreakdown hp = hybrid_cost(a, pb);
    const CostBreakdown pp = prefill_cost(a, prompts);
    const CostBreakdown hd = hybrid_cost(a, db);
    const CostBreakdown dd = decode_cost(a, ctx);
    ASSERT_EQ(hp.flops, pp.flops);
    ASSERT_EQ(hp.mem_bytes, pp.mem_bytes);
    ASSERT_EQ(hd.flops, dd.flops);
    ASSERT_EQ(hd.mem_bytes, dd.mem_bytes);
  }
}

}  // namespace
}  // namespace tiersim
