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
#include <span>
#include <string>
#include <vector>

namespace tiersim {

// Transformer shape. Symbols follow the usual notation: h = hidden_size,
// n = num_heads, s = head_size, m = ffn_intermediate, L = num_layers,
// b = attn_block_size (KV block of the flash-attention kernel),
// d = dtype_bytes.
struct ModelArch {
  int64_t hidden_size = 0;
  int64_t num_heads = 0;
  int64_t head_size = 0;
  int64_t num_kv_heads = 0;
  int64_t ffn_intermediate = 0;
  int64_t num_layers = 0;
  int64_t attn_block_size = 0;
  int64_t dtype_bytes = 0;
  int64_t tp_degree = 1;

  bool operator==(const ModelArch&) const = default;
};

// Throws ConfigError naming the first offending field.
void validate(const ModelArch& arch);

// Divides h, n, n_kv and m by the tensor-parallel degree. The result
// describes the per-GPU shard and has tp_degree == 1.
ModelArch apply_tensor_parallel(const ModelArch& arch);

// 2 (K and V) * n_kv * s * L * d.
int64_t kv_bytes_per_token(const ModelArch& arch);

struct PrefillChunk {
  int64_t processed = 0;  // prompt tokens already in the KV cache (l_i)
  int64_t chunk = 0;      // tokens prefilled in this batch (c_i)
  int64_t prompt = 0;     // full prompt length (p_i)
};

struct BatchComposition {
  std::vector<PrefillChunk> prefill_chunks;
  // prompt + generated tokens so far, per decode request
  std::vector<int64_t> decode_contexts;

  bool empty() const {
    return prefill_chunks.empty() && decode_contexts.empty();
  }
  int64_t prefill_tokens() const;
};

// FLOPs and bytes moved between HBM and SRAM for one batch over all layers.
struct CostBreakdown {
  double flops = 0.0;
  double mem_bytes = 0.0;
  double gemm_flops = 0.0;
  double attn_flops = 0.0;
  double gemm_mem = 0.0;
  double attn_mem = 0.0;
};

// Un-chunked prefill of full prompts. Throws PreconditionError on an empty
// list or a non-positive length.
CostBreakdown prefill_cost(const ModelArch& arch,
                           std::span<const int64_t> prompt_lens);

// One decode step for each context. Attention traffic is the upper bound
// that reloads every cached K/V vector for every request.
CostBreakdown decode_cost(const ModelArch& arch,
                          std::span<const int64_t> context_lens);

// Mixed batch of prefill chunks and decodes. Weights are read once for the
// whole batch. A chunk starting at processed == 0 is charged its own
// (full, non-causal) self-attention so that an un-chunked prompt costs
// exactly what prefill_cost charges.
CostBreakdown hybrid_cost(const ModelArch& arch, const BatchComposition& batch);

// Throws PreconditionError if a chunk or context violates its invariants.
void validate(const BatchComposition& batch);

}  // namespace tiersim
