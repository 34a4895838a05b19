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

#include <numeric>
#include <string>

#include "tiersim/errors.h"

namespace tiersim {

namespace {

struct Accum {
  double flops = 0.0;
  double mem_elems = 0.0;
};

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

// Projection and FFN GEMMs for `tokens` rows, one layer. Weights
// (4h^2 + 2hm) are read once regardless of the row count.
Accum gemm_layer(const ModelArch& a, int64_t tokens) {
  const double t = static_cast<double>(tokens);
  const double h = static_cast<double>(a.hidden_size);
  const double m = static_cast<double>(a.ffn_intermediate);
  Accum g;
  g.flops = 4.0 * t * h * h + 2.0 * t * h * m;
  g.mem_elems = 8.0 * t * h + 4.0 * h * h + 2.0 * h * m + 2.0 * t * m;
  return g;
}

// Full self-attention over p tokens, one head, one layer.
void add_full_prompt(const ModelArch& a, int64_t p, Accum& acc) {
  const double pd = static_cast<double>(p);
  const double s = static_cast<double>(a.head_size);
  const double blocks = static_cast<double>(ceil_div(p, a.attn_block_size));
  acc.flops += 2.0 * pd * pd * s;
  acc.mem_elems += 2.0 * pd * s + 3.0 * pd * s * blocks;
}

// Chunk of c tokens attending to l cached tokens.
void add_chunk(const ModelArch& a, int64_t l, int64_t c, Accum& acc) {
  const double ld = static_cast<double>(l);
  const double cd = static_cast<double>(c);
  const double s = static_cast<double>(a.head_size);
  const double blocks = static_cast<double>(ceil_div(l, a.attn_block_size));
  acc.flops += 2.0 * s * ld * cd;
  acc.mem_elems += 2.0 * ld * s + 3.0 * cd * s * blocks;
}

void add_decode(const ModelArch& a, int64_t context, Accum& acc) {
  const double lh = static_cast<double>(context);
  const double s = static_cast<double>(a.head_size);
  acc.flops += 2.0 * lh * s;
  acc.mem_elems += 2.0 * lh * s + 2.0 * s;
}

CostBreakdown finalize(const ModelArch& a, const Accum& gemm,
                       const Accum& attn) {
  const double layers = static_cast<double>(a.num_layers);
  const double heads = static_cast<double>(a.num_heads);
  const double d = static_cast<double>(a.dtype_bytes);
  CostBreakdown c;
  c.gemm_flops = layers * gemm.flops;
  c.attn_flops = layers * (heads * attn.flops);
  c.gemm_mem = layers * (gemm.mem_elems * d);
  c.attn_mem = layers * (heads * attn.mem_elems * d);
  c.flops = c.gemm_flops + c.attn_flops;
  c.mem_bytes = c.gemm_mem + c.attn_mem;
  return c;
}

void require_positive(int64_t v, const char* field) {
  if (v <= 0) {
    throw ConfigError(std::string("model arch: ") + field +
                      " must be a positive integer, got " +
                      std::to_string(v));
  }
}

}  // namespace

void validate(const ModelArch& a) {
  require_positive(a.hidden_size, "hidden_size");
  require_positive(a.num_heads, "num_heads");
  require_positive(a.head_size, "head_size");
  require_positive(a.num_kv_heads, "num_kv_heads");
  require_positive(a.ffn_intermediate, "ffn_intermediate");
  require_positive(a.num_layers, "num_layers");
  require_positive(a.attn_block_size, "attn_block_size");
  require_positive(a.dtype_bytes, "dtype_bytes");
  require_positive(a.tp_degree, "tp_degree");
  if (a.hidden_size != a.num_heads * a.head_size) {
    throw ConfigError("model arch: hidden_size must equal num_heads * "
                      "head_size (" + std::to_string(a.hidden_size) +
                      " != " + std::to_string(a.num_heads) + " * " +
                      std::to_string(a.head_size) + ")");
  }
  if (a.num_heads % a.num_kv_heads != 0) {
    throw ConfigError("model arch: num_kv_heads must divide num_heads");
  }
}

ModelArch apply_tensor_parallel(const ModelArch& arch) {
  validate(arch);
  const int64_t tp = arch.tp_degree;
  if (tp == 1) return arch;
  auto check = [tp](int64_t v, const char* field) {
    if (v % tp != 0) {
      throw ConfigError(std::string("tensor parallel degree ") +
                        std::to_string(tp) + " does not divide " + field +
                        " (" + std::to_string(v) + ")");
    }
  };
  check(arch.num_heads, "num_heads");
  check(arch.num_kv_heads, "num_kv_heads");
  check(arch.ffn_intermediate, "ffn_intermediate");
  check(arch.hidden_size, "hidden_size");
  ModelArch out = arch;
  out.hidden_size /= tp;
  out.num_heads /= tp;
  out.num_kv_heads /= tp;
  out.ffn_intermediate /= tp;
  out.tp_degree = 1;
  return out;
}

int64_t kv_bytes_per_token(const ModelArch& a) {
  return 2 * a.num_kv_heads * a.head_size * a.num_layers * a.dtype_bytes;
}

int64_t BatchComposition::prefill_tokens() const {
  int64_t t = 0;
  for (const auto& c : prefill_chunks) t += c.chunk;
  return t;
}

void validate(const BatchComposition& batch) {
  if (batch.empty()) {
    throw PreconditionError("batch composition is empty");
  }
  for (const auto& c : batch.prefill_chunks) {
    if (c.processed < 0 || c.chunk < 1 || c.prompt < 1 ||
        c.processed + c.chunk > c.prompt) {
      throw PreconditionError(
          "invalid prefill chunk (processed=" + std::to_string(c.processed) +
          ", chunk=" + std::to_string(c.chunk) +
          ", prompt=" + std::to_string(c.prompt) + ")");
    }
  }
  for (int64_t ctx : batch.decode_contexts) {
    if (ctx < 1) {
      throw PreconditionError("decode context length must be >= 1");
    }
  }
}

CostBreakdown prefill_cost(const ModelArch& arch,
                           std::span<const int64_t> prompt_lens) {
  if (prompt_lens.empty()) {
    throw PreconditionError(
        "prefill_cost needs at least one prompt; use decode_cost or "
        "hybrid_cost for batches without prefills");
  }
  int64_t total = 0;
  Accum attn;
  for (int64_t p : prompt_lens) {
    if (p < 1) throw PreconditionError("prompt length must be >= 1");
    total += p;
    add_full_prompt(arch, p, attn);
  }
  return finalize(arch, gemm_layer(arch, total), attn);
}

CostBreakdown decode_cost(const ModelArch& arch,
                          std::span<const int64_t> context_lens) {
  if (context_lens.empty()) {
    throw PreconditionError("decode_cost needs at least one context");
  }
  Accum attn;
  for (int64_t ctx : context_lens) {
    if (ctx < 1) throw PreconditionError("decode context length must be >= 1");
    add_decode(arch, ctx, attn);
  }
  return finalize(
      arch, gemm_layer(arch, static_cast<int64_t>(context_lens.size())), attn);
}

CostBreakdown hybrid_cost(const ModelArch& arch,
                          const BatchComposition& batch) {
  validate(batch);
  const int64_t rows = batch.prefill_tokens() +
                       static_cast<int64_t>(batch.decode_contexts.size());
  Accum attn;
  for (const auto& c : batch.prefill_chunks) {
    if (c.processed == 0) {
      add_full_prompt(arch, c.chunk, attn);
    } else {
      add_chunk(arch, c.processed, c.chunk, attn);
    }
  }
  for (int64_t ctx : batch.decode_contexts) add_decode(arch, ctx, attn);
  return finalize(arch, gemm_layer(arch, rows), attn);
}

}  // namespace tiersim
