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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tiersim/arch_cost.h"

namespace tiersim {

// Peak compute (FLOP/s) and memory bandwidth (B/s). Defaults: A100-80G.
struct HardwareCaps {
  double flops_per_s = 312e12;
  double mem_bytes_per_s = 2e12;
};

// (t_M + t_F, max(t_M, t_F), t_M, t_F, 1)
using FeatureVector = std::array<double, 5>;
using Coefficients = std::array<double, 5>;

// Pure roofline (max of memory and compute time) plus a fixed launch
// overhead. Used when no calibration data is supplied.
inline constexpr Coefficients kDefaultCoefficients = {0.0, 1.0, 0.0, 0.0,
                                                      3e-4};

struct Prediction {
  double seconds = 0.0;
  bool clamped = false;  // raw regression output was negative
};

// Batch latency regression over roofline features:
//   t = c1 (t_M + t_F) + c2 max(t_M, t_F) + c3 t_M + c4 t_F + c5
// with t_M = M / M_H and t_F = F / F_H.
class LatencyModel {
 public:
  LatencyModel() = default;
  LatencyModel(const Coefficients& coefficients, const HardwareCaps& caps);

  FeatureVector features(const CostBreakdown& cost) const;
  FeatureVector features(double flops, double mem_bytes) const;

  double predict(const CostBreakdown& cost) const {
    return predict_checked(cost).seconds;
  }
  Prediction predict_checked(const CostBreakdown& cost) const;
  Prediction predict_checked(double flops, double mem_bytes) const;

  const Coefficients& coefficients() const { return coefficients_; }
  const HardwareCaps& caps() const { return caps_; }

 private:
  Coefficients coefficients_ = kDefaultCoefficients;
  HardwareCaps caps_;
};

struct ObservedBatchRecord {
  double flops = 0.0;
  double mem_bytes = 0.0;
  double latency_s = 0.0;
  int64_t b_p = 0;
  int64_t b_d = 0;
  int64_t prefill_tokens = 0;
  int64_t decode_tokens = 0;
};

struct FitResult {
  LatencyModel model;
  double median_rel_error = 0.0;  // in-sample
};

inline constexpr std::size_t kMinFitRecords = 20;
inline constexpr double kRidgeLambda = 1e-8;

// Ridge least squares over the five features. The features are collinear
// (f1 == f3 + f4), so only predictions, not coefficients, are identified.
// Throws InsufficientDataError for fewer than 20 records or a single
// memory/compute ratio; NumericalError if the system cannot be solved.
FitResult fit(std::span<const ObservedBatchRecord> records,
              const HardwareCaps& caps);

// Median of |predicted - observed| / observed.
double median_relative_error(const LatencyModel& model,
                             std::span<const ObservedBatchRecord> records);
// Fraction of records whose relative error is below `threshold`.
double fraction_within(const LatencyModel& model,
                       std::span<const ObservedBatchRecord> records,
                       double threshold);

// Refits on the last `window` records and keeps `current` unless the new
// model's error on that window is no worse. window < 20 throws
// PreconditionError.
LatencyModel refit_online(const LatencyModel& current,
                          std::span<const ObservedBatchRecord> new_records,
                          std::size_t window);

// Latency of the costliest batch an HP instance may run: one prompt that
// uses the whole token budget.
double worst_case_batch_latency(const LatencyModel& model,
                                const ModelArch& arch,
                                int64_t max_batch_tokens);

// Random prefill, decode and hybrid batches for `arch` whose latencies come
// from `truth` times (1 + noise * N(0, 1)), floored at half the noiseless
// value. Used to exercise fitting without GPU measurements.
std::vector<ObservedBatchRecord> synth_records(const ModelArch& arch,
                                               const LatencyModel& truth,
                                               std::size_t count, double noise,
                                               uint64_t seed);

// Delimited text, header
// flops,mem_bytes,latency_s,b_p,b_d,prefill_tokens,decode_tokens
std::vector<ObservedBatchRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path,
                   std::span<const ObservedBatchRecord> records);

// INI with a [latency_model] section (c1..c5, flops_per_s, mem_bytes_per_s).
void save_model(const std::filesystem::path& path, const LatencyModel& model);
LatencyModel load_model(const std::filesystem::path& path);

}  // namespace tiersim
