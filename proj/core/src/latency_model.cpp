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

#include "tiersim/latency_model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tiersim/errors.h"
#include "tiersim/text_io.h"

namespace tiersim {

LatencyModel::LatencyModel(const Coefficients& coefficients,
                           const HardwareCaps& caps)
    : coefficients_(coefficients), caps_(caps) {
  if (!(caps.flops_per_s > 0.0) || !(caps.mem_bytes_per_s > 0.0)) {
    throw ConfigError("hardware capacities must be positive");
  }
}

FeatureVector LatencyModel::features(double flops, double mem_bytes) const {
  const double t_mem = mem_bytes / caps_.mem_bytes_per_s;
  const double t_flop = flops / caps_.flops_per_s;
  return {t_mem + t_flop, std::max(t_mem, t_flop), t_mem, t_flop, 1.0};
}

FeatureVector LatencyModel::features(const CostBreakdown& cost) const {
  return features(cost.flops, cost.mem_bytes);
}

Prediction LatencyModel::predict_checked(double flops,
                                         double mem_bytes) const {
  const FeatureVector f = features(flops, mem_bytes);
  double t = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) t += coefficients_[i] * f[i];
  if (t < 0.0) return {0.0, true};
  return {t, false};
}

Prediction LatencyModel::predict_checked(const CostBreakdown& cost) const {
  return predict_checked(cost.flops, cost.mem_bytes);
}

namespace {

std::vector<double> relative_errors(
    const LatencyModel& model, std::span<const ObservedBatchRecord> records) {
  std::vector<double> errs;
  errs.reserve(records.size());
  for (const auto& r : records) {
    const double p = model.predict_checked(r.flops, r.mem_bytes).seconds;
    errs.push_back(std::abs(p - r.latency_s) / r.latency_s);
  }
  return errs;
}

std::size_t distinct_ratios(std::span<const ObservedBatchRecord> records) {
  std::vector<double> ratios;
  ratios.reserve(records.size());
  for (const auto& r : records) {
    ratios.push_back(r.flops > 0.0 ? r.mem_bytes / r.flops
                                   : std::numeric_limits<double>::infinity());
  }
  std::sort(ratios.begin(), ratios.end());
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (i == 0 || !(std::abs(ratios[i] - ratios[i - 1]) <=
                    1e-12 * std::abs(ratios[i]))) {
      ++distinct;
    }
  }
  return distinct;
}

}  // namespace

double median_relative_error(const LatencyModel& model,
                             std::span<const ObservedBatchRecord> records) {
  if (records.empty()) throw PreconditionError("no records");
  auto errs = relative_errors(model, records);
  const std::size_t mid = errs.size() / 2;
  std::nth_element(errs.begin(), errs.begin() + static_cast<long>(mid),
                   errs.end());
  if (errs.size() % 2 == 1) return errs[mid];
  const double upper = errs[mid];
  const double lower =
      *std::max_element(errs.begin(), errs.begin() + static_cast<long>(mid));
  return 0.5 * (lower + upper);
}

double fraction_within(const LatencyModel& model,
                       std::span<const ObservedBatchRecord> records,
                       double threshold) {
  if (records.empty()) throw PreconditionError("no records");
  const auto errs = relative_errors(model, records);
  const auto n = std::count_if(errs.begin(), errs.end(),
                               [threshold](double e) { return e < threshold; });
  return static_cast<double>(n) / static_cast<double>(errs.size());
}

FitResult fit(std::span<const ObservedBatchRecord> records,
              const HardwareCaps& caps) {
  if (records.size() < kMinFitRecords) {
    throw InsufficientDataError("latency fit needs at least " +
                                std::to_string(kMinFitRecords) +
                                " records, got " +
                                std::to_string(records.size()));
  }
  for (const auto& r : records) {
    if (!(r.latency_s > 0.0) || r.flops < 0.0 || r.mem_bytes < 0.0) {
      throw PreconditionError(
          "calibration records need latency > 0 and non-negative costs");
    }
  }
  if (distinct_ratios(records) < 2) {
    throw InsufficientDataError(
        "calibration records span a single memory/compute ratio");
  }

  const LatencyModel shape({}, caps);
  const auto n = static_cast<Eigen::Index>(records.size());
  Eigen::MatrixXd x(n, 5);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    const FeatureVector f = shape.features(r.flops, r.mem_bytes);
    for (int j = 0; j < 5; ++j) x(i, j) = f[static_cast<std::size_t>(j)];
    y(i) = r.latency_s;
  }

  // Columns are brought to unit RMS before the ridge penalty; at raw
  // feature magnitudes (~1e-3 s) the penalty would visibly bias predictions.
  Eigen::VectorXd scale(5);
  for (int j = 0; j < 5; ++j) {
    const double rms =
        std::sqrt(x.col(j).squaredNorm() / static_cast<double>(n));
    scale(j) = rms > 0.0 ? rms : 1.0;
    x.col(j) /= scale(j);
  }
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += kRidgeLambda;
  const Eigen::VectorXd rhs = x.transpose() * y;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw NumericalError("latency fit: regularized normal equations singular");
  }
  const Eigen::VectorXd solved = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !solved.allFinite()) {
    throw NumericalError("latency fit: solve failed");
  }

  Coefficients c{};
  for (int j = 0; j < 5; ++j) {
    c[static_cast<std::size_t>(j)] = solved(j) / scale(j);
  }
  FitResult result{LatencyModel(c, caps), 0.0};
  result.median_rel_error = median_relative_error(result.model, records);
  return result;
}

LatencyModel refit_online(const LatencyModel& current,
                          std::span<const ObservedBatchRecord> new_records,
                          std::size_t window) {
  if (window < kMinFitRecords) {
    throw PreconditionError("refit window must be >= " +
                            std::to_string(kMinFitRecords));
  }
  if (new_records.size() < kMinFitRecords) return current;
  const std::size_t take = std::min(window, new_records.size());
  const auto recent = new_records.subspan(new_records.size() - take);
  try {
    FitResult refit = fit(recent, current.caps());
    if (refit.median_rel_error <= median_relative_error(current, recent)) {
      return refit.model;
    }
  } catch (const InsufficientDataError&) {
  } catch (const NumericalError&) {
  }
  return current;
}

double worst_case_batch_latency(const LatencyModel& model,
                                const ModelArch& arch,
                                int64_t max_batch_tokens) {
  if (max_batch_tokens < 1) {
    throw PreconditionError("max_batch_tokens must be >= 1");
  }
  const int64_t prompt[] = {max_batch_tokens};
  return model.predict(prefill_cost(arch, prompt));
}

std::vector<ObservedBatchRecord> synth_records(const ModelArch& arch,
                                               const LatencyModel& truth,
                                               std::size_t count, double noise,
                                               uint64_t seed) {
  if (noise < 0.0) throw PreconditionError("noise must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_int_distribution<int64_t> n_prefill(1, 8);
  std::uniform_int_distribution<int64_t> prompt(16, 4096);
  std::uniform_int_distribution<int64_t> n_decode(1, 256);
  std::uniform_int_distribution<int64_t> context(16, 4096);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<ObservedBatchRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    BatchComposition batch;
    const int k = kind(rng);
    if (k != 1) {
      const int64_t n = n_prefill(rng);
      for (int64_t j = 0; j < n; ++j) {
        const int64_t p = prompt(rng);
        if (k == 2) {
          std::uniform_int_distribution<int64_t> done(0, p - 1);
          const int64_t l = done(rng);
          batch.prefill_chunks.push_back({l, p - l, p});
        } else {
          batch.prefill_chunks.push_back({0, p, p});
        }
      }
    }
    if (k != 0) {
      const int64_t n = n_decode(rng);
      for (int64_t j = 0; j < n; ++j) batch.decode_contexts.push_back(context(rng));
    }
    const CostBreakdown cost = hybrid_cost(arch, batch);
    const double clean = truth.predict(cost);
    const double factor = std::max(0.5, 1.0 + noise * gauss(rng));
    ObservedBatchRecord rec;
    rec.flops = cost.flops;
    rec.mem_bytes = cost.mem_bytes;
    rec.latency_s = clean * factor;
    rec.b_p = static_cast<int64_t>(batch.prefill_chunks.size());
    rec.b_d = static_cast<int64_t>(batch.decode_contexts.size());
    rec.prefill_tokens = batch.prefill_tokens();
    rec.decode_tokens = rec.b_d;
    out.push_back(rec);
  }
  return out;
}

std::vector<ObservedBatchRecord> read_records(
    const std::filesystem::path& path) {
  const auto rows = read_delimited(path, 7);
  std::vector<ObservedBatchRecord> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    ObservedBatchRecord r;
    r.flops = row.number(0);
    r.mem_bytes = row.number(1);
    r.latency_s = row.number(2);
    r.b_p = row.integer(3);
    r.b_d = row.integer(4);
    r.prefill_tokens = row.integer(5);
    r.decode_tokens = row.integer(6);
    if (r.flops < 0.0 || r.mem_bytes < 0.0 || !(r.latency_s > 0.0)) {
      throw ParseError(row.where() + ": costs must be >= 0 and latency_s > 0");
    }
    out.push_back(r);
  }
  return out;
}

void write_records(const std::filesystem::path& path,
                   std::span<const ObservedBatchRecord> records) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << "flops,mem_bytes,latency_s,b_p,b_d,prefill_tokens,decode_tokens\n";
  for (const auto& r : records) {
    out << format_double(r.flops) << ',' << format_double(r.mem_bytes) << ','
        << format_double(r.latency_s) << ',' << r.b_p << ',' << r.b_d << ','
        << r.prefill_tokens << ',' << r.decode_tokens << '\n';
  }
}

void save_model(const std::filesystem::path& path, const LatencyModel& model) {
  boost::property_tree::ptree tree;
  const auto& c = model.coefficients();
  for (std::size_t i = 0; i < c.size(); ++i) {
    tree.put("latency_model.c" + std::to_string(i + 1), format_double(c[i]));
  }
  tree.put("latency_model.flops_per_s",
           format_double(model.caps().flops_per_s));
  tree.put("latency_model.mem_bytes_per_s",
           format_double(model.caps().mem_bytes_per_s));
  boost::property_tree::write_ini(path.string(), tree);
}

LatencyModel load_model(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(e.what());
  }
  const auto section = tree.get_child_optional("latency_model");
  if (!section) {
    throw ParseError(path.string() + ": missing [latency_model] section");
  }
  Coefficients c{};
  HardwareCaps caps;
  for (const auto& [key, value] : *section) {
    const std::string where = path.string() + ": latency_model." + key;
    const double v = parse_double(value.data(), where);
    if (key.size() == 2 && key[0] == 'c' && key[1] >= '1' && key[1] <= '5') {
      c[static_cast<std::size_t>(key[1] - '1')] = v;
    } else if (key == "flops_per_s") {
      caps.flops_per_s = v;
    } else if (key == "mem_bytes_per_s") {
      caps.mem_bytes_per_s = v;
    } else {
      throw ParseError(where + ": unknown key");
    }
  }
  return LatencyModel(c, caps);
}

}  // namespace tiersim
