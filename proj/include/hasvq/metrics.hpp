// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

// Hessian-weighted distortion, exact storage accounting and Pareto
// comparison of (rate, distortion) points.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "hasvq/matrix.hpp"
#include "hasvq/residual.hpp"
#include "hasvq/sensitivity.hpp"

namespace hasvq {

struct WeightedError {
  double sum = 0.0;
  double per_param_mean = 0.0;
};

/// sum_ij h_j (W_ij - What_ij)^2, with h indexed by input column.
WeightedError hessian_weighted_mse(const Matrix& original, const Matrix& reconstructed,
                                   const HessianDiag& hessian);
double plain_mse(const Matrix& original, const Matrix& reconstructed);

/// Bit counts of every stored component. Each field matches a serialized
/// section, so total_bits is always a multiple of 8.
struct StorageBreakdown {
  std::uint64_t codebook_bits = 0;
  std::uint64_t index_bits = 0;
  std::uint64_t scale_bits = 0;
  std::uint64_t residual_value_bits = 0;
  std::uint64_t residual_index_bits = 0;
  std::uint64_t passthrough_bits = 0;
  std::uint64_t param_count = 0;

  std::uint64_t total_bits() const noexcept;
  std::uint64_t total_bytes() const noexcept { return total_bits() / 8; }
  double bpp() const;
  double compression_ratio() const { return 16.0 / bpp(); }

  StorageBreakdown& operator+=(const StorageBreakdown& other);
  friend bool operator==(const StorageBreakdown&, const StorageBreakdown&) = default;
};

/// codebook 16*K*b, indices (byte-aligned packed stream), scales 16*d_out,
/// residual values 16 (or 32 in debug mode) and residual indices 32 per
/// outlier. Padding counts toward index bits, never toward param_count.
StorageBreakdown layer_storage(const CompressedLayer& layer);

/// Storage the pipeline will use for a layer of this shape, before fitting.
StorageBreakdown predicted_storage(std::size_t rows, std::size_t cols,
                                   const CompressionConfig& config);

/// 16 bits per parameter.
StorageBreakdown passthrough_storage(std::uint64_t param_count);

nlohmann::json to_json(const StorageBreakdown& storage);

struct ParetoPoint {
  std::string method;
  double bpp = 0.0;
  double distortion = 0.0;
};

/// a dominates b iff (bpp_a <= bpp_b and distortion_a < distortion_b) or
/// (bpp_a < bpp_b and distortion_a <= distortion_b).
bool dominates(const ParetoPoint& a, const ParetoPoint& b);

struct ParetoReport {
  std::vector<ParetoPoint> points;
  /// dominance[i][j]: point i dominates point j.
  std::vector<std::vector<bool>> dominance;
  std::vector<bool> on_frontier;
};

ParetoReport pareto_report(const std::vector<ParetoPoint>& points);
nlohmann::json to_json(const ParetoReport& report);

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kDistortionAxis = "hessian_weighted_mse";

struct LayerEval {
  std::string name;
  WeightedError hessian_weighted;
  double plain_mse = 0.0;
  StorageBreakdown storage;
};

/// Per-layer and aggregate distortion and rate for one method.
struct EvalReport {
  std::string method;
  nlohmann::json config = nlohmann::json::object();
  std::vector<LayerEval> layers;
  /// Storage of tensors kept at FP16, counted only in the with-passthrough
  /// aggregate.
  StorageBreakdown passthrough;

  /// Linear layers only.
  StorageBreakdown linear_storage() const;
  WeightedError aggregate_error() const;
  double aggregate_plain_mse() const;
};

nlohmann::json to_json(const EvalReport& report);

}  // namespace hasvq
