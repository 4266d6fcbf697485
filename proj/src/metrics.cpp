// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include "hasvq/metrics.hpp"

#include <fmt/core.h>

#include "hasvq/bitpack.hpp"
#include "hasvq/error.hpp"

namespace hasvq {
namespace {

void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeMismatch, fmt::format("{}x{} vs {}x{}", a.rows(), a.cols(),
                                                       b.rows(), b.cols()));
  }
}

std::uint64_t residual_value_width(ResidualPrecision p) {
  return p == ResidualPrecision::kHalf ? 16 : 32;
}

}  // namespace

WeightedError hessian_weighted_mse(const Matrix& original, const Matrix& reconstructed,
                                   const HessianDiag& hessian) {
  check_same_shape(original, reconstructed);
  if (hessian.size() != original.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("hessian has {} entries for {} input columns", hessian.size(),
                            original.cols()));
  }
  WeightedError out;
  for (std::size_t r = 0; r < original.rows(); ++r) {
    const auto a = original.row(r);
    const auto b = reconstructed.row(r);
    for (std::size_t c = 0; c < a.size(); ++c) {
      const double diff = static_cast<double>(a[c]) - static_cast<double>(b[c]);
      out.sum += static_cast<double>(hessian.values[c]) * diff * diff;
    }
  }
  if (original.size() != 0) out.per_param_mean = out.sum / static_cast<double>(original.size());
  return out;
}

double plain_mse(const Matrix& original, const Matrix& reconstructed) {
  check_same_shape(original, reconstructed);
  double sum = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double diff =
        static_cast<double>(original.flat()[i]) - static_cast<double>(reconstructed.flat()[i]);
    sum += diff * diff;
  }
  return original.size() == 0 ? 0.0 : sum / static_cast<double>(original.size());
}

std::uint64_t StorageBreakdown::total_bits() const noexcept {
  return codebook_bits + index_bits + scale_bits + residual_value_bits + residual_index_bits +
         passthrough_bits;
}

double StorageBreakdown::bpp() const {
  if (param_count == 0) throw Error(ErrorCode::kInvalidArgument, "BPP of an empty layer");
  return static_cast<double>(total_bits()) / static_cast<double>(param_count);
}

StorageBreakdown& StorageBreakdown::operator+=(const StorageBreakdown& other) {
  codebook_bits += other.codebook_bits;
  index_bits += other.index_bits;
  scale_bits += other.scale_bits;
  residual_value_bits += other.residual_value_bits;
  residual_index_bits += other.residual_index_bits;
  passthrough_bits += other.passthrough_bits;
  param_count += other.param_count;
  return *this;
}

StorageBreakdown layer_storage(const CompressedLayer& layer) {
  StorageBreakdown s;
  s.codebook_bits = 16ull * layer.codebook.size() * layer.block_size();
  s.index_bits = 8ull * packed_byte_size(layer.indices.count, layer.indices.bit_width);
  s.scale_bits = 16ull * layer.rows;
  s.residual_value_bits = residual_value_width(layer.residual.precision) * layer.residual.size();
  s.residual_index_bits = 32ull * layer.residual.size();
  s.param_count = layer.param_count();
  return s;
}

StorageBreakdown predicted_storage(std::size_t rows, std::size_t cols,
                                   const CompressionConfig& config) {
  if (config.block == 0 || config.centroids == 0) {
    throw Error(ErrorCode::kInvalidArgument, "block size and K must be >= 1");
  }
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
  const std::uint64_t blocks = rows * ((cols + config.block - 1) / config.block);
  const auto outliers =
      static_cast<std::uint64_t>(std::llround(config.sparsity * static_cast<double>(count)));
  StorageBreakdown s;
  s.codebook_bits = 16ull * config.centroids * config.block;
  s.index_bits = 8ull * packed_byte_size(blocks, index_bit_width(config.centroids));
  s.scale_bits = 16ull * rows;
  s.residual_value_bits = residual_value_width(config.residual) * outliers;
  s.residual_index_bits = 32ull * outliers;
  s.param_count = count;
  return s;
}

StorageBreakdown passthrough_storage(std::uint64_t param_count) {
  StorageBreakdown s;
  s.passthrough_bits = 16ull * param_count;
  s.param_count = param_count;
  return s;
}

nlohmann::json to_json(const StorageBreakdown& storage) {
  nlohmann::json j = {
      {"codebook_bits", storage.codebook_bits},
      {"index_bits", storage.index_bits},
      {"scale_bits", storage.scale_bits},
      {"residual_value_bits", storage.residual_value_bits},
      {"residual_index_bits", storage.residual_index_bits},
      {"passthrough_bits", storage.passthrough_bits},
      {"param_count", storage.param_count},
      {"total_bits", storage.total_bits()},
  };
  if (storage.param_count != 0) {
    j["bpp"] = storage.bpp();
    j["compression_ratio"] = storage.compression_ratio();
  }
  return j;
}

bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
  return (a.bpp <= b.bpp && a.distortion < b.distortion) ||
         (a.bpp < b.bpp && a.distortion <= b.distortion);
}

ParetoReport pareto_report(const std::vector<ParetoPoint>& points) {
  if (points.empty()) throw Error(ErrorCode::kInvalidArgument, "pareto report needs a point");
  ParetoReport report;
  report.points = points;
  const std::size_t n = points.size();
  report.dominance.assign(n, std::vector<bool>(n, false));
  report.on_frontier.assign(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && dominates(points[i], points[j])) {
        report.dominance[i][j] = true;
        report.on_frontier[j] = false;
      }
    }
  }
  return report;
}

nlohmann::json to_json(const ParetoReport& report) {
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < report.points.size(); ++i) {
    nlohmann::json dominated = nlohmann::json::array();
    for (std::size_t j = 0; j < report.points.size(); ++j) {
      if (report.dominance[i][j]) dominated.push_back(report.points[j].method);
    }
    points.push_back({{"method", report.points[i].method},
                      {"bpp", report.points[i].bpp},
                      {"distortion", report.points[i].distortion},
                      {"on_frontier", static_cast<bool>(report.on_frontier[i])},
                      {"dominates", dominated}});
  }
  return {{"distortion_axis", kDistortionAxis}, {"points", points}};
}

StorageBreakdown EvalReport::linear_storage() const {
  StorageBreakdown total;
  for (const auto& l : layers) total += l.storage;
  return total;
}

WeightedError EvalReport::aggregate_error() const {
  WeightedError out;
  std::uint64_t params = 0;
  for (const auto& l : layers) {
    out.sum += l.hessian_weighted.sum;
    params += l.storage.param_count;
  }
  if (params != 0) out.per_param_mean = out.sum / static_cast<double>(params);
  return out;
}

double EvalReport::aggregate_plain_mse() const {
  double weighted = 0.0;
  std::uint64_t params = 0;
  for (const auto& l : layers) {
    weighted += l.plain_mse * static_cast<double>(l.storage.param_count);
    params += l.storage.param_count;
  }
  return params == 0 ? 0.0 : weighted / static_cast<double>(params);
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : report.layers) {
    const double bpp = l.storage.bpp();
    layers.push_back({{"name", l.name},
                      {"hessian_weighted_mse", l.hessian_weighted.per_param_mean},
                      {"hessian_weighted_sse", l.hessian_weighted.sum},
                      {"plain_mse", l.plain_mse},
                      {"bpp", bpp},
                      {"compression_ratio", 16.0 / bpp},
                      {"storage", to_json(l.storage)}});
  }
  nlohmann::json aggregate = nlohmann::json::object();
  const StorageBreakdown linear = report.linear_storage();
  if (linear.param_count != 0) {
    StorageBreakdown all = linear;
    all += report.passthrough;
    const WeightedError err = report.aggregate_error();
    aggregate = {{"hessian_weighted_mse", err.per_param_mean},
                 {"hessian_weighted_sse", err.sum},
                 {"plain_mse", report.aggregate_plain_mse()},
                 {"bpp_linear_only", linear.bpp()},
                 {"compression_ratio_linear_only", linear.compression_ratio()},
                 {"bpp_with_passthrough", all.bpp()},
                 {"compression_ratio_with_passthrough", all.compression_ratio()},
                 {"storage", to_json(all)}};
  }
  return {{"schema_version", kReportSchemaVersion},
          {"distortion_axis", kDistortionAxis},
          {"method", report.method},
          {"config", report.config},
          {"layers", layers},
          {"aggregate", aggregate}};
}

}  // namespace hasvq
