// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include "hasvq/residual.hpp"

#include <cmath>
#include <cstring>

#include <fmt/core.h>

#include "hasvq/error.hpp"
#include "hasvq/half.hpp"

namespace hasvq {
namespace {

constexpr std::uint64_t kInitStream = 0x9e3779b97f4a7c15ull;

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

// Binary16 storage of a row scale. Rows whose peak underflows binary16 get the
// smallest subnormal so the normalized row stays finite.
float storable_scale(float scale, std::size_t row) {
  float stored = round_to_half(scale);
  if (std::isinf(stored)) {
    throw Error(ErrorCode::kValidation,
                fmt::format("row {} scale {} exceeds the binary16 range", row, scale));
  }
  if (stored == 0.0f) stored = 0x1p-24f;
  return stored;
}

void validate_config(const CompressionConfig& config) {
  if (config.block == 0) throw Error(ErrorCode::kInvalidArgument, "block size must be >= 1");
  if (config.centroids == 0) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  if (config.centroids > (std::size_t{1} << 32)) {
    throw Error(ErrorCode::kInvalidArgument, "K must fit in 32-bit indices");
  }
  if (!(config.sparsity >= 0.0 && config.sparsity <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("sparsity {} outside [0, 1]", config.sparsity));
  }
}

}  // namespace

std::string_view residual_dtype_name(ResidualPrecision p) {
  return p == ResidualPrecision::kHalf ? "F16" : "F32";
}

std::size_t CompressedLayer::pad_count() const noexcept {
  const std::size_t b = block_size();
  if (b == 0 || cols == 0) return 0;
  return (cols + b - 1) / b * b - cols;
}

void CompressedLayer::validate() const {
  const std::size_t b = block_size();
  if (codebook.size() == 0 || b == 0) {
    throw Error(ErrorCode::kValidation, "codebook must have K >= 1 and b >= 1");
  }
  if (scales.size() != rows) {
    throw Error(ErrorCode::kValidation,
                fmt::format("{} scales for {} rows", scales.size(), rows));
  }
  const std::size_t expected_blocks = rows * ((cols + b - 1) / b);
  if (indices.count != expected_blocks) {
    throw Error(ErrorCode::kValidation,
                fmt::format("{} packed indices, expected {}", indices.count, expected_blocks));
  }
  if (indices.bit_width != index_bit_width(codebook.size())) {
    throw Error(ErrorCode::kValidation,
                fmt::format("index width {} does not match K={}", indices.bit_width,
                            codebook.size()));
  }
  if (indices.bits.size() != packed_byte_size(indices.count, indices.bit_width)) {
    throw Error(ErrorCode::kValidation, "packed index stream has the wrong length");
  }
  if (residual.indices.size() != residual.values.size()) {
    throw Error(ErrorCode::kValidation, "residual indices and values differ in length");
  }
  const std::size_t count = rows * cols;
  for (std::size_t n = 0; n < residual.indices.size(); ++n) {
    if (residual.indices[n] >= count) {
      throw Error(ErrorCode::kValidation,
                  fmt::format("residual index {} outside {} entries", residual.indices[n], count));
    }
    if (n > 0 && residual.indices[n] <= residual.indices[n - 1]) {
      throw Error(ErrorCode::kValidation, "residual indices must be strictly increasing");
    }
  }
}

bool identical(const CompressedLayer& a, const CompressedLayer& b) {
  return a.rows == b.rows && a.cols == b.cols && same_bits(a.scales, b.scales) &&
         a.codebook.centroids.identical(b.codebook.centroids) && a.indices == b.indices &&
         a.residual.indices == b.residual.indices &&
         same_bits(a.residual.values, b.residual.values) &&
         a.residual.precision == b.residual.precision;
}

Profile parse_profile(std::string_view name) {
  if (name == "mid") return Profile::kMid;
  if (name == "high") return Profile::kHigh;
  if (name == "custom") return Profile::kCustom;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown profile '{}'", name));
}

std::string_view profile_name(Profile p) {
  switch (p) {
    case Profile::kMid: return "mid";
    case Profile::kHigh: return "high";
    case Profile::kCustom: return "custom";
  }
  return "custom";
}

CompressionConfig profile_config(Profile p) {
  CompressionConfig c;
  switch (p) {
    case Profile::kMid:
      c.block = 2;
      c.centroids = 256;
      c.sparsity = 0.005;
      break;
    case Profile::kHigh:
      c.block = 2;
      c.centroids = 4096;
      c.sparsity = 0.02;
      break;
    case Profile::kCustom:
      break;
  }
  return c;
}

SparseResidual compute_residual(const Matrix& normalized, const Matrix& body_reconstruction,
                                const OutlierSet& outliers, ResidualPrecision precision) {
  if (normalized.rows() != body_reconstruction.rows() ||
      normalized.cols() != body_reconstruction.cols() || outliers.rows != normalized.rows() ||
      outliers.cols != normalized.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "residual inputs disagree in shape");
  }
  SparseResidual out;
  out.precision = precision;
  out.indices = outliers.flat;
  out.values.reserve(outliers.size());
  const auto w = normalized.flat();
  const auto r = body_reconstruction.flat();
  for (std::size_t n = 0; n < outliers.flat.size(); ++n) {
    const std::uint32_t at = outliers.flat[n];
    if (at >= w.size()) throw Error(ErrorCode::kRange, "outlier index outside the layer");
    if (n > 0 && at <= outliers.flat[n - 1]) {
      throw Error(ErrorCode::kValidation, "outlier indices must be strictly increasing");
    }
    const float diff = w[at] - r[at];
    if (precision == ResidualPrecision::kHalf) {
      out.values.push_back(round_to_half(diff));
      continue;
    }
    float stored = diff;
    if (r[at] + stored != w[at]) {
      // The rounded difference can miss by an ulp; search its neighbours.
      for (int step = 1; step <= 8 && r[at] + stored != w[at]; ++step) {
        float up = diff;
        float down = diff;
        for (int i = 0; i < step; ++i) {
          up = std::nextafter(up, INFINITY);
          down = std::nextafter(down, -INFINITY);
        }
        if (r[at] + up == w[at]) {
          stored = up;
        } else if (r[at] + down == w[at]) {
          stored = down;
        }
      }
    }
    out.values.push_back(stored);
  }
  return out;
}

Matrix reconstruct_normalized(const CompressedLayer& layer) {
  layer.validate();
  const auto idx = unpack_indices(layer.indices);
  Matrix out = reconstruct_body(layer.codebook, idx, layer.rows, layer.cols);
  auto flat = out.flat();
  for (std::size_t n = 0; n < layer.residual.size(); ++n) {
    const std::uint32_t at = layer.residual.indices[n];
    flat[at] = flat[at] + layer.residual.values[n];
  }
  return out;
}

Matrix reconstruct_layer(const CompressedLayer& layer) {
  Matrix out = reconstruct_normalized(layer);
  for (std::size_t r = 0; r < layer.rows; ++r) {
    const float s = layer.scales[r];
    for (float& v : out.row(r)) v *= s;
  }
  return out;
}

CompressedLayer compress_layer(const Matrix& weights, const HessianDiag& hessian,
                               const CompressionConfig& config, LayerTrace* trace) {
  validate_config(config);
  if (weights.size() > std::size_t{0xffffffffu}) {
    throw Error(ErrorCode::kInvalidArgument, "layer too large for 32-bit outlier indices");
  }
  if (hessian.size() != weights.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("hessian has {} entries for {} input columns", hessian.size(),
                            weights.cols()));
  }

  // Normalize by the stored (binary16) scale so that s * W_norm reproduces W.
  NormalizedWeights norm = channel_normalize(weights);
  CompressedLayer layer;
  layer.rows = weights.rows();
  layer.cols = weights.cols();
  layer.scales.resize(weights.rows());
  Matrix normalized = weights;
  for (std::size_t r = 0; r < weights.rows(); ++r) {
    layer.scales[r] = storable_scale(norm.scales.values[r], r);
    for (float& v : normalized.row(r)) v /= layer.scales[r];
  }

  const ImportanceMap importance = importance_scores(normalized, hessian);
  OutlierSet outliers = select_outliers(importance, config.sparsity);
  Matrix body = mask_body(normalized, outliers);

  const BlockView view = blockify(body, config.block);
  Matrix samples = sample_training_blocks(view, config.centroids, config.seed);
  Codebook init = kmeanspp_init(samples, config.centroids, config.seed ^ kInitStream);
  KMeansOptions options;
  options.max_iters = config.kmeans_iters;
  options.rel_tol = config.kmeans_tol;
  options.workers = config.workers;
  KMeansResult fit = kmeans_fit(samples, std::move(init), options);

  Assignment assignment = quantize_body(view, fit.codebook, config.workers);
  Matrix reconstruction =
      reconstruct_body(fit.codebook, assignment.idx, weights.rows(), weights.cols());

  layer.residual = compute_residual(normalized, reconstruction, outliers, config.residual);
  layer.indices = pack_indices(assignment.idx, config.centroids);
  layer.codebook = fit.codebook;

  if (trace != nullptr) {
    trace->normalized = std::move(normalized);
    trace->outliers = std::move(outliers);
    trace->body = std::move(body);
    trace->fit = std::move(fit);
    trace->assignment = std::move(assignment);
    trace->body_reconstruction = std::move(reconstruction);
  }
  return layer;
}

}  // namespace hasvq
