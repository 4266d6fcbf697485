// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

// Residual sparse feedback and the end-to-end layer pipeline:
// normalize -> importance -> top-rho -> mask -> k-means -> reconstruct ->
// residual at the outlier positions.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hasvq/bitpack.hpp"
#include "hasvq/matrix.hpp"
#include "hasvq/sensitivity.hpp"
#include "hasvq/vq.hpp"

namespace hasvq {

enum class ResidualPrecision {
  kHalf,    // storage format
  kSingle,  // debug: keeps residuals at working precision
};

std::string_view residual_dtype_name(ResidualPrecision p);

/// Values at the outlier positions. `indices` are flat row-major and strictly
/// increasing; with kHalf every value is binary16-representable.
struct SparseResidual {
  std::vector<std::uint32_t> indices;
  std::vector<float> values;
  ResidualPrecision precision = ResidualPrecision::kHalf;

  std::size_t size() const noexcept { return indices.size(); }
};

/// Everything needed to rebuild one weight matrix. Scales and centroids are
/// binary16-representable.
struct CompressedLayer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> scales;
  Codebook codebook;
  PackedIndices indices;
  SparseResidual residual;

  std::size_t block_size() const noexcept { return codebook.block_size(); }
  std::size_t num_blocks() const noexcept { return indices.count; }
  std::size_t pad_count() const noexcept;
  std::size_t param_count() const noexcept { return rows * cols; }

  /// Throws kValidation if component shapes disagree.
  void validate() const;
};

/// Bitwise equality of every stored array.
bool identical(const CompressedLayer& a, const CompressedLayer& b);

enum class Profile { kMid, kHigh, kCustom };

Profile parse_profile(std::string_view name);
std::string_view profile_name(Profile p);

struct CompressionConfig {
  std::size_t block = 4;
  std::size_t centroids = 256;
  double sparsity = 0.01;
  std::uint64_t seed = 0;
  std::size_t kmeans_iters = 100;
  double kmeans_tol = 1e-6;
  ResidualPrecision residual = ResidualPrecision::kHalf;
  std::size_t workers = 1;
};

/// mid: b=2, K=256, rho=0.005 (~4.24 BPP on large layers);
/// high: b=2, K=4096, rho=0.02 (~7.0 BPP on large layers);
/// custom: b=4, K=256, rho=0.01.
CompressionConfig profile_config(Profile p);

/// residual_n = W_norm[n] - R[n], computed in FP32 and then stored at the
/// requested precision. In kSingle mode the stored value is nudged by a few
/// ulps when needed so that R + residual reproduces W_norm bit for bit.
SparseResidual compute_residual(const Matrix& normalized, const Matrix& body_reconstruction,
                                const OutlierSet& outliers,
                                ResidualPrecision precision = ResidualPrecision::kHalf);

/// R + scatter(S) in the normalized domain.
Matrix reconstruct_normalized(const CompressedLayer& layer);

/// s (row-wise) * (R + scatter(S)).
Matrix reconstruct_layer(const CompressedLayer& layer);

/// Intermediate products of the pipeline, exposed for diagnostics and tests.
struct LayerTrace {
  Matrix normalized;
  OutlierSet outliers;
  Matrix body;
  KMeansResult fit;
  Assignment assignment;
  Matrix body_reconstruction;
};

CompressedLayer compress_layer(const Matrix& weights, const HessianDiag& hessian,
                               const CompressionConfig& config, LayerTrace* trace = nullptr);

}  // namespace hasvq
