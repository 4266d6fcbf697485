// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

// Channel normalization, diagonal Hessian estimation, importance scoring
// and top-rho outlier selection.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hasvq/matrix.hpp"

namespace hasvq {

inline constexpr float kScaleFloor = 1e-8f;
inline constexpr float kHessianFloor = 1e-12f;
inline constexpr float kDefaultDamping = 0.01f;

/// Per-output-row scales, each >= kScaleFloor.
struct ChannelScales {
  std::vector<float> values;
};

/// Diagonal curvature per input column. Entries are floored at kHessianFloor.
struct HessianDiag {
  std::vector<float> values;
  std::size_t n_samples = 0;
  float damping = 0.0f;

  std::size_t size() const noexcept { return values.size(); }
};

struct ImportanceMap {
  Matrix scores;
};

/// Outlier positions as flat row-major indices, strictly increasing.
struct OutlierSet {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint32_t> flat;

  std::size_t size() const noexcept { return flat.size(); }
  std::size_t row(std::size_t n) const { return flat[n] / cols; }
  std::size_t col(std::size_t n) const { return flat[n] % cols; }
  double effective_ratio() const;
};

struct NormalizedWeights {
  Matrix values;
  ChannelScales scales;
};

/// s_i = max(max_j |W_ij|, kScaleFloor); returns W with row i divided by s_i.
NormalizedWeights channel_normalize(const Matrix& weights);

/// Second moment of calibration activations per input dimension, damped by
/// `damping` times the mean raw diagonal. Each row of `activations` is one
/// sample.
HessianDiag estimate_hessian_diag(const Matrix& activations, float damping = kDefaultDamping);
HessianDiag estimate_hessian_diag(std::span<const std::vector<float>> samples,
                                  float damping = kDefaultDamping);

/// Wraps a precomputed diagonal, validating non-negativity and applying the floor.
HessianDiag hessian_from_diagonal(std::vector<float> diagonal);

/// Identity curvature of the given width.
HessianDiag identity_hessian(std::size_t d_in);

/// scores_ij = |W_norm,ij| * sqrt(h_j); the diagonal is indexed by input column.
ImportanceMap importance_scores(const Matrix& normalized, const HessianDiag& hessian);

/// Matrix-global top-round(ratio * count) selection. Ties go to the smaller
/// flat index.
OutlierSet select_outliers(const ImportanceMap& importance, double ratio);

/// Copy of `normalized` with every outlier position set to exactly zero.
Matrix mask_body(const Matrix& normalized, const OutlierSet& outliers);

}  // namespace hasvq
