// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include "hasvq/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "hasvq/error.hpp"

namespace hasvq {

double OutlierSet::effective_ratio() const {
  const std::size_t count = rows * cols;
  return count == 0 ? 0.0 : static_cast<double>(flat.size()) / static_cast<double>(count);
}

NormalizedWeights channel_normalize(const Matrix& weights) {
  require_finite(weights, "weight matrix");
  NormalizedWeights out{weights, {std::vector<float>(weights.rows())}};
  for (std::size_t r = 0; r < weights.rows(); ++r) {
    float peak = 0.0f;
    for (float v : weights.row(r)) peak = std::max(peak, std::fabs(v));
    const float scale = std::max(peak, kScaleFloor);
    out.scales.values[r] = scale;
    for (float& v : out.values.row(r)) v /= scale;
  }
  return out;
}

namespace {

HessianDiag finish_hessian(std::vector<double> second_moment, std::size_t n_samples,
                           float damping) {
  const double mean = second_moment.empty()
                          ? 0.0
                          : std::accumulate(second_moment.begin(), second_moment.end(), 0.0) /
                                static_cast<double>(second_moment.size());
  HessianDiag h;
  h.n_samples = n_samples;
  h.damping = damping;
  h.values.resize(second_moment.size());
  for (std::size_t j = 0; j < second_moment.size(); ++j) {
    const double damped = second_moment[j] + static_cast<double>(damping) * mean;
    h.values[j] = std::max(static_cast<float>(damped), kHessianFloor);
  }
  return h;
}

void check_damping(float damping) {
  if (!(damping >= 0.0f) || !std::isfinite(damping)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("damping {} must be >= 0", damping));
  }
}

}  // namespace

HessianDiag estimate_hessian_diag(const Matrix& activations, float damping) {
  check_damping(damping);
  if (activations.rows() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "at least one calibration sample is required");
  }
  require_finite(activations, "activation matrix");
  std::vector<double> acc(activations.cols(), 0.0);
  for (std::size_t n = 0; n < activations.rows(); ++n) {
    const auto x = activations.row(n);
    for (std::size_t j = 0; j < x.size(); ++j) acc[j] += static_cast<double>(x[j]) * x[j];
  }
  for (double& a : acc) a /= static_cast<double>(activations.rows());
  return finish_hessian(std::move(acc), activations.rows(), damping);
}

HessianDiag estimate_hessian_diag(std::span<const std::vector<float>> samples, float damping) {
  if (samples.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "at least one calibration sample is required");
  }
  const std::size_t d_in = samples.front().size();
  std::vector<float> flat;
  flat.reserve(samples.size() * d_in);
  for (std::size_t n = 0; n < samples.size(); ++n) {
    if (samples[n].size() != d_in) {
      throw Error(ErrorCode::kShapeMismatch,
                  fmt::format("sample {} has {} dims, expected {}", n, samples[n].size(), d_in));
    }
    flat.insert(flat.end(), samples[n].begin(), samples[n].end());
  }
  return estimate_hessian_diag(Matrix(samples.size(), d_in, std::move(flat)), damping);
}

HessianDiag hessian_from_diagonal(std::vector<float> diagonal) {
  for (std::size_t j = 0; j < diagonal.size(); ++j) {
    if (!std::isfinite(diagonal[j]) || diagonal[j] < 0.0f) {
      throw Error(ErrorCode::kValidation,
                  fmt::format("hessian entry {} is {}, expected finite and >= 0", j, diagonal[j]));
    }
    diagonal[j] = std::max(diagonal[j], kHessianFloor);
  }
  HessianDiag h;
  h.values = std::move(diagonal);
  return h;
}

HessianDiag identity_hessian(std::size_t d_in) {
  return hessian_from_diagonal(std::vector<float>(d_in, 1.0f));
}

ImportanceMap importance_scores(const Matrix& normalized, const HessianDiag& hessian) {
  if (hessian.size() != normalized.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("hessian has {} entries for {} input columns", hessian.size(),
                            normalized.cols()));
  }
  std::vector<float> root(hessian.size());
  std::transform(hessian.values.begin(), hessian.values.end(), root.begin(),
                 [](float h) { return std::sqrt(h); });
  ImportanceMap out{Matrix(normalized.rows(), normalized.cols())};
  for (std::size_t r = 0; r < normalized.rows(); ++r) {
    const auto src = normalized.row(r);
    auto dst = out.scores.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = std::fabs(src[c]) * root[c];
  }
  return out;
}

OutlierSet select_outliers(const ImportanceMap& importance, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("sparsity {} outside [0, 1]", ratio));
  }
  const Matrix& scores = importance.scores;
  const std::size_t count = scores.size();
  if (count > std::size_t{0xffffffffu}) {
    throw Error(ErrorCode::kInvalidArgument, "matrix too large for 32-bit outlier indices");
  }
  OutlierSet out{scores.rows(), scores.cols(), {}};
  const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(count)));
  if (k == 0) return out;

  std::vector<std::uint32_t> order(count);
  std::iota(order.begin(), order.end(), 0u);
  const auto flat = scores.flat();
  auto higher = [&](std::uint32_t a, std::uint32_t b) {
    return flat[a] > flat[b] || (flat[a] == flat[b] && a < b);
  };
  if (k < count) std::nth_element(order.begin(), order.begin() + k - 1, order.end(), higher);
  order.resize(k);
  std::sort(order.begin(), order.end());
  out.flat = std::move(order);
  return out;
}

Matrix mask_body(const Matrix& normalized, const OutlierSet& outliers) {
  if (outliers.rows != normalized.rows() || outliers.cols != normalized.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "outlier set shape differs from the matrix");
  }
  Matrix body = normalized;
  auto flat = body.flat();
  for (std::uint32_t idx : outliers.flat) {
    if (idx >= flat.size()) {
      throw Error(ErrorCode::kRange, fmt::format("outlier index {} outside {} entries", idx,
                                                 flat.size()));
    }
    flat[idx] = 0.0f;
  }
  return body;
}

}  // namespace hasvq
