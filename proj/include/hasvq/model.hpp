// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

// Model-level driver: compresses every 2-D tensor of a checkpoint, keeps the
// rest at FP16, and evaluates reconstructions against the original.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hasvq/baselines.hpp"
#include "hasvq/format.hpp"
#include "hasvq/metrics.hpp"
#include "hasvq/safetensors.hpp"

namespace hasvq {

/// Per-layer curvature from a tensor container. A 1-D tensor named like the
/// layer is a precomputed diagonal; a 2-D tensor is a matrix of calibration
/// activations (one sample per row) reduced with estimate_hessian_diag.
class HessianSet {
 public:
  HessianSet() = default;
  HessianSet(TensorContainer container, float damping);

  /// Identity curvature for layers without an entry when `source` is empty;
  /// otherwise a missing layer is an error.
  HessianDiag lookup(const std::string& layer, std::size_t d_in) const;

 private:
  std::optional<TensorContainer> container_;
  float damping_ = kDefaultDamping;
};

struct ModelOptions {
  CompressionConfig config;
  Profile profile = Profile::kCustom;
  /// Substrings; matching 2-D tensors are kept at FP16 instead of compressed.
  std::vector<std::string> keep_fp16;
};

CompressedModel compress_model(const TensorContainer& weights, const HessianSet& hessians,
                               const ModelOptions& options);

/// Reconstructed weights as FP16 tensors: compressed layers, then passthrough.
TensorContainer decompress_model(const CompressedModel& model);

EvalReport evaluate_compressed(const TensorContainer& original, const CompressedModel& model,
                               const HessianSet& hessians);
EvalReport evaluate_rtn(const TensorContainer& original, const HessianSet& hessians,
                        const RTNConfig& config);

}  // namespace hasvq
