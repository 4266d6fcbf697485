// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include "hasvq/model.hpp"

#include <algorithm>

#include <fmt/core.h>

#include "hasvq/error.hpp"
#include "hasvq/half.hpp"
#include "hasvq/parallel.hpp"

namespace hasvq {
namespace {

bool keep_at_fp16(const std::string& name, const std::vector<std::string>& patterns) {
  return std::any_of(patterns.begin(), patterns.end(), [&](const std::string& p) {
    return name.find(p) != std::string::npos;
  });
}

}  // namespace

HessianSet::HessianSet(TensorContainer container, float damping)
    : container_(std::move(container)), damping_(damping) {}

HessianDiag HessianSet::lookup(const std::string& layer, std::size_t d_in) const {
  if (!container_) return identity_hessian(d_in);
  if (!container_->contains(layer)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("no hessian entry for layer '{}'", layer));
  }
  const TensorEntry& e = container_->entry(layer);
  HessianDiag h;
  if (e.shape.size() == 1) {
    h = hessian_from_diagonal(container_->values(layer));
  } else if (e.shape.size() == 2) {
    h = estimate_hessian_diag(container_->matrix(layer), damping_);
  } else {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("hessian entry '{}' must be 1-D or 2-D", layer));
  }
  if (h.size() != d_in) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("hessian for '{}' has {} entries, layer has {} inputs", layer, h.size(),
                            d_in));
  }
  return h;
}

CompressedModel compress_model(const TensorContainer& weights, const HessianSet& hessians,
                               const ModelOptions& options) {
  CompressedModel model;
  model.profile = std::string(profile_name(options.profile));
  model.seed = options.config.seed;

  std::vector<std::string> linear;
  for (const auto& name : weights.names()) {
    const TensorEntry& e = weights.entry(name);
    if (e.passthrough() || keep_at_fp16(name, options.keep_fp16)) {
      PassthroughTensor p{name, e.shape, {}};
      for (float v : weights.values(name)) p.values.push_back(float_to_half(v));
      model.passthrough.push_back(std::move(p));
    } else {
      linear.push_back(name);
    }
  }

  // Layers run concurrently; each result lands in its own slot so the output
  // order never depends on scheduling.
  model.layers.resize(linear.size());
  const std::size_t outer = std::min(options.config.workers, std::max<std::size_t>(linear.size(), 1));
  CompressionConfig inner = options.config;
  inner.workers = std::max<std::size_t>(1, options.config.workers / std::max<std::size_t>(outer, 1));
  parallel_for(linear.size(), outer, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Matrix w = weights.matrix(linear[i]);
      const HessianDiag h = hessians.lookup(linear[i], w.cols());
      model.layers[i] = {linear[i], compress_layer(w, h, inner)};
    }
  });
  return model;
}

TensorContainer decompress_model(const CompressedModel& model) {
  model.validate();
  struct Slot {
    std::string name;
    const CompressedLayer* layer = nullptr;
    const PassthroughTensor* raw = nullptr;
  };
  std::vector<Slot> slots;
  for (const auto& l : model.layers) slots.push_back({l.name, &l.layer, nullptr});
  for (const auto& p : model.passthrough) slots.push_back({p.name, nullptr, &p});

  TensorContainer out;
  out.set_metadata("format", "pt");
  out.set_metadata("hasvq_profile", model.profile);
  for (const auto& s : slots) {
    if (s.layer != nullptr) {
      const Matrix w = reconstruct_layer(*s.layer);
      out.add_f16(s.name, {w.rows(), w.cols()}, w.flat());
    } else {
      std::vector<std::uint8_t> bytes;
      bytes.reserve(s.raw->values.size() * 2);
      for (std::uint16_t v : s.raw->values) {
        bytes.push_back(static_cast<std::uint8_t>(v & 0xff));
        bytes.push_back(static_cast<std::uint8_t>(v >> 8));
      }
      out.add(s.name, DType::kF16, s.raw->shape, bytes);
    }
  }
  return out;
}

EvalReport evaluate_compressed(const TensorContainer& original, const CompressedModel& model,
                               const HessianSet& hessians) {
  EvalReport report;
  report.method = "hasvq-" + model.profile;
  report.config = {{"profile", model.profile}, {"seed", model.seed}};
  for (const auto& [name, layer] : model.layers) {
    const Matrix w = original.matrix(name);
    const Matrix w_hat = reconstruct_layer(layer);
    const HessianDiag h = hessians.lookup(name, w.cols());
    report.layers.push_back(
        {name, hessian_weighted_mse(w, w_hat, h), plain_mse(w, w_hat), layer_storage(layer)});
  }
  for (const auto& p : model.passthrough) report.passthrough += passthrough_storage(p.values.size());
  if (!model.layers.empty()) {
    const CompressedLayer& first = model.layers.front().layer;
    report.config["block"] = first.block_size();
    report.config["centroids"] = first.codebook.size();
    report.config["residual_dtype"] = residual_dtype_name(first.residual.precision);
  }
  return report;
}

EvalReport evaluate_rtn(const TensorContainer& original, const HessianSet& hessians,
                        const RTNConfig& config) {
  EvalReport report;
  report.method = rtn_selector(config);
  report.config = {{"bits", config.bits},
                   {"group_size", config.group_size},
                   {"symmetric", config.symmetric}};
  for (const auto& name : original.names()) {
    const TensorEntry& e = original.entry(name);
    if (e.passthrough()) {
      report.passthrough += passthrough_storage(e.element_count());
      continue;
    }
    const Matrix w = original.matrix(name);
    const Matrix w_hat = rtn_dequantize(rtn_quantize(w, config));
    const HessianDiag h = hessians.lookup(name, w.cols());
    // Analytic layout: codes plus one FP16 scale and code-width zero point per group.
    StorageBreakdown storage;
    const std::uint64_t groups = w.rows() * ((w.cols() + config.group_size - 1) / config.group_size);
    storage.index_bits = static_cast<std::uint64_t>(config.bits) * w.size();
    storage.scale_bits = (16ull + config.bits) * groups;
    storage.param_count = w.size();
    report.layers.push_back({name, hessian_weighted_mse(w, w_hat, h), plain_mse(w, w_hat), storage});
  }
  return report;
}

}  // namespace hasvq
