// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

// The .hasvq container.
//
//   magic     8 bytes   "HASVQ1\0\0"
//   length    u64 LE    byte length of the JSON header
//   header    UTF-8 JSON, section offsets relative to the data region
//   data      per layer, in order: scales (FP16), codebook (FP16, K x b
//             row-major), packed indices, outlier flat indices (u32 LE,
//             strictly increasing), residual values (FP16, or FP32 in debug
//             mode); then FP16 passthrough tensors.
//
// No padding anywhere, so the data region is exactly the storage accounted
// for by layer_storage / passthrough_storage.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hasvq/metrics.hpp"
#include "hasvq/residual.hpp"

namespace hasvq {

inline constexpr char kFormatMagic[8] = {'H', 'A', 'S', 'V', 'Q', '1', '\0', '\0'};
inline constexpr const char* kFormatVersion = "1.0";

struct NamedLayer {
  std::string name;
  CompressedLayer layer;
};

/// Tensor stored verbatim as binary16 values.
struct PassthroughTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<std::uint16_t> values;
};

struct CompressedModel {
  std::string version = kFormatVersion;
  std::string profile = "custom";
  std::uint64_t seed = 0;
  std::vector<NamedLayer> layers;
  std::vector<PassthroughTensor> passthrough;

  /// Throws kValidation on duplicate names or inconsistent layers.
  void validate() const;
  const CompressedLayer* find(std::string_view name) const;
};

/// Bitwise equality of every stored array and all metadata.
bool identical(const CompressedModel& a, const CompressedModel& b);

/// Accounting for every layer plus passthrough tensors.
StorageBreakdown model_storage(const CompressedModel& model);

struct SerializedModel {
  std::vector<std::uint8_t> bytes;
  std::size_t header_bytes = 0;  // magic + length prefix + JSON
};

SerializedModel serialize_compressed(const CompressedModel& model);
/// Rejects bad magic, unknown versions, overlapping or out-of-range
/// sections and inconsistent payloads with a named error; never returns a
/// partial model.
CompressedModel parse_compressed(std::span<const std::uint8_t> bytes);

/// Returns total bytes written.
std::size_t write_compressed(const CompressedModel& model, const std::filesystem::path& path);
CompressedModel read_compressed(const std::filesystem::path& path);

}  // namespace hasvq
