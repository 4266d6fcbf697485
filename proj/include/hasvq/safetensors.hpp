// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal safetensors reader/writer: 8-byte little-endian header length,
// UTF-8 JSON header, raw little-endian tensor bytes.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hasvq/matrix.hpp"

namespace hasvq {

enum class DType { kF16, kBF16, kF32 };

std::string_view dtype_name(DType dtype);
/// Throws kUnsupportedDtype for anything outside F16/BF16/F32.
DType parse_dtype(std::string_view name);
std::size_t dtype_size(DType dtype);

struct TensorEntry {
  DType dtype = DType::kF32;
  std::vector<std::size_t> shape;
  std::size_t begin = 0;  // byte offsets into the payload
  std::size_t end = 0;

  std::size_t element_count() const;
  /// Tensors that are not 2-D are carried through uncompressed.
  bool passthrough() const { return shape.size() != 2; }

  friend bool operator==(const TensorEntry&, const TensorEntry&) = default;
};

class TensorContainer {
 public:
  using EntryMap = std::map<std::string, TensorEntry, std::less<>>;

  TensorContainer() = default;

  const EntryMap& entries() const noexcept { return entries_; }
  const std::vector<std::uint8_t>& payload() const noexcept { return payload_; }
  const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }

  bool contains(std::string_view name) const;
  const TensorEntry& entry(std::string_view name) const;

  /// Names in payload order.
  std::vector<std::string> names() const;

  /// Appends a tensor; bytes must hold element_count * dtype_size bytes.
  void add(std::string name, DType dtype, std::vector<std::size_t> shape,
           std::span<const std::uint8_t> bytes);
  void add_f32(std::string name, std::vector<std::size_t> shape, std::span<const float> values);
  void add_f16(std::string name, std::vector<std::size_t> shape, std::span<const float> values);
  void set_metadata(std::string key, std::string value);

  /// Tensor contents widened to FP32.
  std::vector<float> values(std::string_view name) const;
  /// 2-D tensor as a matrix; throws kShapeMismatch otherwise.
  Matrix matrix(std::string_view name) const;
  std::span<const std::uint8_t> bytes(std::string_view name) const;

  friend bool operator==(const TensorContainer&, const TensorContainer&) = default;

 private:
  friend TensorContainer parse_container(std::span<const std::uint8_t>);

  EntryMap entries_;
  std::vector<std::uint8_t> payload_;
  std::map<std::string, std::string> metadata_;
};

std::vector<std::uint8_t> serialize_container(const TensorContainer& container);
TensorContainer parse_container(std::span<const std::uint8_t> bytes);

TensorContainer read_container(const std::filesystem::path& path);
std::size_t write_container(const TensorContainer& container, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace hasvq
