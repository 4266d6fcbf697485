// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include "hasvq/safetensors.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <limits>

#include <fmt/core.h>

#include "json.hpp"

#include "hasvq/bytes.hpp"
#include "hasvq/error.hpp"
#include "hasvq/half.hpp"

namespace hasvq {
namespace {

using nlohmann::json;

constexpr std::string_view kMetadataKey = "__metadata__";

std::size_t checked_mul(std::size_t a, std::size_t b, ErrorCode code) {
  std::size_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw Error(code, "size overflow");
  return out;
}

std::size_t element_count(const std::vector<std::size_t>& shape, ErrorCode code) {
  std::size_t n = 1;
  for (std::size_t d : shape) n = checked_mul(n, d, code);
  return n;
}

std::size_t json_size(const json& j, const std::string& name, const char* field) {
  if (!j.is_number_unsigned()) {
    throw Error(ErrorCode::kMalformedHeader,
                fmt::format("tensor '{}' field '{}' must be a non-negative integer", name, field));
  }
  return j.get<std::size_t>();
}

}  // namespace

std::string_view dtype_name(DType dtype) {
  switch (dtype) {
    case DType::kF16: return "F16";
    case DType::kBF16: return "BF16";
    case DType::kF32: return "F32";
  }
  return "F32";
}

DType parse_dtype(std::string_view name) {
  if (name == "F16") return DType::kF16;
  if (name == "BF16") return DType::kBF16;
  if (name == "F32") return DType::kF32;
  throw Error(ErrorCode::kUnsupportedDtype, fmt::format("'{}'", name));
}

std::size_t dtype_size(DType dtype) { return dtype == DType::kF32 ? 4 : 2; }

std::size_t TensorEntry::element_count() const {
  return hasvq::element_count(shape, ErrorCode::kOutOfBounds);
}

bool TensorContainer::contains(std::string_view name) const {
  return entries_.find(name) != entries_.end();
}

const TensorEntry& TensorContainer::entry(std::string_view name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("no tensor named '{}'", name));
  }
  return it->second;
}

std::vector<std::string> TensorContainer::names() const {
  std::vector<std::pair<std::size_t, std::string>> order;
  for (const auto& [name, e] : entries_) order.emplace_back(e.begin, name);
  std::sort(order.begin(), order.end());
  std::vector<std::string> out;
  for (auto& [offset, name] : order) out.push_back(std::move(name));
  return out;
}

void TensorContainer::add(std::string name, DType dtype, std::vector<std::size_t> shape,
                          std::span<const std::uint8_t> bytes) {
  if (name == kMetadataKey || contains(name)) {
    throw Error(ErrorCode::kValidation, fmt::format("duplicate tensor name '{}'", name));
  }
  TensorEntry e{dtype, std::move(shape), payload_.size(), 0};
  const std::size_t expected =
      checked_mul(e.element_count(), dtype_size(dtype), ErrorCode::kInvalidArgument);
  if (bytes.size() != expected) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("tensor '{}' needs {} bytes, got {}", name, expected, bytes.size()));
  }
  payload_.insert(payload_.end(), bytes.begin(), bytes.end());
  e.end = payload_.size();
  entries_.emplace(std::move(name), std::move(e));
}

void TensorContainer::add_f32(std::string name, std::vector<std::size_t> shape,
                              std::span<const float> values) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(values.size() * 4);
  for (float v : values) append_le(bytes, std::bit_cast<std::uint32_t>(v));
  add(std::move(name), DType::kF32, std::move(shape), bytes);
}

void TensorContainer::add_f16(std::string name, std::vector<std::size_t> shape,
                              std::span<const float> values) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(values.size() * 2);
  for (float v : values) append_le(bytes, float_to_half(v));
  add(std::move(name), DType::kF16, std::move(shape), bytes);
}

void TensorContainer::set_metadata(std::string key, std::string value) {
  metadata_[std::move(key)] = std::move(value);
}

std::span<const std::uint8_t> TensorContainer::bytes(std::string_view name) const {
  const TensorEntry& e = entry(name);
  return std::span<const std::uint8_t>(payload_).subspan(e.begin, e.end - e.begin);
}

std::vector<float> TensorContainer::values(std::string_view name) const {
  const TensorEntry& e = entry(name);
  const auto raw = bytes(name);
  const std::size_t n = e.element_count();
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (e.dtype) {
      case DType::kF32:
        out[i] = std::bit_cast<float>(load_le<std::uint32_t>(raw.data() + 4 * i));
        break;
      case DType::kF16:
        out[i] = half_to_float(load_le<std::uint16_t>(raw.data() + 2 * i));
        break;
      case DType::kBF16:
        out[i] = std::bit_cast<float>(
            static_cast<std::uint32_t>(load_le<std::uint16_t>(raw.data() + 2 * i)) << 16);
        break;
    }
  }
  return out;
}

Matrix TensorContainer::matrix(std::string_view name) const {
  const TensorEntry& e = entry(name);
  if (e.shape.size() != 2) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("tensor '{}' has rank {}, expected 2", name, e.shape.size()));
  }
  return Matrix(e.shape[0], e.shape[1], values(name));
}

std::vector<std::uint8_t> serialize_container(const TensorContainer& container) {
  json header = json::object();
  for (const auto& [name, e] : container.entries()) {
    header[name] = {{"dtype", dtype_name(e.dtype)},
                    {"shape", e.shape},
                    {"data_offsets", {e.begin, e.end}}};
  }
  if (!container.metadata().empty()) header[std::string(kMetadataKey)] = container.metadata();
  std::string text = header.dump();
  // Conventional 8-byte alignment of the payload.
  text.append((8 - text.size() % 8) % 8, ' ');

  std::vector<std::uint8_t> out;
  out.reserve(8 + text.size() + container.payload().size());
  append_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), container.payload().begin(), container.payload().end());
  return out;
}

TensorContainer parse_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) {
    throw Error(ErrorCode::kMalformedHeader, "file is shorter than the header length prefix");
  }
  const auto header_len = load_le<std::uint64_t>(bytes.data());
  if (header_len == 0) throw Error(ErrorCode::kMalformedHeader, "empty header");
  if (header_len > bytes.size() - 8) {
    throw Error(ErrorCode::kMalformedHeader,
                fmt::format("header length {} exceeds file size {}", header_len, bytes.size()));
  }
  const auto* text = reinterpret_cast<const char*>(bytes.data() + 8);
  const json header = json::parse(text, text + header_len, nullptr, false);
  if (header.is_discarded() || !header.is_object()) {
    throw Error(ErrorCode::kMalformedHeader, "header is not a JSON object");
  }

  TensorContainer out;
  const auto payload = bytes.subspan(8 + header_len);
  out.payload_.assign(payload.begin(), payload.end());
  for (const auto& [name, value] : header.items()) {
    if (name == kMetadataKey) {
      if (!value.is_object()) throw Error(ErrorCode::kMalformedHeader, "metadata is not an object");
      for (const auto& [k, v] : value.items()) {
        if (!v.is_string()) {
          throw Error(ErrorCode::kMalformedHeader, "metadata values must be strings");
        }
        out.metadata_[k] = v.get<std::string>();
      }
      continue;
    }
    if (!value.is_object() || !value.contains("dtype") || !value.contains("shape") ||
        !value.contains("data_offsets") || !value["dtype"].is_string() ||
        !value["shape"].is_array() || !value["data_offsets"].is_array() ||
        value["data_offsets"].size() != 2) {
      throw Error(ErrorCode::kMalformedHeader, fmt::format("bad entry for tensor '{}'", name));
    }
    TensorEntry e;
    e.dtype = parse_dtype(value["dtype"].get<std::string>());
    for (const auto& d : value["shape"]) e.shape.push_back(json_size(d, name, "shape"));
    e.begin = json_size(value["data_offsets"][0], name, "data_offsets");
    e.end = json_size(value["data_offsets"][1], name, "data_offsets");
    if (e.begin > e.end || e.end > payload.size()) {
      throw Error(ErrorCode::kOutOfBounds,
                  fmt::format("tensor '{}' spans [{}, {}) of a {}-byte payload", name, e.begin,
                              e.end, payload.size()));
    }
    const std::size_t expected =
        checked_mul(e.element_count(), dtype_size(e.dtype), ErrorCode::kOutOfBounds);
    if (e.end - e.begin != expected) {
      throw Error(ErrorCode::kOutOfBounds,
                  fmt::format("tensor '{}' needs {} bytes, its span holds {}", name, expected,
                              e.end - e.begin));
    }
    out.entries_.emplace(name, std::move(e));
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open '{}'", path.string()));
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  if (size < 0) throw Error(ErrorCode::kIo, fmt::format("cannot size '{}'", path.string()));
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (!bytes.empty() && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
    throw Error(ErrorCode::kIo, fmt::format("cannot read '{}'", path.string()));
  }
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot create '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write '{}'", path.string()));
}

TensorContainer read_container(const std::filesystem::path& path) {
  return parse_container(read_file(path));
}

std::size_t write_container(const TensorContainer& container, const std::filesystem::path& path) {
  const auto bytes = serialize_container(container);
  write_file(path, bytes);
  return bytes.size();
}

}  // namespace hasvq
