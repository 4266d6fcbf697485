// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include "hasvq/format.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>

#include <fmt/core.h>

#include "json.hpp"

#include "hasvq/bytes.hpp"
#include "hasvq/error.hpp"
#include "hasvq/half.hpp"
#include "hasvq/safetensors.hpp"

namespace hasvq {
namespace {

using nlohmann::json;

constexpr std::size_t kPrefixBytes = sizeof(kFormatMagic) + sizeof(std::uint64_t);

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

std::size_t mul_or_corrupt(std::size_t a, std::size_t b) {
  std::size_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw Error(ErrorCode::kCorruptPayload, "size overflow in header fields");
  }
  return out;
}

const json& field(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::kMalformedHeader, fmt::format("missing field '{}'", key));
  }
  return obj[key];
}

std::size_t size_field(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_number_unsigned()) {
    throw Error(ErrorCode::kMalformedHeader, fmt::format("field '{}' must be an unsigned integer", key));
  }
  return v.get<std::size_t>();
}

std::string string_field(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_string()) {
    throw Error(ErrorCode::kMalformedHeader, fmt::format("field '{}' must be a string", key));
  }
  return v.get<std::string>();
}

Span span_field(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_unsigned() || !v[1].is_number_unsigned()) {
    throw Error(ErrorCode::kMalformedHeader, fmt::format("section '{}' must be [begin, end]", key));
  }
  Span s{v[0].get<std::size_t>(), v[1].get<std::size_t>()};
  if (s.begin > s.end) {
    throw Error(ErrorCode::kMalformedHeader, fmt::format("section '{}' ends before it begins", key));
  }
  return s;
}

json span_json(Span s) { return json::array({s.begin, s.end}); }

void append_half(std::vector<std::uint8_t>& out, float v) { append_le(out, float_to_half(v)); }

float finite_or_corrupt(float v, const char* what) {
  if (!std::isfinite(v)) throw Error(ErrorCode::kCorruptPayload, fmt::format("non-finite {}", what));
  return v;
}

// Reader over the data region with per-section size checks.
class SectionReader {
 public:
  explicit SectionReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::span<const std::uint8_t> take(Span s, std::size_t expected, const std::string& what) {
    if (s.end > data_.size()) {
      throw Error(ErrorCode::kTruncated,
                  fmt::format("{} spans [{}, {}) beyond the {}-byte data region", what, s.begin,
                              s.end, data_.size()));
    }
    if (s.size() != expected) {
      throw Error(ErrorCode::kCorruptPayload,
                  fmt::format("{} holds {} bytes, expected {}", what, s.size(), expected));
    }
    spans_.push_back({s, what});
    return data_.subspan(s.begin, s.size());
  }

  // Every byte of the data region must belong to exactly one section.
  void check_layout() {
    std::sort(spans_.begin(), spans_.end(),
              [](const auto& a, const auto& b) { return a.first.begin < b.first.begin; });
    std::size_t cursor = 0;
    for (const auto& [s, what] : spans_) {
      if (s.begin < cursor) {
        throw Error(ErrorCode::kOverlappingSections, fmt::format("{} overlaps its predecessor", what));
      }
      cursor = std::max(cursor, s.end);
    }
    std::size_t covered = 0;
    for (const auto& [s, what] : spans_) covered += s.size();
    if (covered != data_.size()) {
      throw Error(ErrorCode::kCorruptPayload,
                  fmt::format("sections cover {} of {} data bytes", covered, data_.size()));
    }
  }

 private:
  std::span<const std::uint8_t> data_;
  std::vector<std::pair<Span, std::string>> spans_;
};

std::vector<float> decode_halves(std::span<const std::uint8_t> raw, const char* what) {
  std::vector<float> out(raw.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = finite_or_corrupt(half_to_float(load_le<std::uint16_t>(raw.data() + 2 * i)), what);
  }
  return out;
}

NamedLayer decode_layer(const json& entry, SectionReader& reader) {
  NamedLayer out;
  out.name = string_field(entry, "name");
  CompressedLayer& layer = out.layer;
  layer.rows = size_field(entry, "rows");
  layer.cols = size_field(entry, "cols");
  const std::size_t block = size_field(entry, "block");
  const std::size_t centroids = size_field(entry, "centroids");
  const std::size_t bit_width = size_field(entry, "bit_width");
  const std::size_t num_blocks = size_field(entry, "num_blocks");
  const std::size_t num_outliers = size_field(entry, "num_outliers");
  const std::string dtype = string_field(entry, "residual_dtype");

  const std::size_t params = mul_or_corrupt(layer.rows, layer.cols);
  if (block == 0 || centroids == 0 || centroids > (std::size_t{1} << 32)) {
    throw Error(ErrorCode::kCorruptPayload, fmt::format("layer '{}' has invalid b or K", out.name));
  }
  if (params > std::size_t{0xffffffffu}) {
    throw Error(ErrorCode::kCorruptPayload, fmt::format("layer '{}' is too large", out.name));
  }
  if (bit_width != index_bit_width(centroids)) {
    throw Error(ErrorCode::kCorruptPayload, fmt::format("layer '{}' index width mismatch", out.name));
  }
  if (num_blocks != mul_or_corrupt(layer.rows, (layer.cols + block - 1) / block)) {
    throw Error(ErrorCode::kCorruptPayload, fmt::format("layer '{}' block count mismatch", out.name));
  }
  if (num_outliers > params) {
    throw Error(ErrorCode::kCorruptPayload, fmt::format("layer '{}' outlier count too large", out.name));
  }
  if (dtype == "F16") {
    layer.residual.precision = ResidualPrecision::kHalf;
  } else if (dtype == "F32") {
    layer.residual.precision = ResidualPrecision::kSingle;
  } else {
    throw Error(ErrorCode::kUnsupportedDtype, fmt::format("residual dtype '{}'", dtype));
  }

  const json& sections = field(entry, "sections");
  const std::string tag = "layer '" + out.name + "' ";
  const auto scales = reader.take(span_field(sections, "scales"), mul_or_corrupt(layer.rows, 2),
                                  tag + "scales");
  const auto codebook = reader.take(span_field(sections, "codebook"),
                                    mul_or_corrupt(mul_or_corrupt(centroids, block), 2),
                                    tag + "codebook");
  const auto indices = reader.take(span_field(sections, "indices"),
                                   packed_byte_size(num_blocks, static_cast<unsigned>(bit_width)),
                                   tag + "indices");
  const auto outlier_idx = reader.take(span_field(sections, "outlier_indices"),
                                       mul_or_corrupt(num_outliers, 4), tag + "outlier indices");
  const std::size_t value_width = layer.residual.precision == ResidualPrecision::kHalf ? 2 : 4;
  const auto residual = reader.take(span_field(sections, "residual_values"),
                                    mul_or_corrupt(num_outliers, value_width),
                                    tag + "residual values");

  layer.scales = decode_halves(scales, "scale");
  for (float s : layer.scales) {
    if (!(s > 0.0f)) throw Error(ErrorCode::kCorruptPayload, "non-positive scale");
  }
  layer.codebook.centroids = Matrix(centroids, block, decode_halves(codebook, "centroid"));
  layer.indices.bit_width = static_cast<unsigned>(bit_width);
  layer.indices.count = num_blocks;
  layer.indices.bits.assign(indices.begin(), indices.end());
  for (std::uint32_t id : unpack_indices(layer.indices)) {
    if (id >= centroids) {
      throw Error(ErrorCode::kCorruptPayload, fmt::format("{}centroid id {} >= K", tag, id));
    }
  }
  layer.residual.indices.resize(num_outliers);
  layer.residual.values.resize(num_outliers);
  for (std::size_t n = 0; n < num_outliers; ++n) {
    const auto at = load_le<std::uint32_t>(outlier_idx.data() + 4 * n);
    if (at >= params || (n > 0 && at <= layer.residual.indices[n - 1])) {
      throw Error(ErrorCode::kCorruptPayload,
                  fmt::format("{}outlier indices must be increasing and in range", tag));
    }
    layer.residual.indices[n] = at;
    const float v = value_width == 2
                        ? half_to_float(load_le<std::uint16_t>(residual.data() + 2 * n))
                        : std::bit_cast<float>(load_le<std::uint32_t>(residual.data() + 4 * n));
    layer.residual.values[n] = finite_or_corrupt(v, "residual");
  }
  return out;
}

PassthroughTensor decode_passthrough(const json& entry, SectionReader& reader) {
  PassthroughTensor out;
  out.name = string_field(entry, "name");
  if (string_field(entry, "dtype") != "F16") {
    throw Error(ErrorCode::kUnsupportedDtype, "passthrough tensors are stored as F16");
  }
  const json& shape = field(entry, "shape");
  if (!shape.is_array()) throw Error(ErrorCode::kMalformedHeader, "shape must be an array");
  std::size_t count = 1;
  for (const auto& d : shape) {
    if (!d.is_number_unsigned()) throw Error(ErrorCode::kMalformedHeader, "bad shape entry");
    out.shape.push_back(d.get<std::size_t>());
    count = mul_or_corrupt(count, out.shape.back());
  }
  const auto raw = reader.take(span_field(entry, "data"), mul_or_corrupt(count, 2),
                               "passthrough '" + out.name + "'");
  out.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) out.values[i] = load_le<std::uint16_t>(raw.data() + 2 * i);
  return out;
}

}  // namespace

void CompressedModel::validate() const {
  if (version.empty()) throw Error(ErrorCode::kValidation, "format version is missing");
  std::set<std::string> names;
  for (const auto& l : layers) {
    if (!names.insert(l.name).second) {
      throw Error(ErrorCode::kValidation, fmt::format("duplicate tensor name '{}'", l.name));
    }
    l.layer.validate();
  }
  for (const auto& p : passthrough) {
    if (!names.insert(p.name).second) {
      throw Error(ErrorCode::kValidation, fmt::format("duplicate tensor name '{}'", p.name));
    }
    std::size_t count = 1;
    for (std::size_t d : p.shape) count *= d;
    if (count != p.values.size()) {
      throw Error(ErrorCode::kValidation, fmt::format("passthrough '{}' size mismatch", p.name));
    }
  }
}

const CompressedLayer* CompressedModel::find(std::string_view name) const {
  for (const auto& l : layers) {
    if (l.name == name) return &l.layer;
  }
  return nullptr;
}

bool identical(const CompressedModel& a, const CompressedModel& b) {
  if (a.version != b.version || a.profile != b.profile || a.seed != b.seed ||
      a.layers.size() != b.layers.size() || a.passthrough.size() != b.passthrough.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].name != b.layers[i].name || !identical(a.layers[i].layer, b.layers[i].layer)) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.passthrough.size(); ++i) {
    const auto& x = a.passthrough[i];
    const auto& y = b.passthrough[i];
    if (x.name != y.name || x.shape != y.shape || x.values != y.values) return false;
  }
  return true;
}

StorageBreakdown model_storage(const CompressedModel& model) {
  StorageBreakdown total;
  for (const auto& l : model.layers) total += layer_storage(l.layer);
  for (const auto& p : model.passthrough) total += passthrough_storage(p.values.size());
  return total;
}

SerializedModel serialize_compressed(const CompressedModel& model) {
  model.validate();
  std::vector<std::uint8_t> data;
  json layers = json::array();
  auto section = [&](auto&& fill) {
    const std::size_t begin = data.size();
    fill();
    return Span{begin, data.size()};
  };

  for (const auto& [name, layer] : model.layers) {
    json sections = json::object();
    sections["scales"] = span_json(section([&] {
      for (float s : layer.scales) append_half(data, s);
    }));
    sections["codebook"] = span_json(section([&] {
      for (float c : layer.codebook.centroids.flat()) append_half(data, c);
    }));
    sections["indices"] = span_json(section([&] {
      data.insert(data.end(), layer.indices.bits.begin(), layer.indices.bits.end());
    }));
    sections["outlier_indices"] = span_json(section([&] {
      for (std::uint32_t i : layer.residual.indices) append_le(data, i);
    }));
    sections["residual_values"] = span_json(section([&] {
      for (float v : layer.residual.values) {
        if (layer.residual.precision == ResidualPrecision::kHalf) {
          append_half(data, v);
        } else {
          append_le(data, std::bit_cast<std::uint32_t>(v));
        }
      }
    }));
    layers.push_back({{"name", name},
                      {"rows", layer.rows},
                      {"cols", layer.cols},
                      {"block", layer.block_size()},
                      {"centroids", layer.codebook.size()},
                      {"bit_width", layer.indices.bit_width},
                      {"num_blocks", layer.indices.count},
                      {"num_outliers", layer.residual.size()},
                      {"pad_count", layer.pad_count()},
                      {"residual_dtype", residual_dtype_name(layer.residual.precision)},
                      {"sections", sections}});
  }

  json passthrough = json::array();
  for (const auto& p : model.passthrough) {
    const Span s = section([&] {
      for (std::uint16_t v : p.values) append_le(data, v);
    });
    passthrough.push_back({{"name", p.name}, {"shape", p.shape}, {"dtype", "F16"}, {"data", span_json(s)}});
  }

  const json header = {{"format_version", model.version},
                       {"profile", model.profile},
                       {"seed", model.seed},
                       {"layers", layers},
                       {"passthrough", passthrough}};
  const std::string text = header.dump();

  SerializedModel out;
  out.bytes.reserve(kPrefixBytes + text.size() + data.size());
  out.bytes.insert(out.bytes.end(), std::begin(kFormatMagic), std::end(kFormatMagic));
  append_le<std::uint64_t>(out.bytes, text.size());
  out.bytes.insert(out.bytes.end(), text.begin(), text.end());
  out.header_bytes = out.bytes.size();
  out.bytes.insert(out.bytes.end(), data.begin(), data.end());
  return out;
}

CompressedModel parse_compressed(std::span<const std::uint8_t> bytes) {
  const std::size_t magic_len = std::min(bytes.size(), sizeof(kFormatMagic));
  if (magic_len != 0 && std::memcmp(bytes.data(), kFormatMagic, magic_len) != 0) {
    throw Error(ErrorCode::kBadMagic, "not a .hasvq file");
  }
  if (bytes.size() < kPrefixBytes) {
    throw Error(ErrorCode::kTruncated, fmt::format("{} bytes is shorter than the file prefix", bytes.size()));
  }
  const auto header_len = load_le<std::uint64_t>(bytes.data() + sizeof(kFormatMagic));
  if (header_len > bytes.size() - kPrefixBytes) {
    throw Error(ErrorCode::kTruncated,
                fmt::format("header length {} exceeds the {} remaining bytes", header_len,
                            bytes.size() - kPrefixBytes));
  }
  const auto* text = reinterpret_cast<const char*>(bytes.data() + kPrefixBytes);
  const json header = json::parse(text, text + header_len, nullptr, false);
  if (header.is_discarded() || !header.is_object()) {
    throw Error(ErrorCode::kMalformedHeader, "header is not a JSON object");
  }
  if (!header.contains("format_version") || !header["format_version"].is_string() ||
      header["format_version"].get<std::string>() != kFormatVersion) {
    throw Error(ErrorCode::kBadVersion,
                fmt::format("expected format_version \"{}\"", kFormatVersion));
  }

  CompressedModel model;
  model.version = kFormatVersion;
  model.profile = string_field(header, "profile");
  const json& seed = field(header, "seed");
  if (!seed.is_number_unsigned()) throw Error(ErrorCode::kMalformedHeader, "seed must be unsigned");
  model.seed = seed.get<std::uint64_t>();

  SectionReader reader(bytes.subspan(kPrefixBytes + header_len));
  const json& layers = field(header, "layers");
  const json& passthrough = field(header, "passthrough");
  if (!layers.is_array() || !passthrough.is_array()) {
    throw Error(ErrorCode::kMalformedHeader, "layers and passthrough must be arrays");
  }
  for (const auto& entry : layers) model.layers.push_back(decode_layer(entry, reader));
  for (const auto& entry : passthrough) model.passthrough.push_back(decode_passthrough(entry, reader));
  reader.check_layout();

  try {
    model.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kCorruptPayload, e.what());
  }
  return model;
}

std::size_t write_compressed(const CompressedModel& model, const std::filesystem::path& path) {
  const SerializedModel s = serialize_compressed(model);
  write_file(path, s.bytes);
  return s.bytes.size();
}

CompressedModel read_compressed(const std::filesystem::path& path) {
  return parse_compressed(read_file(path));
}

}  // namespace hasvq
