// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include "hasvq/bitpack.hpp"

#include <bit>

#include <fmt/core.h>

#include "hasvq/error.hpp"

namespace hasvq {

unsigned index_bit_width(std::size_t centroids) {
  if (centroids <= 2) return 1;
  return static_cast<unsigned>(std::bit_width(centroids - 1));
}

std::size_t packed_byte_size(std::size_t count, unsigned bit_width) {
  return (count * bit_width + 7) / 8;
}

PackedIndices pack_indices(std::span<const std::uint32_t> indices, std::size_t centroids) {
  if (centroids == 0) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  PackedIndices out;
  out.bit_width = index_bit_width(centroids);
  out.count = indices.size();
  out.bits.assign(packed_byte_size(out.count, out.bit_width), 0);
  std::size_t bit = 0;
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const std::uint64_t v = indices[n];
    if (v >= centroids) {
      throw Error(ErrorCode::kRange,
                  fmt::format("index {} at position {} is >= K={}", v, n, centroids));
    }
    for (unsigned i = 0; i < out.bit_width; ++i, ++bit) {
      if ((v >> i) & 1u) out.bits[bit >> 3] |= static_cast<std::uint8_t>(1u << (bit & 7));
    }
  }
  return out;
}

std::vector<std::uint32_t> unpack_indices(const PackedIndices& packed) {
  if (packed.bit_width == 0 || packed.bit_width > 32) {
    throw Error(ErrorCode::kCorruptPayload,
                fmt::format("unsupported index bit width {}", packed.bit_width));
  }
  if (packed.count > (std::size_t{1} << 58)) {
    throw Error(ErrorCode::kCorruptPayload, "index count is implausibly large");
  }
  const std::size_t expected = packed_byte_size(packed.count, packed.bit_width);
  if (packed.bits.size() != expected) {
    throw Error(packed.bits.size() < expected ? ErrorCode::kTruncated : ErrorCode::kCorruptPayload,
                fmt::format("index stream holds {} bytes, {} x {} bits need {}",
                            packed.bits.size(), packed.count, packed.bit_width, expected));
  }
  std::vector<std::uint32_t> out(packed.count);
  std::size_t bit = 0;
  for (std::size_t n = 0; n < packed.count; ++n) {
    std::uint32_t v = 0;
    for (unsigned i = 0; i < packed.bit_width; ++i, ++bit) {
      v |= static_cast<std::uint32_t>((packed.bits[bit >> 3] >> (bit & 7)) & 1u) << i;
    }
    out[n] = v;
  }
  return out;
}

}  // namespace hasvq
