// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hasvq {

/// Fixed-width little-endian bitstream, LSB-first within each byte.
/// bits.size() == ceil(count * bit_width / 8).
struct PackedIndices {
  unsigned bit_width = 1;
  std::size_t count = 0;
  std::vector<std::uint8_t> bits;

  friend bool operator==(const PackedIndices&, const PackedIndices&) = default;
};

/// max(1, ceil(log2 K)).
unsigned index_bit_width(std::size_t centroids);

/// Byte length of a stream holding `count` values of `bit_width` bits.
std::size_t packed_byte_size(std::size_t count, unsigned bit_width);

/// Throws kRange if any index >= centroids, kInvalidArgument if centroids == 0.
PackedIndices pack_indices(std::span<const std::uint32_t> indices, std::size_t centroids);

/// Throws kTruncated when the stream length disagrees with count and
/// bit_width, kCorruptPayload for an unsupported bit width.
std::vector<std::uint32_t> unpack_indices(const PackedIndices& packed);

}  // namespace hasvq
