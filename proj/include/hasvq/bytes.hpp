// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

// Little-endian load/store helpers, independent of host byte order.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hasvq {

template <typename T>
T load_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace hasvq
