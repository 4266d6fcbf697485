// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hasvq/matrix.hpp"

namespace hasvq {

struct RTNConfig {
  unsigned bits = 4;
  std::size_t group_size = 32;
  bool symmetric = false;

  void validate() const;
};

/// Parses selectors such as "rtn4:g32" or "rtn8:g128:sym".
RTNConfig parse_rtn_selector(std::string_view selector);
std::string rtn_selector(const RTNConfig& config);

/// Row-contiguous groups; a row's trailing partial group is its own group.
struct RTNLayer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  RTNConfig config;
  std::vector<std::uint8_t> codes;
  std::vector<float> scales;  // binary16-representable
  std::vector<std::uint8_t> zero_points;
};

RTNLayer rtn_quantize(const Matrix& weights, const RTNConfig& config);
Matrix rtn_dequantize(const RTNLayer& layer);

/// bits + (16 + bits) / group_size: code plus FP16 scale and code-width
/// zero point per group.
double rtn_bpp(const RTNConfig& config);
/// Same layout, counting a row's trailing partial group as a full group.
double rtn_bpp(const RTNConfig& config, std::size_t rows, std::size_t cols);

/// FP16 passthrough: every weight rounded to binary16.
Matrix fp16_roundtrip(const Matrix& weights);

}  // namespace hasvq
