// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include "hasvq/baselines.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/core.h>

#include "hasvq/error.hpp"
#include "hasvq/half.hpp"

namespace hasvq {
namespace {

constexpr float kRtnScaleFloor = 1e-8f;

float stored_scale(float exact) {
  return half_to_float(float_to_half_round_up(std::max(exact, kRtnScaleFloor)));
}

std::size_t parse_count(std::string_view text, std::string_view selector) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (text.empty() || res.ec != std::errc{} || res.ptr != end) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("bad baseline selector '{}'", selector));
  }
  return value;
}

}  // namespace

void RTNConfig::validate() const {
  if (bits != 4 && bits != 8) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("RTN bits must be 4 or 8, got {}", bits));
  }
  if (group_size == 0) throw Error(ErrorCode::kInvalidArgument, "RTN group size must be >= 1");
}

RTNConfig parse_rtn_selector(std::string_view selector) {
  // rtn<bits>[:g<group>][:sym]
  RTNConfig config;
  if (!selector.starts_with("rtn")) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("bad baseline selector '{}'", selector));
  }
  std::string_view rest = selector.substr(3);
  const auto colon = rest.find(':');
  config.bits = static_cast<unsigned>(parse_count(rest.substr(0, colon), selector));
  rest = colon == std::string_view::npos ? std::string_view{} : rest.substr(colon + 1);
  while (!rest.empty()) {
    const auto next = rest.find(':');
    const std::string_view part = rest.substr(0, next);
    if (part == "sym") {
      config.symmetric = true;
    } else if (part.starts_with("g")) {
      config.group_size = parse_count(part.substr(1), selector);
    } else {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("bad baseline selector '{}'", selector));
    }
    rest = next == std::string_view::npos ? std::string_view{} : rest.substr(next + 1);
  }
  config.validate();
  return config;
}

std::string rtn_selector(const RTNConfig& config) {
  return fmt::format("rtn{}:g{}{}", config.bits, config.group_size, config.symmetric ? ":sym" : "");
}

RTNLayer rtn_quantize(const Matrix& weights, const RTNConfig& config) {
  config.validate();
  require_finite(weights, "weight matrix");
  const int qmax = (1 << config.bits) - 1;
  const std::size_t groups_per_row = (weights.cols() + config.group_size - 1) / config.group_size;

  RTNLayer out;
  out.rows = weights.rows();
  out.cols = weights.cols();
  out.config = config;
  out.codes.resize(weights.size());
  out.scales.reserve(weights.rows() * groups_per_row);
  out.zero_points.reserve(weights.rows() * groups_per_row);

  for (std::size_t r = 0; r < weights.rows(); ++r) {
    const auto row = weights.row(r);
    for (std::size_t g = 0; g < groups_per_row; ++g) {
      const std::size_t begin = g * config.group_size;
      const std::size_t end = std::min(row.size(), begin + config.group_size);
      const auto group = row.subspan(begin, end - begin);

      // Rounding the stored scale up keeps every in-range weight on the grid.
      float scale;
      int zero_point;
      if (config.symmetric) {
        float peak = 0.0f;
        for (float w : group) peak = std::max(peak, std::fabs(w));
        const int half_range = 1 << (config.bits - 1);
        scale = stored_scale(peak / static_cast<float>(half_range - 1));
        zero_point = half_range;
      } else {
        // The grid always contains zero, which keeps the zero point in range.
        float lo = 0.0f;
        float hi = 0.0f;
        for (float w : group) {
          lo = std::min(lo, w);
          hi = std::max(hi, w);
        }
        scale = stored_scale((hi - lo) / static_cast<float>(qmax));
        zero_point = std::clamp(static_cast<int>(std::round(-lo / scale)), 0, qmax);
      }
      out.scales.push_back(scale);
      out.zero_points.push_back(static_cast<std::uint8_t>(zero_point));
      for (std::size_t c = begin; c < end; ++c) {
        const int code = static_cast<int>(std::round(row[c] / scale)) + zero_point;
        out.codes[r * weights.cols() + c] = static_cast<std::uint8_t>(std::clamp(code, 0, qmax));
      }
    }
  }
  return out;
}

Matrix rtn_dequantize(const RTNLayer& layer) {
  const std::size_t groups_per_row =
      (layer.cols + layer.config.group_size - 1) / layer.config.group_size;
  Matrix out(layer.rows, layer.cols);
  for (std::size_t r = 0; r < layer.rows; ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < layer.cols; ++c) {
      const std::size_t g = r * groups_per_row + c / layer.config.group_size;
      const int code = layer.codes[r * layer.cols + c];
      row[c] = static_cast<float>(code - static_cast<int>(layer.zero_points[g])) * layer.scales[g];
    }
  }
  return out;
}

double rtn_bpp(const RTNConfig& config) {
  config.validate();
  return config.bits + (16.0 + config.bits) / static_cast<double>(config.group_size);
}

double rtn_bpp(const RTNConfig& config, std::size_t rows, std::size_t cols) {
  config.validate();
  if (rows * cols == 0) throw Error(ErrorCode::kInvalidArgument, "empty layer");
  const double groups =
      static_cast<double>(rows) * static_cast<double>((cols + config.group_size - 1) / config.group_size);
  const double params = static_cast<double>(rows) * static_cast<double>(cols);
  return (config.bits * params + (16.0 + config.bits) * groups) / params;
}

Matrix fp16_roundtrip(const Matrix& weights) {
  Matrix out = weights;
  for (float& v : out.flat()) v = round_to_half(v);
  return out;
}

}  // namespace hasvq
