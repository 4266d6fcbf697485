// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

// IEEE 754 binary16 conversions. All arithmetic stays in FP32; halves only
// appear at storage boundaries.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

namespace hasvq {

/// Round-to-nearest-even float -> binary16. NaN maps to a quiet NaN,
/// out-of-range magnitudes to infinity.
inline std::uint16_t float_to_half(float value) {
  constexpr std::uint32_t kF32Infinity = 255u << 23;
  constexpr std::uint32_t kF16Overflow = (127u + 16u) << 23;
  constexpr std::uint32_t kDenormMagic = ((127u - 15u) + (23u - 10u) + 1u) << 23;

  std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  const std::uint32_t sign = bits & 0x80000000u;
  bits ^= sign;

  std::uint32_t out;
  if (bits >= kF16Overflow) {
    out = bits > kF32Infinity ? 0x7e00u : 0x7c00u;
  } else if (bits < (113u << 23)) {
    // Subnormal or zero: let the FPU do the rounding by aligning the
    // mantissa against a magic constant.
    const float aligned = std::bit_cast<float>(bits) + std::bit_cast<float>(kDenormMagic);
    out = std::bit_cast<std::uint32_t>(aligned) - kDenormMagic;
  } else {
    const std::uint32_t mant_odd = (bits >> 13) & 1u;
    bits += (static_cast<std::uint32_t>(15 - 127) << 23) + 0xfffu;
    bits += mant_odd;
    out = bits >> 13;
  }
  return static_cast<std::uint16_t>(out | (sign >> 16));
}

inline float half_to_float(std::uint16_t half) {
  const std::uint32_t sign = static_cast<std::uint32_t>(half & 0x8000u) << 16;
  const std::uint32_t exponent = (half >> 10) & 0x1fu;
  const std::uint32_t mantissa = half & 0x3ffu;
  if (exponent == 0) {
    const float magnitude = std::ldexp(static_cast<float>(mantissa), -24);
    return sign ? -magnitude : magnitude;
  }
  if (exponent == 31) {
    return std::bit_cast<float>(sign | 0x7f800000u | (mantissa << 13));
  }
  return std::bit_cast<float>(sign | ((exponent + 112u) << 23) | (mantissa << 13));
}

/// Value after a binary16 storage round trip.
inline float round_to_half(float value) { return half_to_float(float_to_half(value)); }

/// Smallest binary16 value >= a finite non-negative `value`.
inline std::uint16_t float_to_half_round_up(float value) {
  std::uint16_t h = float_to_half(value);
  if (half_to_float(h) < value) ++h;
  return h;
}

/// Unit in the last place of binary16 at the magnitude of `value`
/// (2^-24 in the subnormal range).
inline float half_ulp(float value) {
  const float magnitude = std::fabs(value);
  if (magnitude < 0x1p-14f) return 0x1p-24f;
  return std::ldexp(1.0f, std::ilogb(magnitude) - 10);
}

inline bool is_half_representable(float value) {
  return std::isnan(value) || round_to_half(value) == value;
}

}  // namespace hasvq
