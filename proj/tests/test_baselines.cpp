// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "hasvq/baselines.hpp"
#include "hasvq/error.hpp"
#include "hasvq/half.hpp"
#include "test_util.hpp"

using namespace hasvq;

TEST_CASE("uniform group example") {
  Matrix w(1, 16);
  for (std::size_t j = 0; j < 16; ++j) w(0, j) = 0.1f * static_cast<float>(j);
  w(0, 7) = 0.74f;
  const auto q = rtn_quantize(w, RTNConfig{4, 16, false});
  REQUIRE(q.scales.size() == 1);
  CHECK(q.scales[0] == doctest::Approx(0.1).epsilon(1e-3));
  CHECK(is_half_representable(q.scales[0]));
  CHECK(q.zero_points[0] == 0);
  CHECK(q.codes[7] == 7);
  CHECK(q.codes[15] == 15);
  const Matrix d = rtn_dequantize(q);
  CHECK(d(0, 7) == doctest::Approx(0.7).epsilon(1e-3));
}

TEST_CASE("constant groups") {
  SUBCASE("all zero uses the scale floor") {
    const auto q = rtn_quantize(Matrix(2, 8), RTNConfig{4, 8, false});
    for (float s : q.scales) CHECK(s == half_to_float(float_to_half_round_up(1e-8f)));
    for (std::size_t i = 0; i < q.codes.size(); ++i) CHECK(q.codes[i] == q.zero_points[i / 8]);
    CHECK(rtn_dequantize(q) == Matrix(2, 8));
  }
  SUBCASE("nonzero constant dequantizes to itself") {
    for (float c : {3.0f, -0.25f, 1e-3f}) {
      const auto q = rtn_quantize(Matrix(1, 32, c), RTNConfig{4, 32, false});
      for (std::size_t i = 1; i < q.codes.size(); ++i) CHECK(q.codes[i] == q.codes[0]);
      const Matrix d = rtn_dequantize(q);
      for (float v : d.flat()) {
        CHECK(std::fabs(v - c) <= q.scales[0] / 2.0f + half_ulp(c));
      }
    }
  }
}

TEST_CASE("half-step error bound") {
  std::mt19937_64 rng(2025);
  std::student_t_distribution<double> t(3.0);
  Matrix w(100, 1000);
  for (float& v : w.flat()) v = static_cast<float>(t(rng));
  for (const RTNConfig config :
       {RTNConfig{4, 32, false}, RTNConfig{8, 128, false}, RTNConfig{4, 7, false},
        RTNConfig{4, 32, true}}) {
    const auto q = rtn_quantize(w, config);
    const Matrix d = rtn_dequantize(q);
    const int qmax = (1 << config.bits) - 1;
    const std::size_t groups = (w.cols() + config.group_size - 1) / config.group_size;
    for (std::size_t r = 0; r < w.rows(); ++r) {
      for (std::size_t c = 0; c < w.cols(); ++c) {
        const std::size_t g = r * groups + c / config.group_size;
        const float s = q.scales[g];
        const std::uint8_t code = q.codes[r * w.cols() + c];
        CHECK(code <= qmax);
        if (config.symmetric && code == 0) continue;  // the unused negative end
        const float err = std::fabs(w(r, c) - d(r, c));
        CHECK(err <= s / 2.0f + std::fabs(w(r, c)) * 0x1p-22f);
      }
    }
  }
}

TEST_CASE("clamp boundaries round trip") {
  const Matrix w = Matrix::from_rows({{0.0f, 1.5f, 0.7f, 1.5f}, {-1.5f, 0.0f, -0.2f, -1.5f}});
  const auto q = rtn_quantize(w, RTNConfig{4, 4, false});
  CHECK(q.zero_points[0] == 0);
  CHECK(q.codes[1] == 15);
  CHECK(q.zero_points[1] == 15);
  CHECK(q.codes[4] == 0);
  const Matrix d = rtn_dequantize(q);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(std::fabs(d.flat()[i] - w.flat()[i]) <= q.scales[i / 4] / 2.0f);
  }
  CHECK(d(0, 0) == 0.0f);
  CHECK(d(1, 1) == 0.0f);
}

TEST_CASE("analytic bits per parameter") {
  CHECK(rtn_bpp(RTNConfig{4, 32, false}) == 4.625);
  CHECK(rtn_bpp(RTNConfig{8, 128, false}) == 8.1875);
  CHECK(rtn_bpp(RTNConfig{4, 32, false}, 512, 512) == 4.625);
  // A ragged last group still costs a full scale and zero point.
  CHECK(rtn_bpp(RTNConfig{4, 32, false}, 1, 48) == doctest::Approx((4.0 * 48 + 40.0) / 48.0));
}

TEST_CASE("selectors") {
  const auto a = parse_rtn_selector("rtn4:g32");
  CHECK(a.bits == 4);
  CHECK(a.group_size == 32);
  CHECK_FALSE(a.symmetric);
  CHECK(rtn_selector(a) == "rtn4:g32");
  const auto b = parse_rtn_selector("rtn8:g128:sym");
  CHECK(b.bits == 8);
  CHECK(b.group_size == 128);
  CHECK(b.symmetric);
  CHECK(parse_rtn_selector("rtn4").group_size == 32);
  for (const char* bad : {"int4", "rtn3:g32", "rtn4:g0", "rtn4:gx", "rtn4:q32", "rtn:g32"}) {
    CHECK_THROWS_AS(parse_rtn_selector(bad), Error);
  }
}

TEST_CASE("rtn rejects non-finite input") {
  Matrix w(1, 4);
  w(0, 2) = NAN;
  CHECK_THROWS_AS(rtn_quantize(w, RTNConfig{}), Error);
}
