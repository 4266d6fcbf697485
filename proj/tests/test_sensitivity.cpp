// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "doctest.h"
#include "hasvq/error.hpp"
#include "hasvq/sensitivity.hpp"
#include "test_util.hpp"

using namespace hasvq;

TEST_CASE("channel_normalize examples") {
  const auto n = channel_normalize(Matrix::from_rows({{1, -2}, {0.5, 0.5}}));
  CHECK(n.scales.values == std::vector<float>{2.0f, 0.5f});
  CHECK(n.values == Matrix::from_rows({{0.5, -1}, {1, 1}}));

  const auto z = channel_normalize(Matrix::from_rows({{0, 0}}));
  CHECK(z.scales.values == std::vector<float>{1e-8f});
  CHECK(z.values == Matrix::from_rows({{0, 0}}));
}

TEST_CASE("channel_normalize bounds every row by one") {
  const Matrix w = test::random_student_t(64, 48, 4);
  const auto n = channel_normalize(w);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    float peak = 0.0f;
    for (float v : n.values.row(r)) peak = std::max(peak, std::fabs(v));
    CHECK(peak == 1.0f);
  }
}

TEST_CASE("channel_normalize rejects non-finite weights") {
  Matrix w(2, 2, 1.0f);
  w(1, 0) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(channel_normalize(w), Error);
  w(1, 0) = INFINITY;
  try {
    channel_normalize(w);
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kValidation);
  }
}

TEST_CASE("estimate_hessian_diag examples") {
  const auto h = estimate_hessian_diag(Matrix::from_rows({{1, 2}, {3, 4}}), 0.01f);
  CHECK(h.values[0] == doctest::Approx(5.075).epsilon(1e-6));
  CHECK(h.values[1] == doctest::Approx(10.075).epsilon(1e-6));
  CHECK(h.n_samples == 2);

  const auto zero = estimate_hessian_diag(Matrix(3, 4), 0.01f);
  for (float v : zero.values) CHECK(v == kHessianFloor);

  const std::vector<std::vector<float>> rows{{1, 2}, {3, 4}};
  const auto from_rows = estimate_hessian_diag(std::span<const std::vector<float>>(rows), 0.01f);
  CHECK(from_rows.values == h.values);
}

TEST_CASE("estimate_hessian_diag on unit gaussian samples") {
  const float damping = 0.01f;
  const Matrix x = test::random_matrix(10000, 32, 2024);
  const auto h = estimate_hessian_diag(x, damping);
  for (float v : h.values) {
    CHECK(v >= 0.95f * (1.0f + damping));
    CHECK(v <= 1.05f * (1.0f + damping));
  }
}

TEST_CASE("estimate_hessian_diag rejects bad input") {
  CHECK_THROWS_AS(estimate_hessian_diag(Matrix(0, 4)), Error);
  CHECK_THROWS_AS(estimate_hessian_diag(Matrix(2, 2), -1.0f), Error);
  const std::vector<std::vector<float>> ragged{{1, 2}, {3}};
  try {
    estimate_hessian_diag(std::span<const std::vector<float>>(ragged));
    FAIL("expected shape mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShapeMismatch);
  }
}

TEST_CASE("importance_scores examples") {
  const auto a = importance_scores(Matrix::from_rows({{0.5, -1.0}}), hessian_from_diagonal({4, 1}));
  CHECK(a.scores == Matrix::from_rows({{1.0, 1.0}}));

  const Matrix w = Matrix::from_rows({{0.3f, 0.4f}, {0.6f, 0.1f}});
  const auto b = importance_scores(w, hessian_from_diagonal({1, 4}));
  CHECK(b.scores(0, 0) == doctest::Approx(0.3));
  CHECK(b.scores(0, 1) == doctest::Approx(0.8));
  CHECK(b.scores(1, 0) == doctest::Approx(0.6));
  CHECK(b.scores(1, 1) == doctest::Approx(0.2));

  const Matrix r = test::random_matrix(16, 16, 9);
  const auto c = importance_scores(r, identity_hessian(16));
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(c.scores.flat()[i] == std::fabs(r.flat()[i]));

  CHECK_THROWS_AS(importance_scores(r, identity_hessian(15)), Error);
}

TEST_CASE("select_outliers examples") {
  ImportanceMap scores{Matrix::from_rows({{0.3f, 0.8f}, {0.6f, 0.2f}})};
  const auto top = select_outliers(scores, 0.25);
  CHECK(top.flat == std::vector<std::uint32_t>{1});
  CHECK(top.row(0) == 0);
  CHECK(top.col(0) == 1);

  CHECK(select_outliers(scores, 0.0).size() == 0);

  ImportanceMap tie{Matrix::from_rows({{0.5f, 0.5f}})};
  CHECK(select_outliers(tie, 0.5).flat == std::vector<std::uint32_t>{0});

  CHECK_THROWS_AS(select_outliers(scores, 1.5), Error);
  CHECK_THROWS_AS(select_outliers(scores, -0.1), Error);
}

TEST_CASE("select_outliers agrees with a full sort") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> level(0, 20);
  for (int trial = 0; trial < 50; ++trial) {
    ImportanceMap m{Matrix(13, 17)};
    // Coarse levels force plenty of ties.
    for (float& v : m.scores.flat()) v = static_cast<float>(level(rng)) / 4.0f;
    for (double rho : {0.0, 0.005, 0.02, 0.1, 0.5, 1.0}) {
      const auto got = select_outliers(m, rho);
      std::vector<std::uint32_t> order(m.scores.size());
      std::iota(order.begin(), order.end(), 0u);
      const auto f = m.scores.flat();
      std::stable_sort(order.begin(), order.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return f[a] > f[b]; });
      order.resize(static_cast<std::size_t>(std::llround(rho * static_cast<double>(f.size()))));
      std::sort(order.begin(), order.end());
      CHECK(got.flat == order);
      CHECK(got.effective_ratio() == doctest::Approx(static_cast<double>(order.size()) / f.size()));
    }
  }
}

TEST_CASE("mask_body examples") {
  const Matrix w = Matrix::from_rows({{0.5, -1}, {1, 1}});
  OutlierSet one{2, 2, {1}};
  CHECK(mask_body(w, one) == Matrix::from_rows({{0.5, 0}, {1, 1}}));
  OutlierSet none{2, 2, {}};
  CHECK(mask_body(w, none) == w);
  OutlierSet all{2, 2, {0, 1, 2, 3}};
  CHECK(mask_body(w, all) == Matrix(2, 2));
  OutlierSet wrong{1, 4, {0}};
  CHECK_THROWS_AS(mask_body(w, wrong), Error);
}
