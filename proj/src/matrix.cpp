// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include "hasvq/matrix.hpp"

#include <cmath>
#include <cstring>

#include <fmt/core.h>

#include "hasvq/error.hpp"

namespace hasvq {

Matrix::Matrix(std::size_t rows, std::size_t cols, float fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("{} values for a {}x{} matrix", values_.size(), rows, cols));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<float>> rows) {
  const std::size_t n_rows = rows.size();
  const std::size_t n_cols = n_rows == 0 ? 0 : rows.begin()->size();
  std::vector<float> values;
  values.reserve(n_rows * n_cols);
  for (const auto& r : rows) {
    if (r.size() != n_cols) throw Error(ErrorCode::kShapeMismatch, "ragged initializer");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Matrix(n_rows, n_cols, std::move(values));
}

bool Matrix::identical(const Matrix& other) const {
  return rows_ == other.rows_ && cols_ == other.cols_ &&
         (values_.empty() ||
          std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(float)) == 0);
}

void require_finite(const Matrix& m, const char* what) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m.flat()[i])) {
      throw Error(ErrorCode::kValidation,
                  fmt::format("{} has a non-finite entry at ({}, {})", what, i / m.cols(),
                              i % m.cols()));
    }
  }
}

}  // namespace hasvq
