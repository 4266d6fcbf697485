// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "hasvq/matrix.hpp"

namespace hasvq::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                            double stddev = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (float& v : m.flat()) v = static_cast<float>(normal(rng));
  return m;
}

inline Matrix random_student_t(std::size_t rows, std::size_t cols, std::uint64_t seed,
                               double nu = 3.0) {
  std::mt19937_64 rng(seed);
  std::student_t_distribution<double> t(nu);
  Matrix m(rows, cols);
  for (float& v : m.flat()) v = static_cast<float>(t(rng));
  return m;
}

}  // namespace hasvq::test
