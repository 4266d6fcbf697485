// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "doctest.h"
#include "hasvq/error.hpp"
#include "hasvq/half.hpp"
#include "hasvq/vq.hpp"
#include "test_util.hpp"

using namespace hasvq;

namespace {

// Minimum within-cluster sum of squares over every labelling of the points
// with at most k labels, each label's centroid being its exact mean.
double optimal_inertia(const Matrix& points, std::size_t k) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  std::vector<std::size_t> label(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> mean(dim, 0.0);
      std::size_t members = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != c) continue;
        ++members;
        for (std::size_t d = 0; d < dim; ++d) mean[d] += points(i, d);
      }
      if (members == 0) continue;
      for (double& m : mean) m /= static_cast<double>(members);
      for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != c) continue;
        for (std::size_t d = 0; d < dim; ++d) {
          const double diff = points(i, d) - mean[d];
          total += diff * diff;
        }
      }
    }
    best = std::min(best, total);
    std::size_t pos = 0;
    while (pos < n && ++label[pos] == k) label[pos++] = 0;
    if (pos == n) break;
  }
  return best;
}

Matrix column(std::initializer_list<float> values) {
  return Matrix(values.size(), 1, std::vector<float>(values));
}

}  // namespace

TEST_CASE("blockify layout and padding") {
  const Matrix w = Matrix::from_rows({{1, 2, 3, 4}, {5, 6, 7, 8}});
  const auto v = blockify(w, 2);
  CHECK(v.blocks == Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}, {7, 8}}));
  CHECK(v.pad_count == 0);
  CHECK(deblockify(v) == w);

  const Matrix odd = Matrix::from_rows({{1, 2, 3}});
  const auto p = blockify(odd, 2);
  CHECK(p.blocks == Matrix::from_rows({{1, 2}, {3, 0}}));
  CHECK(p.pad_count == 1);
  CHECK(p.is_padded(1));
  CHECK_FALSE(p.is_padded(0));
  CHECK(deblockify(p) == odd);

  CHECK_THROWS_AS(blockify(w, 0), Error);
}

TEST_CASE("blockify round trips random shapes") {
  for (std::size_t b : {1u, 2u, 3u, 4u, 5u, 8u}) {
    const Matrix w = test::random_matrix(7, 13, b);
    const auto v = blockify(w, b);
    CHECK(v.blocks.rows() == 7 * ((13 + b - 1) / b));
    CHECK(deblockify(v) == w);
  }
}

TEST_CASE("training sample size") {
  CHECK(training_sample_size(1000, 16) == 1000);
  CHECK(training_sample_size(1000000, 256) == 65536);
  CHECK(training_sample_size(1000000, 4) == 4096);

  const Matrix small = test::random_matrix(1000, 2, 1);
  BlockView all{small, 1000, 2, 0};
  CHECK(sample_training_blocks(all, 16, 3) == small);

  const Matrix big = test::random_matrix(100000, 2, 2);
  BlockView view{big, 100000, 2, 0};
  const auto a = sample_training_blocks(view, 64, 42);
  const auto b = sample_training_blocks(view, 64, 42);
  CHECK(a.rows() == 16384);
  CHECK(a.identical(b));
  CHECK_FALSE(a.identical(sample_training_blocks(view, 64, 43)));
}

TEST_CASE("sampling draws without replacement") {
  Matrix ids(50000, 1);
  for (std::size_t i = 0; i < ids.rows(); ++i) ids(i, 0) = static_cast<float>(i);
  BlockView view{ids, 50000, 1, 0};
  const auto s = sample_training_blocks(view, 16, 5);
  REQUIRE(s.rows() == 4096);
  std::set<float> seen(s.flat().begin(), s.flat().end());
  CHECK(seen.size() == 4096);
}

TEST_CASE("kmeans++ seeding") {
  const Matrix pts = test::random_matrix(200, 3, 8);
  const auto one = kmeanspp_init(pts, 1, 4);
  bool found = false;
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    found = found || std::equal(pts.row(i).begin(), pts.row(i).end(), one.centroids.row(0).begin());
  }
  CHECK(found);

  const auto two = kmeanspp_init(column({0, 10}), 2, 1);
  std::set<float> chosen{two.centroids(0, 0), two.centroids(1, 0)};
  CHECK(chosen == std::set<float>{0.0f, 10.0f});

  CHECK(kmeanspp_init(pts, 16, 9).centroids.identical(kmeanspp_init(pts, 16, 9).centroids));
  CHECK_THROWS_AS(kmeanspp_init(pts, 0, 1), Error);
}

TEST_CASE("kmeans K=1 converges to the mean") {
  const Matrix pts = test::random_matrix(500, 2, 12);
  KMeansOptions opts;
  opts.half_output = false;
  const auto fit = kmeans_fit(pts, kmeanspp_init(pts, 1, 0), opts);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    mx += pts(i, 0);
    my += pts(i, 1);
  }
  mx /= 500.0;
  my /= 500.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    ss += (pts(i, 0) - mx) * (pts(i, 0) - mx) + (pts(i, 1) - my) * (pts(i, 1) - my);
  }
  CHECK(fit.codebook.centroids(0, 0) == doctest::Approx(mx).epsilon(1e-6));
  CHECK(fit.codebook.centroids(0, 1) == doctest::Approx(my).epsilon(1e-6));
  CHECK(fit.assignment.inertia == doctest::Approx(ss).epsilon(1e-5));
}

TEST_CASE("kmeans finds the separable optimum") {
  const Matrix pts = column({0, 0, 10, 10});
  const auto fit = kmeans_fit(pts, kmeanspp_init(pts, 2, 0));
  std::set<float> centroids{fit.codebook.centroids(0, 0), fit.codebook.centroids(1, 0)};
  CHECK(centroids == std::set<float>{0.0f, 10.0f});
  CHECK(fit.assignment.inertia == 0.0);
  CHECK(optimal_inertia(pts, 2) == 0.0);
}

TEST_CASE("kmeans never beats the exhaustive optimum") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> n_dist(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = 1 + trial % 2;
    const std::size_t k = 1 + trial % 3;
    const std::size_t n = n_dist(rng);
    Matrix pts = test::random_matrix(n, b, 1000 + trial);
    const auto fit = kmeans_fit(pts, kmeanspp_init(pts, std::min(k, n), trial),
                                KMeansOptions{100, 1e-6, 1, false});
    const double opt = optimal_inertia(pts, std::min(k, n));
    CHECK(fit.assignment.inertia >= opt * (1.0 - 1e-6) - 1e-12);
  }
}

TEST_CASE("kmeans inertia is non-increasing") {
  const Matrix pts = test::random_student_t(4000, 4, 77);
  KMeansOptions opts;
  opts.max_iters = 50;
  opts.rel_tol = 0.0;
  const auto fit = kmeans_fit(pts, kmeanspp_init(pts, 32, 1), opts);
  for (std::size_t i = 1; i < fit.inertia_history.size(); ++i) {
    CHECK(fit.inertia_history[i] <= fit.inertia_history[i - 1]);
  }
  for (float c : fit.codebook.centroids.flat()) CHECK(is_half_representable(c));
}

TEST_CASE("kmeans is deterministic across worker counts") {
  const Matrix pts = test::random_matrix(3000, 2, 55);
  KMeansOptions serial;
  KMeansOptions threaded;
  threaded.workers = 4;
  const auto a = kmeans_fit(pts, kmeanspp_init(pts, 16, 2), serial);
  const auto b = kmeans_fit(pts, kmeanspp_init(pts, 16, 2), threaded);
  CHECK(a.codebook.centroids.identical(b.codebook.centroids));
  CHECK(a.assignment.idx == b.assignment.idx);
  CHECK(a.inertia_history == b.inertia_history);
}

TEST_CASE("dead-unit revival") {
  SUBCASE("identical samples leave the spare colocated") {
    const Matrix pts = column({3, 3, 3, 3});
    const auto fit = kmeans_fit(pts, kmeanspp_init(pts, 2, 0));
    CHECK(fit.codebook.centroids(0, 0) == 3.0f);
    CHECK(fit.codebook.centroids(1, 0) == 3.0f);
    for (auto id : fit.assignment.idx) CHECK(id == 0);
    CHECK(fit.assignment.inertia == 0.0);
  }
  SUBCASE("dead centroid moves to the worst-served sample") {
    const Matrix pts = column({0, 0, 0, 100});
    Codebook book{column({0, 1000})};
    Assignment a = assign_nearest(pts, book);
    CHECK(a.idx == std::vector<std::uint32_t>{0, 0, 0, 0});
    CHECK(revive_dead_units(book, pts, a) == 1);
    CHECK(book.centroids(1, 0) == 100.0f);
    CHECK(a.idx == std::vector<std::uint32_t>{0, 0, 0, 1});
    CHECK(a.inertia == 0.0);
  }
}

TEST_CASE("assignment ties and exact matches") {
  Codebook book{Matrix::from_rows({{5, 5}, {0, 0}, {-1, 0}, {9, 9}, {7, 7}, {1, 0}})};
  const Matrix pts = Matrix::from_rows({{0, 0}, {0, 0.5f}, {8, 8}});
  const auto a = assign_nearest(pts, book);
  CHECK(a.idx[0] == 1);
  CHECK(a.idx[1] == 1);
  // (8,8) is equidistant from ids 3 and 4.
  CHECK(a.idx[2] == 3);

  Codebook tie{Matrix::from_rows({{9}, {9}, {-1}, {9}, {9}, {1}})};
  CHECK(assign_nearest(column({0}), tie).idx[0] == 2);
}

TEST_CASE("reconstruct_body") {
  const Matrix w = Matrix::from_rows({{1, 2, 3, 4}, {5, 6, 7, 8}});
  const auto view = blockify(w, 2);
  Codebook exact{view.blocks};
  const auto a = quantize_body(view, exact);
  CHECK(a.inertia == 0.0);
  CHECK(reconstruct_body(exact, a.idx, 2, 4) == w);

  Codebook single{Matrix::from_rows({{0.25f, -0.5f, 0.75f}})};
  const std::vector<std::uint32_t> ids(6, 0);
  const Matrix r = reconstruct_body(single, ids, 3, 5);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r(i, 0) == 0.25f);
    CHECK(r(i, 1) == -0.5f);
    CHECK(r(i, 2) == 0.75f);
    CHECK(r(i, 3) == 0.25f);
    CHECK(r(i, 4) == -0.5f);
  }
  const std::vector<std::uint32_t> bad(6, 1);
  CHECK_THROWS_AS(reconstruct_body(single, bad, 3, 5), Error);
}
