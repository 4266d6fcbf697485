// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include "hasvq/vq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/core.h>

#include "hasvq/error.hpp"
#include "hasvq/half.hpp"
#include "hasvq/parallel.hpp"

namespace hasvq {
namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

float squared_distance(std::span<const float> a, std::span<const float> b) {
  float acc = 0.0f;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const float diff = a[d] - b[d];
    acc += diff * diff;
  }
  return acc;
}

// Nearest centroid per point. Distances accumulate over coordinates in order,
// so the result matches a per-centroid scalar loop bit for bit.
void assign_points(const Matrix& points, const Matrix& centroids, std::size_t workers,
                   std::vector<std::uint32_t>& idx, std::vector<float>& err) {
  const std::size_t n = points.rows();
  const std::size_t k_count = centroids.rows();
  const std::size_t dim = centroids.cols();
  idx.resize(n);
  err.resize(n);

  // Coordinate-major copy so the inner loop runs over centroids.
  std::vector<float> transposed(k_count * dim);
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t d = 0; d < dim; ++d) transposed[d * k_count + k] = centroids(k, d);
  }

  parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<float> dist(k_count);
    for (std::size_t i = begin; i < end; ++i) {
      std::fill(dist.begin(), dist.end(), 0.0f);
      const auto p = points.row(i);
      for (std::size_t d = 0; d < dim; ++d) {
        const float x = p[d];
        const float* c = transposed.data() + d * k_count;
        for (std::size_t k = 0; k < k_count; ++k) {
          const float diff = x - c[k];
          dist[k] += diff * diff;
        }
      }
      std::size_t best = 0;
      for (std::size_t k = 1; k < k_count; ++k) {
        if (dist[k] < dist[best]) best = k;
      }
      idx[i] = static_cast<std::uint32_t>(best);
      err[i] = dist[best];
    }
  });
}

double sum_in_order(const std::vector<float>& err) {
  double total = 0.0;
  for (float e : err) total += e;
  return total;
}

std::vector<std::size_t> member_counts(const std::vector<std::uint32_t>& idx, std::size_t k) {
  std::vector<std::size_t> counts(k, 0);
  for (std::uint32_t i : idx) ++counts[i];
  return counts;
}

void check_codebook(const Matrix& samples, const Codebook& codebook) {
  if (codebook.size() == 0) throw Error(ErrorCode::kInvalidArgument, "codebook is empty");
  if (codebook.block_size() != samples.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("codebook block size {} vs sample width {}", codebook.block_size(),
                            samples.cols()));
  }
}

// Relocation loop shared by revive_dead_units and kmeans_fit; `err` holds
// each sample's squared distance to its assigned centroid.
std::size_t revive(Codebook& codebook, const Matrix& samples, std::vector<std::uint32_t>& idx,
                   std::vector<float>& err, bool half_storage, std::size_t workers) {
  const std::size_t k_count = codebook.size();
  std::size_t relocated = 0;
  for (std::size_t round = 0; round < k_count; ++round) {
    auto counts = member_counts(idx, k_count);
    std::size_t moved = 0;
    bool exhausted = false;
    for (std::size_t k = 0; k < k_count && !exhausted; ++k) {
      if (counts[k] != 0) continue;
      if (err.empty()) {
        exhausted = true;
        break;
      }
      const auto worst = static_cast<std::size_t>(
          std::distance(err.begin(), std::max_element(err.begin(), err.end())));
      if (!(err[worst] > 0.0f)) {
        exhausted = true;
        break;
      }
      auto centroid = codebook.centroids.row(k);
      std::vector<float> candidate(samples.row(worst).begin(), samples.row(worst).end());
      if (half_storage) {
        for (float& v : candidate) v = round_to_half(v);
      }
      const float new_err = squared_distance(samples.row(worst), candidate);
      if (!(new_err < err[worst])) {
        exhausted = true;
        break;
      }
      std::copy(candidate.begin(), candidate.end(), centroid.begin());
      --counts[idx[worst]];
      idx[worst] = static_cast<std::uint32_t>(k);
      err[worst] = new_err;
      ++counts[k];
      ++moved;
    }
    relocated += moved;
    if (moved == 0) break;
    assign_points(samples, codebook.centroids, workers, idx, err);
    const auto refreshed = member_counts(idx, k_count);
    if (exhausted || std::find(refreshed.begin(), refreshed.end(), 0) == refreshed.end()) break;
  }
  return relocated;
}

}  // namespace

BlockView blockify(const Matrix& body, std::size_t block) {
  if (block == 0) throw Error(ErrorCode::kInvalidArgument, "block size must be >= 1");
  const std::size_t per_row = ceil_div(body.cols(), block);
  BlockView view;
  view.rows = body.rows();
  view.cols = body.cols();
  view.pad_count = per_row * block - body.cols();
  view.blocks = Matrix(body.rows() * per_row, block, 0.0f);
  for (std::size_t r = 0; r < body.rows(); ++r) {
    const auto src = body.row(r);
    float* dst = view.blocks.flat().data() + r * per_row * block;
    std::copy(src.begin(), src.end(), dst);
  }
  return view;
}

Matrix deblockify(const BlockView& view) {
  Matrix out(view.rows, view.cols);
  const std::size_t stride = view.blocks_per_row() * view.block_size();
  for (std::size_t r = 0; r < view.rows; ++r) {
    const float* src = view.blocks.flat().data() + r * stride;
    std::copy(src, src + view.cols, out.row(r).begin());
  }
  return out;
}

std::size_t training_sample_size(std::size_t total_blocks, std::size_t centroids) {
  return std::min(total_blocks, std::max<std::size_t>(256 * centroids, 4096));
}

Matrix sample_training_blocks(const BlockView& view, std::size_t centroids, std::uint64_t seed) {
  if (centroids == 0) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  const std::size_t total = view.blocks.rows();
  const std::size_t target = training_sample_size(total, centroids);
  if (target == total) return view.blocks;

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < target; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(target);
  std::sort(order.begin(), order.end());

  const std::size_t b = view.block_size();
  Matrix out(target, b);
  for (std::size_t i = 0; i < target; ++i) {
    const auto src = view.blocks.row(order[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Codebook kmeanspp_init(const Matrix& samples, std::size_t centroids, std::uint64_t seed) {
  if (centroids == 0) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  if (samples.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "no samples to seed from");
  const std::size_t n = samples.rows();
  const std::size_t dim = samples.cols();

  std::vector<float> range(dim, 0.0f);
  for (std::size_t d = 0; d < dim; ++d) {
    float lo = samples(0, d);
    float hi = lo;
    for (std::size_t i = 1; i < n; ++i) {
      lo = std::min(lo, samples(i, d));
      hi = std::max(hi, samples(i, d));
    }
    range[d] = hi - lo;
  }

  std::mt19937_64 rng(seed);
  Codebook book{Matrix(centroids, dim)};
  std::vector<float> min_dist(n, std::numeric_limits<float>::infinity());

  auto place = [&](std::size_t k, std::span<const float> value) {
    std::copy(value.begin(), value.end(), book.centroids.row(k).begin());
    const auto c = book.centroids.row(k);
    for (std::size_t i = 0; i < n; ++i) {
      min_dist[i] = std::min(min_dist[i], squared_distance(samples.row(i), c));
    }
  };

  std::uniform_int_distribution<std::size_t> any(0, n - 1);
  place(0, samples.row(any(rng)));
  for (std::size_t k = 1; k < centroids; ++k) {
    const double total = sum_in_order(min_dist);
    if (total > 0.0) {
      const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      double cumulative = 0.0;
      std::size_t chosen = n;
      std::size_t last_positive = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (min_dist[i] <= 0.0f) continue;
        last_positive = i;
        cumulative += min_dist[i];
        if (cumulative > u) {
          chosen = i;
          break;
        }
      }
      if (chosen == n) chosen = last_positive;
      place(k, samples.row(chosen));
    } else {
      // Every sample already coincides with a centroid.
      const auto src = samples.row(any(rng));
      std::vector<float> jittered(src.begin(), src.end());
      std::uniform_real_distribution<float> unit(-1.0f, 1.0f);
      for (std::size_t d = 0; d < dim; ++d) jittered[d] += 1e-6f * range[d] * unit(rng);
      place(k, jittered);
    }
  }
  return book;
}

Assignment assign_nearest(const Matrix& points, const Codebook& codebook, std::size_t workers) {
  check_codebook(points, codebook);
  Assignment out;
  std::vector<float> err;
  assign_points(points, codebook.centroids, workers, out.idx, err);
  out.inertia = sum_in_order(err);
  return out;
}

std::size_t revive_dead_units(Codebook& codebook, const Matrix& samples, Assignment& assignment,
                              bool half_storage, std::size_t workers) {
  check_codebook(samples, codebook);
  if (assignment.idx.size() != samples.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "assignment length differs from sample count");
  }
  std::vector<float> err(samples.rows());
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    if (assignment.idx[i] >= codebook.size()) {
      throw Error(ErrorCode::kRange, fmt::format("assignment {} >= K", assignment.idx[i]));
    }
    err[i] = squared_distance(samples.row(i), codebook.centroids.row(assignment.idx[i]));
  }
  const std::size_t moved = revive(codebook, samples, assignment.idx, err, half_storage, workers);
  assignment.inertia = sum_in_order(err);
  return moved;
}

KMeansResult kmeans_fit(const Matrix& samples, Codebook init, const KMeansOptions& options) {
  check_codebook(samples, init);
  if (samples.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "no samples to cluster");
  const std::size_t n = samples.rows();
  const std::size_t dim = samples.cols();
  const std::size_t k_count = init.size();

  KMeansResult result;
  Codebook book = std::move(init);
  std::vector<std::uint32_t> idx;
  std::vector<float> err;
  assign_points(samples, book.centroids, options.workers, idx, err);
  result.revived += revive(book, samples, idx, err, false, options.workers);
  double inertia = sum_in_order(err);
  result.inertia_history.push_back(inertia);

  std::vector<double> sums(k_count * dim);
  std::vector<std::size_t> counts(k_count);
  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    if (inertia <= 0.0) break;
    Codebook previous = book;
    std::vector<std::uint32_t> previous_idx = idx;
    std::vector<float> previous_err = err;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = samples.row(i);
      double* s = sums.data() + idx[i] * dim;
      for (std::size_t d = 0; d < dim; ++d) s[d] += x[d];
      ++counts[idx[i]];
    }
    for (std::size_t k = 0; k < k_count; ++k) {
      if (counts[k] == 0) continue;
      auto c = book.centroids.row(k);
      for (std::size_t d = 0; d < dim; ++d) {
        c[d] = static_cast<float>(sums[k * dim + d] / static_cast<double>(counts[k]));
      }
    }
    assign_points(samples, book.centroids, options.workers, idx, err);
    const std::size_t moved = revive(book, samples, idx, err, false, options.workers);
    const double next = sum_in_order(err);
    if (next > inertia) {
      // FP32 rounding of a mean can cost a few ulps at convergence; keep the
      // better state so the sequence stays non-increasing.
      book = std::move(previous);
      idx = std::move(previous_idx);
      err = std::move(previous_err);
      break;
    }
    result.revived += moved;
    ++result.iterations;
    result.inertia_history.push_back(next);
    const double decrease = (inertia - next) / inertia;
    inertia = next;
    if (decrease < options.rel_tol) break;
  }

  if (options.half_output) {
    for (float& v : book.centroids.flat()) v = round_to_half(v);
    assign_points(samples, book.centroids, options.workers, idx, err);
    result.revived += revive(book, samples, idx, err, true, options.workers);
  }
  result.codebook = std::move(book);
  result.assignment.idx = std::move(idx);
  result.assignment.inertia = sum_in_order(err);
  return result;
}

Assignment quantize_body(const BlockView& view, const Codebook& codebook, std::size_t workers) {
  return assign_nearest(view.blocks, codebook, workers);
}

Matrix reconstruct_body(const Codebook& codebook, std::span<const std::uint32_t> idx,
                        std::size_t rows, std::size_t cols) {
  const std::size_t b = codebook.block_size();
  if (b == 0) throw Error(ErrorCode::kShapeMismatch, "codebook has zero block size");
  const std::size_t per_row = ceil_div(cols, b);
  if (idx.size() != rows * per_row) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("{} indices for a {}x{} body with block {}", idx.size(), rows, cols, b));
  }
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = out.row(r);
    for (std::size_t blk = 0; blk < per_row; ++blk) {
      const std::uint32_t id = idx[r * per_row + blk];
      if (id >= codebook.size()) {
        throw Error(ErrorCode::kRange, fmt::format("centroid id {} >= K={}", id, codebook.size()));
      }
      const auto c = codebook.centroids.row(id);
      const std::size_t start = blk * b;
      const std::size_t len = std::min(b, cols - start);
      std::copy(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(len), dst.begin() + start);
    }
  }
  return out;
}

}  // namespace hasvq
