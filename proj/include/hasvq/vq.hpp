// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

// Block vector quantization of the masked body: blocking, training-set
// sampling, k-means++ seeding, Lloyd iterations with dead-unit revival, and
// nearest-centroid encoding.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hasvq/matrix.hpp"

namespace hasvq {

/// Rows of the source matrix cut into contiguous b-wide blocks, each row
/// zero-padded to a multiple of b. `blocks` is N x b with
/// N = rows * ceil(cols / b).
struct BlockView {
  Matrix blocks;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t pad_count = 0;

  std::size_t block_size() const noexcept { return blocks.cols(); }
  std::size_t blocks_per_row() const noexcept { return rows == 0 ? 0 : blocks.rows() / rows; }
  /// True when the block's last `pad_count` coordinates are padding.
  bool is_padded(std::size_t block) const noexcept {
    return pad_count != 0 && (block + 1) % blocks_per_row() == 0;
  }
};

/// K x b centroid matrix. After fitting, every centroid value is exactly
/// representable in binary16.
struct Codebook {
  Matrix centroids;

  std::size_t size() const noexcept { return centroids.rows(); }
  std::size_t block_size() const noexcept { return centroids.cols(); }
};

struct Assignment {
  std::vector<std::uint32_t> idx;
  double inertia = 0.0;
};

struct KMeansOptions {
  std::size_t max_iters = 100;
  double rel_tol = 1e-6;
  std::size_t workers = 1;
  /// Round the final centroids to binary16 (the stored precision).
  bool half_output = true;
};

struct KMeansResult {
  Codebook codebook;
  Assignment assignment;
  /// Inertia after each assignment + revival step of the FP32 iterations.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
  std::size_t revived = 0;
};

BlockView blockify(const Matrix& body, std::size_t block);
Matrix deblockify(const BlockView& view);

/// max(256 * K, 4096), capped at the population.
std::size_t training_sample_size(std::size_t total_blocks, std::size_t centroids);

/// Uniform sample without replacement, returned in source order. The whole
/// population is returned when it does not exceed the target size.
Matrix sample_training_blocks(const BlockView& view, std::size_t centroids, std::uint64_t seed);

/// D^2 seeding. When fewer distinct samples than K exist, duplicated picks
/// are jittered by 1e-6 of each coordinate's range.
Codebook kmeanspp_init(const Matrix& samples, std::size_t centroids, std::uint64_t seed);

/// Nearest centroid for every row of `points`, ties to the smallest id.
Assignment assign_nearest(const Matrix& points, const Codebook& codebook, std::size_t workers = 1);

/// Relocates each centroid without members onto the sample with the largest
/// current squared error, one at a time, then refreshes the assignment.
/// With `half_storage`, relocated centroids are rounded to binary16.
/// Returns the number of relocations performed.
std::size_t revive_dead_units(Codebook& codebook, const Matrix& samples, Assignment& assignment,
                              bool half_storage = false, std::size_t workers = 1);

/// Lloyd iterations from `init`; the returned codebook is rounded to binary16
/// and the returned assignment is consistent with the rounded centroids.
KMeansResult kmeans_fit(const Matrix& samples, Codebook init, const KMeansOptions& options = {});

/// Encodes every block (including padded ones) against the fitted codebook.
Assignment quantize_body(const BlockView& view, const Codebook& codebook, std::size_t workers = 1);

/// Gathers centroids by index and strips the row padding.
Matrix reconstruct_body(const Codebook& codebook, std::span<const std::uint32_t> idx,
                        std::size_t rows, std::size_t cols);

}  // namespace hasvq
