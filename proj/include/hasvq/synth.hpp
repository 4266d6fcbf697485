// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic heavy-tailed layers and the desk-scale rate/distortion sweep.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hasvq/baselines.hpp"
#include "hasvq/metrics.hpp"
#include "hasvq/residual.hpp"

namespace hasvq {

enum class TailKind { kGaussian, kStudentT, kGaussianPlusOutliers };
enum class HessianKind { kUniform, kLogNormal };

struct TailSpec {
  TailKind kind = TailKind::kGaussian;
  double nu = 3.0;           // student_t degrees of freedom, > 2
  double fraction = 0.001;   // planted outlier fraction
  double magnitude = 8.0;    // planted outlier magnitude in sigmas
};

struct HessianSpec {
  HessianKind kind = HessianKind::kUniform;
  double sigma = 1.0;
};

struct SynthSpec {
  std::string name;
  std::size_t rows = 256;
  std::size_t cols = 256;
  TailSpec tail;
  HessianSpec hessian;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthInstance {
  Matrix weights;
  HessianDiag hessian;
  /// Flat positions of planted outliers (gaussian_plus_outliers only).
  std::vector<std::uint32_t> planted;
};

/// Unit-variance weights; uniform Hessians are all ones, lognormal ones are
/// exp(sigma * z) per input column.
SynthInstance gen_instance(const SynthSpec& spec);

enum class MethodKind { kFp16, kRtn, kHasvq };

struct MethodSpec {
  std::string id;
  MethodKind kind = MethodKind::kHasvq;
  RTNConfig rtn;
  CompressionConfig hasvq;
};

struct BenchmarkSuite {
  std::vector<SynthSpec> specs;
  std::vector<MethodSpec> methods;
};

/// Shapes {256x256, 512x512, 2048x512} x tails {gaussian, student_t(3),
/// gaussian_plus_outliers(0.001, 8)} x Hessians {uniform, lognormal(1)}.
std::vector<SynthSpec> default_specs(std::uint64_t base_seed = 0);
std::vector<MethodSpec> default_methods();
BenchmarkSuite default_suite();

BenchmarkSuite parse_suite(const nlohmann::json& j);
nlohmann::json to_json(const BenchmarkSuite& suite);
nlohmann::json to_json(const SynthSpec& spec);

struct CellResult {
  std::string method;
  double hessian_weighted_mse = 0.0;  // per parameter
  double plain_mse = 0.0;
  double bpp = 0.0;
  double compression_ratio = 0.0;
  nlohmann::json config;
  /// Serialized .hasvq for HAS-VQ cells when artifacts are kept.
  std::vector<std::uint8_t> artifact;
};

struct SpecResult {
  SynthSpec spec;
  double weight_variance = 0.0;
  std::vector<CellResult> cells;  // in method order
  ParetoReport pareto;
};

struct BenchmarkOptions {
  std::size_t workers = 1;
  bool keep_artifacts = false;
};

CellResult run_cell(const SynthSpec& spec, const SynthInstance& instance, const MethodSpec& method,
                    bool keep_artifact, std::size_t workers = 1);

/// Results ordered by spec, then method, independent of worker count.
std::vector<SpecResult> run_benchmark(const BenchmarkSuite& suite, const BenchmarkOptions& options);

nlohmann::json to_json(const std::vector<SpecResult>& results);

double variance(std::span<const float> values);
double excess_kurtosis(std::span<const float> values);

}  // namespace hasvq
