// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>

#include "doctest.h"
#include "hasvq/error.hpp"
#include "hasvq/format.hpp"
#include "hasvq/half.hpp"
#include "hasvq/synth.hpp"

using namespace hasvq;

namespace {

SynthSpec spec_of(TailKind tail, std::size_t rows, std::size_t cols, std::uint64_t seed) {
  SynthSpec s;
  s.name = "s";
  s.rows = rows;
  s.cols = cols;
  s.tail.kind = tail;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("generation is deterministic") {
  SynthSpec s = spec_of(TailKind::kStudentT, 64, 32, 9);
  s.hessian.kind = HessianKind::kLogNormal;
  const auto a = gen_instance(s);
  const auto b = gen_instance(s);
  CHECK(a.weights.identical(b.weights));
  CHECK(a.hessian.values == b.hessian.values);
  s.seed = 10;
  CHECK_FALSE(a.weights.identical(gen_instance(s).weights));
  for (float v : a.weights.flat()) CHECK(is_half_representable(v));
}

TEST_CASE("gaussian moments") {
  const auto g = gen_instance(spec_of(TailKind::kGaussian, 1000, 1000, 1));
  CHECK(std::fabs(excess_kurtosis(g.weights.flat())) <= 0.05);
  CHECK(variance(g.weights.flat()) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("student_t moments") {
  SynthSpec s = spec_of(TailKind::kStudentT, 1000, 1000, 1);
  s.tail.nu = 5.0;
  const auto t = gen_instance(s);
  CHECK(std::fabs(excess_kurtosis(t.weights.flat()) - 6.0) <= 0.5);
  CHECK(variance(t.weights.flat()) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("planted outliers") {
  SynthSpec s = spec_of(TailKind::kGaussianPlusOutliers, 100, 70, 3);
  s.tail.fraction = 0.001;
  s.tail.magnitude = 8.0;
  const auto inst = gen_instance(s);
  CHECK(inst.planted.size() == 7);
  CHECK(std::set<std::uint32_t>(inst.planted.begin(), inst.planted.end()).size() == 7);
  for (auto at : inst.planted) CHECK(std::fabs(inst.weights.flat()[at]) == 8.0f);
}

TEST_CASE("hessian kinds") {
  SynthSpec s = spec_of(TailKind::kGaussian, 4, 5000, 2);
  CHECK(gen_instance(s).hessian.values == std::vector<float>(5000, 1.0f));
  s.hessian.kind = HessianKind::kLogNormal;
  s.hessian.sigma = 1.0;
  const auto h = gen_instance(s).hessian.values;
  double log_mean = 0.0;
  for (float v : h) {
    CHECK(v > 0.0f);
    log_mean += std::log(v);
  }
  CHECK(std::fabs(log_mean / h.size()) < 0.05);
}

TEST_CASE("invalid specs") {
  SynthSpec s = spec_of(TailKind::kStudentT, 4, 4, 0);
  s.tail.nu = 2.0;
  CHECK_THROWS_AS(gen_instance(s), Error);
  s = spec_of(TailKind::kGaussianPlusOutliers, 4, 4, 0);
  s.tail.magnitude = -1.0;
  CHECK_THROWS_AS(gen_instance(s), Error);
  s = spec_of(TailKind::kGaussian, 0, 4, 0);
  CHECK_THROWS_AS(gen_instance(s), Error);
  s = spec_of(TailKind::kGaussian, 4, 4, 0);
  s.hessian.kind = HessianKind::kLogNormal;
  s.hessian.sigma = NAN;
  CHECK_THROWS_AS(gen_instance(s), Error);
}

TEST_CASE("default suite") {
  const auto suite = default_suite();
  CHECK(suite.specs.size() == 18);
  std::set<std::string> names;
  for (const auto& s : suite.specs) names.insert(s.name);
  CHECK(names.size() == 18);
  CHECK(suite.methods.front().kind == MethodKind::kFp16);
  const auto again = parse_suite(to_json(suite));
  CHECK(to_json(again) == to_json(suite));
}

TEST_CASE("suite files") {
  const auto suite = parse_suite(nlohmann::json::parse(R"({
    "seed": 100,
    "grid": {
      "shapes": [[16, 8], [8, 16]],
      "tails": [{"kind": "gaussian"}, {"kind": "student_t", "nu": 4}],
      "hessians": [{"kind": "uniform"}]
    },
    "methods": [
      {"id": "fp16", "kind": "fp16"},
      {"id": "rtn", "kind": "rtn", "bits": 4, "group": 8},
      {"id": "vq", "kind": "hasvq", "profile": "mid", "centroids": 8}
    ]
  })"));
  CHECK(suite.specs.size() == 4);
  CHECK(suite.specs[3].seed == 103);
  CHECK(suite.specs[1].tail.nu == 4.0);
  REQUIRE(suite.methods.size() == 3);
  CHECK(suite.methods[2].hasvq.block == 2);
  CHECK(suite.methods[2].hasvq.centroids == 8);

  CHECK_THROWS_AS(parse_suite(nlohmann::json::parse(R"({"specs": []})")), Error);
  CHECK_THROWS_AS(parse_suite(nlohmann::json::parse(R"({"specs": [{"shape": [2]}]})")), Error);
  CHECK_THROWS_AS(
      parse_suite(nlohmann::json::parse(R"({"methods": [{"id": "x", "kind": "gptq"}]})")), Error);
}

TEST_CASE("benchmark cells") {
  BenchmarkSuite suite;
  suite.specs.push_back(spec_of(TailKind::kGaussian, 32, 32, 4));
  suite.specs.push_back(spec_of(TailKind::kStudentT, 48, 40, 5));
  suite.specs[1].name = "t";
  MethodSpec fp16{"fp16", MethodKind::kFp16, {}, {}};
  MethodSpec rtn{"rtn4", MethodKind::kRtn, RTNConfig{4, 32, false}, {}};
  MethodSpec vq{"vq", MethodKind::kHasvq, {}, {}};
  vq.hasvq.block = 2;
  vq.hasvq.centroids = 16;
  suite.methods = {fp16, rtn, vq};

  BenchmarkOptions serial;
  serial.keep_artifacts = true;
  const auto a = run_benchmark(suite, serial);
  REQUIRE(a.size() == 2);
  CHECK(a[0].cells[0].hessian_weighted_mse == 0.0);
  CHECK(a[0].cells[0].bpp == 16.0);
  CHECK(a[0].cells[1].bpp == 4.625);
  CHECK(a[0].cells[2].artifact.size() > 0);
  CHECK(a[0].cells[0].artifact.empty());
  const auto model = parse_compressed(a[1].cells[2].artifact);
  CHECK(model.layers.at(0).name == "t");
  CHECK(a[1].pareto.points.size() == 3);

  BenchmarkOptions threaded = serial;
  threaded.workers = 3;
  const auto b = run_benchmark(suite, threaded);
  CHECK(to_json(a).dump() == to_json(b).dump());
  for (std::size_t s = 0; s < a.size(); ++s) {
    for (std::size_t m = 0; m < a[s].cells.size(); ++m) {
      CHECK(a[s].cells[m].artifact == b[s].cells[m].artifact);
    }
  }
  CHECK_THROWS_AS(run_benchmark(BenchmarkSuite{}, serial), Error);
}
