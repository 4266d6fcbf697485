// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include "hasvq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/core.h>

#include "hasvq/error.hpp"
#include "hasvq/format.hpp"
#include "hasvq/half.hpp"
#include "hasvq/parallel.hpp"

namespace hasvq {
namespace {

using nlohmann::json;

constexpr std::uint64_t kHessianStream = 0xd1b54a32d192ed03ull;

std::string_view tail_name(TailKind k) {
  switch (k) {
    case TailKind::kGaussian: return "gaussian";
    case TailKind::kStudentT: return "student_t";
    case TailKind::kGaussianPlusOutliers: return "gaussian_plus_outliers";
  }
  return "gaussian";
}

TailKind parse_tail(const std::string& name) {
  if (name == "gaussian") return TailKind::kGaussian;
  if (name == "student_t") return TailKind::kStudentT;
  if (name == "gaussian_plus_outliers") return TailKind::kGaussianPlusOutliers;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown tail '{}'", name));
}

HessianKind parse_hessian_kind(const std::string& name) {
  if (name == "uniform") return HessianKind::kUniform;
  if (name == "lognormal") return HessianKind::kLogNormal;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown hessian kind '{}'", name));
}

std::string spec_label(const SynthSpec& s) {
  std::string tail;
  switch (s.tail.kind) {
    case TailKind::kGaussian: tail = "gaussian"; break;
    case TailKind::kStudentT: tail = fmt::format("student_t{}", s.tail.nu); break;
    case TailKind::kGaussianPlusOutliers:
      tail = fmt::format("outliers{}x{}", s.tail.fraction, s.tail.magnitude);
      break;
  }
  const std::string hess = s.hessian.kind == HessianKind::kUniform
                               ? "uniform"
                               : fmt::format("lognormal{}", s.hessian.sigma);
  return fmt::format("{}x{}-{}-{}", s.rows, s.cols, tail, hess);
}

TailSpec tail_from_json(const json& j) {
  TailSpec t;
  t.kind = parse_tail(j.at("kind").get<std::string>());
  t.nu = j.value("nu", t.nu);
  t.fraction = j.value("fraction", t.fraction);
  t.magnitude = j.value("magnitude", t.magnitude);
  return t;
}

HessianSpec hessian_from_json(const json& j) {
  HessianSpec h;
  h.kind = parse_hessian_kind(j.at("kind").get<std::string>());
  h.sigma = j.value("sigma", h.sigma);
  return h;
}

json tail_json(const TailSpec& t) {
  json j = {{"kind", tail_name(t.kind)}};
  if (t.kind == TailKind::kStudentT) j["nu"] = t.nu;
  if (t.kind == TailKind::kGaussianPlusOutliers) {
    j["fraction"] = t.fraction;
    j["magnitude"] = t.magnitude;
  }
  return j;
}

json hessian_json(const HessianSpec& h) {
  json j = {{"kind", h.kind == HessianKind::kUniform ? "uniform" : "lognormal"}};
  if (h.kind == HessianKind::kLogNormal) j["sigma"] = h.sigma;
  return j;
}

MethodSpec method_from_json(const json& j) {
  MethodSpec m;
  m.id = j.at("id").get<std::string>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fp16") {
    m.kind = MethodKind::kFp16;
  } else if (kind == "rtn") {
    m.kind = MethodKind::kRtn;
    m.rtn.bits = j.value("bits", m.rtn.bits);
    m.rtn.group_size = j.value("group", m.rtn.group_size);
    m.rtn.symmetric = j.value("symmetric", m.rtn.symmetric);
    m.rtn.validate();
  } else if (kind == "hasvq") {
    m.kind = MethodKind::kHasvq;
    m.hasvq = profile_config(parse_profile(j.value("profile", std::string("custom"))));
    m.hasvq.block = j.value("block", m.hasvq.block);
    m.hasvq.centroids = j.value("centroids", m.hasvq.centroids);
    m.hasvq.sparsity = j.value("sparsity", m.hasvq.sparsity);
    m.hasvq.seed = j.value("seed", m.hasvq.seed);
    m.hasvq.kmeans_iters = j.value("kmeans_iters", m.hasvq.kmeans_iters);
    m.hasvq.kmeans_tol = j.value("kmeans_tol", m.hasvq.kmeans_tol);
    const std::string dtype = j.value("residual_dtype", std::string("F16"));
    if (dtype != "F16" && dtype != "F32") {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("residual_dtype '{}'", dtype));
    }
    m.hasvq.residual = dtype == "F16" ? ResidualPrecision::kHalf : ResidualPrecision::kSingle;
  } else {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown method kind '{}'", kind));
  }
  return m;
}

json method_json(const MethodSpec& m) {
  switch (m.kind) {
    case MethodKind::kFp16:
      return {{"id", m.id}, {"kind", "fp16"}};
    case MethodKind::kRtn:
      return {{"id", m.id},
              {"kind", "rtn"},
              {"bits", m.rtn.bits},
              {"group", m.rtn.group_size},
              {"symmetric", m.rtn.symmetric}};
    case MethodKind::kHasvq:
      return {{"id", m.id},
              {"kind", "hasvq"},
              {"block", m.hasvq.block},
              {"centroids", m.hasvq.centroids},
              {"sparsity", m.hasvq.sparsity},
              {"seed", m.hasvq.seed},
              {"kmeans_iters", m.hasvq.kmeans_iters},
              {"kmeans_tol", m.hasvq.kmeans_tol},
              {"residual_dtype", residual_dtype_name(m.hasvq.residual)}};
  }
  return {};
}

MethodSpec hasvq_method(std::string id, std::size_t block, std::size_t centroids, double sparsity) {
  MethodSpec m;
  m.id = std::move(id);
  m.kind = MethodKind::kHasvq;
  m.hasvq.block = block;
  m.hasvq.centroids = centroids;
  m.hasvq.sparsity = sparsity;
  return m;
}

MethodSpec rtn_method(std::string id, unsigned bits, std::size_t group) {
  MethodSpec m;
  m.id = std::move(id);
  m.kind = MethodKind::kRtn;
  m.rtn.bits = bits;
  m.rtn.group_size = group;
  return m;
}

}  // namespace

void SynthSpec::validate() const {
  if (rows == 0 || cols == 0) throw Error(ErrorCode::kInvalidArgument, "shape must be non-empty");
  if (rows * cols > std::size_t{0xffffffffu}) {
    throw Error(ErrorCode::kInvalidArgument, "shape too large");
  }
  if (tail.kind == TailKind::kStudentT && !(std::isfinite(tail.nu) && tail.nu > 2.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("student_t needs nu > 2 for unit variance, got {}", tail.nu));
  }
  if (tail.kind == TailKind::kGaussianPlusOutliers &&
      (!(tail.fraction >= 0.0 && tail.fraction <= 1.0) ||
       !(std::isfinite(tail.magnitude) && tail.magnitude > 0.0))) {
    throw Error(ErrorCode::kInvalidArgument, "outlier fraction must be in [0, 1], magnitude > 0");
  }
  if (hessian.kind == HessianKind::kLogNormal &&
      !(std::isfinite(hessian.sigma) && hessian.sigma >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lognormal sigma must be finite and >= 0");
  }
}

SynthInstance gen_instance(const SynthSpec& spec) {
  spec.validate();
  SynthInstance out;
  const std::size_t count = spec.rows * spec.cols;
  std::vector<float> values(count);
  std::mt19937_64 rng(spec.seed);

  switch (spec.tail.kind) {
    case TailKind::kGaussian:
    case TailKind::kGaussianPlusOutliers: {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (float& v : values) v = static_cast<float>(normal(rng));
      break;
    }
    case TailKind::kStudentT: {
      std::student_t_distribution<double> student(spec.tail.nu);
      const double unit = std::sqrt((spec.tail.nu - 2.0) / spec.tail.nu);
      for (float& v : values) v = static_cast<float>(student(rng) * unit);
      break;
    }
  }

  if (spec.tail.kind == TailKind::kGaussianPlusOutliers) {
    const auto planted = static_cast<std::size_t>(std::ceil(spec.tail.fraction * count));
    std::vector<std::uint32_t> order(count);
    std::iota(order.begin(), order.end(), 0u);
    for (std::size_t i = 0; i < planted; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, count - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    order.resize(planted);
    std::sort(order.begin(), order.end());
    std::bernoulli_distribution sign(0.5);
    for (std::uint32_t at : order) {
      values[at] = static_cast<float>(sign(rng) ? spec.tail.magnitude : -spec.tail.magnitude);
    }
    out.planted = std::move(order);
  }

  // Checkpoints store weights in binary16; so do the synthetic ones.
  for (float& v : values) v = round_to_half(v);
  out.weights = Matrix(spec.rows, spec.cols, std::move(values));

  std::vector<float> h(spec.cols, 1.0f);
  if (spec.hessian.kind == HessianKind::kLogNormal) {
    std::mt19937_64 hrng(spec.seed ^ kHessianStream);
    std::lognormal_distribution<double> lognormal(0.0, spec.hessian.sigma);
    for (float& v : h) v = static_cast<float>(lognormal(hrng));
  }
  out.hessian = hessian_from_diagonal(std::move(h));
  return out;
}

std::vector<SynthSpec> default_specs(std::uint64_t base_seed) {
  const std::pair<std::size_t, std::size_t> shapes[] = {{256, 256}, {512, 512}, {2048, 512}};
  TailSpec tails[3];
  tails[0].kind = TailKind::kGaussian;
  tails[1].kind = TailKind::kStudentT;
  tails[1].nu = 3.0;
  tails[2].kind = TailKind::kGaussianPlusOutliers;
  tails[2].fraction = 0.001;
  tails[2].magnitude = 8.0;
  HessianSpec hessians[2];
  hessians[0].kind = HessianKind::kUniform;
  hessians[1].kind = HessianKind::kLogNormal;
  hessians[1].sigma = 1.0;

  std::vector<SynthSpec> out;
  for (const auto& [rows, cols] : shapes) {
    for (const auto& tail : tails) {
      for (const auto& hess : hessians) {
        SynthSpec s;
        s.rows = rows;
        s.cols = cols;
        s.tail = tail;
        s.hessian = hess;
        s.seed = base_seed + out.size();
        s.name = spec_label(s);
        out.push_back(s);
      }
    }
  }
  return out;
}

std::vector<MethodSpec> default_methods() {
  std::vector<MethodSpec> out;
  MethodSpec fp16;
  fp16.id = "fp16";
  fp16.kind = MethodKind::kFp16;
  out.push_back(fp16);
  out.push_back(rtn_method("rtn4-g32", 4, 32));
  out.push_back(rtn_method("rtn8-g128", 8, 128));
  out.push_back(hasvq_method("hasvq-b4-k256-r0.01", 4, 256, 0.01));
  const CompressionConfig mid = profile_config(Profile::kMid);
  out.push_back(hasvq_method("hasvq-mid", mid.block, mid.centroids, mid.sparsity));
  out.push_back(hasvq_method("hasvq-b1-k128-r0.001", 1, 128, 0.001));
  return out;
}

BenchmarkSuite default_suite() { return {default_specs(), default_methods()}; }

BenchmarkSuite parse_suite(const json& j) {
  BenchmarkSuite suite;
  try {
    const std::uint64_t base_seed = j.value("seed", std::uint64_t{0});
    if (j.contains("specs")) {
      for (const auto& e : j.at("specs")) {
        SynthSpec s;
        const auto& shape = e.at("shape");
        s.rows = shape.at(0).get<std::size_t>();
        s.cols = shape.at(1).get<std::size_t>();
        s.tail = tail_from_json(e.at("tail"));
        s.hessian = e.contains("hessian") ? hessian_from_json(e.at("hessian")) : HessianSpec{};
        s.seed = e.value("seed", base_seed + suite.specs.size());
        s.name = e.value("name", spec_label(s));
        s.validate();
        suite.specs.push_back(s);
      }
    } else if (j.contains("grid")) {
      const auto& g = j.at("grid");
      for (const auto& shape : g.at("shapes")) {
        for (const auto& tail : g.at("tails")) {
          for (const auto& hess : g.at("hessians")) {
            SynthSpec s;
            s.rows = shape.at(0).get<std::size_t>();
            s.cols = shape.at(1).get<std::size_t>();
            s.tail = tail_from_json(tail);
            s.hessian = hessian_from_json(hess);
            s.seed = base_seed + suite.specs.size();
            s.name = spec_label(s);
            s.validate();
            suite.specs.push_back(s);
          }
        }
      }
    } else {
      suite.specs = default_specs(base_seed);
    }
    if (j.contains("methods")) {
      for (const auto& m : j.at("methods")) suite.methods.push_back(method_from_json(m));
    } else {
      suite.methods = default_methods();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("bad suite file: {}", e.what()));
  }
  if (suite.specs.empty() || suite.methods.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "suite needs at least one spec and one method");
  }
  return suite;
}

json to_json(const SynthSpec& spec) {
  return {{"name", spec.name},
          {"shape", {spec.rows, spec.cols}},
          {"tail", tail_json(spec.tail)},
          {"hessian", hessian_json(spec.hessian)},
          {"seed", spec.seed}};
}

json to_json(const BenchmarkSuite& suite) {
  json specs = json::array();
  for (const auto& s : suite.specs) specs.push_back(to_json(s));
  json methods = json::array();
  for (const auto& m : suite.methods) methods.push_back(method_json(m));
  return {{"specs", specs}, {"methods", methods}};
}

CellResult run_cell(const SynthSpec& spec, const SynthInstance& instance, const MethodSpec& method,
                    bool keep_artifact, std::size_t workers) {
  CellResult cell;
  cell.method = method.id;
  cell.config = method_json(method);
  const Matrix& w = instance.weights;
  Matrix w_hat;
  switch (method.kind) {
    case MethodKind::kFp16:
      w_hat = fp16_roundtrip(w);
      cell.bpp = passthrough_storage(w.size()).bpp();
      break;
    case MethodKind::kRtn:
      w_hat = rtn_dequantize(rtn_quantize(w, method.rtn));
      cell.bpp = rtn_bpp(method.rtn, w.rows(), w.cols());
      break;
    case MethodKind::kHasvq: {
      CompressionConfig config = method.hasvq;
      config.workers = workers;
      CompressedLayer layer = compress_layer(w, instance.hessian, config);
      w_hat = reconstruct_layer(layer);
      cell.bpp = layer_storage(layer).bpp();
      if (keep_artifact) {
        CompressedModel model;
        model.seed = config.seed;
        model.layers.push_back({spec.name, std::move(layer)});
        cell.artifact = serialize_compressed(model).bytes;
      }
      break;
    }
  }
  cell.hessian_weighted_mse = hessian_weighted_mse(w, w_hat, instance.hessian).per_param_mean;
  cell.plain_mse = plain_mse(w, w_hat);
  cell.compression_ratio = 16.0 / cell.bpp;
  return cell;
}

std::vector<SpecResult> run_benchmark(const BenchmarkSuite& suite, const BenchmarkOptions& options) {
  if (suite.specs.empty() || suite.methods.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "benchmark needs at least one spec and one method");
  }
  const std::size_t n_specs = suite.specs.size();
  const std::size_t n_methods = suite.methods.size();

  std::vector<SynthInstance> instances(n_specs);
  parallel_for(n_specs, options.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) instances[i] = gen_instance(suite.specs[i]);
  });

  std::vector<CellResult> cells(n_specs * n_methods);
  parallel_for(cells.size(), options.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      const std::size_t s = c / n_methods;
      cells[c] = run_cell(suite.specs[s], instances[s], suite.methods[c % n_methods],
                          options.keep_artifacts);
    }
  });

  std::vector<SpecResult> out(n_specs);
  for (std::size_t s = 0; s < n_specs; ++s) {
    out[s].spec = suite.specs[s];
    out[s].weight_variance = variance(instances[s].weights.flat());
    std::vector<ParetoPoint> points;
    for (std::size_t m = 0; m < n_methods; ++m) {
      CellResult& cell = cells[s * n_methods + m];
      points.push_back({cell.method, cell.bpp, cell.hessian_weighted_mse});
      out[s].cells.push_back(std::move(cell));
    }
    out[s].pareto = pareto_report(points);
  }
  return out;
}

json to_json(const std::vector<SpecResult>& results) {
  json specs = json::array();
  for (const auto& r : results) {
    json cells = json::array();
    for (const auto& c : r.cells) {
      cells.push_back({{"method", c.method},
                       {"config", c.config},
                       {"hessian_weighted_mse", c.hessian_weighted_mse},
                       {"plain_mse", c.plain_mse},
                       {"bpp", c.bpp},
                       {"compression_ratio", c.compression_ratio}});
    }
    specs.push_back({{"spec", to_json(r.spec)},
                     {"weight_variance", r.weight_variance},
                     {"cells", cells},
                     {"pareto", to_json(r.pareto)}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"distortion_axis", kDistortionAxis},
          {"results", specs}};
}

double variance(std::span<const float> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (float v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double m2 = 0.0;
  for (float v : values) m2 += (v - mean) * (v - mean);
  return m2 / static_cast<double>(values.size());
}

double excess_kurtosis(std::span<const float> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (float v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double m2 = 0.0;
  double m4 = 0.0;
  for (float v : values) {
    const double d = v - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= static_cast<double>(values.size());
  m4 /= static_cast<double>(values.size());
  return m4 / (m2 * m2) - 3.0;
}

}  // namespace hasvq
