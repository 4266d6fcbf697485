// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0
//
// hasvq: compress, decompress, evaluate and benchmark weight matrices.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "hasvq/baselines.hpp"
#include "hasvq/error.hpp"
#include "hasvq/format.hpp"
#include "hasvq/metrics.hpp"
#include "hasvq/model.hpp"
#include "hasvq/safetensors.hpp"
#include "hasvq/synth.hpp"

namespace fs = std::filesystem;
using hasvq::HessianSet;
using nlohmann::json;

namespace {

HessianSet load_hessians(const std::string& path, float damping) {
  if (path.empty()) return HessianSet();
  return HessianSet(hasvq::read_container(path), damping);
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw hasvq::Error(hasvq::ErrorCode::kIo, fmt::format("cannot open {}", path.string()));
  out << j.dump(2) << '\n';
  if (!out) throw hasvq::Error(hasvq::ErrorCode::kIo, fmt::format("write failed: {}", path.string()));
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw hasvq::Error(hasvq::ErrorCode::kIo, fmt::format("cannot open {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw hasvq::Error(hasvq::ErrorCode::kInvalidArgument,
                       fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HAS-VQ weight compression"};
  app.require_subcommand(1);

  // compress
  auto* compress = app.add_subcommand("compress", "Compress the 2-D tensors of a safetensors file");
  std::string c_input, c_hessian, c_out, c_profile = "custom";
  std::size_t c_block = 4, c_centroids = 256, c_iters = 100, c_workers = 1;
  double c_sparsity = 0.01, c_tol = 1e-6;
  float c_damping = hasvq::kDefaultDamping;
  std::uint64_t c_seed = 0;
  bool c_fp32 = false;
  std::vector<std::string> c_keep;
  compress->add_option("--input", c_input, "Weights (.safetensors)")->required();
  compress->add_option("--hessian", c_hessian, "Per-layer Hessian diagonals or activations");
  compress->add_option("--out", c_out, "Output .hasvq file")->required();
  compress->add_option("--profile", c_profile, "Preset")
      ->check(CLI::IsMember({"mid", "high", "custom"}));
  auto* o_block = compress->add_option("--block", c_block, "Block size b");
  auto* o_centroids = compress->add_option("--centroids", c_centroids, "Codebook size K");
  auto* o_sparsity = compress->add_option("--sparsity", c_sparsity, "Outlier ratio rho");
  compress->add_option("--seed", c_seed, "RNG seed");
  compress->add_option("--damping", c_damping, "Hessian damping");
  compress->add_option("--kmeans-iters", c_iters, "Maximum Lloyd iterations");
  compress->add_option("--kmeans-tol", c_tol, "Relative inertia tolerance");
  compress->add_option("--workers", c_workers, "Worker threads");
  compress->add_flag("--residual-fp32", c_fp32, "Store residuals as FP32");
  compress->add_option("--keep-fp16", c_keep, "Keep 2-D tensors matching this substring at FP16");

  // decompress
  auto* decompress = app.add_subcommand("decompress", "Reconstruct FP16 safetensors");
  std::string d_input, d_out;
  decompress->add_option("--input", d_input, "Compressed .hasvq file")->required();
  decompress->add_option("--out", d_out, "Output .safetensors")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Rate/distortion report");
  std::string e_original, e_compressed, e_hessian, e_report;
  std::vector<std::string> e_baselines;
  float e_damping = hasvq::kDefaultDamping;
  eval->add_option("--original", e_original, "Original weights (.safetensors)")->required();
  eval->add_option("--compressed", e_compressed, "Compressed .hasvq file");
  eval->add_option("--hessian", e_hessian, "Per-layer Hessian diagonals or activations");
  eval->add_option("--damping", e_damping, "Hessian damping");
  eval->add_option("--report", e_report, "Report JSON path")->required();
  eval->add_option("--baseline", e_baselines, "Baseline selector, e.g. rtn4:g32");

  // synth
  auto* synth = app.add_subcommand("synth", "Synthetic rate/distortion sweep");
  std::string s_spec, s_out = "results";
  std::size_t s_workers = 1;
  bool s_no_artifacts = false;
  synth->add_option("--spec", s_spec, "Suite JSON (default suite when omitted)");
  synth->add_option("--out", s_out, "Output directory");
  synth->add_option("--workers", s_workers, "Worker threads");
  synth->add_flag("--no-artifacts", s_no_artifacts, "Skip writing .hasvq files");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*compress) {
      hasvq::ModelOptions options;
      options.profile = hasvq::parse_profile(c_profile);
      options.config = hasvq::profile_config(options.profile);
      if (o_block->count() != 0) options.config.block = c_block;
      if (o_centroids->count() != 0) options.config.centroids = c_centroids;
      if (o_sparsity->count() != 0) options.config.sparsity = c_sparsity;
      options.config.seed = c_seed;
      options.config.kmeans_iters = c_iters;
      options.config.kmeans_tol = c_tol;
      options.config.workers = c_workers;
      options.config.residual =
          c_fp32 ? hasvq::ResidualPrecision::kSingle : hasvq::ResidualPrecision::kHalf;
      options.keep_fp16 = c_keep;

      const auto weights = hasvq::read_container(c_input);
      const auto model = hasvq::compress_model(weights, load_hessians(c_hessian, c_damping), options);
      const std::size_t bytes = hasvq::write_compressed(model, c_out);
      const auto storage = hasvq::model_storage(model);
      fmt::print("{}: {} layers, {} passthrough, {} bytes, {:.4f} bpp\n", c_out,
                 model.layers.size(), model.passthrough.size(), bytes, storage.bpp());
    } else if (*decompress) {
      const auto model = hasvq::read_compressed(d_input);
      const std::size_t bytes = hasvq::write_container(hasvq::decompress_model(model), d_out);
      fmt::print("{}: {} bytes\n", d_out, bytes);
    } else if (*eval) {
      if (e_compressed.empty() && e_baselines.empty()) {
        throw hasvq::Error(hasvq::ErrorCode::kInvalidArgument,
                           "eval needs --compressed and/or --baseline");
      }
      const auto original = hasvq::read_container(e_original);
      const HessianSet hessians = load_hessians(e_hessian, e_damping);
      std::vector<hasvq::EvalReport> reports;
      if (!e_compressed.empty()) {
        reports.push_back(
            hasvq::evaluate_compressed(original, hasvq::read_compressed(e_compressed), hessians));
      }
      for (const auto& selector : e_baselines) {
        reports.push_back(
            hasvq::evaluate_rtn(original, hessians, hasvq::parse_rtn_selector(selector)));
      }
      json methods = json::array();
      std::vector<hasvq::ParetoPoint> points;
      for (const auto& r : reports) {
        methods.push_back(hasvq::to_json(r));
        points.push_back({r.method, r.linear_storage().bpp(), r.aggregate_error().per_param_mean});
      }
      write_json(e_report, {{"schema_version", hasvq::kReportSchemaVersion},
                            {"distortion_axis", hasvq::kDistortionAxis},
                            {"methods", methods},
                            {"pareto", hasvq::to_json(hasvq::pareto_report(points))}});
      for (const auto& p : points) {
        fmt::print("{:<24} {:8.4f} bpp  hw-mse {:.6e}\n", p.method, p.bpp, p.distortion);
      }
    } else if (*synth) {
      const hasvq::BenchmarkSuite suite =
          s_spec.empty() ? hasvq::default_suite() : hasvq::parse_suite(read_json(s_spec));
      hasvq::BenchmarkOptions options;
      options.workers = s_workers;
      options.keep_artifacts = !s_no_artifacts;
      const auto results = hasvq::run_benchmark(suite, options);
      const fs::path out_dir(s_out);
      fs::create_directories(out_dir);
      write_json(out_dir / "suite.json", hasvq::to_json(suite));
      write_json(out_dir / "report.json", hasvq::to_json(results));
      for (const auto& r : results) {
        for (const auto& cell : r.cells) {
          if (!cell.artifact.empty()) {
            fs::create_directories(out_dir / r.spec.name);
            hasvq::write_file(out_dir / r.spec.name / (cell.method + ".hasvq"), cell.artifact);
          }
          fmt::print("{:<40} {:<22} {:8.4f} bpp  hw-mse {:.6e}\n", r.spec.name, cell.method,
                     cell.bpp, cell.hessian_weighted_mse);
        }
      }
    }
  } catch (const hasvq::Error& e) {
    fmt::print(stderr, "hasvq: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "hasvq: {}\n", e.what());
    return 1;
  }
  return 0;
}
