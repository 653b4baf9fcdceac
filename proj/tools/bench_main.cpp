#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kdeformer/bench/config.hpp"
#include "kdeformer/bench/io.hpp"
#include "kdeformer/bench/runner.hpp"
#include "kdeformer/bench/synthetic.hpp"
#include "kdeformer/core/error.hpp"

namespace {

using namespace kdeformer;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct RunArgs {
  std::string config;
  std::string method;
  std::optional<std::size_t> n;
  std::optional<std::size_t> k;
  std::optional<std::size_t> seed_count;
  std::string out;
  bool no_oracle = false;
};

struct GenArgs {
  std::string kind = "blobs";
  std::size_t n = 2048;
  std::size_t d = 64;
  std::uint64_t seed = 7;
  std::string out;
};

struct ReportArgs {
  std::string in;
  std::string out;
};

int do_run(const RunArgs& a) {
  bench::BenchConfig cfg = bench::load_config(a.config);
  if (!a.method.empty()) cfg.methods = {bench::parse_method(a.method)};
  if (a.n) cfg.n = {*a.n};
  if (a.k) {
    cfg.k = {*a.k};
    cfg.k_ratio.reset();
  }
  if (a.seed_count) {
    cfg.seeds.clear();
    for (std::size_t s = 1; s <= *a.seed_count; ++s) cfg.seeds.push_back(s);
  }
  if (!a.out.empty()) cfg.output = a.out;
  if (a.no_oracle) cfg.oracle = false;
  cfg.validate();

  std::ofstream out(cfg.output);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write '" + cfg.output + "'");
  const auto records = bench::run_benchmark(cfg, [&](const bench::RunRecord& r) {
    out << bench::to_json_line(r) << '\n' << std::flush;
    std::fprintf(stderr, "%-20s n=%-6zu k=%-5zu seed=%-4llu err=%s flops=%.3g (exact %.3g)\n",
                 r.method.c_str(), r.n, r.k, static_cast<unsigned long long>(r.seed),
                 r.relative_opnorm_error ? std::to_string(*r.relative_opnorm_error).c_str()
                                         : "null",
                 static_cast<double>(r.flops), static_cast<double>(r.exact_flops));
  });
  require(static_cast<bool>(out), ErrorCode::kIo, "write to '" + cfg.output + "' failed");
  std::fprintf(stderr, "wrote %zu records to %s\n", records.size(), cfg.output.c_str());
  return 0;
}

int do_gen(const GenArgs& a) {
  const auto kind = bench::parse_dataset_kind(a.kind);
  require(a.n > 0 && a.d > 0, ErrorCode::kConfig, "--n and --d must be positive");
  const DenseMatrix m = bench::generate_synthetic(kind, a.n, a.d, a.seed);
  bench::save_matrix(a.out, m);
  std::fprintf(stderr, "wrote %zu x %zu %s matrix to %s\n", m.rows(), m.cols(), a.kind.c_str(),
               a.out.c_str());
  return 0;
}

int do_report(const ReportArgs& a) {
  std::ifstream in(a.in);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + a.in + "'");
  const auto records = bench::read_jsonl(in);
  require(!records.empty(), ErrorCode::kParse, "'" + a.in + "' holds no records");
  std::ofstream out(a.out);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write '" + a.out + "'");
  bench::write_summary_csv(out, records);
  require(static_cast<bool>(out), ErrorCode::kIo, "write to '" + a.out + "' failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KDEformer attention benchmark harness"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run a benchmark sweep from a TOML config");
  run_cmd->add_option("--config", run.config, "TOML config file")->required();
  run_cmd->add_option("--method", run.method, "exact | kdeformer-basic | kdeformer-practical");
  run_cmd->add_option("--n", run.n, "problem size (overrides the config)");
  run_cmd->add_option("--k", run.k, "budget (overrides the config)");
  run_cmd->add_option("--seed-count", run.seed_count, "use seeds 1..S");
  run_cmd->add_option("--out", run.out, "JSON-lines output path");
  run_cmd->add_flag("--no-oracle", run.no_oracle, "skip the dense oracle; error fields are null");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "write a synthetic matrix (CSV or KDF1 by extension)");
  gen_cmd->add_option("--kind", gen.kind, "blobs | bounded-diameter | glove-like")
      ->capture_default_str();
  gen_cmd->add_option("--n", gen.n, "rows")->capture_default_str();
  gen_cmd->add_option("--d", gen.d, "columns")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output path")->required();

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "median summary CSV from JSON-lines results");
  report_cmd->add_option("--in", report.in, "JSON-lines results")->required();
  report_cmd->add_option("--out", report.out, "CSV output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run_cmd) return do_run(run);
    if (*gen_cmd) return do_gen(gen);
    if (*report_cmd) return do_report(report);
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", to_string(e.code()), e.what());
    return e.code() == ErrorCode::kConfig ? kExitConfig : kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return 0;
}
