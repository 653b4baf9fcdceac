#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kdeformer/bench/config.hpp"
#include "kdeformer/core/linalg.hpp"

namespace kdeformer::bench {

/// One (method, n, k, seed) run. Error and stable-rank fields are null when
/// the dense oracle was skipped.
struct RunRecord {
  std::string method;
  std::string dataset;
  std::size_t n = 0;    // queries
  std::size_t n_keys = 0;
  std::size_t d = 0;
  std::size_t d_v = 0;
  std::size_t k = 0;    // budget
  std::size_t m = 0;    // sampled columns actually drawn
  std::size_t block_size = 0;
  std::size_t lsh_rank = 0;
  double epsilon = 0.0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  bool tied_kq = false;

  // ||Att - approx||_op / ||Att||_op, and the same numerator over ||V||_op
  // (the softmax matrix has unit norm).
  std::optional<double> relative_opnorm_error;
  std::optional<double> value_scaled_error;
  std::optional<double> stable_rank_full;  // srank(D^-1 A)
  std::optional<double> stable_rank_res;   // srank(D^-1 A_res), practical only

  std::uint64_t flops = 0;
  std::uint64_t exact_flops = 0;
  std::size_t peak_bytes = 0;
  std::size_t dense_bytes = 0;
  std::size_t sparse_nnz = 0;
  std::size_t exact_fallbacks = 0;
  double wall_ms = 0.0;

  bool operator==(const RunRecord&) const = default;
};

std::string to_json_line(const RunRecord& rec);
/// Throws kParse on malformed JSON or missing fields.
RunRecord from_json_line(const std::string& line);

void write_jsonl(std::ostream& out, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_jsonl(std::istream& in);

/// Attention instance for one seed: generated, or read from the configured
/// files and truncated to the first n rows. File problems are kIo/kParse,
/// a short file is kInvalidArgument.
AttentionInputs make_instance(const BenchConfig& cfg, std::size_t n, std::uint64_t seed);

/// Any record is handed to `sink` as soon as it is finished (may be empty).
std::vector<RunRecord> run_benchmark(const BenchConfig& cfg,
                                     const std::function<void(const RunRecord&)>& sink = {});

/// Median of every numeric column grouped by (method, n, k), as CSV with a
/// header row. Groups keep first-appearance order.
void write_summary_csv(std::ostream& out, const std::vector<RunRecord>& records);

}  // namespace kdeformer::bench
