#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kdeformer/bench/synthetic.hpp"

namespace kdeformer::bench {

enum class Method { kExact, kKdeformerBasic, kKdeformerPractical };

/// "exact", "kdeformer-basic", "kdeformer-practical". Throws kConfig otherwise.
Method parse_method(std::string_view name);
std::string to_string(Method method);

struct DatasetSource {
  DatasetKind kind = DatasetKind::kGaussianBlobs;
  SyntheticParams params;
  ValueSource values = ValueSource::kAuto;
  // When path_q is set the instance is read from disk instead of generated.
  // An empty path_k ties K = Q; an empty path_v draws Gaussian values.
  std::string path_q;
  std::string path_k;
  std::string path_v;

  bool from_files() const noexcept { return !path_q.empty(); }
};

struct BenchConfig {
  std::vector<Method> methods{Method::kKdeformerPractical};
  std::vector<std::size_t> n{1024};
  std::size_t d = 16;
  std::size_t d_v = 16;
  std::vector<std::size_t> k{128};
  std::optional<double> k_ratio;  // k = round(ratio * n), replaces the k list
  double epsilon = 0.5;
  double tau = 0.173;
  std::vector<std::uint64_t> seeds{1};
  std::size_t lsh_rank = 10;
  std::size_t block_size = 16;
  bool tied_kq = false;
  bool reuse_kde_structure = true;
  bool stable_ranks = true;
  std::size_t oracle_ceiling = 8192;
  bool oracle = true;
  std::string output = "results.jsonl";
  DatasetSource dataset;

  /// Budgets used for a given n.
  std::vector<std::size_t> budgets(std::size_t n_value) const;

  /// Throws kConfig on non-positive counts, k > n, or bad reals.
  void validate() const;
};

/// Parses TOML text. Scalars or arrays are accepted for method, n and k;
/// `seed_count = S` expands to seeds 1..S. Unknown keys are rejected.
BenchConfig parse_config(std::string_view toml_text);
BenchConfig load_config(const std::filesystem::path& path);

}  // namespace kdeformer::bench
