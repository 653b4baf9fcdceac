#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "kdeformer/core/dense_matrix.hpp"
#include "kdeformer/core/linalg.hpp"

namespace kdeformer::bench {

enum class DatasetKind { kGaussianBlobs, kBoundedDiameter, kGloveLike };

/// Accepts "blobs"/"gaussian-blobs", "bounded-diameter", "glove-like".
DatasetKind parse_dataset_kind(std::string_view name);
std::string to_string(DatasetKind kind);

struct SyntheticParams {
  // Gaussian blobs: centers ~ N(0, center_std^2 I), points ~ center + N(0, cluster_std^2 I).
  std::size_t clusters = 8;
  double center_std = 1.0;
  double cluster_std = 0.3;
  // Bounded diameter: max pairwise squared distance is rescaled to gamma sqrt(d) log n.
  double gamma = 0.5;
  // Glove-like: Zipf-sized clusters in an anisotropic spectrum.
  std::size_t glove_clusters = 64;
  double zipf_exponent = 1.0;
};

DenseMatrix gaussian_blobs(std::size_t n, std::size_t d, std::uint64_t seed,
                           const SyntheticParams& params = {});

DenseMatrix bounded_diameter(std::size_t n, std::size_t d, std::uint64_t seed,
                             const SyntheticParams& params = {});

DenseMatrix glove_like(std::size_t n, std::size_t d, std::uint64_t seed,
                       const SyntheticParams& params = {});

DenseMatrix generate_synthetic(DatasetKind kind, std::size_t n, std::size_t d, std::uint64_t seed,
                               const SyntheticParams& params = {});

/// max_{i,j} ||a_i - b_j||^2, exhaustively.
double max_squared_distance(const DenseMatrix& a, const DenseMatrix& b);

/// kAuto takes values from the pool for glove-like data and Gaussian
/// values otherwise.
enum class ValueSource { kAuto, kGaussian, kPool };

/// "auto", "gaussian", "pool". Throws kConfig otherwise.
ValueSource parse_value_source(std::string_view name);
std::string to_string(ValueSource source);

/// Queries and keys drawn from one generated pool of 2n points (so they share
/// cluster structure), or K = Q when tied. Gaussian values have i.i.d. N(0,1)
/// entries; pool values are a further disjoint slice of the pool truncated
/// to d_v <= d coordinates.
AttentionInputs make_attention_instance(DatasetKind kind, std::size_t n, std::size_t d,
                                        std::size_t d_v, std::uint64_t seed, bool tied_kq,
                                        const SyntheticParams& params = {},
                                        ValueSource values = ValueSource::kAuto);

}  // namespace kdeformer::bench
