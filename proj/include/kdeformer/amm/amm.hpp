#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kdeformer/core/dense_matrix.hpp"
#include "kdeformer/core/flops.hpp"

namespace kdeformer::amm {

/// Row-sampling distribution for approximating X^T Y, with
/// p_i proportional to beta_i + gamma * |y_i|^2.
struct SamplingDistribution {
  std::vector<double> p;
  std::vector<double> beta;         // (estimated) squared row norms of X
  double gamma = 0.0;               // ||X||_op^2 / ||Y||_op^2
  std::vector<double> row_norms_y;  // squared row norms of Y
};

/// Rows of Pi as (index, weight) pairs; weight = 1/sqrt(m p_index).
struct SamplingMatrix {
  std::size_t n = 0;  // ambient dimension (number of columns of Pi)
  std::vector<std::uint32_t> indices;
  std::vector<double> weights;

  std::size_t m() const noexcept { return indices.size(); }
};

/// Throws kInvalidArgument for negative entries or zero total mass.
SamplingDistribution build_distribution(std::span<const double> beta,
                                        std::span<const double> row_norms_y_sq, double gamma);

/// m i.i.d. draws from dist.p through an alias table; deterministic per seed.
SamplingMatrix draw_sampling_matrix(const SamplingDistribution& dist, std::size_t m,
                                    std::uint64_t seed);

/// Pi = I_n: every index once with unit weight, so Pi^T Pi = I exactly.
SamplingMatrix full_sampling_matrix(std::size_t n);

/// Per-index sum of squared weights, merging repeated draws:
/// Pi^T Pi = diag(result) restricted to the returned indices.
std::vector<std::pair<std::uint32_t, double>> gram_diagonal(const SamplingMatrix& pi);

/// X^T Pi^T Pi Y touching only the sampled rows of X (n x q) and Y (n x d).
DenseMatrix amm_product(const DenseMatrix& x, const DenseMatrix& y, const SamplingMatrix& pi,
                        FlopCounter* flops = nullptr);

/// m = ceil(c eps^-2 log n (srank_x + srank_y)), at least 1.
std::size_t sample_count(double c, double epsilon, std::size_t n, double srank_x,
                         double srank_y);

}  // namespace kdeformer::amm
