#pragma once

#include <cstdint>
#include <vector>

#include "kdeformer/core/dense_matrix.hpp"
#include "kdeformer/core/flops.hpp"

namespace kdeformer {

/// Queries (n_q x d), keys (n_k x d) and values (n_k x d_v).
struct AttentionInputs {
  DenseMatrix q;
  DenseMatrix k;
  DenseMatrix v;

  AttentionInputs() = default;
  AttentionInputs(DenseMatrix queries, DenseMatrix keys, DenseMatrix values);

  /// Throws kDimensionMismatch / kInvalidArgument when shapes disagree.
  void validate() const;

  std::size_t num_queries() const noexcept { return q.rows(); }
  std::size_t num_keys() const noexcept { return k.rows(); }
  std::size_t dim() const noexcept { return q.cols(); }
  std::size_t value_dim() const noexcept { return v.cols(); }
};

/// Exact softmax attention D^-1 A V with A = exp(Q K^T / sqrt(d)). Each row is
/// stabilized by subtracting its maximum logit before exponentiation.
DenseMatrix exact_attention(const AttentionInputs& inp, FlopCounter* flops = nullptr);

/// Dense softmax matrix D^-1 A (n_q x n_k). Oracle use only.
DenseMatrix softmax_matrix(const AttentionInputs& inp);

/// log D_ii = log sum_j exp(<q_i, k_j>/sqrt(d)) for every query row.
std::vector<double> log_attention_row_sums(const AttentionInputs& inp,
                                           FlopCounter* flops = nullptr);

struct NormEstimate {
  double value = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

struct PowerIterationOptions {
  double tol = 1e-10;
  std::size_t max_iters = 5000;
  std::uint64_t seed = 0x5eed;
};

/// Largest singular value by power iteration on the smaller Gram matrix,
/// starting from a seeded Gaussian vector. A zero matrix yields 0 (converged).
/// When max_iters is hit the last estimate is returned with converged=false.
NormEstimate operator_norm(const DenseMatrix& m, const PowerIterationOptions& opts = {});

struct SpectralStats {
  double op_norm = 0.0;
  double frob_norm = 0.0;
  double stable_rank = 0.0;
  bool op_norm_converged = false;
};

/// Throws kNumerical for the zero matrix, where stable rank is undefined.
SpectralStats spectral_stats(const DenseMatrix& m, const PowerIterationOptions& opts = {});

/// ||exact - approx||_op / ||exact||_op.
double relative_opnorm_error(const DenseMatrix& exact, const DenseMatrix& approx,
                             const PowerIterationOptions& opts = {});

}  // namespace kdeformer
