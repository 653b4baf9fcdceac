#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kdeformer/amm/amm.hpp"
#include "kdeformer/core/dense_matrix.hpp"
#include "kdeformer/core/flops.hpp"
#include "kdeformer/core/linalg.hpp"
#include "kdeformer/kde/gaussian_kde.hpp"
#include "kdeformer/lsh/angular_lsh.hpp"

namespace kdeformer::attention {

/// Diagonal of D-tilde, the estimated softmax normalizer.
struct ScalingEstimate {
  std::vector<double> alpha;
  std::vector<double> log_alpha;
  double epsilon_used = 0.0;  // 0 when exact
  bool exact = false;
  std::size_t exact_fallback_count = 0;
  std::size_t rounds = 0;
};

struct KdeformerOptions {
  double tau = 0.173;
  std::uint64_t seed = 1;
  kde::KdeParams kde;
  // Oracle switches. exact_scaling replaces alpha by the exact row sums,
  // exact_column_norms replaces beta by the exact weighted column norms.
  bool exact_scaling = false;
  bool exact_column_norms = false;
  // m >= n uses Pi = I instead of drawing.
  bool full_sampling_when_saturated = true;
  // Forwarded to WexpOptions::reuse_structure for both KDE passes.
  bool reuse_kde_structure = false;
  // gamma only needs a rough norm, so the defaults are loose.
  PowerIterationOptions power{.tol = 1e-4, .max_iters = 200};
};

struct LshOptions {
  std::size_t rank = 8;
  std::size_t block_size = 0;  // 0 disables the sparse part
  std::uint64_t seed = 7;
};

struct SamplerResult {
  ScalingEstimate scaling;
  amm::SamplingDistribution distribution;  // empty under full sampling
  amm::SamplingMatrix sampler;
  double value_op_norm = 0.0;
  bool full_sampling = false;
};

struct ApproxAttentionOutput {
  DenseMatrix output;
  ScalingEstimate scaling;
  amm::SamplingMatrix sampler;
  std::size_t sparse_nnz = 0;
  std::size_t sparse_blocks = 0;
  std::uint64_t flops = 0;
  std::size_t peak_bytes = 0;  // analytic: largest set of simultaneously live buffers
};

/// alpha from the (eps/3) weighted exponential KDE over K/d^{1/4}, Q/d^{1/4}.
ScalingEstimate estimate_scaling(const AttentionInputs& inp, double epsilon,
                                 const KdeformerOptions& opts = {}, FlopCounter* flops = nullptr,
                                 std::size_t* peak_bytes = nullptr);

/// beta_j ~ sum_i alpha_i^-2 exp(2 <q_i, k_j>/sqrt(d)), the squared column
/// norms of D-tilde^-1 A, from a 1/3-accurate weighted KDE.
std::vector<double> estimate_column_norms(const AttentionInputs& inp,
                                          const ScalingEstimate& scaling,
                                          const KdeformerOptions& opts = {},
                                          FlopCounter* flops = nullptr,
                                          std::size_t* peak_bytes = nullptr);

/// Exact counterpart of estimate_column_norms.
std::vector<double> exact_column_norms(const AttentionInputs& inp,
                                       std::span<const double> log_alpha,
                                       FlopCounter* flops = nullptr);

/// D-tilde and Pi with p_j proportional to beta_j + ||v_j||^2 / ||V||_op^2.
SamplerResult kdeformer_sampler(const AttentionInputs& inp, std::size_t m, double epsilon,
                                const KdeformerOptions& opts = {}, FlopCounter* flops = nullptr);

/// D-tilde^-1 A Pi^T Pi V, materializing only the sampled columns of A.
ApproxAttentionOutput approximate_attention_basic(const AttentionInputs& inp, std::size_t m,
                                                  double epsilon,
                                                  const KdeformerOptions& opts = {});

/// p_j proportional to max(beta_j - sparse_col_sq_j, 1e-12 max beta) + gamma ||v_j||^2.
amm::SamplingDistribution residual_distribution(std::span<const double> beta,
                                                std::span<const double> sparse_col_sq,
                                                double gamma,
                                                std::span<const double> row_norms_v_sq);

/// D-tilde^-1 A_spar V + D-tilde^-1 A_res Pi^T Pi V, where A_spar holds the
/// entries whose query and key share an equalized LSH block.
ApproxAttentionOutput approximate_attention_practical(const AttentionInputs& inp, std::size_t m,
                                                      double epsilon, const LshOptions& lsh,
                                                      const KdeformerOptions& opts = {});

/// Block assignment for the practical variant. block_size 0 yields an
/// assignment with no blocks.
lsh::SparseAttention build_sparse_part(const AttentionInputs& inp, const LshOptions& lsh,
                                       std::span<const double> log_alpha,
                                       FlopCounter* flops = nullptr);

/// Bytes of a materialized n_q x n_k attention matrix, its normalizer and the output.
std::size_t dense_attention_bytes(std::size_t n_q, std::size_t n_k, std::size_t d_v);

/// Sample count leaving room for the sparse blocks in a budget of k
/// columns per row: m = k - num_blocks * block_size^2 / n, at least 1.
std::size_t samples_for_budget(std::size_t k, std::size_t n, std::size_t block_size);

}  // namespace kdeformer::attention
