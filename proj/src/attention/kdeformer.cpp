#include "kdeformer/attention/kdeformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kdeformer/core/error.hpp"
#include "kdeformer/core/random.hpp"
#include "kdeformer/kde/wexpkde.hpp"

namespace kdeformer::attention {

namespace {

constexpr std::uint64_t kScalingStream = 1;
constexpr std::uint64_t kColumnStream = 2;
constexpr std::uint64_t kSamplerStream = 3;

void check_epsilon(double epsilon) {
  require(epsilon > 0.0 && epsilon < 1.0, ErrorCode::kInvalidArgument,
          "epsilon must lie in (0,1)");
}

double quarter_root_scale(std::size_t d) { return std::pow(static_cast<double>(d), -0.25); }

void note_peak(std::size_t* peak, std::size_t bytes) {
  if (peak != nullptr) *peak = std::max(*peak, bytes);
}

std::uint64_t power_flops(const NormEstimate& est, std::size_t rows, std::size_t cols) {
  return static_cast<std::uint64_t>(std::max<std::size_t>(est.iterations, 1)) * 4 * rows * cols;
}

double value_norm(const AttentionInputs& inp, const KdeformerOptions& opts, FlopCounter* flops) {
  const NormEstimate est = operator_norm(inp.v, opts.power);
  count_flops(flops, power_flops(est, inp.num_keys(), inp.value_dim()));
  return est.value;
}

// sum over sampled columns c of w_c exp(logit_ic - log_alpha_i) v_c, with the
// columns colliding with query i (under `sparse`) left out.
DenseMatrix sampled_product(const AttentionInputs& inp, std::span<const double> log_alpha,
                            const std::vector<std::pair<std::uint32_t, double>>& columns,
                            const lsh::SparseAttention* sparse, FlopCounter* flops,
                            std::size_t* block_bytes) {
  const std::size_t nq = inp.num_queries();
  const std::size_t u = columns.size();
  const std::size_t dv = inp.value_dim();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(inp.dim()));

  DenseMatrix c(nq, u);
  for (std::size_t i = 0; i < nq; ++i) {
    auto qi = inp.q.row(i);
    auto crow = c.row(i);
    for (std::size_t t = 0; t < u; ++t) {
      const std::uint32_t j = columns[t].first;
      if (sparse != nullptr && sparse->collides(i, j)) continue;
      crow[t] = columns[t].second * std::exp(dot(qi, inp.k.row(j)) * inv_sqrt_d - log_alpha[i]);
    }
  }
  DenseMatrix sub_v(u, dv);
  for (std::size_t t = 0; t < u; ++t) {
    auto src = inp.v.row(columns[t].first);
    std::copy(src.begin(), src.end(), sub_v.row(t).begin());
  }
  DenseMatrix out = matmul(c, sub_v);
  count_flops(flops, static_cast<std::uint64_t>(nq) * u * (2 * inp.dim() + 4 + 2 * dv));
  if (block_bytes != nullptr) {
    *block_bytes = (c.data().size() + sub_v.data().size() + out.data().size()) * sizeof(double);
  }
  return out;
}

std::vector<std::pair<std::uint32_t, double>> sampled_columns(const amm::SamplingMatrix& pi) {
  return amm::gram_diagonal(pi);
}

}  // namespace

ScalingEstimate estimate_scaling(const AttentionInputs& inp, double epsilon,
                                 const KdeformerOptions& opts, FlopCounter* flops,
                                 std::size_t* peak_bytes) {
  inp.validate();
  check_epsilon(epsilon);
  ScalingEstimate est;
  if (opts.exact_scaling) {
    est.log_alpha = log_attention_row_sums(inp, flops);
    est.exact = true;
  } else {
    const double s = quarter_root_scale(inp.dim());
    const DenseMatrix x = scaled(inp.k, s);
    const DenseMatrix y = scaled(inp.q, s);
    count_flops(flops, (inp.num_keys() + inp.num_queries()) * inp.dim());
    kde::WexpOptions wopts;
    wopts.seed = derive_seed(opts.seed, kScalingStream);
    wopts.kde = opts.kde;
    wopts.reuse_structure = opts.reuse_kde_structure;
    const std::vector<double> ones(inp.num_keys(), 1.0);
    auto res = kde::wexpkde(x, y, ones, epsilon / 3.0, opts.tau, wopts, flops);
    note_peak(peak_bytes, res.peak_bytes + (x.data().size() + y.data().size()) * sizeof(double));
    est.log_alpha = std::move(res.log_alpha);
    est.epsilon_used = epsilon / 3.0;
    est.exact_fallback_count = res.exact_fallback_count;
    est.rounds = res.rounds;
  }
  est.alpha.resize(est.log_alpha.size());
  for (std::size_t i = 0; i < est.alpha.size(); ++i) {
    require(std::isfinite(est.log_alpha[i]), ErrorCode::kNumerical,
            "normalizer estimate of query row " + std::to_string(i) + " is not finite");
    est.alpha[i] = std::exp(est.log_alpha[i]);
  }
  return est;
}

std::vector<double> exact_column_norms(const AttentionInputs& inp,
                                       std::span<const double> log_alpha, FlopCounter* flops) {
  inp.validate();
  require(log_alpha.size() == inp.num_queries(), ErrorCode::kDimensionMismatch,
          "scaling length differs from the query count");
  const double s = std::sqrt(2.0) * quarter_root_scale(inp.dim());
  std::vector<double> log_u(log_alpha.size());
  for (std::size_t i = 0; i < log_u.size(); ++i) log_u[i] = -2.0 * log_alpha[i];
  auto beta = kde::exact_log_wexp_kde(scaled(inp.q, s), scaled(inp.k, s), log_u, flops);
  for (double& b : beta) b = std::exp(b);
  return beta;
}

std::vector<double> estimate_column_norms(const AttentionInputs& inp,
                                          const ScalingEstimate& scaling,
                                          const KdeformerOptions& opts, FlopCounter* flops,
                                          std::size_t* peak_bytes) {
  if (opts.exact_column_norms) return exact_column_norms(inp, scaling.log_alpha, flops);
  inp.validate();
  require(scaling.log_alpha.size() == inp.num_queries(), ErrorCode::kDimensionMismatch,
          "scaling length differs from the query count");
  const double s = std::sqrt(2.0) * quarter_root_scale(inp.dim());
  const DenseMatrix x = scaled(inp.q, s);
  const DenseMatrix y = scaled(inp.k, s);
  count_flops(flops, (inp.num_keys() + inp.num_queries()) * inp.dim());
  std::vector<double> log_u(scaling.log_alpha.size());
  for (std::size_t i = 0; i < log_u.size(); ++i) log_u[i] = -2.0 * scaling.log_alpha[i];
  kde::WexpOptions wopts;
  wopts.seed = derive_seed(opts.seed, kColumnStream);
  wopts.kde = opts.kde;
  wopts.reuse_structure = opts.reuse_kde_structure;
  auto res = kde::wexpkde_log_weights(x, y, log_u, 1.0 / 3.0, opts.tau, wopts, flops);
  note_peak(peak_bytes, res.peak_bytes + (x.data().size() + y.data().size()) * sizeof(double));
  return std::move(res.alpha);
}

SamplerResult kdeformer_sampler(const AttentionInputs& inp, std::size_t m, double epsilon,
                                const KdeformerOptions& opts, FlopCounter* flops) {
  require(m >= 1, ErrorCode::kInvalidArgument, "need at least one sample");
  SamplerResult res;
  res.scaling = estimate_scaling(inp, epsilon, opts, flops);
  res.value_op_norm = value_norm(inp, opts, flops);
  const std::size_t n = inp.num_keys();
  if (m >= n && opts.full_sampling_when_saturated) {
    res.full_sampling = true;
    res.sampler = amm::full_sampling_matrix(n);
    return res;
  }
  const auto beta = estimate_column_norms(inp, res.scaling, opts, flops);
  const double gamma = res.value_op_norm > 0.0 ? 1.0 / (res.value_op_norm * res.value_op_norm) : 0.0;
  res.distribution = amm::build_distribution(beta, row_squared_norms(inp.v), gamma);
  res.sampler = amm::draw_sampling_matrix(res.distribution, m, derive_seed(opts.seed, kSamplerStream));
  count_flops(flops, n * (2 * inp.value_dim() + 4));
  return res;
}

ApproxAttentionOutput approximate_attention_basic(const AttentionInputs& inp, std::size_t m,
                                                  double epsilon, const KdeformerOptions& opts) {
  FlopCounter counter;
  require(m >= 1, ErrorCode::kInvalidArgument, "need at least one sample");
  std::size_t stage_peak = 0;
  ApproxAttentionOutput out;
  out.scaling = estimate_scaling(inp, epsilon, opts, &counter, &stage_peak);
  const double vnorm = value_norm(inp, opts, &counter);
  const std::size_t n = inp.num_keys();
  if (m >= n && opts.full_sampling_when_saturated) {
    out.sampler = amm::full_sampling_matrix(n);
  } else {
    const auto beta = estimate_column_norms(inp, out.scaling, opts, &counter, &stage_peak);
    const double gamma = vnorm > 0.0 ? 1.0 / (vnorm * vnorm) : 0.0;
    const auto dist = amm::build_distribution(beta, row_squared_norms(inp.v), gamma);
    count_flops(&counter, n * (2 * inp.value_dim() + 4));
    out.sampler = amm::draw_sampling_matrix(dist, m, derive_seed(opts.seed, kSamplerStream));
  }
  std::size_t block_bytes = 0;
  out.output = sampled_product(inp, out.scaling.log_alpha, sampled_columns(out.sampler), nullptr,
                               &counter, &block_bytes);
  const std::size_t vectors = (inp.num_queries() + 3 * n) * sizeof(double) +
                              out.sampler.m() * (sizeof(std::uint32_t) + sizeof(double));
  out.peak_bytes = vectors + std::max(stage_peak, block_bytes);
  out.flops = counter.total();
  return out;
}

amm::SamplingDistribution residual_distribution(std::span<const double> beta,
                                                std::span<const double> sparse_col_sq,
                                                double gamma,
                                                std::span<const double> row_norms_v_sq) {
  require(beta.size() == sparse_col_sq.size(), ErrorCode::kDimensionMismatch,
          "beta and sparse column mass differ in length");
  require(!beta.empty(), ErrorCode::kInvalidArgument, "empty residual distribution");
  const double top = *std::max_element(beta.begin(), beta.end());
  const double floor = 1e-12 * std::max(top, 0.0);
  std::vector<double> residual(beta.size());
  for (std::size_t j = 0; j < beta.size(); ++j) {
    residual[j] = std::max(beta[j] - sparse_col_sq[j], floor);
  }
  return amm::build_distribution(residual, row_norms_v_sq, gamma);
}

lsh::SparseAttention build_sparse_part(const AttentionInputs& inp, const LshOptions& lsh,
                                       std::span<const double> log_alpha, FlopCounter* flops) {
  if (lsh.block_size == 0) {
    lsh::SparseAttention empty;
    empty.n_q = inp.num_queries();
    empty.n_k = inp.num_keys();
    empty.query_block.assign(empty.n_q, 0);
    empty.key_block.assign(empty.n_k, 0);
    empty.log_row_sums.assign(empty.n_q, -std::numeric_limits<double>::infinity());
    empty.column_sq_mass.assign(empty.n_k, 0.0);
    return empty;
  }
  const lsh::AngularLshFunction h(lsh.rank, inp.dim(), lsh.seed);
  const auto labels_q = h.hash_points(inp.q, flops);
  const auto labels_k = h.hash_points(inp.k, flops);
  const auto [ba_q, ba_k] = lsh::equalize_buckets(labels_q, labels_k, lsh.block_size);
  return lsh::sparse_attention(inp, ba_q, ba_k, log_alpha, flops);
}

ApproxAttentionOutput approximate_attention_practical(const AttentionInputs& inp, std::size_t m,
                                                      double epsilon, const LshOptions& lsh,
                                                      const KdeformerOptions& opts) {
  FlopCounter counter;
  require(m >= 1, ErrorCode::kInvalidArgument, "need at least one sample");
  std::size_t stage_peak = 0;
  ApproxAttentionOutput out;
  out.scaling = estimate_scaling(inp, epsilon, opts, &counter, &stage_peak);
  const lsh::SparseAttention sparse = build_sparse_part(inp, lsh, out.scaling.log_alpha, &counter);
  out.sparse_nnz = sparse.nnz;
  out.sparse_blocks = sparse.blocks.size();

  const double vnorm = value_norm(inp, opts, &counter);
  const std::size_t n = inp.num_keys();
  if (m >= n && opts.full_sampling_when_saturated) {
    out.sampler = amm::full_sampling_matrix(n);
  } else {
    const auto beta = estimate_column_norms(inp, out.scaling, opts, &counter, &stage_peak);
    const double gamma = vnorm > 0.0 ? 1.0 / (vnorm * vnorm) : 0.0;
    const auto dist =
        residual_distribution(beta, sparse.column_sq_mass, gamma, row_squared_norms(inp.v));
    count_flops(&counter, n * (2 * inp.value_dim() + 5));
    out.sampler = amm::draw_sampling_matrix(dist, m, derive_seed(opts.seed, kSamplerStream));
  }

  std::size_t block_bytes = 0;
  DenseMatrix residual = sampled_product(inp, out.scaling.log_alpha, sampled_columns(out.sampler),
                                         &sparse, &counter, &block_bytes);
  out.output = sparse.apply(inp.v, out.scaling.log_alpha, &counter);
  auto data = out.output.data();
  auto extra = residual.data();
  for (std::size_t t = 0; t < data.size(); ++t) data[t] += extra[t];
  count_flops(&counter, data.size());

  const std::size_t sparse_bytes = sparse.nnz * sizeof(double) +
                                   (inp.num_queries() + n) * 2 * sizeof(std::uint32_t);
  const std::size_t vectors = (inp.num_queries() + 4 * n) * sizeof(double) +
                              out.sampler.m() * (sizeof(std::uint32_t) + sizeof(double));
  out.peak_bytes = vectors + sparse_bytes + std::max(stage_peak, block_bytes);
  out.flops = counter.total();
  return out;
}

std::size_t dense_attention_bytes(std::size_t n_q, std::size_t n_k, std::size_t d_v) {
  return (n_q * n_k + n_q + n_q * d_v) * sizeof(double);
}

std::size_t samples_for_budget(std::size_t k, std::size_t n, std::size_t block_size) {
  require(n >= 1, ErrorCode::kInvalidArgument, "budget needs n >= 1");
  if (block_size == 0) return std::max<std::size_t>(1, k);
  const std::size_t blocks = (n + block_size - 1) / block_size;
  const double sparse_cols = static_cast<double>(blocks) * static_cast<double>(block_size) *
                             static_cast<double>(block_size) / static_cast<double>(n);
  const double m = std::round(static_cast<double>(k) - sparse_cols);
  return m < 1.0 ? 1 : static_cast<std::size_t>(m);
}

}  // namespace kdeformer::attention
