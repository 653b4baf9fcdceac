#include "kdeformer/core/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "kdeformer/core/error.hpp"
#include "kdeformer/core/random.hpp"

namespace kdeformer {

AttentionInputs::AttentionInputs(DenseMatrix queries, DenseMatrix keys, DenseMatrix values)
    : q(std::move(queries)), k(std::move(keys)), v(std::move(values)) {
  validate();
}

void AttentionInputs::validate() const {
  require(q.rows() >= 1 && k.rows() >= 1, ErrorCode::kInvalidArgument,
          "attention needs at least one query and one key");
  require(q.cols() >= 1 && v.cols() >= 1, ErrorCode::kInvalidArgument,
          "attention needs d >= 1 and d_v >= 1");
  require(q.cols() == k.cols(), ErrorCode::kDimensionMismatch,
          "query dim " + std::to_string(q.cols()) + " != key dim " + std::to_string(k.cols()));
  require(k.rows() == v.rows(), ErrorCode::kDimensionMismatch,
          "key count " + std::to_string(k.rows()) + " != value count " +
              std::to_string(v.rows()));
}

namespace {

// Fills logits with <q_i, k_j>/sqrt(d) for all keys and returns the row max.
double fill_row_logits(const AttentionInputs& inp, std::size_t i, std::vector<double>& logits) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(inp.dim()));
  auto qi = inp.q.row(i);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < inp.num_keys(); ++j) {
    const double l = dot(qi, inp.k.row(j)) * inv_sqrt_d;
    if (!std::isfinite(l)) {
      fail(ErrorCode::kNumerical, "logit overflow in query row " + std::to_string(i));
    }
    logits[j] = l;
    top = std::max(top, l);
  }
  return top;
}

}  // namespace

DenseMatrix exact_attention(const AttentionInputs& inp, FlopCounter* flops) {
  inp.validate();
  const std::size_t nq = inp.num_queries();
  const std::size_t nk = inp.num_keys();
  const std::size_t d = inp.dim();
  const std::size_t dv = inp.value_dim();
  DenseMatrix out(nq, dv);
  std::vector<double> logits(nk);
  for (std::size_t i = 0; i < nq; ++i) {
    const double top = fill_row_logits(inp, i, logits);
    auto orow = out.row(i);
    double denom = 0.0;
    for (std::size_t j = 0; j < nk; ++j) {
      const double a = std::exp(logits[j] - top);
      denom += a;
      auto vj = inp.v.row(j);
      for (std::size_t c = 0; c < dv; ++c) orow[c] += a * vj[c];
    }
    if (!std::isfinite(denom) || denom <= 0.0) {
      fail(ErrorCode::kNumerical, "softmax normalizer overflow in query row " + std::to_string(i));
    }
    for (double& x : orow) x /= denom;
  }
  // per entry: logit (2d) + scale + sub + exp + accumulate, then the value axpy
  count_flops(flops, static_cast<std::uint64_t>(nq) * nk * (2 * d + 4 + 2 * dv) + nq * dv);
  return out;
}

DenseMatrix softmax_matrix(const AttentionInputs& inp) {
  inp.validate();
  const std::size_t nk = inp.num_keys();
  DenseMatrix p(inp.num_queries(), nk);
  std::vector<double> logits(nk);
  for (std::size_t i = 0; i < inp.num_queries(); ++i) {
    const double top = fill_row_logits(inp, i, logits);
    auto prow = p.row(i);
    double denom = 0.0;
    for (std::size_t j = 0; j < nk; ++j) {
      prow[j] = std::exp(logits[j] - top);
      denom += prow[j];
    }
    for (double& x : prow) x /= denom;
  }
  return p;
}

std::vector<double> log_attention_row_sums(const AttentionInputs& inp, FlopCounter* flops) {
  inp.validate();
  std::vector<double> out(inp.num_queries());
  std::vector<double> logits(inp.num_keys());
  for (std::size_t i = 0; i < inp.num_queries(); ++i) {
    fill_row_logits(inp, i, logits);
    out[i] = log_sum_exp(logits);
  }
  count_flops(flops, static_cast<std::uint64_t>(inp.num_queries()) * inp.num_keys() *
                         (2 * inp.dim() + 4));
  return out;
}

NormEstimate operator_norm(const DenseMatrix& m, const PowerIterationOptions& opts) {
  require(!m.empty(), ErrorCode::kInvalidArgument, "operator_norm of an empty matrix");
  require(opts.tol > 0.0, ErrorCode::kInvalidArgument, "operator_norm needs tol > 0");
  NormEstimate est;
  if (std::all_of(m.data().begin(), m.data().end(), [](double x) { return x == 0.0; })) {
    est.converged = true;
    return est;
  }

  // Iterate on the Gram matrix of the smaller side: x lives in R^small.
  const bool use_cols = m.cols() <= m.rows();
  const std::size_t small = use_cols ? m.cols() : m.rows();
  const std::size_t large = use_cols ? m.rows() : m.cols();

  Rng rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(small), y(large), z(small);
  for (double& xi : x) xi = gauss(rng);
  double nx = std::sqrt(squared_norm(x));
  for (double& xi : x) xi /= nx;

  auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
    // out = M in (use_cols) or M^T in (otherwise), out has length `large`.
    std::fill(out.begin(), out.end(), 0.0);
    if (use_cols) {
      for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), in);
    } else {
      for (std::size_t i = 0; i < m.rows(); ++i) {
        const double s = in[i];
        auto r = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) out[j] += s * r[j];
      }
    }
  };
  auto apply_t = [&](const std::vector<double>& in, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    if (use_cols) {
      for (std::size_t i = 0; i < m.rows(); ++i) {
        const double s = in[i];
        auto r = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) out[j] += s * r[j];
      }
    } else {
      for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), in);
    }
  };

  double sigma_sq = 0.0;
  for (std::size_t it = 1; it <= opts.max_iters; ++it) {
    apply(x, y);
    const double next = squared_norm(y);
    apply_t(y, z);
    const double nz = std::sqrt(squared_norm(z));
    est.iterations = it;
    if (nz == 0.0) {
      sigma_sq = next;
      est.converged = true;
      break;
    }
    for (std::size_t i = 0; i < small; ++i) x[i] = z[i] / nz;
    const bool done = it > 1 && std::abs(next - sigma_sq) <= opts.tol * next;
    sigma_sq = next;
    if (done) {
      est.converged = true;
      break;
    }
  }
  est.value = std::sqrt(sigma_sq);
  return est;
}

SpectralStats spectral_stats(const DenseMatrix& m, const PowerIterationOptions& opts) {
  SpectralStats s;
  s.frob_norm = frobenius_norm(m);
  require(s.frob_norm > 0.0, ErrorCode::kNumerical, "stable rank of the zero matrix is undefined");
  const NormEstimate op = operator_norm(m, opts);
  s.op_norm = op.value;
  s.op_norm_converged = op.converged;
  s.stable_rank = (s.frob_norm * s.frob_norm) / (s.op_norm * s.op_norm);
  return s;
}

double relative_opnorm_error(const DenseMatrix& exact, const DenseMatrix& approx,
                             const PowerIterationOptions& opts) {
  require(exact.rows() == approx.rows() && exact.cols() == approx.cols(),
          ErrorCode::kDimensionMismatch, "relative_opnorm_error shapes differ");
  const double denom = operator_norm(exact, opts).value;
  require(denom > 0.0, ErrorCode::kNumerical, "relative error against a zero matrix");
  return operator_norm(subtract(exact, approx), opts).value / denom;
}

}  // namespace kdeformer
