#include "kdeformer/amm/amm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "kdeformer/amm/alias_table.hpp"
#include "kdeformer/core/error.hpp"
#include "kdeformer/core/random.hpp"

namespace kdeformer::amm {

SamplingDistribution build_distribution(std::span<const double> beta,
                                        std::span<const double> row_norms_y_sq, double gamma) {
  require(beta.size() == row_norms_y_sq.size(), ErrorCode::kDimensionMismatch,
          "beta and row norm vectors differ in length");
  require(!beta.empty(), ErrorCode::kInvalidArgument, "empty sampling distribution");
  require(std::isfinite(gamma) && gamma >= 0.0, ErrorCode::kInvalidArgument,
          "gamma must be finite and non-negative");
  SamplingDistribution dist;
  dist.beta.assign(beta.begin(), beta.end());
  dist.row_norms_y.assign(row_norms_y_sq.begin(), row_norms_y_sq.end());
  dist.gamma = gamma;
  dist.p.resize(beta.size());
  double total = 0.0;
  for (std::size_t i = 0; i < beta.size(); ++i) {
    require(std::isfinite(beta[i]) && beta[i] >= 0.0, ErrorCode::kInvalidArgument,
            "beta[" + std::to_string(i) + "] is negative or non-finite");
    require(std::isfinite(row_norms_y_sq[i]) && row_norms_y_sq[i] >= 0.0,
            ErrorCode::kInvalidArgument, "row norm " + std::to_string(i) + " is invalid");
    dist.p[i] = beta[i] + gamma * row_norms_y_sq[i];
    total += dist.p[i];
  }
  require(total > 0.0 && std::isfinite(total), ErrorCode::kInvalidArgument,
          "sampling distribution has zero total mass");
  for (double& pi : dist.p) pi /= total;
  return dist;
}

SamplingMatrix draw_sampling_matrix(const SamplingDistribution& dist, std::size_t m,
                                    std::uint64_t seed) {
  require(m >= 1, ErrorCode::kInvalidArgument, "need at least one sample");
  const AliasTable table(dist.p);
  Rng rng(seed);
  SamplingMatrix pi;
  pi.n = dist.p.size();
  pi.indices.resize(m);
  pi.weights.resize(m);
  const double md = static_cast<double>(m);
  for (std::size_t r = 0; r < m; ++r) {
    const std::uint32_t l = table.draw(rng);
    pi.indices[r] = l;
    pi.weights[r] = 1.0 / std::sqrt(md * dist.p[l]);
  }
  return pi;
}

SamplingMatrix full_sampling_matrix(std::size_t n) {
  SamplingMatrix pi;
  pi.n = n;
  pi.indices.resize(n);
  pi.weights.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) pi.indices[i] = static_cast<std::uint32_t>(i);
  return pi;
}

std::vector<std::pair<std::uint32_t, double>> gram_diagonal(const SamplingMatrix& pi) {
  std::map<std::uint32_t, double> acc;
  for (std::size_t r = 0; r < pi.m(); ++r) acc[pi.indices[r]] += pi.weights[r] * pi.weights[r];
  return {acc.begin(), acc.end()};
}

DenseMatrix amm_product(const DenseMatrix& x, const DenseMatrix& y, const SamplingMatrix& pi,
                        FlopCounter* flops) {
  require(x.rows() == y.rows(), ErrorCode::kDimensionMismatch,
          "X and Y must share their row count");
  require(pi.n == x.rows(), ErrorCode::kDimensionMismatch,
          "sampling matrix width differs from the row count");
  DenseMatrix out(x.cols(), y.cols());
  const auto diag = gram_diagonal(pi);
  for (const auto& [index, weight] : diag) {
    require(index < x.rows(), ErrorCode::kInvalidArgument,
            "sample index " + std::to_string(index) + " out of range");
    auto xi = x.row(index);
    auto yi = y.row(index);
    for (std::size_t a = 0; a < x.cols(); ++a) {
      const double s = weight * xi[a];
      auto orow = out.row(a);
      for (std::size_t b = 0; b < y.cols(); ++b) orow[b] += s * yi[b];
    }
  }
  count_flops(flops, diag.size() * x.cols() * (2 * y.cols() + 1));
  return out;
}

std::size_t sample_count(double c, double epsilon, std::size_t n, double srank_x,
                         double srank_y) {
  require(c > 0.0 && epsilon > 0.0 && n >= 2, ErrorCode::kInvalidArgument,
          "sample_count needs c, epsilon > 0 and n >= 2");
  const double m = c / (epsilon * epsilon) * std::log(static_cast<double>(n)) * (srank_x + srank_y);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(m)));
}

}  // namespace kdeformer::amm
