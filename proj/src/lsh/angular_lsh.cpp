#include "kdeformer/lsh/angular_lsh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "kdeformer/core/error.hpp"
#include "kdeformer/core/random.hpp"

namespace kdeformer::lsh {

namespace {

DenseMatrix gaussian_normals(std::size_t rank, std::size_t dim, std::uint64_t seed) {
  require(rank >= 1 && rank <= kMaxRank, ErrorCode::kInvalidArgument,
          "LSH rank must lie in [1, 30]");
  require(dim >= 1, ErrorCode::kInvalidArgument, "LSH dimension must be positive");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  DenseMatrix w(rank, dim);
  for (double& x : w.data()) x = gauss(rng);
  return w;
}

}  // namespace

AngularLshFunction::AngularLshFunction(std::size_t rank, std::size_t dim, std::uint64_t seed)
    : normals_(gaussian_normals(rank, dim, seed)) {}

AngularLshFunction::AngularLshFunction(DenseMatrix normals) : normals_(std::move(normals)) {
  require(rank() >= 1 && rank() <= kMaxRank, ErrorCode::kInvalidArgument,
          "LSH rank must lie in [1, 30]");
}

Label AngularLshFunction::hash(std::span<const double> x) const {
  require(x.size() == dim(), ErrorCode::kDimensionMismatch,
          "point dim " + std::to_string(x.size()) + " != LSH dim " + std::to_string(dim()));
  Label label = 0;
  for (std::size_t k = 0; k < rank(); ++k) {
    if (dot(normals_.row(k), x) >= 0.0) label |= Label{1} << k;
  }
  return label;
}

std::vector<Label> AngularLshFunction::hash_points(const DenseMatrix& points,
                                                   FlopCounter* flops) const {
  require(points.cols() == dim(), ErrorCode::kDimensionMismatch,
          "points have dim " + std::to_string(points.cols()) + ", LSH expects " +
              std::to_string(dim()));
  std::vector<Label> labels(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) labels[i] = hash(points.row(i));
  count_flops(flops, static_cast<std::uint64_t>(points.rows()) * rank() * 2 * dim());
  return labels;
}

std::vector<Label> gray_order(std::size_t r) {
  require(r >= 1 && r <= kMaxRank, ErrorCode::kInvalidArgument,
          "gray_order rank must lie in [1, 30]");
  std::vector<Label> order{0, 1};
  order.reserve(std::size_t{1} << r);
  for (std::size_t bits = 2; bits <= r; ++bits) {
    const Label top = Label{1} << (bits - 1);
    const std::size_t half = order.size();
    for (std::size_t j = 0; j < half; ++j) order.push_back(order[half - 1 - j] | top);
  }
  return order;
}

std::uint32_t gray_rank(Label label) noexcept {
  std::uint32_t rank = label;
  for (std::uint32_t shift = 1; shift < 32; shift <<= 1) rank ^= rank >> shift;
  return rank;
}

int hamming_distance(Label a, Label b) noexcept { return std::popcount(a ^ b); }

std::span<const std::uint32_t> BucketAssignment::block(std::size_t b) const noexcept {
  const std::size_t begin = std::min(n, b * block_size);
  const std::size_t end = std::min(n, (b + 1) * block_size);
  return {permutation.data() + begin, end - begin};
}

BucketAssignment equalize_single(std::span<const Label> labels, std::size_t block_size,
                                 std::size_t num_blocks) {
  require(block_size >= 1, ErrorCode::kInvalidArgument, "block size must be positive");
  require(num_blocks * block_size >= labels.size(), ErrorCode::kInvalidArgument,
          "blocks do not cover every point");
  BucketAssignment ba;
  ba.raw_labels.assign(labels.begin(), labels.end());
  ba.n = labels.size();
  ba.block_size = block_size;
  ba.num_blocks = num_blocks;
  ba.permutation.resize(ba.n);
  for (std::size_t i = 0; i < ba.n; ++i) ba.permutation[i] = static_cast<std::uint32_t>(i);
  std::stable_sort(ba.permutation.begin(), ba.permutation.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return gray_rank(labels[a]) < gray_rank(labels[b]);
                   });
  ba.position.resize(ba.n);
  for (std::size_t p = 0; p < ba.n; ++p) ba.position[ba.permutation[p]] = static_cast<std::uint32_t>(p);
  return ba;
}

std::pair<BucketAssignment, BucketAssignment> equalize_buckets(std::span<const Label> labels_q,
                                                               std::span<const Label> labels_k,
                                                               std::size_t block_size) {
  require(block_size >= 1, ErrorCode::kInvalidArgument, "block size must be positive");
  const std::size_t n = std::max(labels_q.size(), labels_k.size());
  const std::size_t blocks = std::max<std::size_t>(1, (n + block_size - 1) / block_size);
  return {equalize_single(labels_q, block_size, blocks),
          equalize_single(labels_k, block_size, blocks)};
}

SparseAttention sparse_attention(const AttentionInputs& inp, const BucketAssignment& ba_q,
                                 const BucketAssignment& ba_k, std::span<const double> log_scale,
                                 FlopCounter* flops) {
  inp.validate();
  require(ba_q.num_blocks == ba_k.num_blocks && ba_q.block_size == ba_k.block_size,
          ErrorCode::kDimensionMismatch, "query and key block layouts are misaligned");
  require(ba_q.n == inp.num_queries() && ba_k.n == inp.num_keys(), ErrorCode::kDimensionMismatch,
          "bucket assignments do not match the attention inputs");
  require(log_scale.size() == inp.num_queries(), ErrorCode::kDimensionMismatch,
          "row scaling length differs from the query count");

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(inp.dim()));
  SparseAttention sp;
  sp.n_q = inp.num_queries();
  sp.n_k = inp.num_keys();
  sp.blocks.resize(ba_q.num_blocks);
  sp.query_block.resize(sp.n_q);
  sp.key_block.resize(sp.n_k);
  sp.log_row_sums.assign(sp.n_q, -std::numeric_limits<double>::infinity());
  sp.column_sq_mass.assign(sp.n_k, 0.0);

  for (std::size_t b = 0; b < ba_q.num_blocks; ++b) {
    auto& blk = sp.blocks[b];
    auto qs = ba_q.block(b);
    auto ks = ba_k.block(b);
    blk.queries.assign(qs.begin(), qs.end());
    blk.keys.assign(ks.begin(), ks.end());
    for (auto i : qs) sp.query_block[i] = static_cast<std::uint32_t>(b);
    for (auto j : ks) sp.key_block[j] = static_cast<std::uint32_t>(b);
    blk.logits.resize(qs.size() * ks.size());
    for (std::size_t a = 0; a < qs.size(); ++a) {
      auto qi = inp.q.row(qs[a]);
      std::span<double> row(blk.logits.data() + a * ks.size(), ks.size());
      for (std::size_t c = 0; c < ks.size(); ++c) row[c] = dot(qi, inp.k.row(ks[c])) * inv_sqrt_d;
      if (!ks.empty()) sp.log_row_sums[qs[a]] = log_sum_exp(row);
      for (std::size_t c = 0; c < ks.size(); ++c) {
        sp.column_sq_mass[ks[c]] += std::exp(2.0 * (row[c] - log_scale[qs[a]]));
      }
    }
    sp.nnz += qs.size() * ks.size();
  }
  // logit (2d + 1), row log-sum-exp (~3), squared column mass (4)
  count_flops(flops, sp.nnz * (2 * inp.dim() + 8));
  return sp;
}

DenseMatrix SparseAttention::to_dense() const {
  DenseMatrix a(n_q, n_k);
  for (const auto& blk : blocks) {
    for (std::size_t r = 0; r < blk.queries.size(); ++r) {
      for (std::size_t c = 0; c < blk.keys.size(); ++c) {
        a(blk.queries[r], blk.keys[c]) = std::exp(blk.logits[r * blk.keys.size() + c]);
      }
    }
  }
  return a;
}

DenseMatrix SparseAttention::apply(const DenseMatrix& v, std::span<const double> log_scale,
                                   FlopCounter* flops) const {
  require(v.rows() == n_k, ErrorCode::kDimensionMismatch, "value rows differ from key count");
  require(log_scale.size() == n_q, ErrorCode::kDimensionMismatch,
          "row scaling length differs from the query count");
  DenseMatrix out(n_q, v.cols());
  for (const auto& blk : blocks) {
    for (std::size_t r = 0; r < blk.queries.size(); ++r) {
      auto orow = out.row(blk.queries[r]);
      const double shift = log_scale[blk.queries[r]];
      for (std::size_t c = 0; c < blk.keys.size(); ++c) {
        const double a = std::exp(blk.logits[r * blk.keys.size() + c] - shift);
        auto vrow = v.row(blk.keys[c]);
        for (std::size_t t = 0; t < v.cols(); ++t) orow[t] += a * vrow[t];
      }
    }
  }
  count_flops(flops, nnz * (2 * v.cols() + 2));
  return out;
}

}  // namespace kdeformer::lsh
