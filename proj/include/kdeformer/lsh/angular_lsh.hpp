#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "kdeformer/core/dense_matrix.hpp"
#include "kdeformer/core/flops.hpp"
#include "kdeformer/core/linalg.hpp"

namespace kdeformer::lsh {

/// r-bit bucket label; bit k is the sign bit of hyperplane k.
using Label = std::uint32_t;

constexpr std::size_t kMaxRank = 30;

/// Rank-r hyperplane LSH: h(x)_k = 1{<w_k, x> >= 0} with w_k ~ N(0, I_d).
class AngularLshFunction {
 public:
  AngularLshFunction(std::size_t rank, std::size_t dim, std::uint64_t seed);
  explicit AngularLshFunction(DenseMatrix normals);

  std::size_t rank() const noexcept { return normals_.rows(); }
  std::size_t dim() const noexcept { return normals_.cols(); }
  std::size_t num_buckets() const noexcept { return std::size_t{1} << rank(); }
  const DenseMatrix& normals() const noexcept { return normals_; }

  Label hash(std::span<const double> x) const;
  std::vector<Label> hash_points(const DenseMatrix& points, FlopCounter* flops = nullptr) const;

 private:
  DenseMatrix normals_;
};

/// All 2^r labels ordered so that neighbours differ in exactly one bit. Built
/// by reflect-and-append: the first half is the (r-1)-bit order with a 0
/// appended as the most significant bit, the second half is that order
/// reversed with a 1 appended. Requires 1 <= r <= 30.
std::vector<Label> gray_order(std::size_t r);

/// Position of `label` within gray_order(r), for any r covering its bits.
std::uint32_t gray_rank(Label label) noexcept;

int hamming_distance(Label a, Label b) noexcept;

/// Points sorted by the Gray rank of their label (ties by index) and cut
/// into equal chunks. Positions past `n` are padding and hold no point.
struct BucketAssignment {
  std::vector<Label> raw_labels;
  std::vector<std::uint32_t> permutation;  // sorted position -> point index
  std::vector<std::uint32_t> position;     // point index -> sorted position
  std::size_t n = 0;
  std::size_t block_size = 0;
  std::size_t num_blocks = 0;

  std::size_t padded_n() const noexcept { return block_size * num_blocks; }
  std::size_t block_of(std::size_t point) const noexcept { return position[point] / block_size; }
  /// Point indices in block b (padding excluded).
  std::span<const std::uint32_t> block(std::size_t b) const noexcept;
};

BucketAssignment equalize_single(std::span<const Label> labels, std::size_t block_size,
                                 std::size_t num_blocks);

/// Queries and keys are equalized separately with a shared block count of
/// ceil(max(n_q, n_k) / block_size), so block b of queries pairs with block
/// b of keys.
std::pair<BucketAssignment, BucketAssignment> equalize_buckets(std::span<const Label> labels_q,
                                                               std::span<const Label> labels_k,
                                                               std::size_t block_size);

/// Block-diagonal part of the permuted attention matrix, mapped back to the
/// original indices. Entries are stored as logits <q_i, k_j>/sqrt(d).
struct SparseAttention {
  struct Block {
    std::vector<std::uint32_t> queries;
    std::vector<std::uint32_t> keys;
    std::vector<double> logits;  // queries.size() x keys.size(), row-major
  };

  std::size_t n_q = 0;
  std::size_t n_k = 0;
  std::vector<Block> blocks;
  std::vector<std::uint32_t> query_block;  // block id of every query
  std::vector<std::uint32_t> key_block;    // block id of every key
  std::vector<double> log_row_sums;        // log of the row sums of A_spar
  std::vector<double> column_sq_mass;      // sum_i exp(2 (logit_ij - log_scale_i))
  std::size_t nnz = 0;

  bool empty() const noexcept { return blocks.empty(); }
  bool collides(std::size_t query, std::size_t key) const noexcept {
    return !blocks.empty() && query_block[query] == key_block[key];
  }

  /// Dense A_spar with zeros off the blocks. Oracle use only.
  DenseMatrix to_dense() const;

  /// diag(exp(-log_scale)) A_spar V.
  DenseMatrix apply(const DenseMatrix& v, std::span<const double> log_scale,
                    FlopCounter* flops = nullptr) const;
};

/// Throws kDimensionMismatch when the assignments disagree on block count or
/// do not match the input sizes. `log_scale` (length n_q) is the row scaling
/// used for the squared column mass; pass zeros for the unscaled matrix.
SparseAttention sparse_attention(const AttentionInputs& inp, const BucketAssignment& ba_q,
                                 const BucketAssignment& ba_k, std::span<const double> log_scale,
                                 FlopCounter* flops = nullptr);

}  // namespace kdeformer::lsh
