#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "kdeformer/core/dense_matrix.hpp"
#include "kdeformer/core/flops.hpp"

namespace kdeformer::kde {

/// mu_X(q) = (1/n) sum_i exp(-||q - x_i||^2 / 2), evaluated exactly in log
/// space. This is the reference every estimator test compares against.
double exact_gaussian_kde(const DenseMatrix& x, std::span<const double> q);
double log_exact_gaussian_kde(const DenseMatrix& x, std::span<const double> q);

struct KdeParams {
  double epsilon = 0.25;    // target relative error
  double mu_floor = 0.01;   // density lower bound; estimates below it report 0
  std::size_t repetitions = 1;  // independent estimates combined by their median
  std::size_t hash_tables = 1;  // independent partitions; repetition r uses table r mod L
  std::uint64_t seed = 1;

  // Estimator tuning. `confidence` is the z-multiplier applied to the
  // running standard error in both stopping rules.
  double confidence = 2.5;
  std::size_t pilot_samples = 64;
  std::size_t cells = 0;         // buckets per table; 0 selects ceil(sqrt n)
  std::size_t near_limit = 0;    // points evaluated exactly; 0 selects 2 ceil(sqrt n)
  double uniform_mix = 0.5;      // weight of the uniform arm in the sampling proposal

  void validate() const;
};

struct QueryStats {
  double value = 0.0;          // thresholded estimate (0 means below floor)
  double raw_estimate = 0.0;   // estimate before thresholding
  std::size_t near_points = 0; // points evaluated exactly from the query's nearest buckets
  std::size_t samples = 0;     // importance-sampled draws from the remaining buckets
  bool exact_remainder = false;
  bool below_floor = false;
  // Smallest upper confidence bound (density units) seen at a stopping check.
  // The query would have been reported below any floor above this value.
  double min_upper = std::numeric_limits<double>::infinity();
};

/// Immutable preprocess/query structure for Gaussian kernel density.
///
/// Each table hashes a point to the nearest of a set of centers picked by
/// D^2 seeding, so buckets are Voronoi cells of the data. A query ranks the
/// buckets by the kernel value at their centers, sums the closest ones
/// exactly and estimates the rest by importance sampling: a bucket is drawn
/// with probability mixing its center-kernel mass and its size, then a
/// member uniformly. Sampling stops once the z-scaled standard error falls
/// below epsilon times the estimate, or once the upper confidence bound drops
/// under the floor (reported as 0). If the required draw count would exceed
/// half of the remainder, the remainder is summed exactly instead. The
/// estimator is unbiased for any choice of centers.
class KdeDataStructure {
 public:
  std::size_t size() const noexcept { return data_->rows(); }
  std::size_t dim() const noexcept { return data_->cols(); }
  const KdeParams& params() const noexcept { return params_; }
  std::size_t num_tables() const noexcept { return tables_.size(); }
  std::size_t buckets_in_table(std::size_t t) const noexcept { return tables_[t].centers.rows(); }
  std::size_t near_limit() const noexcept { return near_limit_; }

  /// Point indices of table t grouped by bucket.
  std::span<const std::uint32_t> table_members(std::size_t t) const noexcept {
    return tables_[t].members;
  }
  /// Bucket of each point in table t.
  std::span<const std::uint32_t> table_labels(std::size_t t) const noexcept {
    return tables_[t].label;
  }

  /// Bytes held by the tables (the dataset itself is shared, not owned).
  std::size_t memory_bytes() const noexcept;

  double query(std::span<const double> q, FlopCounter* flops = nullptr) const;
  QueryStats query_with_stats(std::span<const double> q, FlopCounter* flops = nullptr) const;

 private:
  friend KdeDataStructure preprocess_kde(std::shared_ptr<const DenseMatrix> x,
                                         const KdeParams& params, FlopCounter* flops);

  struct Table {
    DenseMatrix centers;                // cells x dim
    std::vector<std::uint32_t> offset;  // cells + 1 prefix offsets into members
    std::vector<std::uint32_t> members;
    std::vector<std::uint32_t> label;
  };

  double kernel(std::span<const double> q, std::size_t i) const noexcept;
  QueryStats estimate(const Table& table, std::span<const double> q, std::uint64_t seed,
                      FlopCounter* flops) const;

  std::shared_ptr<const DenseMatrix> data_;
  KdeParams params_;
  std::vector<Table> tables_;
  std::size_t near_limit_ = 0;
};

KdeDataStructure preprocess_kde(std::shared_ptr<const DenseMatrix> x, const KdeParams& params,
                                FlopCounter* flops = nullptr);
KdeDataStructure preprocess_kde(const DenseMatrix& x, const KdeParams& params,
                                FlopCounter* flops = nullptr);

inline double query_kde(const KdeDataStructure& ds, std::span<const double> q,
                        FlopCounter* flops = nullptr) {
  return ds.query(q, flops);
}

}  // namespace kdeformer::kde
