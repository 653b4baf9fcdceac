#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kdeformer {

/// Row-major real matrix. Construction from data checks that the buffer has
/// rows*cols entries and that every entry is finite.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix from_diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }
  double& operator()(std::size_t i, std::size_t j) noexcept {
    return data_[i * cols_ + j];
  }

  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Small dense helpers. None of these are performance critical.
DenseMatrix transpose(const DenseMatrix& m);
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scaled(const DenseMatrix& m, double factor);
DenseMatrix hstack_column(const DenseMatrix& m, std::span<const double> column);

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double squared_norm(std::span<const double> a) noexcept;
double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;
std::vector<double> row_squared_norms(const DenseMatrix& m);
double frobenius_norm(const DenseMatrix& m);
double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b);

/// log(sum(exp(values))) with max subtraction; -inf for an empty span.
double log_sum_exp(std::span<const double> values) noexcept;

}  // namespace kdeformer
