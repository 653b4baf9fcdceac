#include "kdeformer/core/dense_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kdeformer/core/error.hpp"

namespace kdeformer {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  require(std::isfinite(fill), ErrorCode::kInvalidArgument, "non-finite fill value");
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows * cols, ErrorCode::kDimensionMismatch,
          "buffer holds " + std::to_string(data_.size()) + " values, expected " +
              std::to_string(rows * cols));
  for (std::size_t idx = 0; idx < data_.size(); ++idx) {
    if (!std::isfinite(data_[idx])) {
      fail(ErrorCode::kNumerical, "non-finite entry at row " + std::to_string(idx / cols) +
                                      ", col " + std::to_string(idx % cols));
    }
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_diagonal(std::span<const double> diag) {
  DenseMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), ErrorCode::kDimensionMismatch,
          "matmul inner dimensions " + std::to_string(a.cols()) + " vs " +
              std::to_string(b.rows()));
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t l = 0; l < a.cols(); ++l) {
      const double s = a(i, l);
      if (s == 0.0) continue;
      auto brow = b.row(l);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += s * brow[j];
    }
  }
  return c;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kDimensionMismatch,
          "subtract shapes differ");
  DenseMatrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
  return c;
}

DenseMatrix scaled(const DenseMatrix& m, double factor) {
  DenseMatrix c = m;
  for (double& x : c.data()) x *= factor;
  return c;
}

DenseMatrix hstack_column(const DenseMatrix& m, std::span<const double> column) {
  require(column.size() == m.rows(), ErrorCode::kDimensionMismatch,
          "appended column length differs from row count");
  DenseMatrix out(m.rows(), m.cols() + 1);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto src = m.row(i);
    auto dst = out.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    dst[m.cols()] = column[i];
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> a) noexcept { return dot(a, a); }

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

std::vector<double> row_squared_norms(const DenseMatrix& m) {
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = squared_norm(m.row(i));
  return out;
}

double frobenius_norm(const DenseMatrix& m) { return std::sqrt(squared_norm(m.data())); }

double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kDimensionMismatch,
          "max_abs_difference shapes differ");
  double worst = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) worst = std::max(worst, std::abs(ad[i] - bd[i]));
  return worst;
}

double log_sum_exp(std::span<const double> values) noexcept {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double v : values) s += std::exp(v - top);
  return top + std::log(s);
}

}  // namespace kdeformer
