#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kdeformer/core/dense_matrix.hpp"
#include "kdeformer/core/linalg.hpp"

namespace oracle {

Eigen::MatrixXd to_eigen(const kdeformer::DenseMatrix& m);

/// Largest singular value by dense SVD.
double svd_opnorm(const kdeformer::DenseMatrix& m);

/// ||M||_F^2 / lambda_max(M M^T), eigenvalues from a symmetric dense solver
/// on the smaller Gram matrix.
double stable_rank(const kdeformer::DenseMatrix& m);

/// Softmax attention by a plain double loop in long double, no max shift.
kdeformer::DenseMatrix naive_attention(const kdeformer::AttentionInputs& inp);

/// Row sums of exp(QK^T / sqrt d), long double.
std::vector<long double> naive_row_sums(const kdeformer::AttentionInputs& inp);

/// sum_i v_i exp(<x_i, y_j>) per row of y, long double.
std::vector<long double> naive_wexp(const kdeformer::DenseMatrix& x, const kdeformer::DenseMatrix& y,
                                    std::span<const double> v);

/// (1/n) sum_i exp(-|q - x_i|^2 / 2), long double.
long double naive_gaussian_kde(const kdeformer::DenseMatrix& x, std::span<const double> q);

kdeformer::DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                     double scale = 1.0);

}  // namespace oracle
