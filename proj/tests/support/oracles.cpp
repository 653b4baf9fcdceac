#include "oracles.hpp"

#include <cmath>
#include <random>

namespace oracle {

using kdeformer::DenseMatrix;

Eigen::MatrixXd to_eigen(const DenseMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m.row(i)[j];
  }
  return out;
}

double svd_opnorm(const DenseMatrix& m) {
  const Eigen::MatrixXd e = to_eigen(m);
  if (e.rows() <= 64 && e.cols() <= 64) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
    return svd.singularValues()(0);
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(e);
  return svd.singularValues()(0);
}

double stable_rank(const DenseMatrix& m) {
  const Eigen::MatrixXd e = to_eigen(m);
  const Eigen::MatrixXd g = e.rows() <= e.cols() ? Eigen::MatrixXd(e * e.transpose())
                                                 : Eigen::MatrixXd(e.transpose() * e);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
  return e.squaredNorm() / es.eigenvalues().maxCoeff();
}

DenseMatrix naive_attention(const kdeformer::AttentionInputs& inp) {
  const std::size_t nq = inp.q.rows(), nk = inp.k.rows(), d = inp.q.cols(), dv = inp.v.cols();
  const long double scale = 1.0L / std::sqrt(static_cast<long double>(d));
  DenseMatrix out(nq, dv);
  for (std::size_t i = 0; i < nq; ++i) {
    std::vector<long double> acc(dv, 0.0L);
    long double total = 0.0L;
    for (std::size_t j = 0; j < nk; ++j) {
      long double dot = 0.0L;
      for (std::size_t t = 0; t < d; ++t) dot += static_cast<long double>(inp.q.row(i)[t]) * inp.k.row(j)[t];
      const long double a = std::exp(dot * scale);
      total += a;
      for (std::size_t t = 0; t < dv; ++t) acc[t] += a * inp.v.row(j)[t];
    }
    for (std::size_t t = 0; t < dv; ++t) out.row(i)[t] = static_cast<double>(acc[t] / total);
  }
  return out;
}

std::vector<long double> naive_row_sums(const kdeformer::AttentionInputs& inp) {
  const std::size_t d = inp.q.cols();
  const long double scale = 1.0L / std::sqrt(static_cast<long double>(d));
  std::vector<long double> out(inp.q.rows(), 0.0L);
  for (std::size_t i = 0; i < inp.q.rows(); ++i) {
    for (std::size_t j = 0; j < inp.k.rows(); ++j) {
      long double dot = 0.0L;
      for (std::size_t t = 0; t < d; ++t) dot += static_cast<long double>(inp.q.row(i)[t]) * inp.k.row(j)[t];
      out[i] += std::exp(dot * scale);
    }
  }
  return out;
}

std::vector<long double> naive_wexp(const DenseMatrix& x, const DenseMatrix& y,
                                    std::span<const double> v) {
  std::vector<long double> out(y.rows(), 0.0L);
  for (std::size_t j = 0; j < y.rows(); ++j) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      long double dot = 0.0L;
      for (std::size_t t = 0; t < x.cols(); ++t) dot += static_cast<long double>(x.row(i)[t]) * y.row(j)[t];
      out[j] += v[i] * std::exp(dot);
    }
  }
  return out;
}

long double naive_gaussian_kde(const DenseMatrix& x, std::span<const double> q) {
  long double sum = 0.0L;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    long double dist = 0.0L;
    for (std::size_t t = 0; t < x.cols(); ++t) {
      const long double diff = static_cast<long double>(q[t]) - x.row(i)[t];
      dist += diff * diff;
    }
    sum += std::exp(-dist / 2.0L);
  }
  return sum / static_cast<long double>(x.rows());
}

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, scale);
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = gauss(rng);
  return m;
}

}  // namespace oracle
