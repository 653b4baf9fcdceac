#include <doctest.h>

#include <cmath>
#include <limits>

#include "kdeformer/core/dense_matrix.hpp"
#include "kdeformer/core/error.hpp"
#include "kdeformer/core/flops.hpp"
#include "kdeformer/core/linalg.hpp"
#include "kdeformer/bench/synthetic.hpp"
#include "oracles.hpp"

using namespace kdeformer;

namespace {

AttentionInputs random_inputs(std::size_t nq, std::size_t nk, std::size_t d, std::size_t dv,
                              std::uint64_t seed, double scale = 1.0) {
  return AttentionInputs(oracle::random_matrix(nq, d, seed, scale),
                         oracle::random_matrix(nk, d, seed + 1, scale),
                         oracle::random_matrix(nk, dv, seed + 2));
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("dense matrix rejects bad buffers") {
  CHECK(code_of([] { DenseMatrix(2, 2, std::vector<double>{1, 2, 3}); }) ==
        ErrorCode::kDimensionMismatch);
  CHECK(code_of([] {
          DenseMatrix(1, 2, std::vector<double>{1, std::numeric_limits<double>::quiet_NaN()});
        }) == ErrorCode::kNumerical);
  const DenseMatrix m(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(m(1, 2) == 6);
  CHECK(m.size() == 6);
}

TEST_CASE("attention inputs validate shapes") {
  CHECK(code_of([] {
          AttentionInputs(DenseMatrix(2, 3), DenseMatrix(2, 4), DenseMatrix(2, 1)).validate();
        }) == ErrorCode::kDimensionMismatch);
  CHECK(code_of([] {
          AttentionInputs(DenseMatrix(2, 3), DenseMatrix(2, 3), DenseMatrix(3, 1)).validate();
        }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("single key softmax returns the value row") {
  const AttentionInputs inp(DenseMatrix(1, 3, std::vector<double>{0.3, -2, 5}),
                            DenseMatrix(1, 3, std::vector<double>{1, 7, -1}),
                            DenseMatrix(1, 2, std::vector<double>{4.5, -0.25}));
  const DenseMatrix out = exact_attention(inp);
  CHECK(out(0, 0) == 4.5);
  CHECK(out(0, 1) == -0.25);
}

TEST_CASE("zero queries give the column mean of V") {
  const DenseMatrix k = oracle::random_matrix(6, 4, 3);
  const DenseMatrix v = oracle::random_matrix(6, 2, 4);
  const DenseMatrix out = exact_attention(AttentionInputs(DenseMatrix(3, 4), k, v));
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (std::size_t j = 0; j < 6; ++j) mean += v(j, c);
    mean /= 6.0;
    for (std::size_t i = 0; i < 3; ++i) CHECK(out(i, c) == doctest::Approx(mean).epsilon(1e-14));
  }
}

TEST_CASE("exact attention matches the double-loop oracle") {
  const auto inp = random_inputs(4, 4, 2, 3, 11);
  const DenseMatrix out = exact_attention(inp);
  const DenseMatrix ref = oracle::naive_attention(inp);
  CHECK(max_abs_difference(out, ref) <= 1e-12);
}

TEST_CASE("large logits stay finite after stabilization") {
  const auto inp = random_inputs(5, 7, 4, 2, 13, 40.0);
  const DenseMatrix out = exact_attention(inp);
  CHECK(out.all_finite());
  const DenseMatrix s = softmax_matrix(inp);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double sum = 0.0;
    for (double x : s.row(i)) sum += x;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("softmax rows sum to one and the norm sits between 1 and sqrt(max column sum)") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto inp = random_inputs(12 + seed, 9 + 2 * seed, 5, 3, seed * 7, 0.5 + 0.3 * seed);
    const DenseMatrix s = softmax_matrix(inp);
    for (std::size_t i = 0; i < s.rows(); ++i) {
      double sum = 0.0;
      for (double x : s.row(i)) sum += x;
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
    // S 1 = 1 gives the lower bound; ||S||^2 <= ||S||_1 ||S||_inf the upper.
    double max_col = 0.0;
    for (std::size_t j = 0; j < s.cols(); ++j) {
      double c = 0.0;
      for (std::size_t i = 0; i < s.rows(); ++i) c += s(i, j);
      max_col = std::max(max_col, c);
    }
    const double norm = oracle::svd_opnorm(s);
    CHECK(norm >= 1.0 - 1e-9);
    CHECK(norm <= std::sqrt(max_col) + 1e-9);
  }
  // Equality holds when a shared row structure makes 1 a singular vector.
  const DenseMatrix q(4, 3);
  const DenseMatrix s = softmax_matrix(AttentionInputs(q, oracle::random_matrix(4, 3, 8), DenseMatrix(4, 1)));
  CHECK(operator_norm(s).value == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("key shift invariance") {
  // Adding c to every key adds <q_i, c> to the whole of row i, which the
  // row normalization removes.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inp = random_inputs(8, 10, 4, 3, seed * 3);
    DenseMatrix shifted = inp.k;
    const DenseMatrix c = oracle::random_matrix(1, 4, seed + 100);
    for (std::size_t j = 0; j < shifted.rows(); ++j) {
      for (std::size_t t = 0; t < 4; ++t) shifted(j, t) += c(0, t);
    }
    const DenseMatrix a = exact_attention(inp);
    const DenseMatrix b = exact_attention(AttentionInputs(inp.q, shifted, inp.v));
    CHECK(max_abs_difference(a, b) <= 1e-9);
  }
}

TEST_CASE("exact attention FLOP count") {
  FlopCounter fc;
  exact_attention(random_inputs(5, 7, 3, 2, 1), &fc);
  CHECK(fc.total() == 5u * 7u * (2 * 3 + 4 + 2 * 2) + 5u * 2u);
}

TEST_CASE("exact attention FLOPs follow the n^2 (2d + d_v) model") {
  // The counted constant differs from 2 n^2 (2d + d_v); the scaling in n is
  // what must agree.
  const std::size_t d = 16, dv = 16;
  std::vector<double> ratio;
  for (std::size_t n : {256, 512, 1024}) {
    FlopCounter fc;
    exact_attention(random_inputs(n, n, d, dv, n), &fc);
    const double predicted = 2.0 * n * n * (2.0 * d + dv);
    ratio.push_back(static_cast<double>(fc.total()) / predicted);
  }
  for (double r : ratio) CHECK(std::abs(r / ratio.front() - 1.0) <= 0.05);
}

TEST_CASE("operator norm examples") {
  CHECK(operator_norm(DenseMatrix::identity(5)).value == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<double> diag{3.0, 1.0};
  CHECK(operator_norm(DenseMatrix::from_diagonal(diag)).value == doctest::Approx(3.0).epsilon(1e-10));
  const DenseMatrix m = oracle::random_matrix(8, 8, 5);
  const auto est = operator_norm(m);
  CHECK(est.converged);
  CHECK(std::abs(est.value / oracle::svd_opnorm(m) - 1.0) <= 1e-6);
}

TEST_CASE("operator norm of zero and non-convergence") {
  const auto zero = operator_norm(DenseMatrix(3, 4));
  CHECK(zero.value == 0.0);
  CHECK(zero.converged);
  // Two nearly tied singular values defeat a three-step budget.
  const std::vector<double> diag{1.0, 0.999999, 0.5};
  PowerIterationOptions opts;
  opts.max_iters = 3;
  const auto est = operator_norm(DenseMatrix::from_diagonal(diag), opts);
  CHECK_FALSE(est.converged);
  CHECK(est.iterations == 3);
  CHECK(est.value > 0.5);
  opts.tol = -1.0;
  CHECK(code_of([&] { operator_norm(DenseMatrix::identity(2), opts); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("operator norm is deterministic") {
  const DenseMatrix m = oracle::random_matrix(20, 6, 9);
  CHECK(operator_norm(m).value == operator_norm(m).value);
}

TEST_CASE("spectral stats examples") {
  CHECK(spectral_stats(DenseMatrix::identity(7)).stable_rank == doctest::Approx(7.0).epsilon(1e-9));
  const DenseMatrix u = oracle::random_matrix(6, 1, 1);
  const DenseMatrix w = oracle::random_matrix(1, 9, 2);
  const auto st = spectral_stats(matmul(u, w));
  CHECK(std::abs(st.stable_rank - 1.0) <= 1e-6);
  CHECK(st.op_norm == doctest::Approx(st.frob_norm).epsilon(1e-9));
  CHECK(code_of([] { spectral_stats(DenseMatrix(2, 2)); }) == ErrorCode::kNumerical);
}

TEST_CASE("stable rank of a clustered softmax matches the SVD oracle") {
  const auto inp = bench::make_attention_instance(bench::DatasetKind::kGaussianBlobs, 256, 16, 4, 3, false);
  const DenseMatrix s = softmax_matrix(inp);
  PowerIterationOptions opts;
  opts.tol = 1e-12;
  const double ours = spectral_stats(s, opts).stable_rank;
  CHECK(std::abs(ours / oracle::stable_rank(s) - 1.0) <= 0.01);
}

TEST_CASE("stable rank bounds and op <= frob on random matrices") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t r = 2 + seed % 7, c = 3 + seed % 5;
    const DenseMatrix m = oracle::random_matrix(r, c, seed);
    const auto st = spectral_stats(m);
    CHECK(st.op_norm <= st.frob_norm * (1 + 1e-12));
    CHECK(st.stable_rank >= 1.0 - 1e-9);
    CHECK(st.stable_rank <= static_cast<double>(std::min(r, c)) + 1e-9);
  }
}

TEST_CASE("relative operator norm error") {
  const DenseMatrix m = oracle::random_matrix(6, 4, 21);
  CHECK(relative_opnorm_error(m, m) == 0.0);
  CHECK(relative_opnorm_error(m, scaled(m, 2.0)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(code_of([&] { relative_opnorm_error(m, DenseMatrix(6, 3)); }) ==
        ErrorCode::kDimensionMismatch);
  CHECK(code_of([&] { relative_opnorm_error(DenseMatrix(6, 4), m); }) == ErrorCode::kNumerical);

  const DenseMatrix noisy = oracle::random_matrix(512, 16, 22);
  DenseMatrix approx = noisy;
  const DenseMatrix eps = oracle::random_matrix(512, 16, 23, 0.05);
  for (std::size_t t = 0; t < approx.size(); ++t) approx.data()[t] += eps.data()[t];
  const double ref = oracle::svd_opnorm(subtract(noisy, approx)) / oracle::svd_opnorm(noisy);
  CHECK(std::abs(relative_opnorm_error(noisy, approx) / ref - 1.0) <= 1e-6);
}

TEST_CASE("log sum exp and helpers") {
  const std::vector<double> v{1000.0, 1000.0};
  CHECK(log_sum_exp(v) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(std::isinf(log_sum_exp(std::span<const double>{})));
  const auto inp = random_inputs(3, 5, 2, 1, 99);
  const auto ls = log_attention_row_sums(inp);
  const auto ref = oracle::naive_row_sums(inp);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(std::exp(ls[i]) / static_cast<double>(ref[i]) - 1.0) <= 1e-12);
}
