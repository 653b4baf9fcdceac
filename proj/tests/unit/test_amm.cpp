#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "kdeformer/amm/alias_table.hpp"
#include "kdeformer/amm/amm.hpp"
#include "kdeformer/bench/synthetic.hpp"
#include "kdeformer/core/error.hpp"
#include "kdeformer/core/random.hpp"
#include "oracles.hpp"

using namespace kdeformer;
using namespace kdeformer::amm;

namespace {

std::vector<double> uniform_reals(std::size_t n, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST_CASE("distribution examples") {
  const auto uni = build_distribution(std::vector<double>(5, 2.0), std::vector<double>(5, 3.0), 0.7);
  for (double p : uni.p) CHECK(p == doctest::Approx(0.2).epsilon(1e-14));

  const std::vector<double> beta{1, 3, 0, 4};
  const auto one_sided = build_distribution(beta, std::vector<double>{5, 5, 5, 5}, 0.0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(one_sided.p[i] == doctest::Approx(beta[i] / 8.0).epsilon(1e-15));

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto b = uniform_reals(40, seed, 0.0, 5.0);
    const auto r = uniform_reals(40, seed + 100, 0.0, 2.0);
    const double gamma = 0.1 * static_cast<double>(seed);
    const auto dist = build_distribution(b, r, gamma);
    double total = 0.0;
    for (std::size_t i = 0; i < 40; ++i) total += b[i] + gamma * r[i];
    for (std::size_t i = 0; i < 40; ++i) {
      CHECK(std::abs(dist.p[i] - (b[i] + gamma * r[i]) / total) <= 1e-12);
      CHECK(dist.p[i] >= 0.0);
    }
    CHECK(std::abs(sum(dist.p) - 1.0) <= 1e-12);
  }
}

TEST_CASE("distribution errors") {
  CHECK_THROWS_AS(build_distribution(std::vector<double>(3, 0.0), std::vector<double>(3, 0.0), 1.0), Error);
  CHECK_THROWS_AS(build_distribution(std::vector<double>{1, -1}, std::vector<double>{1, 1}, 1.0), Error);
  CHECK_THROWS_AS(build_distribution(std::vector<double>{1, 1}, std::vector<double>{1}, 1.0), Error);
}

TEST_CASE("oversampling bound with approximate column norms") {
  // beta within (1 +- 1/3) of the exact norms keeps p_i above a quarter of the
  // exact-norm probability.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const DenseMatrix x = oracle::random_matrix(30, 5, seed);
    const DenseMatrix y = oracle::random_matrix(30, 3, seed + 40);
    const auto xn = row_squared_norms(x);
    const auto yn = row_squared_norms(y);
    const double ox = oracle::svd_opnorm(x), oy = oracle::svd_opnorm(y);
    const double gamma = ox * ox / (oy * oy);
    const auto noise = uniform_reals(30, seed + 80, -1.0 / 3.0, 1.0 / 3.0);
    std::vector<double> beta(30);
    for (std::size_t i = 0; i < 30; ++i) beta[i] = xn[i] * (1 + noise[i]);
    const auto dist = build_distribution(beta, yn, gamma);
    const double denom = sum(xn) + gamma * sum(yn);
    for (std::size_t i = 0; i < 30; ++i) CHECK(dist.p[i] >= 0.25 * (xn[i] + gamma * yn[i]) / denom);
  }
}

TEST_CASE("alias table frequencies") {
  const std::vector<double> w{1, 2, 3, 4};
  const AliasTable table(w);
  Rng rng(3);
  std::vector<double> counts(4, 0.0);
  const int draws = 200000;
  for (int t = 0; t < draws; ++t) counts[table.draw(rng)] += 1;
  for (std::size_t i = 0; i < 4; ++i) {
    const double p = w[i] / 10.0;
    const double sigma = std::sqrt(draws * p * (1 - p));
    CHECK(std::abs(counts[i] - draws * p) <= 3 * sigma);
  }
}

TEST_CASE("point mass draws") {
  std::vector<double> beta(6, 0.0);
  beta[3] = 1.0;
  const auto dist = build_distribution(beta, std::vector<double>(6, 0.0), 0.0);
  const auto pi = draw_sampling_matrix(dist, 9, 11);
  CHECK(pi.m() == 9);
  for (std::size_t r = 0; r < 9; ++r) {
    CHECK(pi.indices[r] == 3);
    CHECK(pi.weights[r] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("uniform draws over four indices") {
  const auto dist = build_distribution(std::vector<double>(4, 1.0), std::vector<double>(4, 0.0), 0.0);
  const std::size_t m = 100000;
  const auto pi = draw_sampling_matrix(dist, m, 5);
  std::vector<double> counts(4, 0.0);
  for (auto i : pi.indices) counts[i] += 1;
  const double sigma = std::sqrt(m * 0.25 * 0.75);
  for (double c : counts) CHECK(std::abs(c - m / 4.0) <= 3 * sigma);
}

TEST_CASE("weights follow the 1/sqrt(m p) rule and draws are deterministic") {
  const auto dist = build_distribution(uniform_reals(50, 1, 0.1, 2.0), uniform_reals(50, 2, 0.1, 2.0), 0.5);
  const auto a = draw_sampling_matrix(dist, 77, 123);
  const auto b = draw_sampling_matrix(dist, 77, 123);
  CHECK(a.indices == b.indices);
  CHECK(a.weights == b.weights);
  for (std::size_t r = 0; r < a.m(); ++r) {
    CHECK(std::abs(a.weights[r] - 1.0 / std::sqrt(77 * dist.p[a.indices[r]])) <= 1e-12);
  }
  CHECK_THROWS_AS(draw_sampling_matrix(dist, 0, 1), Error);
}

TEST_CASE("Pi^T Pi is the identity in expectation") {
  const std::size_t n = 6;
  const std::vector<double> beta{1, 2, 3, 1, 5, 0.5};
  const auto dist = build_distribution(beta, std::vector<double>(n, 0.0), 0.0);
  const std::size_t m = 4;
  const int trials = 10000;
  std::vector<double> mean(n, 0.0);
  for (int t = 0; t < trials; ++t) {
    for (const auto& [i, w2] : gram_diagonal(draw_sampling_matrix(dist, m, 1000 + t))) mean[i] += w2;
  }
  for (std::size_t i = 0; i < n; ++i) {
    mean[i] /= trials;
    const double sigma = std::sqrt((1.0 / dist.p[i] - 1.0) / (m * static_cast<double>(trials)));
    CHECK(std::abs(mean[i] - 1.0) <= 3 * sigma);
  }
}

TEST_CASE("full sampling reproduces the exact product") {
  const DenseMatrix x = oracle::random_matrix(12, 4, 1);
  const DenseMatrix y = oracle::random_matrix(12, 3, 2);
  const DenseMatrix exact = matmul(transpose(x), y);
  CHECK(max_abs_difference(amm_product(x, y, full_sampling_matrix(12)), exact) <= 1e-12);

  // m = n uniform with each index once.
  SamplingMatrix once;
  once.n = 12;
  for (std::uint32_t i = 0; i < 12; ++i) {
    once.indices.push_back(i);
    once.weights.push_back(1.0 / std::sqrt(12 * (1.0 / 12)));
  }
  CHECK(max_abs_difference(amm_product(x, y, once), exact) <= 1e-12);
}

TEST_CASE("single-term estimator") {
  const DenseMatrix x = oracle::random_matrix(5, 2, 3);
  const DenseMatrix y = oracle::random_matrix(5, 3, 4);
  std::vector<double> beta(5, 0.0);
  beta[2] = 1.0;
  const auto pi = draw_sampling_matrix(build_distribution(beta, std::vector<double>(5, 0.0), 0.0), 1, 9);
  const DenseMatrix got = amm_product(x, y, pi);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 3; ++b) CHECK(got(a, b) == doctest::Approx(x(2, a) * y(2, b)));
  }
}

TEST_CASE("amm product errors and cost") {
  const DenseMatrix x = oracle::random_matrix(8, 3, 1);
  const DenseMatrix y = oracle::random_matrix(8, 2, 2);
  SamplingMatrix bad;
  bad.n = 8;
  bad.indices = {9};
  bad.weights = {1.0};
  CHECK_THROWS_AS(amm_product(x, y, bad), Error);
  CHECK_THROWS_AS(amm_product(x, oracle::random_matrix(7, 2, 3), full_sampling_matrix(8)), Error);

  // Cost linear in m, independent of n.
  const auto dist = build_distribution(std::vector<double>(8, 1.0), std::vector<double>(8, 0.0), 0.0);
  FlopCounter f10, f20;
  amm_product(x, y, draw_sampling_matrix(dist, 10, 1), &f10);
  amm_product(x, y, draw_sampling_matrix(dist, 20, 1), &f20);
  CHECK(f20.total() <= 2 * f10.total());
  CHECK(f10.total() <= 10 * (2 * 3 * 2 + 3 + 2));
}

TEST_CASE("unbiased product") {
  const DenseMatrix x = oracle::random_matrix(10, 2, 5);
  const DenseMatrix y = oracle::random_matrix(10, 2, 6);
  const DenseMatrix exact = matmul(transpose(x), y);
  const auto dist = build_distribution(row_squared_norms(x), row_squared_norms(y), 1.0);
  const int trials = 4000;
  const std::size_t m = 3;
  DenseMatrix mean(2, 2);
  DenseMatrix sq(2, 2);
  for (int t = 0; t < trials; ++t) {
    const DenseMatrix est = amm_product(x, y, draw_sampling_matrix(dist, m, 50 + t));
    for (std::size_t e = 0; e < 4; ++e) {
      mean.data()[e] += est.data()[e];
      sq.data()[e] += est.data()[e] * est.data()[e];
    }
  }
  for (std::size_t e = 0; e < 4; ++e) {
    const double mu = mean.data()[e] / trials;
    const double var = sq.data()[e] / trials - mu * mu;
    CHECK(std::abs(mu - exact.data()[e]) <= 3 * std::sqrt(var / trials));
  }
}

TEST_CASE("sample count formula") {
  CHECK(sample_count(1.0, 0.5, 100, 2.0, 3.0) ==
        static_cast<std::size_t>(std::ceil(4.0 * std::log(100.0) * 5.0)));
  CHECK(sample_count(1e-9, 0.5, 100, 1.0, 1.0) == 1);
  CHECK_THROWS_AS(sample_count(0.0, 0.5, 100, 1.0, 1.0), Error);
}

TEST_CASE("softmax path error is monotone in m and concentrates") {
  const auto inp = bench::make_attention_instance(bench::DatasetKind::kGaussianBlobs, 256, 16, 16, 7, false);
  const DenseMatrix x = transpose(softmax_matrix(inp));
  const DenseMatrix& y = inp.v;
  const DenseMatrix exact = matmul(transpose(x), y);
  const double scale = oracle::svd_opnorm(x) * oracle::svd_opnorm(y);
  const double gamma = oracle::svd_opnorm(x) * oracle::svd_opnorm(x) / (oracle::svd_opnorm(y) * oracle::svd_opnorm(y));
  const auto dist = build_distribution(row_squared_norms(x), row_squared_norms(y), gamma);

  double last = std::numeric_limits<double>::infinity();
  for (std::size_t m : {16, 32, 64, 128, 256}) {
    std::vector<double> errs;
    for (int s = 0; s < 30; ++s) {
      const DenseMatrix approx = amm_product(x, y, draw_sampling_matrix(dist, m, 700 + s));
      errs.push_back(operator_norm(subtract(approx, exact)).value / scale);
    }
    std::sort(errs.begin(), errs.end());
    CHECK(errs[15] <= last);
    last = errs[15];
  }

  // m from sample_count at eps = 0.25 with the acceptance calibration.
  const auto sx = spectral_stats(x);
  const auto sy = spectral_stats(y);
  const std::size_t m = sample_count(0.25, 0.25, 256, sx.stable_rank, sy.stable_rank);
  int fails = 0;
  for (int s = 0; s < 100; ++s) {
    const DenseMatrix approx = amm_product(x, y, draw_sampling_matrix(dist, m, 5000 + s));
    fails += operator_norm(subtract(approx, exact)).value > 0.25 * scale;
  }
  CHECK(fails <= 5);
}
