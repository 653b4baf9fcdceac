#include "kdeformer/bench/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "kdeformer/core/error.hpp"
#include "kdeformer/core/random.hpp"

namespace kdeformer::bench {

namespace {

void check_shape(std::size_t n, std::size_t d) {
  require(n >= 1 && d >= 1, ErrorCode::kInvalidArgument, "synthetic data needs n, d >= 1");
}

void rescale(DenseMatrix& m, double factor) {
  for (double& x : m.data()) x *= factor;
}

double max_pairwise(const DenseMatrix& m) { return max_squared_distance(m, m); }

// Anisotropic per-coordinate scale, loosely mimicking the decaying spectrum
// of trained word embeddings.
std::vector<double> decaying_spectrum(std::size_t d) {
  std::vector<double> s(d);
  for (std::size_t k = 0; k < d; ++k) s[k] = 1.0 / std::sqrt(1.0 + static_cast<double>(k) / 4.0);
  return s;
}

}  // namespace

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "blobs" || name == "gaussian-blobs") return DatasetKind::kGaussianBlobs;
  if (name == "bounded-diameter") return DatasetKind::kBoundedDiameter;
  if (name == "glove-like") return DatasetKind::kGloveLike;
  fail(ErrorCode::kConfig, "unknown dataset kind '" + std::string(name) + "'");
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kGaussianBlobs:
      return "blobs";
    case DatasetKind::kBoundedDiameter:
      return "bounded-diameter";
    case DatasetKind::kGloveLike:
      return "glove-like";
  }
  return "unknown";
}

ValueSource parse_value_source(std::string_view name) {
  if (name == "auto") return ValueSource::kAuto;
  if (name == "gaussian") return ValueSource::kGaussian;
  if (name == "pool") return ValueSource::kPool;
  fail(ErrorCode::kConfig, "unknown value source '" + std::string(name) + "'");
}

std::string to_string(ValueSource source) {
  switch (source) {
    case ValueSource::kAuto:
      return "auto";
    case ValueSource::kGaussian:
      return "gaussian";
    case ValueSource::kPool:
      return "pool";
  }
  return "unknown";
}

double max_squared_distance(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.cols(), ErrorCode::kDimensionMismatch, "diameter of mismatched sets");
  double best = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      best = std::max(best, squared_distance(a.row(i), b.row(j)));
    }
  }
  return best;
}

DenseMatrix gaussian_blobs(std::size_t n, std::size_t d, std::uint64_t seed,
                           const SyntheticParams& params) {
  check_shape(n, d);
  require(params.clusters >= 1, ErrorCode::kInvalidArgument, "blobs need at least one cluster");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  DenseMatrix centers(params.clusters, d);
  for (double& x : centers.data()) x = params.center_std * gauss(rng);
  std::uniform_int_distribution<std::size_t> pick(0, params.clusters - 1);
  DenseMatrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto c = centers.row(pick(rng));
    auto row = out.row(i);
    for (std::size_t t = 0; t < d; ++t) row[t] = c[t] + params.cluster_std * gauss(rng);
  }
  return out;
}

DenseMatrix bounded_diameter(std::size_t n, std::size_t d, std::uint64_t seed,
                             const SyntheticParams& params) {
  check_shape(n, d);
  require(params.gamma > 0.0, ErrorCode::kInvalidArgument, "diameter gamma must be positive");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  DenseMatrix out(n, d);
  for (double& x : out.data()) x = gauss(rng);
  const double target = params.gamma * std::sqrt(static_cast<double>(d)) *
                        std::log(static_cast<double>(std::max<std::size_t>(n, 2)));
  const double measured = max_pairwise(out);
  if (measured > 0.0) rescale(out, std::sqrt(target / measured));
  return out;
}

DenseMatrix glove_like(std::size_t n, std::size_t d, std::uint64_t seed,
                       const SyntheticParams& params) {
  check_shape(n, d);
  require(params.glove_clusters >= 1, ErrorCode::kInvalidArgument,
          "glove-like data needs at least one cluster");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto spectrum = decaying_spectrum(d);
  const std::size_t c = params.glove_clusters;

  std::vector<double> zipf(c);
  for (std::size_t r = 0; r < c; ++r) {
    zipf[r] = std::pow(static_cast<double>(r + 1), -params.zipf_exponent);
  }
  std::discrete_distribution<std::size_t> pick(zipf.begin(), zipf.end());

  std::vector<double> common(d);
  for (std::size_t t = 0; t < d; ++t) common[t] = 0.5 * spectrum[t] * gauss(rng);
  DenseMatrix centers(c, d);
  for (std::size_t r = 0; r < c; ++r) {
    auto row = centers.row(r);
    for (std::size_t t = 0; t < d; ++t) row[t] = common[t] + spectrum[t] * gauss(rng);
  }
  std::lognormal_distribution<double> scale(0.0, 0.25);
  DenseMatrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto ctr = centers.row(pick(rng));
    auto row = out.row(i);
    const double s = scale(rng);
    for (std::size_t t = 0; t < d; ++t) row[t] = s * (ctr[t] + 0.5 * spectrum[t] * gauss(rng));
  }
  // Mean squared norm 2 sqrt(d): self-logits of order 2 after the 1/sqrt(d) scaling.
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_sq += squared_norm(out.row(i));
  mean_sq /= static_cast<double>(n);
  if (mean_sq > 0.0) rescale(out, std::sqrt(2.0 * std::sqrt(static_cast<double>(d)) / mean_sq));
  return out;
}

DenseMatrix generate_synthetic(DatasetKind kind, std::size_t n, std::size_t d, std::uint64_t seed,
                               const SyntheticParams& params) {
  switch (kind) {
    case DatasetKind::kGaussianBlobs:
      return gaussian_blobs(n, d, seed, params);
    case DatasetKind::kBoundedDiameter:
      return bounded_diameter(n, d, seed, params);
    case DatasetKind::kGloveLike:
      return glove_like(n, d, seed, params);
  }
  fail(ErrorCode::kInvalidArgument, "unknown dataset kind");
}

AttentionInputs make_attention_instance(DatasetKind kind, std::size_t n, std::size_t d,
                                        std::size_t d_v, std::uint64_t seed, bool tied_kq,
                                        const SyntheticParams& params, ValueSource values) {
  check_shape(n, d);
  require(d_v >= 1, ErrorCode::kInvalidArgument, "value dimension must be positive");
  const bool values_from_pool = values == ValueSource::kPool ||
                                (values == ValueSource::kAuto && kind == DatasetKind::kGloveLike);
  require(!values_from_pool || d_v <= d, ErrorCode::kInvalidArgument,
          "values taken from the pool need d_v <= d");
  const std::size_t pool_rows = (tied_kq ? 1 : 2) * n + (values_from_pool ? n : 0);
  DenseMatrix pool = generate_synthetic(kind, pool_rows, d, derive_seed(seed, 11), params);

  // Random split of the pool so both sides see every cluster.
  std::vector<std::size_t> perm(pool_rows);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, 12));
  std::shuffle(perm.begin(), perm.end(), rng);
  DenseMatrix q(n, d);
  DenseMatrix k(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto src = pool.row(perm[i]);
    std::copy(src.begin(), src.end(), q.row(i).begin());
    auto ksrc = pool.row(tied_kq ? perm[i] : perm[n + i]);
    std::copy(ksrc.begin(), ksrc.end(), k.row(i).begin());
  }
  if (kind == DatasetKind::kBoundedDiameter) {
    const double target = params.gamma * std::sqrt(static_cast<double>(d)) *
                          std::log(static_cast<double>(std::max<std::size_t>(n, 2)));
    const double measured = max_squared_distance(k, q);
    if (measured > 0.0) {
      const double f = std::sqrt(target / measured);
      rescale(q, f);
      rescale(k, f);
    }
  }

  DenseMatrix v(n, d_v);
  if (values_from_pool) {
    const std::size_t base = tied_kq ? n : 2 * n;
    for (std::size_t i = 0; i < n; ++i) {
      auto src = pool.row(perm[base + i]);
      std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(d_v), v.row(i).begin());
    }
  } else {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Rng vrng(derive_seed(seed, 13));
    for (double& x : v.data()) x = gauss(vrng);
  }
  return AttentionInputs(std::move(q), std::move(k), std::move(v));
}

}  // namespace kdeformer::bench
