#include "kdeformer/kde/wexpkde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "kdeformer/core/error.hpp"
#include "kdeformer/core/random.hpp"

namespace kdeformer::kde {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> to_log_weights(std::span<const double> v) {
  std::vector<double> log_v(v.size());
  bool any_positive = false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    require(std::isfinite(v[i]) && v[i] >= 0.0, ErrorCode::kInvalidArgument,
            "weight " + std::to_string(i) + " is negative or non-finite");
    log_v[i] = v[i] > 0.0 ? std::log(v[i]) : kNegInf;
    any_positive = any_positive || v[i] > 0.0;
  }
  require(any_positive, ErrorCode::kInvalidArgument, "all weights are zero");
  return log_v;
}

void check_shapes(const DenseMatrix& x, const DenseMatrix& y, std::size_t weights) {
  require(x.rows() >= 1 && y.rows() >= 1, ErrorCode::kInvalidArgument,
          "weighted KDE needs non-empty datasets");
  require(x.cols() == y.cols(), ErrorCode::kDimensionMismatch,
          "data dim " + std::to_string(x.cols()) + " != query dim " + std::to_string(y.cols()));
  require(weights == x.rows(), ErrorCode::kDimensionMismatch,
          "weight count " + std::to_string(weights) + " != data rows " +
              std::to_string(x.rows()));
}

}  // namespace

std::vector<double> exact_log_wexp_kde(const DenseMatrix& x, const DenseMatrix& y,
                                       std::span<const double> log_v, FlopCounter* flops) {
  check_shapes(x, y, log_v.size());
  require(std::any_of(log_v.begin(), log_v.end(), [](double l) { return l > kNegInf; }),
          ErrorCode::kInvalidArgument, "all weights are zero");
  std::vector<double> out(y.rows());
  std::vector<double> terms(x.rows());
  for (std::size_t j = 0; j < y.rows(); ++j) {
    for (std::size_t i = 0; i < x.rows(); ++i) terms[i] = log_v[i] + dot(x.row(i), y.row(j));
    out[j] = log_sum_exp(terms);
  }
  count_flops(flops, static_cast<std::uint64_t>(x.rows()) * y.rows() * (2 * x.cols() + 3));
  return out;
}

std::vector<double> exact_wexp_kde(const DenseMatrix& x, const DenseMatrix& y,
                                   std::span<const double> v) {
  check_shapes(x, y, v.size());
  auto logs = exact_log_wexp_kde(x, y, to_log_weights(v));
  for (double& l : logs) l = std::exp(l);
  return logs;
}

AugmentedDataset build_augmentation_log(const DenseMatrix& x, std::span<const double> log_v) {
  require(log_v.size() == x.rows(), ErrorCode::kDimensionMismatch,
          "weight count differs from data rows");
  require(x.rows() >= 1, ErrorCode::kInvalidArgument, "augmentation of an empty dataset");
  std::vector<double> log_mass(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    require(std::isfinite(log_v[i]), ErrorCode::kInvalidArgument,
            "weight " + std::to_string(i) + " must be strictly positive");
    log_mass[i] = log_v[i] + 0.5 * squared_norm(x.row(i));
  }
  AugmentedDataset aug;
  aug.log_big_n = log_sum_exp(log_mass);
  aug.w.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    aug.w[i] = std::sqrt(std::max(0.0, 2.0 * (aug.log_big_n - log_mass[i])));
  }
  aug.x_prime = hstack_column(x, aug.w);
  return aug;
}

AugmentedDataset build_augmentation(const DenseMatrix& x, std::span<const double> v) {
  require(v.size() == x.rows(), ErrorCode::kDimensionMismatch,
          "weight count differs from data rows");
  std::vector<double> log_v(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    require(std::isfinite(v[i]) && v[i] > 0.0, ErrorCode::kInvalidArgument,
            "weight " + std::to_string(i) + " must be strictly positive");
    log_v[i] = std::log(v[i]);
  }
  return build_augmentation_log(x, log_v);
}

WexpResult wexpkde(const DenseMatrix& x, const DenseMatrix& y, std::span<const double> v,
                   double epsilon, double tau, const WexpOptions& opts, FlopCounter* flops) {
  check_shapes(x, y, v.size());
  return wexpkde_log_weights(x, y, to_log_weights(v), epsilon, tau, opts, flops);
}

WexpResult wexpkde_log_weights(const DenseMatrix& x_all, const DenseMatrix& y,
                               std::span<const double> log_v_all, double epsilon, double tau,
                               const WexpOptions& opts, FlopCounter* flops) {
  check_shapes(x_all, y, log_v_all.size());
  require(epsilon > 0.0 && epsilon < 1.0, ErrorCode::kInvalidArgument,
          "epsilon must lie in (0,1)");
  require(tau > 0.0 && tau <= 1.0, ErrorCode::kInvalidArgument, "tau must lie in (0,1]");

  // Drop zero-weight rows: they contribute nothing and have no finite w_i.
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < log_v_all.size(); ++i) {
    require(!std::isnan(log_v_all[i]) && log_v_all[i] < std::numeric_limits<double>::infinity(),
            ErrorCode::kInvalidArgument, "weight " + std::to_string(i) + " is not finite");
    if (log_v_all[i] > kNegInf) kept.push_back(i);
  }
  require(!kept.empty(), ErrorCode::kInvalidArgument, "all weights are zero");
  DenseMatrix x(kept.size(), x_all.cols());
  std::vector<double> log_v(kept.size());
  for (std::size_t r = 0; r < kept.size(); ++r) {
    auto src = x_all.row(kept[r]);
    std::copy(src.begin(), src.end(), x.row(r).begin());
    log_v[r] = log_v_all[kept[r]];
  }

  const std::size_t n = x.rows();
  const std::size_t nq = y.rows();
  const double nd = static_cast<double>(n);
  AugmentedDataset aug = build_augmentation_log(x, log_v);
  count_flops(flops, n * (2 * x.cols() + 4));
  auto x_prime = std::make_shared<const DenseMatrix>(std::move(aug.x_prime));
  const DenseMatrix y_prime = hstack_column(y, std::vector<double>(nq, 0.0));
  const std::vector<double> y_sq = row_squared_norms(y);

  WexpResult res;
  res.log_alpha.assign(nq, kNegInf);
  std::vector<std::size_t> active(nq);
  for (std::size_t j = 0; j < nq; ++j) active[j] = j;

  const std::size_t max_rounds =
      opts.max_rounds > 0
          ? opts.max_rounds
          : static_cast<std::size_t>(std::ceil(std::log2(std::max(nd, 1.0)))) + 1;
  double mu = 1.0 / nd;
  std::size_t structure_bytes = 0;
  const double eps_sq = epsilon * epsilon;
  // One point leaves no valid floor below 1/n; it goes straight to the exact sum.
  auto keep_going = [&]() {
    return n > 1 && res.rounds < max_rounds && !active.empty() &&
           std::pow(mu, -tau) <= eps_sq * static_cast<double>(active.size());
  };
  auto accept = [&](std::size_t j, double density) {
    res.log_alpha[j] = std::log(nd) + aug.log_big_n + 0.5 * y_sq[j] + std::log(density);
  };

  if (opts.reuse_structure) {
    KdeParams params = opts.kde;
    params.epsilon = epsilon;
    params.mu_floor = std::ldexp(1.0 / nd, -static_cast<int>(max_rounds));
    params.seed = derive_seed(opts.seed, 0);
    std::vector<QueryStats> stats;
    if (keep_going()) {
      const KdeDataStructure ds = preprocess_kde(x_prime, params, flops);
      structure_bytes = ds.memory_bytes();
      stats.reserve(nq);
      for (std::size_t j = 0; j < nq; ++j) stats.push_back(ds.query_with_stats(y_prime.row(j), flops));
    }
    while (keep_going()) {
      res.active_per_round.push_back(active.size());
      std::vector<std::size_t> still_below;
      for (std::size_t j : active) {
        const auto& st = stats[j];
        if (st.min_upper >= mu && st.raw_estimate >= mu) {
          accept(j, st.raw_estimate);
        } else {
          still_below.push_back(j);
        }
      }
      count_flops(flops, (active.size() - still_below.size()) * 4);
      active = std::move(still_below);
      mu *= 0.5;
      ++res.rounds;
    }
  } else {
    while (keep_going()) {
      KdeParams params = opts.kde;
      params.epsilon = epsilon;
      params.mu_floor = mu;
      params.seed = derive_seed(opts.seed, res.rounds);
      const KdeDataStructure ds = preprocess_kde(x_prime, params, flops);
      res.active_per_round.push_back(active.size());
      structure_bytes = std::max(structure_bytes, ds.memory_bytes());

      std::vector<std::size_t> still_below;
      for (std::size_t j : active) {
        const double density = ds.query(y_prime.row(j), flops);
        if (density > 0.0) {
          accept(j, density);
        } else {
          still_below.push_back(j);
        }
      }
      count_flops(flops, (active.size() - still_below.size()) * 4);
      active = std::move(still_below);
      mu *= 0.5;
      ++res.rounds;
    }
  }
  res.floor_used = mu;
  res.peak_bytes = x_prime->data().size() * sizeof(double) + y_prime.data().size() * sizeof(double) +
                   structure_bytes;

  res.exact_fallback_count = active.size();
  if (!active.empty()) {
    DenseMatrix rest(active.size(), y.cols());
    for (std::size_t r = 0; r < active.size(); ++r) {
      auto src = y.row(active[r]);
      std::copy(src.begin(), src.end(), rest.row(r).begin());
    }
    const auto exact = exact_log_wexp_kde(x, rest, log_v, flops);
    for (std::size_t r = 0; r < active.size(); ++r) res.log_alpha[active[r]] = exact[r];
  }

  res.alpha.resize(nq);
  for (std::size_t j = 0; j < nq; ++j) res.alpha[j] = std::exp(res.log_alpha[j]);
  return res;
}

}  // namespace kdeformer::kde
