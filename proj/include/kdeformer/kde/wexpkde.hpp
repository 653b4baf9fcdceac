#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kdeformer/core/dense_matrix.hpp"
#include "kdeformer/core/flops.hpp"
#include "kdeformer/kde/gaussian_kde.hpp"

namespace kdeformer::kde {

/// sum_i v_i exp(<x_i, y_j>) for every row y_j, by log-sum-exp. v must be
/// non-negative with at least one positive entry.
std::vector<double> exact_wexp_kde(const DenseMatrix& x, const DenseMatrix& y,
                                   std::span<const double> v);

/// Same sum in log space with log-weights (-inf marks a zero weight).
std::vector<double> exact_log_wexp_kde(const DenseMatrix& x, const DenseMatrix& y,
                                       std::span<const double> log_v,
                                       FlopCounter* flops = nullptr);

/// Dataset augmented with one extra coordinate w_i chosen so that every
/// point carries equal Gaussian mass: v_i e^{|x_i|^2/2} e^{-w_i^2/2} = N/n
/// up to the 1/n factor. N is kept as log N.
struct AugmentedDataset {
  DenseMatrix x_prime;  // n x (d+1), last column is w
  double log_big_n = 0.0;
  std::vector<double> w;
};

/// Throws kInvalidArgument when any weight is <= 0.
AugmentedDataset build_augmentation(const DenseMatrix& x, std::span<const double> v);
AugmentedDataset build_augmentation_log(const DenseMatrix& x, std::span<const double> log_v);

struct WexpOptions {
  std::uint64_t seed = 1;
  KdeParams kde;              // epsilon/mu_floor/seed are overwritten per round
  std::size_t max_rounds = 0; // 0 selects ceil(log2 n) + 1
  // Build one structure and answer every query once, replaying the rounds
  // from each query's recorded confidence bounds. Same accept/reject rule as
  // rebuilding per round, without repeating the per-round query work.
  bool reuse_structure = false;
};

struct WexpResult {
  std::vector<double> alpha;
  std::vector<double> log_alpha;
  double floor_used = 0.0;  // value of the density floor when the loop exited
  std::size_t exact_fallback_count = 0;
  std::size_t rounds = 0;
  std::vector<std::size_t> active_per_round;  // |S| at the start of each round
  std::size_t peak_bytes = 0;  // augmented dataset plus the largest round structure
};

/// Weighted exponential KDE: alpha_j within (1 +- epsilon) of
/// sum_i v_i exp(<x_i, y_j>). Reduces to Gaussian KDE on the augmented
/// dataset, halving the density floor from 1/n each round while
/// floor^-tau <= epsilon^2 |S|; queries still below the floor afterwards are
/// evaluated exactly. Zero weights are dropped before augmenting.
WexpResult wexpkde(const DenseMatrix& x, const DenseMatrix& y, std::span<const double> v,
                   double epsilon, double tau, const WexpOptions& opts = {},
                   FlopCounter* flops = nullptr);

/// As wexpkde, with weights given as logarithms.
WexpResult wexpkde_log_weights(const DenseMatrix& x, const DenseMatrix& y,
                               std::span<const double> log_v, double epsilon, double tau,
                               const WexpOptions& opts = {}, FlopCounter* flops = nullptr);

}  // namespace kdeformer::kde
