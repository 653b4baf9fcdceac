#include "kdeformer/kde/gaussian_kde.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "kdeformer/core/error.hpp"
#include "kdeformer/core/random.hpp"

namespace kdeformer::kde {

double log_exact_gaussian_kde(const DenseMatrix& x, std::span<const double> q) {
  require(x.rows() >= 1, ErrorCode::kInvalidArgument, "KDE over an empty dataset");
  require(q.size() == x.cols(), ErrorCode::kDimensionMismatch,
          "query dim " + std::to_string(q.size()) + " != dataset dim " +
              std::to_string(x.cols()));
  std::vector<double> exps(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) exps[i] = -0.5 * squared_distance(q, x.row(i));
  return log_sum_exp(exps) - std::log(static_cast<double>(x.rows()));
}

double exact_gaussian_kde(const DenseMatrix& x, std::span<const double> q) {
  return std::exp(log_exact_gaussian_kde(x, q));
}

void KdeParams::validate() const {
  require(epsilon > 0.0 && epsilon < 1.0, ErrorCode::kInvalidArgument,
          "KDE epsilon must lie in (0,1)");
  require(mu_floor > 0.0 && mu_floor < 1.0, ErrorCode::kInvalidArgument,
          "KDE density floor must lie in (0,1)");
  require(repetitions >= 1, ErrorCode::kInvalidArgument, "KDE repetitions must be >= 1");
  require(hash_tables >= 1, ErrorCode::kInvalidArgument, "KDE needs at least one table");
  require(confidence > 0.0, ErrorCode::kInvalidArgument, "KDE confidence must be positive");
  require(pilot_samples >= 2, ErrorCode::kInvalidArgument, "KDE pilot needs >= 2 samples");
  require(uniform_mix > 0.0 && uniform_mix <= 1.0, ErrorCode::kInvalidArgument,
          "KDE uniform mixing weight must lie in (0,1]");
}

double KdeDataStructure::kernel(std::span<const double> q, std::size_t i) const noexcept {
  return std::exp(-0.5 * squared_distance(q, data_->row(i)));
}

KdeDataStructure preprocess_kde(std::shared_ptr<const DenseMatrix> x, const KdeParams& params,
                                FlopCounter* flops) {
  require(x != nullptr && x->rows() >= 1 && x->cols() >= 1, ErrorCode::kInvalidArgument,
          "KDE preprocessing needs a non-empty dataset");
  params.validate();

  KdeDataStructure ds;
  ds.data_ = std::move(x);
  ds.params_ = params;
  const DenseMatrix& data = *ds.data_;
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  const auto root = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t cells = std::min(n, params.cells > 0 ? params.cells : root);
  ds.near_limit_ = params.near_limit > 0 ? params.near_limit : 2 * root;

  std::vector<double> dist(n);
  ds.tables_.resize(params.hash_tables);
  for (std::size_t t = 0; t < params.hash_tables; ++t) {
    Rng rng(derive_seed(params.seed, t));
    auto& table = ds.tables_[t];
    table.centers = DenseMatrix(cells, d);
    table.label.assign(n, 0);

    // D^2 seeding: each new center is a data point drawn proportionally to
    // its squared distance from the closest center so far.
    std::size_t pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    for (std::size_t c = 0; c < cells; ++c) {
      auto src = data.row(pick);
      std::copy(src.begin(), src.end(), table.centers.row(c).begin());
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dd = squared_distance(data.row(i), table.centers.row(c));
        if (c == 0 || dd < dist[i]) {
          dist[i] = dd;
          table.label[i] = static_cast<std::uint32_t>(c);
        }
        total += dist[i];
      }
      count_flops(flops, static_cast<std::uint64_t>(n) * (3 * d + 1));
      if (c + 1 == cells) break;
      if (total <= 0.0) {
        pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        continue;
      }
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        u -= dist[i];
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
    }

    table.offset.assign(cells + 1, 0);
    for (std::uint32_t l : table.label) ++table.offset[l + 1];
    for (std::size_t c = 0; c < cells; ++c) table.offset[c + 1] += table.offset[c];
    table.members.resize(n);
    std::vector<std::uint32_t> cursor(table.offset.begin(), table.offset.end() - 1);
    for (std::size_t i = 0; i < n; ++i) table.members[cursor[table.label[i]]++] = static_cast<std::uint32_t>(i);
  }
  return ds;
}

KdeDataStructure preprocess_kde(const DenseMatrix& x, const KdeParams& params, FlopCounter* flops) {
  return preprocess_kde(std::make_shared<const DenseMatrix>(x), params, flops);
}

std::size_t KdeDataStructure::memory_bytes() const noexcept {
  std::size_t bytes = 0;
  for (const auto& t : tables_) {
    bytes += t.centers.size() * sizeof(double) +
             (t.offset.size() + t.members.size() + t.label.size()) * sizeof(std::uint32_t);
  }
  return bytes;
}

double KdeDataStructure::query(std::span<const double> q, FlopCounter* flops) const {
  return query_with_stats(q, flops).value;
}

QueryStats KdeDataStructure::estimate(const Table& table, std::span<const double> q,
                                      std::uint64_t seed, FlopCounter* flops) const {
  const std::size_t n = size();
  const std::size_t d = dim();
  const std::size_t cells = table.centers.rows();
  const std::uint64_t kernel_cost = 3 * d + 2;
  QueryStats st;

  std::vector<double> log_center(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    log_center[c] = -0.5 * squared_distance(q, table.centers.row(c));
  }
  count_flops(flops, cells * (3 * d + 1));
  std::vector<std::uint32_t> order(cells);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return log_center[a] > log_center[b];
  });
  auto cell_size = [&](std::uint32_t c) { return table.offset[c + 1] - table.offset[c]; };
  auto cell_members = [&](std::uint32_t c) {
    return std::span<const std::uint32_t>(table.members.data() + table.offset[c], cell_size(c));
  };

  // Near arm: the buckets with the largest center kernel, up to the limit.
  std::size_t first_rest = 0;
  double near_sum = 0.0;
  for (; first_rest < cells; ++first_rest) {
    const std::uint32_t c = order[first_rest];
    if (st.near_points + cell_size(c) > near_limit_) break;
    for (std::uint32_t i : cell_members(c)) near_sum += kernel(q, i);
    st.near_points += cell_size(c);
  }
  count_flops(flops, st.near_points * kernel_cost);

  const std::size_t rest = n - st.near_points;
  const std::span<const std::uint32_t> rest_cells(order.data() + first_rest, cells - first_rest);
  const double nd = static_cast<double>(n);
  auto finish = [&](double total) {
    st.raw_estimate = total / nd;
    st.below_floor = st.raw_estimate < params_.mu_floor;
    st.value = st.below_floor ? 0.0 : st.raw_estimate;
    return st;
  };
  auto exact_remainder = [&]() {
    double s = 0.0;
    for (std::uint32_t c : rest_cells) {
      for (std::uint32_t i : cell_members(c)) s += kernel(q, i);
    }
    count_flops(flops, rest * kernel_cost);
    st.exact_remainder = true;
    return s;
  };

  if (rest == 0) return finish(near_sum);
  if (rest <= 2 * params_.pilot_samples) return finish(near_sum + exact_remainder());

  // Proposal over the remaining buckets: a mixture of center-kernel mass and
  // bucket size, so that importance weights stay bounded by 1 / uniform_mix.
  const double top = log_center[rest_cells.front()];
  const double rest_d = static_cast<double>(rest);
  std::vector<double> mass(rest_cells.size());
  double mass_total = 0.0;
  for (std::size_t r = 0; r < rest_cells.size(); ++r) {
    const std::uint32_t c = rest_cells[r];
    mass[r] = static_cast<double>(cell_size(c)) * std::exp(log_center[c] - top);
    mass_total += mass[r];
  }
  const double lambda = params_.uniform_mix;
  std::vector<double> prob(rest_cells.size());
  std::vector<double> cumulative(rest_cells.size());
  double acc = 0.0;
  for (std::size_t r = 0; r < rest_cells.size(); ++r) {
    const double size_share = static_cast<double>(cell_size(rest_cells[r])) / rest_d;
    prob[r] = (1.0 - lambda) * mass[r] / mass_total + lambda * size_share;
    acc += prob[r];
    cumulative[r] = acc;
  }
  count_flops(flops, rest_cells.size() * 6);

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double mean = 0.0, m2 = 0.0;
  std::size_t s = 0;
  std::size_t target = params_.pilot_samples;
  const double z = params_.confidence;
  const double eps = params_.epsilon;
  const double floor_total = params_.mu_floor * nd;

  while (true) {
    for (; s < target; ++s) {
      const double u = unit(rng) * acc;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      const std::size_t r = std::min<std::size_t>(it - cumulative.begin(), rest_cells.size() - 1);
      const std::uint32_t c = rest_cells[r];
      const auto members = cell_members(c);
      const std::size_t pick =
          std::uniform_int_distribution<std::size_t>(0, members.size() - 1)(rng);
      const double contrib =
          kernel(q, members[pick]) * static_cast<double>(members.size()) * acc / prob[r];
      const double delta = contrib - mean;
      mean += delta / static_cast<double>(s + 1);
      m2 += delta * (contrib - mean);
    }
    const double var = m2 / static_cast<double>(s - 1);
    const double half_width = z * std::sqrt(var / static_cast<double>(s));
    const double total = near_sum + mean;
    st.min_upper = std::min(st.min_upper, (total + half_width) / nd);
    if (total + half_width < floor_total) {
      st.samples = s;
      count_flops(flops, s * (kernel_cost + 4));
      return finish(total);
    }
    if (half_width <= eps * total) break;
    const double need = var * (z / (eps * total)) * (z / (eps * total));
    if (need >= 0.5 * rest_d) {
      st.samples = s;
      count_flops(flops, s * (kernel_cost + 4));
      return finish(near_sum + exact_remainder());
    }
    target = std::max(static_cast<std::size_t>(std::ceil(1.05 * need)), s + params_.pilot_samples);
  }
  st.samples = s;
  count_flops(flops, s * (kernel_cost + 4));
  return finish(near_sum + mean);
}

QueryStats KdeDataStructure::query_with_stats(std::span<const double> q,
                                              FlopCounter* flops) const {
  require(q.size() == dim(), ErrorCode::kDimensionMismatch,
          "query dim " + std::to_string(q.size()) + " != dataset dim " + std::to_string(dim()));
  const std::uint64_t base = hash_values(q, params_.seed);
  if (params_.repetitions == 1) return estimate(tables_.front(), q, base, flops);

  std::vector<QueryStats> runs;
  runs.reserve(params_.repetitions);
  for (std::size_t r = 0; r < params_.repetitions; ++r) {
    runs.push_back(estimate(tables_[r % tables_.size()], q, derive_seed(base, r), flops));
  }
  std::sort(runs.begin(), runs.end(), [](const QueryStats& a, const QueryStats& b) {
    return a.raw_estimate < b.raw_estimate;
  });
  QueryStats st = runs[runs.size() / 2];
  st.below_floor = st.raw_estimate < params_.mu_floor;
  st.value = st.below_floor ? 0.0 : st.raw_estimate;
  return st;
}

}  // namespace kdeformer::kde
