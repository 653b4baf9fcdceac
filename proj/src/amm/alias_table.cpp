#include "kdeformer/amm/alias_table.hpp"

#include <cmath>
#include <numeric>

#include "kdeformer/core/error.hpp"

namespace kdeformer::amm {

AliasTable::AliasTable(std::span<const double> weights)
    : prob_(weights.size(), 0.0), alias_(weights.size(), 0) {
  const std::size_t n = weights.size();
  require(n >= 1, ErrorCode::kInvalidArgument, "alias table over an empty distribution");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  require(std::isfinite(total) && total > 0.0, ErrorCode::kInvalidArgument,
          "alias table needs positive total mass");

  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    require(weights[i] >= 0.0, ErrorCode::kInvalidArgument, "negative sampling weight");
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const std::uint32_t s = small.back();
    small.pop_back();
    const std::uint32_t l = large.back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers are 1 up to rounding.
  for (std::uint32_t l : large) {
    prob_[l] = 1.0;
    alias_[l] = l;
  }
  std::uint32_t heavy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] > weights[heavy]) heavy = static_cast<std::uint32_t>(i);
  }
  for (std::uint32_t s : small) {
    prob_[s] = weights[s] > 0.0 ? 1.0 : 0.0;
    alias_[s] = weights[s] > 0.0 ? s : heavy;
  }
}

std::uint32_t AliasTable::draw(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> column(0, prob_.size() - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const std::size_t c = column(rng);
  return coin(rng) < prob_[c] ? static_cast<std::uint32_t>(c) : alias_[c];
}

}  // namespace kdeformer::amm
