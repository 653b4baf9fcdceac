#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kdeformer/core/random.hpp"

namespace kdeformer::amm {

/// Vose's alias table: O(n) construction, O(1) draws.
class AliasTable {
 public:
  explicit AliasTable(std::span<const double> weights);

  std::size_t size() const noexcept { return prob_.size(); }
  std::uint32_t draw(Rng& rng) const;

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

}  // namespace kdeformer::amm
