#include "kdeformer/core/random.hpp"

#include <bit>

namespace kdeformer {

std::uint64_t hash_values(std::span<const double> values, std::uint64_t seed) noexcept {
  std::uint64_t h = mix_seed(seed ^ values.size());
  for (double v : values) {
    h = mix_seed(h ^ std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

}  // namespace kdeformer
