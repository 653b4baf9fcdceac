#pragma once

#include <cstdint>

namespace kdeformer {

// Counting convention used across the library: a multiply-accumulate is two
// flops, a lone add/sub/mul/div is one, and exp/log/sqrt are one each.
class FlopCounter {
 public:
  void add(std::uint64_t n) noexcept { total_ += n; }
  std::uint64_t total() const noexcept { return total_; }
  void reset() noexcept { total_ = 0; }

 private:
  std::uint64_t total_ = 0;
};

inline void count_flops(FlopCounter* counter, std::uint64_t n) noexcept {
  if (counter != nullptr) counter->add(n);
}

}  // namespace kdeformer
