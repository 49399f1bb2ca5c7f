#pragma once

#include <cstdint>
#include <string_view>

namespace openrpf {

std::uint64_t mix64(std::uint64_t z);
std::uint64_t hash_label(std::string_view label);

// Counter-based stream: output k is a pure function of (key, k), so streams
// labelled by (module, purpose, index) never depend on execution order.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::string_view module, std::string_view purpose,
             std::uint64_t index = 0);

  CounterRng split(std::string_view purpose, std::uint64_t index) const;

  std::uint64_t next_u64();
  double uniform();  // [0, 1) with 53 random bits
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n);

  std::uint64_t key() const { return key_; }

 private:
  explicit CounterRng(std::uint64_t key) : key_(key) {}
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace openrpf
