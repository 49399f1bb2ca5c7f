#include "openrpf/random.hpp"

namespace openrpf {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

CounterRng::CounterRng(std::uint64_t seed, std::string_view module, std::string_view purpose,
                       std::uint64_t index)
    : key_(mix64(mix64(mix64(seed) ^ hash_label(module)) ^ hash_label(purpose)) ^ mix64(index)) {}

CounterRng CounterRng::split(std::string_view purpose, std::uint64_t index) const {
  return CounterRng(mix64(mix64(key_ ^ hash_label(purpose)) ^ mix64(index)));
}

std::uint64_t CounterRng::next_u64() {
  // Two rounds keep nearby counters decorrelated.
  return mix64(key_ ^ mix64(counter_++));
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::below(std::uint64_t n) {
  if (n == 0) return 0;
  // Rejection keeps the draw unbiased.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

}  // namespace openrpf
