#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace openrpf {

struct FiberId {
  std::size_t index = 0;
  friend auto operator<=>(const FiberId&, const FiberId&) = default;
};

enum class BaseKind { FiniteCycle, OrbitWindow };

// The driving system: a single-cycle permutation with weights, or a window
// ω_{-N}..ω_N of an i.i.d. symbol sequence. Fiber index i of a window sits at
// position i - N. Immutable once built.
class BaseSystem {
 public:
  // successor[i] = θ(i). Must be a single cycle.
  static BaseSystem finite_cycle(std::vector<std::size_t> successor,
                                 std::vector<double> weights = {});
  // θ(i) = i + 1 mod n.
  static BaseSystem cycle(std::size_t n, std::vector<double> weights = {});
  // symbol_probs defaults to uniform over `symbols`.
  static BaseSystem orbit_window(std::size_t half_width, std::size_t symbols,
                                 std::uint64_t seed, std::vector<double> symbol_probs = {});

  BaseKind kind() const { return kind_; }
  std::size_t size() const { return symbols_.size(); }
  const std::vector<double>& weights() const { return weights_; }

  // Which map drives fiber w. For cycles every fiber is its own symbol.
  std::size_t symbol(FiberId w) const;
  std::size_t symbol_count() const { return symbol_count_; }

  // Cycle length, or 1 for windows (no periodic structure to exploit).
  std::size_t period() const { return kind_ == BaseKind::FiniteCycle ? size() : 1; }
  std::size_t half_width() const { return half_width_; }
  long long position(FiberId w) const;

  bool can_advance(FiberId w, long long n) const;
  FiberId advance(FiberId w, long long n) const;  // throws WindowExceeded
  // Fibers w, θw, ..., θ^{count-1}w.
  std::vector<FiberId> orbit(FiberId w, std::size_t count) const;

  double birkhoff_average(std::span<const double> values) const;
  // Weighted mean over a subset, weights renormalized on the subset.
  double average_over(std::span<const FiberId> fibers, std::span<const double> values) const;

 private:
  BaseKind kind_ = BaseKind::FiniteCycle;
  std::vector<std::size_t> forward_;
  std::vector<std::size_t> backward_;
  std::vector<std::size_t> symbols_;
  std::vector<double> weights_;
  std::size_t symbol_count_ = 1;
  std::size_t half_width_ = 0;
};

}  // namespace openrpf
