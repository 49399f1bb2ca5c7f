#include "openrpf/base_system.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "openrpf/errors.hpp"
#include "openrpf/random.hpp"

namespace openrpf {
namespace {

std::vector<double> checked_weights(std::vector<double> w, std::size_t n) {
  if (w.empty()) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  if (w.size() != n) {
    throw ValidationError("base: expected " + std::to_string(n) + " weights, got " +
                          std::to_string(w.size()));
  }
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("base: weights must be nonnegative");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("base: weights sum to " + std::to_string(total) + ", not 1");
  }
  return w;
}

}  // namespace

BaseSystem BaseSystem::finite_cycle(std::vector<std::size_t> successor, std::vector<double> weights) {
  const std::size_t n = successor.size();
  if (n == 0) throw ValidationError("base: size must be at least 1");
  std::vector<std::size_t> backward(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (successor[i] >= n || backward[successor[i]] != n) {
      throw ValidationError("base: successor list is not a permutation");
    }
    backward[successor[i]] = i;
  }
  std::size_t steps = 0;
  std::size_t w = 0;
  do {
    w = successor[w];
    ++steps;
  } while (w != 0);
  if (steps != n) {
    throw ValidationError("base: permutation splits into several cycles (not ergodic)");
  }
  BaseSystem b;
  b.kind_ = BaseKind::FiniteCycle;
  b.forward_ = std::move(successor);
  b.backward_ = std::move(backward);
  b.symbols_.resize(n);
  std::iota(b.symbols_.begin(), b.symbols_.end(), std::size_t{0});
  b.symbol_count_ = n;
  b.weights_ = checked_weights(std::move(weights), n);
  return b;
}

BaseSystem BaseSystem::cycle(std::size_t n, std::vector<double> weights) {
  if (n == 0) throw ValidationError("base: size must be at least 1");
  std::vector<std::size_t> succ(n);
  for (std::size_t i = 0; i < n; ++i) succ[i] = (i + 1) % n;
  return finite_cycle(std::move(succ), std::move(weights));
}

BaseSystem BaseSystem::orbit_window(std::size_t half_width, std::size_t symbols,
                                    std::uint64_t seed, std::vector<double> symbol_probs) {
  if (symbols == 0) throw ValidationError("base: orbit window needs at least one symbol");
  symbol_probs = checked_weights(std::move(symbol_probs), symbols);
  const std::size_t n = 2 * half_width + 1;
  BaseSystem b;
  b.kind_ = BaseKind::OrbitWindow;
  b.half_width_ = half_width;
  b.symbol_count_ = symbols;
  b.symbols_.resize(n);
  CounterRng rng(seed, "base_system", "symbols");
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    std::size_t s = 0;
    while (s + 1 < symbols && u >= symbol_probs[s]) {
      u -= symbol_probs[s];
      ++s;
    }
    b.symbols_[i] = s;
  }
  b.weights_.assign(n, 1.0 / static_cast<double>(n));
  return b;
}

std::size_t BaseSystem::symbol(FiberId w) const {
  if (w.index >= symbols_.size()) throw ValidationError("base: fiber index out of range");
  return symbols_[w.index];
}

long long BaseSystem::position(FiberId w) const {
  if (kind_ == BaseKind::OrbitWindow) {
    return static_cast<long long>(w.index) - static_cast<long long>(half_width_);
  }
  return static_cast<long long>(w.index);
}

bool BaseSystem::can_advance(FiberId w, long long n) const {
  if (w.index >= size()) return false;
  if (kind_ == BaseKind::FiniteCycle) return true;
  const long long target = static_cast<long long>(w.index) + n;
  return target >= 0 && target < static_cast<long long>(size());
}

FiberId BaseSystem::advance(FiberId w, long long n) const {
  if (w.index >= size()) throw ValidationError("base: fiber index out of range");
  if (kind_ == BaseKind::OrbitWindow) {
    if (!can_advance(w, n)) {
      throw WindowExceeded("base: θ^" + std::to_string(n) + " of window position " +
                           std::to_string(position(w)) + " leaves the window ±" +
                           std::to_string(half_width_));
    }
    return FiberId{static_cast<std::size_t>(static_cast<long long>(w.index) + n)};
  }
  const long long period = static_cast<long long>(size());
  long long steps = n % period;
  std::size_t cur = w.index;
  if (steps >= 0) {
    for (long long k = 0; k < steps; ++k) cur = forward_[cur];
  } else {
    for (long long k = 0; k < -steps; ++k) cur = backward_[cur];
  }
  return FiberId{cur};
}

std::vector<FiberId> BaseSystem::orbit(FiberId w, std::size_t count) const {
  std::vector<FiberId> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(w);
    if (k + 1 < count) w = advance(w, 1);
  }
  return out;
}

double BaseSystem::birkhoff_average(std::span<const double> values) const {
  if (values.size() != size()) {
    throw ValidationError("birkhoff_average: expected one value per fiber");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw ValidationError("birkhoff_average: non-finite value");
    acc += weights_[i] * values[i];
  }
  return acc;
}

double BaseSystem::average_over(std::span<const FiberId> fibers, std::span<const double> values) const {
  if (fibers.size() != values.size() || fibers.empty()) {
    throw ValidationError("average_over: fibers and values must match and be nonempty");
  }
  double acc = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < fibers.size(); ++i) {
    if (!std::isfinite(values[i])) throw ValidationError("average_over: non-finite value");
    const double wgt = weights_.at(fibers[i].index);
    acc += wgt * values[i];
    mass += wgt;
  }
  if (!(mass > 0.0)) throw ValidationError("average_over: subset has zero weight");
  return acc / mass;
}

}  // namespace openrpf
