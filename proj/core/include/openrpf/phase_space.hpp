#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "openrpf/base_system.hpp"
#include "openrpf/interval.hpp"

namespace openrpf {

enum class Orientation { Increasing, Decreasing };

class Branch {
 public:
  using Fn = std::function<double(double)>;

  static Branch affine(double lo, double hi, double slope, double intercept);
  // `inverse` and `abs_derivative` are optional; bisection and central
  // differences stand in for them.
  static Branch monotone(double lo, double hi, Fn forward, Fn inverse = {}, Fn abs_derivative = {});

  Interval domain() const { return domain_; }
  Interval image() const { return image_; }
  Orientation orientation() const { return orientation_; }
  bool is_affine() const { return affine_; }
  double slope() const { return slope_; }
  double intercept() const { return intercept_; }

  double operator()(double x) const;
  // Inverse on the closure of the image; clamps y into it.
  double preimage(double y) const;
  double abs_derivative(double x) const;

  // Strict ordering of `samples` equally spaced points and their images.
  bool sampled_monotone(int samples = 33) const;

 private:
  Branch() = default;
  void finish();

  Interval domain_;
  Interval image_;
  Orientation orientation_ = Orientation::Increasing;
  bool affine_ = false;
  double slope_ = 0.0;
  double intercept_ = 0.0;
  Fn forward_;
  Fn inverse_;
  Fn derivative_;
};

struct FiberMap {
  std::string family;
  std::vector<Branch> branches;
  // Bound on Σ sup g over dropped branches for the geometric weight 1/|T'|;
  // nullopt when no closed form is known.
  std::optional<double> tail_bound;
  // Branch number k (0-based) of the untruncated family, for tail probing.
  std::function<Branch(std::size_t)> generator;

  // Index of the branch whose domain contains x, or nullopt.
  std::optional<std::size_t> locate(double x) const;
};

FiberMap doubling_map();
FiberMap tripling_map();
// Branch k on [1/(k+1), 1/k), x ↦ 1/x − k, for k = 1..k_max.
FiberMap gauss_map(std::size_t k_max);
struct AffineRow {
  double lo, hi, slope, intercept;
};
FiberMap affine_map(const std::vector<AffineRow>& rows);

// Per-symbol hole intervals.
class Hole {
 public:
  Hole() = default;
  explicit Hole(std::vector<IntervalSet> per_symbol) : per_symbol_(std::move(per_symbol)) {}

  const IntervalSet& at_symbol(std::size_t s) const;
  bool any() const;
  std::size_t symbol_count() const { return per_symbol_.size(); }

 private:
  std::vector<IntervalSet> per_symbol_;
  IntervalSet none_;
};

// Base, maps and hole bundled: everything needed to follow an orbit.
struct RandomSystem {
  BaseSystem base;
  std::vector<FiberMap> maps;  // indexed by symbol
  Hole hole;

  const FiberMap& map(FiberId w) const { return maps.at(base.symbol(w)); }
  const IntervalSet& hole_at(FiberId w) const { return hole.at_symbol(base.symbol(w)); }
  IntervalSet survivors(FiberId w) const { return hole_at(w).complement(); }  // J_ω

  // Throws ValidationError on disjointness/monotonicity/range violations.
  void validate() const;
};

struct MonotonicityPartition {
  FiberId fiber;
  int depth = 0;
  std::vector<double> endpoints;  // sorted, starts at 0, ends at 1
  bool stalled = false;           // no new endpoints compared to depth − 1

  std::size_t cell_count() const { return endpoints.empty() ? 0 : endpoints.size() - 1; }
  Interval cell(std::size_t i) const { return {endpoints[i], endpoints[i + 1]}; }
};

// Endpoints of the level-n monotonicity partition of T^n_ω, refined by the
// pullbacks T^{-i}H for i = 0..n so that every cell lies inside or outside
// each K_{ω,i}.
MonotonicityPartition refine_partition(const RandomSystem& sys, FiberId w, int n,
                                       std::size_t max_points = std::size_t{1} << 22);

struct SurvivorSet {
  FiberId fiber;
  int depth = 0;
  IntervalSet cells;
};

// J_ω ∩ T^{-1}(J_{θω} ∩ T^{-1}(... ∩ T^{-1}(J_{θ^nω} ∩ target))).
IntervalSet pullback_set(const RandomSystem& sys, FiberId w, int n, const IntervalSet& target,
                         std::size_t max_intervals = std::size_t{1} << 20);
SurvivorSet survivor_set(const RandomSystem& sys, FiberId w, int n,
                         std::size_t max_intervals = std::size_t{1} << 20);

// Branch preimage of a set under one branch, intersected with its domain.
IntervalSet branch_preimage(const Branch& b, const IntervalSet& target);

}  // namespace openrpf
