#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace openrpf {

// Half-open [lo, hi).
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi > lo ? hi - lo : 0.0; }
  bool empty() const { return !(hi > lo); }
  bool contains(double x) const { return x >= lo && x < hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

Interval intersect(const Interval& a, const Interval& b);

// Sorted, pairwise disjoint, non-adjacent union of half-open intervals.
class IntervalSet {
 public:
  IntervalSet() = default;
  explicit IntervalSet(std::vector<Interval> parts);
  static IntervalSet unit() { return IntervalSet({{0.0, 1.0}}); }

  const std::vector<Interval>& parts() const { return parts_; }
  std::size_t size() const { return parts_.size(); }
  bool empty() const { return parts_.empty(); }
  double measure() const;
  bool contains(double x) const;

  IntervalSet intersect(const IntervalSet& other) const;
  IntervalSet intersect(const Interval& window) const;
  IntervalSet unite(const IntervalSet& other) const;
  // Complement relative to `within`.
  IntervalSet complement(const Interval& within = {0.0, 1.0}) const;
  bool subset_of(const IntervalSet& other, double tol = 0.0) const;

  friend bool operator==(const IntervalSet&, const IntervalSet&) = default;

 private:
  std::vector<Interval> parts_;
};

}  // namespace openrpf
