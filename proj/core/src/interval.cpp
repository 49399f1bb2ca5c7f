#include "openrpf/interval.hpp"

#include <algorithm>

namespace openrpf {

Interval intersect(const Interval& a, const Interval& b) {
  return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

IntervalSet::IntervalSet(std::vector<Interval> parts) {
  std::erase_if(parts, [](const Interval& i) { return i.empty(); });
  std::sort(parts.begin(), parts.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  for (const Interval& p : parts) {
    if (!parts_.empty() && p.lo <= parts_.back().hi) {
      parts_.back().hi = std::max(parts_.back().hi, p.hi);
    } else {
      parts_.push_back(p);
    }
  }
}

double IntervalSet::measure() const {
  double m = 0.0;
  for (const Interval& p : parts_) m += p.length();
  return m;
}

bool IntervalSet::contains(double x) const {
  auto it = std::upper_bound(parts_.begin(), parts_.end(), x,
                             [](double v, const Interval& i) { return v < i.lo; });
  if (it == parts_.begin()) return false;
  return std::prev(it)->contains(x);
}

IntervalSet IntervalSet::intersect(const IntervalSet& other) const {
  std::vector<Interval> out;
  std::size_t i = 0, j = 0;
  while (i < parts_.size() && j < other.parts_.size()) {
    Interval c = openrpf::intersect(parts_[i], other.parts_[j]);
    if (!c.empty()) out.push_back(c);
    if (parts_[i].hi < other.parts_[j].hi) {
      ++i;
    } else {
      ++j;
    }
  }
  IntervalSet s;
  s.parts_ = std::move(out);
  return s;
}

IntervalSet IntervalSet::intersect(const Interval& window) const {
  std::vector<Interval> out;
  for (const Interval& p : parts_) {
    Interval c = openrpf::intersect(p, window);
    if (!c.empty()) out.push_back(c);
  }
  IntervalSet s;
  s.parts_ = std::move(out);
  return s;
}

IntervalSet IntervalSet::unite(const IntervalSet& other) const {
  std::vector<Interval> all = parts_;
  all.insert(all.end(), other.parts_.begin(), other.parts_.end());
  return IntervalSet(std::move(all));
}

IntervalSet IntervalSet::complement(const Interval& within) const {
  std::vector<Interval> out;
  double cursor = within.lo;
  for (const Interval& p : parts_) {
    if (p.hi <= within.lo || p.lo >= within.hi) continue;
    if (p.lo > cursor) out.push_back({cursor, p.lo});
    cursor = std::max(cursor, p.hi);
  }
  if (cursor < within.hi) out.push_back({cursor, within.hi});
  return IntervalSet(std::move(out));
}

bool IntervalSet::subset_of(const IntervalSet& other, double tol) const {
  return measure() - intersect(other).measure() <= tol;
}

}  // namespace openrpf
