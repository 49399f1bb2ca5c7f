#include "openrpf/phase_space.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "openrpf/errors.hpp"

namespace openrpf {
namespace {

double snap_unit(double y) {
  if (std::abs(y) < 1e-14) return 0.0;
  if (std::abs(y - 1.0) < 1e-14) return 1.0;
  return y;
}

void sort_unique(std::vector<double>& pts, double tol = 1e-14) {
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  out.reserve(pts.size());
  for (double p : pts) {
    if (out.empty() || p - out.back() > tol) out.push_back(p);
  }
  pts = std::move(out);
}

}  // namespace

Branch Branch::affine(double lo, double hi, double slope, double intercept) {
  if (!(hi > lo)) throw ValidationError("branch: empty domain");
  if (slope == 0.0 || !std::isfinite(slope)) throw ValidationError("branch: affine slope must be nonzero");
  Branch b;
  b.domain_ = {lo, hi};
  b.affine_ = true;
  b.slope_ = slope;
  b.intercept_ = intercept;
  b.finish();
  return b;
}

Branch Branch::monotone(double lo, double hi, Fn forward, Fn inverse, Fn abs_derivative) {
  if (!(hi > lo)) throw ValidationError("branch: empty domain");
  if (!forward) throw ValidationError("branch: missing forward map");
  Branch b;
  b.domain_ = {lo, hi};
  b.forward_ = std::move(forward);
  b.inverse_ = std::move(inverse);
  b.derivative_ = std::move(abs_derivative);
  b.finish();
  return b;
}

void Branch::finish() {
  const double a = snap_unit((*this)(domain_.lo));
  const double c = snap_unit((*this)(domain_.hi));
  if (a == c) throw ValidationError("branch: map is constant on its domain");
  orientation_ = a < c ? Orientation::Increasing : Orientation::Decreasing;
  image_ = {std::min(a, c), std::max(a, c)};
}

double Branch::operator()(double x) const {
  return affine_ ? slope_ * x + intercept_ : forward_(x);
}

double Branch::preimage(double y) const {
  y = std::clamp(y, image_.lo, image_.hi);
  const bool inc = orientation_ == Orientation::Increasing;
  // Image endpoints pull back to domain endpoints exactly.
  if (y == image_.lo) return inc ? domain_.lo : domain_.hi;
  if (y == image_.hi) return inc ? domain_.hi : domain_.lo;
  double x;
  if (affine_) {
    x = (y - intercept_) / slope_;
  } else if (inverse_) {
    x = inverse_(y);
  } else {
    double lo = domain_.lo, hi = domain_.hi;
    int guard = 0;
    while (hi - lo > 1e-13) {
      const double mid = 0.5 * (lo + hi);
      const bool below = (*this)(mid) < y;
      if (below == inc) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (++guard > 200) {
        throw ValidationError("branch on [" + std::to_string(domain_.lo) + ", " +
                              std::to_string(domain_.hi) + "): bisection did not bracket");
      }
    }
    x = 0.5 * (lo + hi);
  }
  return std::clamp(x, domain_.lo, domain_.hi);
}

double Branch::abs_derivative(double x) const {
  if (affine_) return std::abs(slope_);
  if (derivative_) return derivative_(x);
  const double h = 1e-7 * domain_.length();
  const double l = std::max(domain_.lo, x - h);
  const double r = std::min(domain_.hi, x + h);
  return std::abs((*this)(r) - (*this)(l)) / (r - l);
}

bool Branch::sampled_monotone(int samples) const {
  double prev = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double x = domain_.lo + (i + 0.5) / samples * domain_.length();
    const double y = (*this)(x);
    if (i > 0) {
      const bool ok = orientation_ == Orientation::Increasing ? y > prev : y < prev;
      if (!ok) return false;
    }
    prev = y;
  }
  return true;
}

std::optional<std::size_t> FiberMap::locate(double x) const {
  for (std::size_t i = 0; i < branches.size(); ++i) {
    if (branches[i].domain().contains(x)) return i;
  }
  return std::nullopt;
}

FiberMap doubling_map() {
  FiberMap m;
  m.family = "doubling";
  m.branches = {Branch::affine(0.0, 0.5, 2.0, 0.0), Branch::affine(0.5, 1.0, 2.0, -1.0)};
  m.tail_bound = 0.0;
  return m;
}

FiberMap tripling_map() {
  FiberMap m;
  m.family = "tripling";
  m.branches = {Branch::affine(0.0, 1.0 / 3.0, 3.0, 0.0),
                Branch::affine(1.0 / 3.0, 2.0 / 3.0, 3.0, -1.0),
                Branch::affine(2.0 / 3.0, 1.0, 3.0, -2.0)};
  m.tail_bound = 0.0;
  return m;
}

namespace {

Branch gauss_branch(std::size_t index) {
  const double k = static_cast<double>(index + 1);
  return Branch::monotone(
      1.0 / (k + 1.0), 1.0 / k, [k](double x) { return 1.0 / x - k; },
      [k](double y) { return 1.0 / (y + k); }, [](double x) { return 1.0 / (x * x); });
}

}  // namespace

FiberMap gauss_map(std::size_t k_max) {
  if (k_max == 0) throw ValidationError("gauss: K_max must be positive");
  FiberMap m;
  m.family = "gauss";
  for (std::size_t i = 0; i < k_max; ++i) m.branches.push_back(gauss_branch(i));
  // Σ_{k>K} 1/k² ≤ ∫_K^∞ dt/t² = 1/K.
  m.tail_bound = 1.0 / static_cast<double>(k_max);
  m.generator = gauss_branch;
  return m;
}

FiberMap affine_map(const std::vector<AffineRow>& rows) {
  FiberMap m;
  m.family = "affine";
  for (const AffineRow& r : rows) m.branches.push_back(Branch::affine(r.lo, r.hi, r.slope, r.intercept));
  m.tail_bound = 0.0;
  return m;
}

const IntervalSet& Hole::at_symbol(std::size_t s) const {
  return s < per_symbol_.size() ? per_symbol_[s] : none_;
}

bool Hole::any() const {
  return std::any_of(per_symbol_.begin(), per_symbol_.end(),
                     [](const IntervalSet& h) { return !h.empty(); });
}

void RandomSystem::validate() const {
  if (maps.size() != base.symbol_count()) {
    throw ValidationError("system: " + std::to_string(base.symbol_count()) +
                          " fibers/symbols need maps, got " + std::to_string(maps.size()));
  }
  if (hole.symbol_count() > maps.size()) throw ValidationError("hole: references a missing fiber");
  for (std::size_t s = 0; s < maps.size(); ++s) {
    const FiberMap& m = maps[s];
    const std::string where = "map." + std::to_string(s);
    if (m.branches.empty()) throw ValidationError(where + ": no branches");
    std::vector<Interval> doms;
    for (std::size_t b = 0; b < m.branches.size(); ++b) {
      const Branch& br = m.branches[b];
      const Interval d = br.domain();
      if (d.lo < 0.0 || d.hi > 1.0) throw ValidationError(where + ": branch " + std::to_string(b) + " domain leaves [0,1]");
      if (br.image().lo < -1e-12 || br.image().hi > 1.0 + 1e-12) {
        throw ValidationError(where + ": branch " + std::to_string(b) + " image leaves [0,1]");
      }
      if (!br.sampled_monotone()) {
        throw ValidationError(where + ": branch " + std::to_string(b) + " is not strictly monotone");
      }
      doms.push_back(d);
    }
    std::sort(doms.begin(), doms.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    for (std::size_t i = 1; i < doms.size(); ++i) {
      if (doms[i].lo < doms[i - 1].hi - 1e-15) throw ValidationError(where + ": branch domains overlap");
    }
    const IntervalSet& h = hole.at_symbol(s);
    if (!h.empty() && (h.parts().front().lo < 0.0 || h.parts().back().hi > 1.0)) {
      throw ValidationError("hole." + std::to_string(s) + ": interval leaves [0,1]");
    }
  }
}

namespace {

std::vector<double> level_points(const RandomSystem& sys, FiberId w, int k) {
  std::vector<double> pts{0.0, 1.0};
  for (const Interval& h : sys.hole_at(w).parts()) {
    pts.push_back(h.lo);
    pts.push_back(h.hi);
  }
  if (k == 0) return pts;
  const FiberMap& m = sys.map(w);
  for (const Branch& b : m.branches) {
    pts.push_back(b.domain().lo);
    pts.push_back(b.domain().hi);
  }
  std::vector<double> next = level_points(sys, sys.base.advance(w, 1), k - 1);
  for (const Branch& b : m.branches) {
    const Interval img = b.image();
    for (double y : next) {
      if (y > img.lo && y < img.hi) pts.push_back(b.preimage(y));
    }
  }
  sort_unique(pts);
  return pts;
}

}  // namespace

MonotonicityPartition refine_partition(const RandomSystem& sys, FiberId w, int n,
                                       std::size_t max_points) {
  if (n < 1) throw ValidationError("refine_partition: n must be at least 1");
  if (!sys.base.can_advance(w, n)) {
    throw WindowExceeded("refine_partition: θ^" + std::to_string(n) + " leaves the window");
  }
  MonotonicityPartition p;
  p.fiber = w;
  p.depth = n;
  p.endpoints = level_points(sys, w, n);
  if (p.endpoints.size() > max_points) throw ValidationError("refine_partition: too many cells");
  if (n > 1) p.stalled = level_points(sys, w, n - 1).size() == p.endpoints.size();
  return p;
}

IntervalSet branch_preimage(const Branch& b, const IntervalSet& target) {
  std::vector<Interval> out;
  const IntervalSet hit = target.intersect(b.image());
  for (const Interval& t : hit.parts()) {
    const double x1 = b.preimage(t.lo);
    const double x2 = b.preimage(t.hi);
    out.push_back({std::min(x1, x2), std::max(x1, x2)});
  }
  return IntervalSet(std::move(out)).intersect(b.domain());
}

IntervalSet pullback_set(const RandomSystem& sys, FiberId w, int n, const IntervalSet& target,
                         std::size_t max_intervals) {
  if (n < 0) throw ValidationError("pullback_set: negative depth");
  if (!sys.base.can_advance(w, n)) {
    throw WindowExceeded("pullback_set: θ^" + std::to_string(n) + " leaves the window");
  }
  std::vector<FiberId> path = sys.base.orbit(w, static_cast<std::size_t>(n) + 1);
  IntervalSet s = sys.survivors(path.back()).intersect(target);
  for (int k = n - 1; k >= 0; --k) {
    const FiberId u = path[static_cast<std::size_t>(k)];
    std::vector<Interval> parts;
    for (const Branch& b : sys.map(u).branches) {
      const IntervalSet pre = branch_preimage(b, s);
      parts.insert(parts.end(), pre.parts().begin(), pre.parts().end());
    }
    s = IntervalSet(std::move(parts)).intersect(sys.survivors(u));
    if (s.size() > max_intervals) {
      throw ValidationError("pullback_set: more than " + std::to_string(max_intervals) +
                            " intervals at depth " + std::to_string(n));
    }
  }
  return s;
}

SurvivorSet survivor_set(const RandomSystem& sys, FiberId w, int n, std::size_t max_intervals) {
  return {w, n, pullback_set(sys, w, n, IntervalSet::unit(), max_intervals)};
}

}  // namespace openrpf
