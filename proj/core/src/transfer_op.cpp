#include "openrpf/transfer_op.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "openrpf/errors.hpp"

namespace openrpf {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Closed: return "closed";
    case Variant::Open: return "open";
    case Variant::SemiNormalized: return "semi-normalized";
    case Variant::FullyNormalized: return "fully-normalized";
  }
  return "?";
}

GridFunction OperatorMatrix::apply(const GridFunction& f) const {
  if (!f.grid.same_as(source_grid)) {
    return {target_grid, matrix * transfer_to(f, source_grid).values};
  }
  return {target_grid, matrix * f.values};
}

Grid build_grid(const RandomSystem& sys, FiberId w, const Discretization& d) {
  std::size_t m = 1;
  while (m < d.cells) m <<= 1;
  std::vector<double> pts(m + 1);
  for (std::size_t i = 0; i <= m; ++i) pts[i] = static_cast<double>(i) / static_cast<double>(m);

  int level = std::max(d.depth, 1);
  while (level > 0 && !sys.base.can_advance(w, level)) --level;
  if (level > 0) {
    const MonotonicityPartition p = refine_partition(sys, w, level);
    pts.insert(pts.end(), p.endpoints.begin(), p.endpoints.end());
  } else {
    for (const Branch& b : sys.map(w).branches) {
      pts.push_back(b.domain().lo);
      pts.push_back(b.domain().hi);
    }
    for (const Interval& h : sys.hole_at(w).parts()) {
      pts.push_back(h.lo);
      pts.push_back(h.hi);
    }
  }
  std::sort(pts.begin(), pts.end());
  // Points closer than 1e-12 are the same point up to inversion error; keep
  // the earlier one, and never move the exact ends 0 and 1.
  std::vector<double> edges;
  edges.reserve(pts.size());
  for (double p : pts) {
    if (p < 0.0 || p > 1.0) continue;
    if (edges.empty() || p - edges.back() > 1e-12) edges.push_back(p);
  }
  edges.front() = 0.0;
  if (1.0 - edges.back() <= 1e-12) {
    edges.back() = 1.0;
  } else {
    edges.push_back(1.0);
  }
  return Grid(std::move(edges));
}

OperatorMatrix assemble(const RandomSystem& sys, const Potential& g, const Grid& source,
                        const Grid& target, FiberId w, Variant variant) {
  if (variant != Variant::Closed && variant != Variant::Open) {
    throw ValidationError("assemble: normalized variants need normalize_* with their scalars");
  }
  const FiberMap& map = sys.map(w);
  const std::size_t symbol = sys.base.symbol(w);
  const IntervalSet survivors =
      variant == Variant::Open ? sys.survivors(w) : IntervalSet::unit();

  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t bi = 0; bi < map.branches.size(); ++bi) {
    const Branch& b = map.branches[bi];
    const Interval dom = b.domain();
    for (std::size_t i = source.locate(dom.lo); i < source.size() && source.left(i) < dom.hi; ++i) {
      const Interval piece = intersect(source.cell(i), dom);
      if (piece.empty()) continue;
      const IntervalSet kept = survivors.intersect(piece);
      for (const Interval& p : kept.parts()) {
        double y1 = b(p.lo), y2 = b(p.hi);
        if (p.lo == dom.lo) y1 = b.orientation() == Orientation::Increasing ? b.image().lo : b.image().hi;
        if (p.hi == dom.hi) y2 = b.orientation() == Orientation::Increasing ? b.image().hi : b.image().lo;
        const double ylo = std::clamp(std::min(y1, y2), 0.0, 1.0);
        const double yhi = std::clamp(std::max(y1, y2), 0.0, 1.0);
        for (std::size_t j = target.locate(ylo); j < target.size() && target.left(j) < yhi; ++j) {
          const Interval sub = intersect(target.cell(j), {ylo, yhi});
          const double len = sub.length();
          if (len <= 1e-12 * target.width(j)) continue;
          const double xm = 0.5 * (b.preimage(sub.lo) + b.preimage(sub.hi));
          const double weight = g(symbol, b, bi, xm);
          entries.emplace_back(static_cast<int>(j), static_cast<int>(i), weight * len / target.width(j));
        }
      }
    }
  }
  OperatorMatrix op;
  op.source = w;
  op.target = sys.base.advance(w, 1);
  op.variant = variant;
  op.source_grid = source;
  op.target_grid = target;
  op.matrix.resize(static_cast<Eigen::Index>(target.size()), static_cast<Eigen::Index>(source.size()));
  op.matrix.setFromTriplets(entries.begin(), entries.end());
  op.matrix.makeCompressed();
  return op;
}

OperatorMatrix semi_normalize(const OperatorMatrix& open, double rho) {
  if (!(rho > 0.0)) throw ValidationError("semi_normalize: ρ must be positive");
  OperatorMatrix m = open;
  m.variant = Variant::SemiNormalized;
  m.matrix /= rho;
  m.scale = rho;
  return m;
}

OperatorMatrix fully_normalize(const OperatorMatrix& open, double lambda,
                               const Eigen::VectorXd& q_source, const Eigen::VectorXd& q_target) {
  if (!(lambda > 0.0)) throw ValidationError("fully_normalize: λ must be positive");
  const double floor = 1e-12 * q_target.cwiseAbs().maxCoeff();
  Eigen::VectorXd row_scale(q_target.size());
  for (Eigen::Index j = 0; j < q_target.size(); ++j) {
    row_scale[j] = q_target[j] > floor ? 1.0 / (lambda * q_target[j]) : 0.0;
  }
  OperatorMatrix m = open;
  m.variant = Variant::FullyNormalized;
  m.matrix = row_scale.asDiagonal() * open.matrix * q_source.asDiagonal();
  m.scale = lambda;
  return m;
}

void write_csv(std::ostream& out, const OperatorMatrix& m) {
  out << "row,col,value\n";
  char buf[96];
  for (Eigen::Index r = 0; r < m.matrix.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(m.matrix, r); it; ++it) {
      std::snprintf(buf, sizeof buf, "%lld,%lld,%.17g\n", static_cast<long long>(it.row()),
                    static_cast<long long>(it.col()), it.value());
      out << buf;
    }
  }
}

OperatorFamily::OperatorFamily(RandomSystem sys, Potential g, Discretization d)
    : sys_(std::move(sys)), g_(std::move(g)), disc_(d) {
  sys_.validate();
  const std::size_t n = sys_.base.size();
  grids_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) grids_.push_back(build_grid(sys_, FiberId{i}, disc_));
  for (std::size_t i = 0; i < n; ++i) {
    const FiberId w{i};
    masks_.push_back(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(grids_[i].size())) -
                     grids_[i].coverage(sys_.hole_at(w)));
    tails_.push_back(summability_report(g_, sys_, w).tail_bound);
  }
  closed_.resize(n);
  open_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const FiberId w{i};
    if (!sys_.base.can_advance(w, 1)) continue;
    const FiberId next = sys_.base.advance(w, 1);
    closed_[i] = assemble(sys_, g_, grids_[i], grids_[next.index], w, Variant::Closed);
    if (sys_.hole_at(w).empty()) {
      open_[i] = *closed_[i];
      open_[i]->variant = Variant::Open;
    } else {
      open_[i] = assemble(sys_, g_, grids_[i], grids_[next.index], w, Variant::Open);
    }
  }
}

bool OperatorFamily::has_operator(FiberId w) const {
  return w.index < closed_.size() && closed_[w.index].has_value();
}

const OperatorMatrix& OperatorFamily::matrix(FiberId w, Variant v) const {
  if (!has_operator(w)) {
    throw WindowExceeded("operator: fiber " + std::to_string(w.index) + " has no successor in the window");
  }
  switch (v) {
    case Variant::Closed: return *closed_[w.index];
    case Variant::Open: return *open_[w.index];
    default: throw ValidationError("operator family stores closed and open variants only");
  }
}

Eigen::VectorXd OperatorFamily::apply_n(FiberId w, int n, Eigen::VectorXd f, Variant v) const {
  for (int k = 0; k < n; ++k) {
    f = matrix(w, v).matrix * f;
    w = base().advance(w, 1);
  }
  return f;
}

GridFunction OperatorFamily::apply_n(FiberId w, int n, const GridFunction& f, Variant v) const {
  const FiberId end = base().advance(w, n);
  return {grid(end), apply_n(w, n, transfer_to(f, grid(w)).values, v)};
}

std::vector<std::size_t> support_of(const Eigen::VectorXd& v) {
  std::vector<std::size_t> out;
  if (v.size() == 0) return out;
  const double cut = 1e-12 * v.maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] > cut && v[i] > 0.0) out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

std::vector<std::size_t> support_set(const OperatorFamily& fam, FiberId w, int j) {
  if (j < 0) throw ValidationError("support_set: negative depth");
  const FiberId start = fam.base().advance(w, -j);
  return support_of(fam.apply_n(start, j, fam.survivor_mask(start), Variant::Open));
}

}  // namespace openrpf
