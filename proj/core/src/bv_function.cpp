#include "openrpf/bv_function.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <ostream>
#include <tuple>

#include "openrpf/errors.hpp"

namespace openrpf {

Grid::Grid() : edges_(std::make_shared<const std::vector<double>>(std::vector<double>{0.0, 1.0})) {}

Grid::Grid(std::vector<double> edges) {
  if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0) {
    throw ValidationError("grid: edges must start at 0 and end at 1");
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw ValidationError("grid: edges must be strictly increasing");
  }
  edges_ = std::make_shared<const std::vector<double>>(std::move(edges));
}

Grid Grid::uniform(std::size_t cells) {
  if (cells == 0) throw ValidationError("grid: need at least one cell");
  std::vector<double> e(cells + 1);
  for (std::size_t i = 0; i <= cells; ++i) e[i] = static_cast<double>(i) / static_cast<double>(cells);
  return Grid(std::move(e));
}

std::size_t Grid::locate(double x) const {
  const auto& e = *edges_;
  auto it = std::upper_bound(e.begin(), e.end(), x);
  if (it == e.begin()) return 0;
  const std::size_t i = static_cast<std::size_t>(it - e.begin()) - 1;
  return std::min(i, size() - 1);
}

bool Grid::same_as(const Grid& other) const {
  return edges_ == other.edges_ || *edges_ == *other.edges_;
}

Eigen::VectorXd Grid::coverage(const IntervalSet& s) const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
  for (const Interval& p : s.parts()) {
    for (std::size_t i = locate(p.lo); i < size() && left(i) < p.hi; ++i) {
      const double len = intersect(cell(i), p).length();
      if (len > 0.0) c[static_cast<Eigen::Index>(i)] += len / width(i);
    }
  }
  return c.cwiseMin(1.0);
}

std::vector<std::size_t> Grid::cells_meeting(const IntervalSet& s) const {
  const Eigen::VectorXd c = coverage(s);
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (c[i] > 1e-12) out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

GridFunction GridFunction::constant(const Grid& grid, double c) {
  return {grid, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid.size()), c)};
}

GridFunction GridFunction::indicator(const Grid& grid, const IntervalSet& s) {
  return {grid, grid.coverage(s)};
}

GridFunction GridFunction::sample(const Grid& grid, const std::function<double(double)>& fn) {
  GridFunction f{grid, Eigen::VectorXd(static_cast<Eigen::Index>(grid.size()))};
  for (std::size_t i = 0; i < grid.size(); ++i) f.values[static_cast<Eigen::Index>(i)] = fn(grid.midpoint(i));
  return f;
}

CellMeasure CellMeasure::lebesgue(const Grid& grid) {
  CellMeasure m{grid, Eigen::VectorXd(static_cast<Eigen::Index>(grid.size()))};
  for (std::size_t i = 0; i < grid.size(); ++i) m.masses[static_cast<Eigen::Index>(i)] = grid.width(i);
  return m;
}

double CellMeasure::measure_of(const IntervalSet& s) const {
  return grid.coverage(s).dot(masses);
}

double variation(const GridFunction& f) {
  double v = 0.0;
  for (Eigen::Index i = 1; i < f.values.size(); ++i) v += std::abs(f.values[i] - f.values[i - 1]);
  return v;
}

double sup_norm(const GridFunction& f) {
  return f.values.size() == 0 ? 0.0 : f.values.cwiseAbs().maxCoeff();
}

double bv_norm(const GridFunction& f) { return sup_norm(f) + variation(f); }

double inf_on(const GridFunction& f, std::span<const std::size_t> cells) {
  if (cells.empty()) throw ValidationError("inf_on: empty cell set");
  double m = f.values[static_cast<Eigen::Index>(cells[0])];
  for (std::size_t c : cells) m = std::min(m, f.values[static_cast<Eigen::Index>(c)]);
  return m;
}

double inf_on(const GridFunction& f, const IntervalSet& s) {
  const std::vector<std::size_t> cells = f.grid.cells_meeting(s);
  return inf_on(f, cells);
}

namespace {

// Fractions |A_i ∩ B_j| / |B_j| for all overlapping (i, j), in merge order.
struct Overlap {
  std::vector<std::size_t> a;
  std::vector<std::size_t> b;
  std::vector<double> fraction_of_b;
};

std::shared_ptr<const Overlap> overlap(const Grid& ga, const Grid& gb) {
  static std::mutex mutex;
  static std::map<std::pair<const void*, const void*>,
                  std::pair<std::pair<Grid, Grid>, std::shared_ptr<const Overlap>>> cache;
  const auto key = std::make_pair(ga.identity(), gb.identity());
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second.second;
  }
  auto ov = std::make_shared<Overlap>();
  std::size_t i = 0, j = 0;
  while (i < ga.size() && j < gb.size()) {
    const double len = intersect(ga.cell(i), gb.cell(j)).length();
    if (len > 0.0) {
      ov->a.push_back(i);
      ov->b.push_back(j);
      ov->fraction_of_b.push_back(len / gb.width(j));
    }
    if (ga.right(i) < gb.right(j)) {
      ++i;
    } else if (gb.right(j) < ga.right(i)) {
      ++j;
    } else {
      ++i;
      ++j;
    }
  }
  std::lock_guard<std::mutex> lock(mutex);
  if (cache.size() > 256) cache.clear();
  // Grids are stored alongside so the keyed addresses stay alive.
  cache.emplace(key, std::make_pair(std::make_pair(ga, gb), ov));
  return ov;
}

}  // namespace

double integrate(const GridFunction& f, const CellMeasure& m) {
  if (f.grid.same_as(m.grid)) return f.values.dot(m.masses);
  const auto ov = overlap(f.grid, m.grid);
  double acc = 0.0;
  for (std::size_t k = 0; k < ov->a.size(); ++k) {
    acc += f.values[static_cast<Eigen::Index>(ov->a[k])] * ov->fraction_of_b[k] *
           m.masses[static_cast<Eigen::Index>(ov->b[k])];
  }
  return acc;
}

GridFunction transfer_to(const GridFunction& f, const Grid& target) {
  if (f.grid.same_as(target)) return {target, f.values};
  const auto ov = overlap(f.grid, target);
  GridFunction out = GridFunction::constant(target, 0.0);
  for (std::size_t k = 0; k < ov->a.size(); ++k) {
    out.values[static_cast<Eigen::Index>(ov->b[k])] +=
        f.values[static_cast<Eigen::Index>(ov->a[k])] * ov->fraction_of_b[k];
  }
  return out;
}

GridFunction random_bv_function(const Grid& grid, CounterRng& rng, bool signed_values) {
  const std::size_t jumps = 1 + static_cast<std::size_t>(rng.below(8));
  std::vector<double> cuts(jumps);
  for (double& c : cuts) c = rng.uniform();
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> levels(jumps + 1);
  for (double& v : levels) v = signed_values ? rng.uniform(-1.0, 1.0) : rng.uniform(0.1, 1.0);
  const double trend = signed_values ? rng.uniform(-0.5, 0.5) : rng.uniform(-0.1, 0.1);
  return GridFunction::sample(grid, [&](double x) {
    const auto piece = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
    return levels[piece] + trend * (x - 0.5);
  });
}

namespace {

void write_rows(std::ostream& out, const Grid& g, const Eigen::VectorXd& v, const char* header) {
  out << header << '\n';
  char buf[96];
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", g.left(i), g.right(i),
                  v[static_cast<Eigen::Index>(i)]);
    out << buf;
  }
}

}  // namespace

void write_csv(std::ostream& out, const GridFunction& f) {
  write_rows(out, f.grid, f.values, "x_left,x_right,value");
}

void write_csv(std::ostream& out, const CellMeasure& m) {
  write_rows(out, m.grid, m.masses, "x_left,x_right,mass");
}

}  // namespace openrpf
