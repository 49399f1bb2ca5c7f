#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "openrpf/interval.hpp"
#include "openrpf/random.hpp"

namespace openrpf {

// Strictly increasing edges spanning [0, 1]. Copies share storage, so grid
// identity checks are pointer compares in the common case.
class Grid {
 public:
  Grid();
  explicit Grid(std::vector<double> edges);
  static Grid uniform(std::size_t cells);

  std::size_t size() const { return edges_->size() - 1; }
  const std::vector<double>& edges() const { return *edges_; }
  double left(std::size_t i) const { return (*edges_)[i]; }
  double right(std::size_t i) const { return (*edges_)[i + 1]; }
  double width(std::size_t i) const { return right(i) - left(i); }
  double midpoint(std::size_t i) const { return 0.5 * (left(i) + right(i)); }
  Interval cell(std::size_t i) const { return {left(i), right(i)}; }

  // Cell containing x; x ≥ 1 maps to the last cell.
  std::size_t locate(double x) const;
  bool same_as(const Grid& other) const;
  const void* identity() const { return edges_.get(); }

  // |C_i ∩ S| / |C_i| per cell.
  Eigen::VectorXd coverage(const IntervalSet& s) const;
  // Cells meeting S in positive length.
  std::vector<std::size_t> cells_meeting(const IntervalSet& s) const;

 private:
  std::shared_ptr<const std::vector<double>> edges_;
};

struct GridFunction {
  Grid grid;
  Eigen::VectorXd values;

  static GridFunction constant(const Grid& grid, double c);
  static GridFunction indicator(const Grid& grid, const IntervalSet& s);  // cell fraction covered
  static GridFunction sample(const Grid& grid, const std::function<double(double)>& fn);
};

struct CellMeasure {
  Grid grid;
  Eigen::VectorXd masses;

  double total() const { return masses.sum(); }
  static CellMeasure lebesgue(const Grid& grid);
  // Mass of S with each cell's mass spread uniformly over the cell.
  double measure_of(const IntervalSet& s) const;
};

double variation(const GridFunction& f);
double sup_norm(const GridFunction& f);
double bv_norm(const GridFunction& f);
double inf_on(const GridFunction& f, std::span<const std::size_t> cells);
double inf_on(const GridFunction& f, const IntervalSet& s);

// Σ values·masses on the common refinement. Mass of a refined piece is the
// cell mass times its length fraction.
double integrate(const GridFunction& f, const CellMeasure& m);
// f re-expressed on another grid by length-weighted averaging.
GridFunction transfer_to(const GridFunction& f, const Grid& target);

// Random BV observable: a step function with a few random jumps plus a random
// linear trend, evaluated at midpoints. Nonnegative when `signed_values` is
// false.
GridFunction random_bv_function(const Grid& grid, CounterRng& rng, bool signed_values = false);

void write_csv(std::ostream& out, const GridFunction& f);
void write_csv(std::ostream& out, const CellMeasure& m);

}  // namespace openrpf
