#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "openrpf/bv_function.hpp"
#include "openrpf/expression.hpp"
#include "openrpf/phase_space.hpp"

namespace openrpf {

enum class PotentialKind { GeometricDerivative, ConstantPerBranch, Expression };

// The weight g = e^φ of each fiber, per branch. Stored per symbol; a single
// entry applies to every symbol.
class Potential {
 public:
  static Potential geometric();
  static Potential constant_per_branch(std::vector<std::vector<double>> per_symbol);
  static Potential expression(std::vector<Expression> per_symbol);

  PotentialKind kind() const { return kind_; }
  // g at x on branch `branch` (0-based) of the map driving `symbol`.
  double operator()(std::size_t symbol, const FiberMap& map, std::size_t branch, double x) const;
  double operator()(std::size_t symbol, const Branch& b, std::size_t branch, double x) const;

 private:
  PotentialKind kind_ = PotentialKind::GeometricDerivative;
  std::vector<std::vector<double>> constants_;
  std::vector<Expression> expressions_;
};

struct SummabilityReport {
  double partial_sum = 0.0;  // S¹ over retained branches
  double tail_bound = 0.0;
  bool tail_analytic = false;
  std::vector<double> branch_sup;
  std::vector<double> branch_inf;
};

// Throws ValidationError when inf g ≤ 0 on a branch or when no tail bound is
// available and probed partial sums do not settle.
SummabilityReport summability_report(const Potential& g, const RandomSystem& sys, FiberId w);

enum class Variant { Closed, Open, SemiNormalized, FullyNormalized };
const char* to_string(Variant v);

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct OperatorMatrix {
  FiberId source;
  FiberId target;
  Variant variant = Variant::Closed;
  Grid source_grid;
  Grid target_grid;
  SparseMatrix matrix;  // rows index target cells, columns source cells
  double scale = 1.0;   // ρ_ω or λ_ω for the normalized variants

  GridFunction apply(const GridFunction& f) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return matrix * v; }
  // Measure side: m ↦ Mᵀm, so (Mᵀm)(f) = m(Mf).
  Eigen::VectorXd pull(const Eigen::VectorXd& m) const { return matrix.transpose() * m; }
};

struct Discretization {
  std::size_t cells = 4096;  // rounded up to a power of two
  int depth = 1;             // level of the monotonicity/hole partition merged in
};

Grid build_grid(const RandomSystem& sys, FiberId w, const Discretization& d);

// Ulam matrix of the closed or open operator from fiber w to θw.
OperatorMatrix assemble(const RandomSystem& sys, const Potential& g, const Grid& source,
                        const Grid& target, FiberId w, Variant variant);
OperatorMatrix semi_normalize(const OperatorMatrix& open, double rho);
// f ↦ M(q_ω f) / (λ q_θω) on the support of q_θω.
OperatorMatrix fully_normalize(const OperatorMatrix& open, double lambda,
                               const Eigen::VectorXd& q_source, const Eigen::VectorXd& q_target);

void write_csv(std::ostream& out, const OperatorMatrix& m);

// Grids and closed/open matrices for every fiber that has a successor.
class OperatorFamily {
 public:
  OperatorFamily(RandomSystem sys, Potential g, Discretization d);

  const RandomSystem& system() const { return sys_; }
  const BaseSystem& base() const { return sys_.base; }
  const Potential& potential() const { return g_; }
  const Discretization& discretization() const { return disc_; }

  std::size_t fiber_count() const { return grids_.size(); }
  const Grid& grid(FiberId w) const { return grids_.at(w.index); }
  bool has_operator(FiberId w) const;
  // Throws WindowExceeded when θw lies outside the window.
  const OperatorMatrix& matrix(FiberId w, Variant v) const;
  const OperatorMatrix& closed(FiberId w) const { return matrix(w, Variant::Closed); }
  const OperatorMatrix& open(FiberId w) const { return matrix(w, Variant::Open); }

  // 1_{J_ω} on the grid (fraction of each cell outside the hole).
  const Eigen::VectorXd& survivor_mask(FiberId w) const { return masks_.at(w.index); }
  bool has_hole() const { return sys_.hole.any(); }
  double tail_bound(FiberId w) const { return tails_.at(w.index); }

  GridFunction one(FiberId w) const { return GridFunction::constant(grid(w), 1.0); }
  // Closed or open iterate M_{θ^{n-1}ω}···M_ω f.
  GridFunction apply_n(FiberId w, int n, const GridFunction& f, Variant v) const;
  Eigen::VectorXd apply_n(FiberId w, int n, Eigen::VectorXd f, Variant v) const;

 private:
  RandomSystem sys_;
  Potential g_;
  Discretization disc_;
  std::vector<Grid> grids_;
  std::vector<Eigen::VectorXd> masks_;
  std::vector<double> tails_;
  std::vector<std::optional<OperatorMatrix>> closed_;
  std::vector<std::optional<OperatorMatrix>> open_;
};

// Cells of grid(w) where L^j_{θ^{-j}ω} 1 exceeds 1e-12 of its sup.
std::vector<std::size_t> support_set(const OperatorFamily& fam, FiberId w, int j);
// Cell indices where v exceeds 1e-12·max(v).
std::vector<std::size_t> support_of(const Eigen::VectorXd& v);

}  // namespace openrpf
