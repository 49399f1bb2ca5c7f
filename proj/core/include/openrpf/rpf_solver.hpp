#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "openrpf/transfer_op.hpp"

namespace openrpf {

struct SolverSettings {
  double tolerance = 1e-12;  // relative sup-change
  int max_iterations = 10000;
};

struct FiberSpectralData {
  FiberId fiber;
  Variant variant = Variant::Closed;
  double lambda = 0.0;  // NaN at the last fiber of a window
  GridFunction q;
  CellMeasure nu;
  CellMeasure mu;
  double eigen_residual = 0.0;          // ‖L q_ω − λ q_θω‖_∞ / ‖q‖_∞
  double normalization_residual = 0.0;  // |ν(q) − 1|
  double lambda_error = 0.0;            // tail bound carried as an error bar
  bool has_successor = true;
};

struct SpectralSolution {
  Variant variant = Variant::Closed;
  std::vector<FiberSpectralData> fibers;  // indexed by FiberId
  int iterations = 0;
  double last_change = 0.0;
  // Windows: sup-distance between q pulled back from 1 and from 1 + x, over
  // the middle half of the window. Cycles: the same comparison on the cycle.
  double start_dependence = 0.0;

  const FiberSpectralData& at(FiberId w) const { return fibers.at(w.index); }
  // Fibers whose λ is defined.
  std::vector<FiberId> solved_fibers() const;
};

// Throws ConvergenceError past the iteration cap and InvariantViolation when
// the leading eigenvalue vanishes.
SpectralSolution solve_fiber_system(const OperatorFamily& fam, Variant variant,
                                    const SolverSettings& settings = {});

struct ResidualReport {
  double max_residual = 0.0;
  std::size_t checks = 0;
  std::string worst;  // where the max was attained

  void record(double r, const std::string& where);
};

std::vector<GridFunction> random_test_functions(const Grid& grid, std::size_t count,
                                                std::uint64_t seed, std::string_view purpose,
                                                std::uint64_t index);

// max |ν_θω(L f) − λ ν_ω(f)| / ‖f‖_BV.
ResidualReport verify_equivariance(const OperatorFamily& fam, const SpectralSolution& sol,
                                   std::size_t count, std::uint64_t seed);
// max ‖L q_ω − λ q_θω‖_∞ / ‖q‖_∞.
ResidualReport verify_eigen_equation(const OperatorFamily& fam, const SpectralSolution& sol);
// μ_θω(L̂ f) = μ_ω(f) and L̂ 1 = 1 on supp μ_θω; for closed systems also
// μ_θω(f) = μ_ω(f∘T) with f∘T averaged over cell images.
ResidualReport verify_t_invariance(const OperatorFamily& fam, const SpectralSolution& sol,
                                   std::size_t count, std::uint64_t seed);
// ν_θⁿω(Tⁿ A) against λⁿ ∫_A 1/gⁿ dν_ω; A runs over grid cells (n > 0) or
// whole branch domains (n = 1, `branch_cells`).
ResidualReport verify_conformality(const OperatorFamily& fam, const SpectralSolution& sol,
                                   FiberId w, int n, bool branch_cells = false);

struct NormalizedReport {
  double semi_fixed_point = 0.0;    // ‖L̃ q_ω − (λ/ρ) q_θω‖ relative
  double full_unit = 0.0;           // ‖L̂ 1 − 1‖ on supp q_θω
  double full_dual = 0.0;           // |μ_θω(L̂ f) − μ_ω(f)|
  double rho_excess = 0.0;          // max(ρ_ω − λ_ω)
  double functional_identity = 0.0; // |F_θω(L f) − λ F_ω(f)|, F from ν
  double functional_gap = 0.0;      // |F_depth(f) − ν(f)| / ‖f‖_BV
  double convergence_rate = 0.0;    // ι fitted from ‖L̃^n 1 − ν(1)·q‖
  double q_functional_ratio = 0.0;  // F_depth(q_ω), reported only
};

NormalizedReport verify_normalized_operators(const OperatorFamily& fam,
                                             const SpectralSolution& sol, int depth,
                                             std::size_t count, std::uint64_t seed);

// L̂ f = M(q_ω f) / (λ q_θω) on the support, 0 elsewhere.
Eigen::VectorXd apply_fully_normalized(const OperatorFamily& fam, const SpectralSolution& sol,
                                       FiberId w, const Eigen::VectorXd& f, Variant variant);

struct CorrelationSeries {
  FiberId fiber;
  std::vector<double> values;  // corr(n), n = 0..n_max
  std::optional<double> kappa;  // nullopt when every |corr| is below the floor
  double prefactor = 0.0;
  std::size_t fitted_points = 0;
};

CorrelationSeries correlation_series(const OperatorFamily& fam, const SpectralSolution& sol,
                                     FiberId w, const GridFunction& f, const GridFunction& g,
                                     int n_max);

// Least-squares slope of log|y| over the points with |y| > floor.
struct LogFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};
LogFit fit_log_decay(const std::vector<double>& y, double floor = 1e-13, std::size_t first = 0);

}  // namespace openrpf
