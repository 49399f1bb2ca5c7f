#pragma once

#include <cstddef>
#include <vector>

#include "openrpf/rpf_solver.hpp"

namespace openrpf {

struct PressureReport {
  double ep_closed = 0.0;
  double ep_open = 0.0;
  double tail_slack = 0.0;
  std::vector<double> log_lambda_closed;  // per solved fiber
  std::vector<double> log_lambda_open;
  // sup over the support of |(1/n) log L^n 1 − (1/n) log λ^n|, n = 1..
  std::vector<double> sanity_series;
  bool sanity_decreasing = true;
};

PressureReport expected_pressure(const OperatorFamily& fam, const SpectralSolution& closed,
                                 const SpectralSolution& open, int sanity_steps = 16);

struct EscapeReport {
  FiberId fiber;
  std::vector<double> log_survivor_mass;  // log ν_c(K_{ω,n}), n = 0..n_max
  std::vector<double> running_rate;       // −(1/n) log ν_c(K_n), n ≥ 1 (NaN at 0)
  double fitted_rate = 0.0;
  double spectral_rate = 0.0;
  double discrepancy = 0.0;
  // inf/sup of the running rate over the tail half.
  double lower_rate = 0.0;
  double upper_rate = 0.0;
  // inf/sup of one-period local rates over the tail half; these bracket the fit.
  double local_lower = 0.0;
  double local_upper = 0.0;
  bool truncated = false;  // mass fell below the floor before n_max
  // Exact survivor intervals against the same ν_c, while small enough.
  int geometric_depth = 0;
  double geometric_discrepancy = 0.0;
};

EscapeReport escape_rate(const OperatorFamily& fam, const SpectralSolution& closed,
                         const PressureReport& pressure, FiberId w, int n_max,
                         int geometric_depth = 10);

struct CondInvMeasure {
  std::vector<CellMeasure> tau;      // per solved fiber, normalized on J
  std::vector<double> c_ratio;       // λ_ω / λ_ω,c
  std::vector<double> c_measure;     // τ_ω(K_{ω,1})
  std::vector<double> j_mass;        // ∫_J q dν_c before normalization
  std::vector<double> lemma_residual;  // ‖L q_ω − c λ_c q_θω‖ / ‖q‖
  std::vector<FiberId> fibers;
};

CondInvMeasure conditionally_invariant(const OperatorFamily& fam, const SpectralSolution& closed,
                                       const SpectralSolution& open);

struct ConditionalInvarianceReport {
  double max_residual = 0.0;
  double multiplicativity = 0.0;
  double product_rule = 0.0;  // |τ(K_n) − Π c_measure|
  std::size_t sets_tested = 0;
};

ConditionalInvarianceReport verify_conditional_invariance(const OperatorFamily& fam,
                                                          const CondInvMeasure& tau, FiberId w,
                                                          int depth, std::size_t max_sets = 256);

}  // namespace openrpf
