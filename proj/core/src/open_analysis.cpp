#include "openrpf/open_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "openrpf/errors.hpp"

namespace openrpf {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sup_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double weighted_log_lambda(const BaseSystem& base, const SpectralSolution& sol, std::vector<double>& logs) {
  const auto fibers = sol.solved_fibers();
  logs.clear();
  for (const FiberId w : fibers) {
    const double l = sol.at(w).lambda;
    logs.push_back(l > 0.0 ? std::log(l) : -std::numeric_limits<double>::infinity());
  }
  return base.average_over(fibers, logs);
}

}  // namespace

PressureReport expected_pressure(const OperatorFamily& fam, const SpectralSolution& closed,
                                 const SpectralSolution& open, int sanity_steps) {
  if (closed.variant != Variant::Closed || open.variant != Variant::Open) {
    throw ValidationError("expected_pressure: needs a closed and an open solution");
  }
  PressureReport rep;
  const BaseSystem& base = fam.base();
  rep.ep_closed = weighted_log_lambda(base, closed, rep.log_lambda_closed);
  rep.ep_open = weighted_log_lambda(base, open, rep.log_lambda_open);
  for (const FiberId w : closed.solved_fibers()) rep.tail_slack = std::max(rep.tail_slack, fam.tail_bound(w));

  const auto solved = open.solved_fibers();
  if (solved.empty()) return rep;
  FiberId u = solved.front();
  Eigen::VectorXd v = fam.survivor_mask(u);
  double log_scale = 0.0;
  double log_lambda = 0.0;
  for (int n = 1; n <= sanity_steps && open.at(u).has_successor; ++n) {
    v = fam.open(u).matrix * v;
    log_lambda += std::log(open.at(u).lambda);
    u = base.advance(u, 1);
    const double s = sup_abs(v);
    if (!(s > 0.0)) break;
    v /= s;
    log_scale += std::log(s);
    double worst = 0.0;
    for (std::size_t i : support_of(v)) {
      const double lv = log_scale + std::log(v[static_cast<Eigen::Index>(i)]);
      worst = std::max(worst, std::abs(lv - log_lambda) / n);
    }
    rep.sanity_series.push_back(worst);
  }
  for (std::size_t k = 1; k < rep.sanity_series.size(); ++k) {
    if (rep.sanity_series[k] > rep.sanity_series[k - 1] + 1e-12) rep.sanity_decreasing = false;
  }
  return rep;
}

EscapeReport escape_rate(const OperatorFamily& fam, const SpectralSolution& closed,
                         const PressureReport& pressure, FiberId w, int n_max, int geometric_depth) {
  if (closed.variant != Variant::Closed) throw ValidationError("escape_rate: needs the closed solution");
  if (n_max < 2) throw ValidationError("escape_rate: n_max must be at least 2");
  const BaseSystem& base = fam.base();
  EscapeReport rep;
  rep.fiber = w;
  rep.spectral_rate = pressure.ep_closed - pressure.ep_open;

  // log ν_c,ω(K_n) = log ν_c,θⁿω(1_J · M_open^n 1) − Σ log λ_c.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(fam.grid(w).size()));
  double log_scale = 0.0;
  double log_lambda = 0.0;
  FiberId u = w;
  for (int n = 0; n <= n_max; ++n) {
    const double pairing = closed.at(u).nu.masses.dot(fam.survivor_mask(u).cwiseProduct(v));
    if (!(pairing > 0.0)) {
      rep.truncated = true;
      break;
    }
    rep.log_survivor_mass.push_back(std::log(pairing) + log_scale - log_lambda);
    rep.running_rate.push_back(n == 0 ? kNaN : -rep.log_survivor_mass.back() / n);
    if (n == n_max) break;
    if (!closed.at(u).has_successor) {
      rep.truncated = true;
      break;
    }
    v = fam.open(u).matrix * v;
    log_lambda += std::log(closed.at(u).lambda);
    u = base.advance(u, 1);
    const double s = sup_abs(v);
    if (!(s > 0.0)) {
      rep.truncated = true;
      break;
    }
    v /= s;
    log_scale += std::log(s);
  }
  const int last = static_cast<int>(rep.log_survivor_mass.size()) - 1;
  if (last < 2) throw InvariantViolation("escape_rate: survivor mass vanishes after " + std::to_string(last) + " steps");

  // Tail-half regression, sampled once per base period.
  const int period = static_cast<int>(base.period());
  const int start = std::max(1, last / 2);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int points = 0;
  for (int n = last; n >= start; n -= period) {
    const double y = rep.log_survivor_mass[static_cast<std::size_t>(n)];
    sx += n;
    sy += y;
    sxx += static_cast<double>(n) * n;
    sxy += n * y;
    ++points;
  }
  if (points < 2) {
    rep.fitted_rate = rep.running_rate[static_cast<std::size_t>(last)];
  } else {
    rep.fitted_rate = -(points * sxy - sx * sy) / (points * sxx - sx * sx);
  }
  rep.discrepancy = std::abs(rep.fitted_rate - rep.spectral_rate);

  rep.lower_rate = rep.upper_rate = rep.running_rate[static_cast<std::size_t>(last)];
  rep.local_lower = std::numeric_limits<double>::infinity();
  rep.local_upper = -std::numeric_limits<double>::infinity();
  for (int n = start; n <= last; ++n) {
    const double r = rep.running_rate[static_cast<std::size_t>(n)];
    rep.lower_rate = std::min(rep.lower_rate, r);
    rep.upper_rate = std::max(rep.upper_rate, r);
    if (n - period >= 0) {
      const double local = -(rep.log_survivor_mass[static_cast<std::size_t>(n)] -
                             rep.log_survivor_mass[static_cast<std::size_t>(n - period)]) / period;
      rep.local_lower = std::min(rep.local_lower, local);
      rep.local_upper = std::max(rep.local_upper, local);
    }
  }
  if (!(rep.local_lower <= rep.local_upper)) rep.local_lower = rep.local_upper = rep.fitted_rate;

  // Exact survivor intervals, while the interval count stays manageable.
  const int geo = std::min(geometric_depth, last);
  for (int n = 0; n <= geo; ++n) {
    IntervalSet K;
    try {
      K = survivor_set(fam.system(), w, n, std::size_t{1} << 16).cells;
    } catch (const ValidationError&) {
      break;
    }
    const double direct = closed.at(w).nu.measure_of(K);
    const double dual = std::exp(rep.log_survivor_mass[static_cast<std::size_t>(n)]);
    rep.geometric_discrepancy = std::max(rep.geometric_discrepancy, std::abs(direct - dual) / dual);
    rep.geometric_depth = n;
  }
  return rep;
}

CondInvMeasure conditionally_invariant(const OperatorFamily& fam, const SpectralSolution& closed,
                                       const SpectralSolution& open) {
  if (closed.variant != Variant::Closed || open.variant != Variant::Open) {
    throw ValidationError("conditionally_invariant: needs a closed and an open solution");
  }
  CondInvMeasure out;
  const std::size_t n = fam.fiber_count();
  out.tau.resize(n);
  out.c_ratio.assign(n, kNaN);
  out.c_measure.assign(n, kNaN);
  out.j_mass.assign(n, 0.0);
  out.lemma_residual.assign(n, kNaN);
  for (std::size_t i = 0; i < n; ++i) {
    const FiberId w{i};
    CellMeasure& t = out.tau[i];
    t.grid = fam.grid(w);
    t.masses = fam.survivor_mask(w).cwiseProduct(open.at(w).q.values).cwiseProduct(closed.at(w).nu.masses);
    out.j_mass[i] = t.masses.sum();
    if (!(out.j_mass[i] > 0.0)) {
      throw InvariantViolation("conditionally invariant measure: τ has no mass on J at fiber " + std::to_string(i));
    }
    t.masses /= out.j_mass[i];
  }
  for (const FiberId w : open.solved_fibers()) {
    const std::size_t i = w.index;
    const FiberId next = fam.base().advance(w, 1);
    out.fibers.push_back(w);
    out.c_ratio[i] = open.at(w).lambda / closed.at(w).lambda;
    out.c_measure[i] = out.tau[i].measure_of(pullback_set(fam.system(), w, 1, IntervalSet::unit()));
    const Eigen::VectorXd jq = fam.survivor_mask(w).cwiseProduct(open.at(w).q.values);
    const Eigen::VectorXd lhs = fam.closed(w).matrix * jq;
    const Eigen::VectorXd rhs = out.c_ratio[i] * closed.at(w).lambda * open.at(next).q.values;
    out.lemma_residual[i] = sup_abs(lhs - rhs) / sup_abs(open.at(next).q.values);
  }
  return out;
}

ConditionalInvarianceReport verify_conditional_invariance(const OperatorFamily& fam, const CondInvMeasure& tau,
                                                          FiberId w, int depth, std::size_t max_sets) {
  if (depth < 0) throw ValidationError("conditional invariance: depth must be non-negative");
  const BaseSystem& base = fam.base();
  const RandomSystem& sys = fam.system();
  ConditionalInvarianceReport rep;

  std::vector<IntervalSet> sets;
  for (int level = 1; level <= std::max(depth, 1) && sets.size() < max_sets; ++level) {
    const double width = std::ldexp(1.0, -level);
    for (long k = 0; k < (1L << level) && sets.size() < max_sets; ++k) {
      sets.push_back(IntervalSet({{k * width, (k + 1) * width}}));
    }
  }
  rep.sets_tested = sets.size();

  std::vector<double> tau_K;  // τ_ω(K_n)
  constexpr std::size_t kCap = std::size_t{1} << 16;
  try {
    for (int n = 0; n <= depth && base.can_advance(w, n); ++n) {
      const FiberId t = base.advance(w, n);
      tau_K.push_back(tau.tau[w.index].measure_of(pullback_set(sys, w, n, IntervalSet::unit(), kCap)));
      for (const IntervalSet& a : sets) {
        const IntervalSet A = a.intersect(sys.survivors(t));
        const double lhs = tau.tau[w.index].measure_of(pullback_set(sys, w, n, A, kCap));
        const double rhs = tau_K.back() * tau.tau[t.index].measure_of(A);
        rep.max_residual = std::max(rep.max_residual, std::abs(lhs - rhs));
      }
    }
  } catch (const ValidationError&) {
    // Interval count exceeded the cap: keep the levels reached so far.
  }

  double product = 1.0;
  for (std::size_t n = 1; n < tau_K.size(); ++n) {
    const FiberId u = base.advance(w, static_cast<long long>(n) - 1);
    product *= tau.c_measure.at(u.index);
    if (!std::isnan(product)) rep.product_rule = std::max(rep.product_rule, std::abs(tau_K[n] - product));
  }
  try {
    for (std::size_t n = 0; n < tau_K.size(); ++n) {
      const FiberId t = base.advance(w, static_cast<long long>(n));
      for (std::size_t m = 0; n + m < tau_K.size(); ++m) {
        const double Km = tau.tau[t.index].measure_of(pullback_set(sys, t, static_cast<int>(m), IntervalSet::unit(), kCap));
        rep.multiplicativity = std::max(rep.multiplicativity, std::abs(tau_K[n + m] - tau_K[n] * Km));
      }
    }
  } catch (const ValidationError&) {
  }
  return rep;
}

}  // namespace openrpf
