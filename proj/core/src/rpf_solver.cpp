#include "openrpf/rpf_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "openrpf/cone_metric.hpp"
#include "openrpf/errors.hpp"
#include "openrpf/random.hpp"

namespace openrpf {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sup_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double normalize_sup(Eigen::VectorXd& v) {
  const double s = sup_abs(v);
  if (s > 0.0) v /= s;
  return s;
}

double vector_bv_norm(const Eigen::VectorXd& v) {
  double var = 0.0;
  for (Eigen::Index i = 1; i < v.size(); ++i) var += std::abs(v[i] - v[i - 1]);
  return var + sup_abs(v);
}

const SparseMatrix& step_matrix(const OperatorFamily& fam, FiberId w, Variant v) {
  return fam.matrix(w, v).matrix;
}

// Leading right vector of the cycle product, returned at fiber 0 with sup 1.
Eigen::VectorXd cycle_right(const OperatorFamily& fam, Variant variant, Eigen::VectorXd v,
                            const SolverSettings& s, int& iterations, double& change) {
  const BaseSystem& base = fam.base();
  const FiberId start{0};
  normalize_sup(v);
  for (int it = 1; it <= s.max_iterations; ++it) {
    Eigen::VectorXd u = v;
    FiberId w = start;
    for (std::size_t t = 0; t < base.size(); ++t) {
      u = step_matrix(fam, w, variant) * u;
      w = base.advance(w, 1);
    }
    if (!(normalize_sup(u) > 0.0)) {
      throw InvariantViolation("solver: leading eigenvalue vanishes (the open system escapes completely)");
    }
    change = sup_abs(u - v);
    v = std::move(u);
    iterations = it;
    if (change < s.tolerance) return v;
  }
  throw ConvergenceError("solver: right power iteration did not converge within " +
                             std::to_string(s.max_iterations) + " cycle sweeps",
                         change);
}

// Leading left vector at fiber 0, mass 1, by transposed products taken backwards.
Eigen::VectorXd cycle_left(const OperatorFamily& fam, Variant variant, const SolverSettings& s,
                           int& iterations, double& change) {
  const BaseSystem& base = fam.base();
  const FiberId start{0};
  Eigen::VectorXd m = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(fam.grid(start).size()), 1.0);
  m /= m.sum();
  for (int it = 1; it <= s.max_iterations; ++it) {
    Eigen::VectorXd u = m;
    FiberId w = start;
    for (std::size_t t = 0; t < base.size(); ++t) {
      const FiberId prev = base.advance(w, -1);
      u = step_matrix(fam, prev, variant).transpose() * u;
      const double mass = u.sum();
      if (!(mass > 0.0)) throw InvariantViolation("solver: leading eigenvalue vanishes on the dual side");
      u /= mass;
      w = prev;
    }
    change = (u - m).cwiseAbs().sum();
    m = std::move(u);
    iterations = std::max(iterations, it);
    if (change < s.tolerance) return m;
  }
  throw ConvergenceError("solver: dual power iteration did not converge within " +
                             std::to_string(s.max_iterations) + " cycle sweeps",
                         change);
}

void finish_fiber(FiberSpectralData& d) {
  d.mu.grid = d.nu.grid;
  d.mu.masses = d.q.values.cwiseProduct(d.nu.masses);
  const double total = d.mu.masses.sum();
  if (total > 0.0) d.mu.masses /= total;
  d.normalization_residual = std::abs(d.nu.masses.dot(d.q.values) - 1.0);
}

SpectralSolution solve_cycle(const OperatorFamily& fam, Variant variant, const SolverSettings& s) {
  const BaseSystem& base = fam.base();
  const std::size_t p = base.size();
  SpectralSolution sol;
  sol.variant = variant;
  sol.fibers.resize(p);

  int it_right = 0, it_left = 0;
  double ch_right = 0.0, ch_left = 0.0;
  const Grid& g0 = fam.grid(FiberId{0});
  const auto n0 = static_cast<Eigen::Index>(g0.size());
  const Eigen::VectorXd r0 = cycle_right(fam, variant, Eigen::VectorXd::Ones(n0), s, it_right, ch_right);
  const Eigen::VectorXd m0 = cycle_left(fam, variant, s, it_left, ch_left);
  sol.iterations = std::max(it_right, it_left);
  sol.last_change = std::max(ch_right, ch_left);

  // ν around the cycle, backwards from fiber 0; λ_ω = mass of M_ωᵀ ν_θω.
  std::vector<Eigen::VectorXd> nu(p);
  std::vector<double> lambda(p);
  nu[0] = m0;
  {
    FiberId w{0};
    for (std::size_t t = 0; t < p; ++t) {
      const FiberId prev = base.advance(w, -1);
      Eigen::VectorXd u = step_matrix(fam, prev, variant).transpose() * nu[w.index];
      lambda[prev.index] = u.sum();
      if (!(lambda[prev.index] > 0.0)) throw InvariantViolation("solver: λ vanishes at fiber " + std::to_string(prev.index));
      if (prev.index != 0) nu[prev.index] = u / lambda[prev.index];
      w = prev;
    }
  }
  // q forward from fiber 0 with ν(q) = 1; q_θω = M q_ω / λ_ω.
  std::vector<Eigen::VectorXd> q(p);
  q[0] = r0 / nu[0].dot(r0);
  {
    FiberId w{0};
    for (std::size_t t = 0; t + 1 < p; ++t) {
      const FiberId next = base.advance(w, 1);
      q[next.index] = (step_matrix(fam, w, variant) * q[w.index]) / lambda[w.index];
      w = next;
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    const FiberId w{i};
    const FiberId next = base.advance(w, 1);
    FiberSpectralData& d = sol.fibers[i];
    d.fiber = w;
    d.variant = variant;
    d.lambda = lambda[i];
    d.q = {fam.grid(w), q[i]};
    d.nu = {fam.grid(w), nu[i]};
    d.lambda_error = fam.tail_bound(w);
    const Eigen::VectorXd lhs = step_matrix(fam, w, variant) * q[i];
    d.eigen_residual = sup_abs(lhs - lambda[i] * q[next.index]) / sup_abs(q[i]);
    finish_fiber(d);
  }

  // Start-function dependence: 1 + x instead of 1.
  {
    int it = 0;
    double ch = 0.0;
    Eigen::VectorXd alt = Eigen::VectorXd::Ones(n0);
    for (Eigen::Index i = 0; i < n0; ++i) alt[i] += g0.midpoint(static_cast<std::size_t>(i));
    Eigen::VectorXd r1 = cycle_right(fam, variant, alt, s, it, ch);
    r1 /= nu[0].dot(r1);
    sol.start_dependence = sup_abs(r1 - q[0]) / sup_abs(q[0]);
  }
  return sol;
}

// Pullback from the left edge: r_{k+1} = M_k r_k, q_k = r_k / ν_k(r_k).
std::vector<Eigen::VectorXd> window_q(const OperatorFamily& fam, Variant variant,
                                      const std::vector<Eigen::VectorXd>& nu, Eigen::VectorXd r) {
  const std::size_t n = fam.fiber_count();
  std::vector<Eigen::VectorXd> q(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double pairing = nu[k].dot(r);
    if (!(pairing > 0.0)) throw InvariantViolation("solver: pullback iterate lost all mass at fiber " + std::to_string(k));
    q[k] = r / pairing;
    if (k + 1 < n) {
      r = step_matrix(fam, FiberId{k}, variant) * r;
      normalize_sup(r);
    }
  }
  return q;
}

SpectralSolution solve_window(const OperatorFamily& fam, Variant variant) {
  const std::size_t n = fam.fiber_count();
  SpectralSolution sol;
  sol.variant = variant;
  sol.fibers.resize(n);
  sol.iterations = static_cast<int>(n);

  std::vector<Eigen::VectorXd> nu(n);
  std::vector<double> lambda(n, kNaN);
  const Grid& last = fam.grid(FiberId{n - 1});
  nu[n - 1] = CellMeasure::lebesgue(last).masses;
  for (std::size_t k = n - 1; k-- > 0;) {
    Eigen::VectorXd u = step_matrix(fam, FiberId{k}, variant).transpose() * nu[k + 1];
    lambda[k] = u.sum();
    if (!(lambda[k] > 0.0)) throw InvariantViolation("solver: λ vanishes at fiber " + std::to_string(k));
    nu[k] = u / lambda[k];
  }
  const Grid& first = fam.grid(FiberId{0});
  const auto n0 = static_cast<Eigen::Index>(first.size());
  const auto q = window_q(fam, variant, nu, Eigen::VectorXd::Ones(n0));
  Eigen::VectorXd alt = Eigen::VectorXd::Ones(n0);
  for (Eigen::Index i = 0; i < n0; ++i) alt[i] += first.midpoint(static_cast<std::size_t>(i));
  const auto q_alt = window_q(fam, variant, nu, alt);
  for (std::size_t k = n / 4; k < n - n / 4; ++k) {
    sol.start_dependence = std::max(sol.start_dependence, sup_abs(q[k] - q_alt[k]) / sup_abs(q[k]));
  }

  for (std::size_t k = 0; k < n; ++k) {
    const FiberId w{k};
    FiberSpectralData& d = sol.fibers[k];
    d.fiber = w;
    d.variant = variant;
    d.lambda = lambda[k];
    d.has_successor = k + 1 < n;
    d.q = {fam.grid(w), q[k]};
    d.nu = {fam.grid(w), nu[k]};
    d.lambda_error = fam.tail_bound(w);
    if (d.has_successor) {
      const Eigen::VectorXd lhs = step_matrix(fam, w, variant) * q[k];
      d.eigen_residual = sup_abs(lhs - lambda[k] * q[k + 1]) / sup_abs(q[k]);
    }
    finish_fiber(d);
  }
  return sol;
}

// Prefix integrals of a grid function for interval averages.
class PrefixIntegral {
 public:
  explicit PrefixIntegral(const GridFunction& f) : f_(f), prefix_(f.grid.size() + 1, 0.0) {
    for (std::size_t i = 0; i < f.grid.size(); ++i) {
      prefix_[i + 1] = prefix_[i] + f.values[static_cast<Eigen::Index>(i)] * f.grid.width(i);
    }
  }
  double at(double x) const {
    x = std::clamp(x, 0.0, 1.0);
    const std::size_t i = f_.grid.locate(x);
    return prefix_[i] + f_.values[static_cast<Eigen::Index>(i)] * (x - f_.grid.left(i));
  }
  double average(double lo, double hi) const {
    if (hi < lo) std::swap(lo, hi);
    if (hi - lo <= 0.0) return f_.values[static_cast<Eigen::Index>(f_.grid.locate(lo))];
    return (at(hi) - at(lo)) / (hi - lo);
  }

 private:
  const GridFunction& f_;
  std::vector<double> prefix_;
};

// Cell averages of f∘T for closed maps.
Eigen::VectorXd koopman(const OperatorFamily& fam, FiberId w, const GridFunction& f) {
  const Grid& grid = fam.grid(w);
  const FiberMap& map = fam.system().map(w);
  const PrefixIntegral integral(f);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double acc = 0.0;
    for (const Branch& b : map.branches) {
      const Interval piece = intersect(grid.cell(i), b.domain());
      if (piece.empty()) continue;
      acc += piece.length() * integral.average(b(piece.lo), b(std::nextafter(piece.hi, piece.lo)));
    }
    out[static_cast<Eigen::Index>(i)] = acc / grid.width(i);
  }
  return out;
}

double weight_along(const OperatorFamily& fam, FiberId w, double x, int n) {
  const RandomSystem& sys = fam.system();
  double g = 1.0;
  for (int t = 0; t < n; ++t) {
    const auto b = sys.map(w).locate(x);
    if (!b) return 0.0;
    g *= fam.potential()(sys.base.symbol(w), sys.map(w), *b, x);
    x = sys.map(w).branches[*b](x);
    w = sys.base.advance(w, 1);
  }
  return g;
}

// Image of [lo, hi) under n steps when it stays inside one branch (and J for
// the open operator);
// nullopt otherwise.
std::optional<Interval> image_of(const OperatorFamily& fam, FiberId w, Interval a, int n, bool open) {
  const RandomSystem& sys = fam.system();
  for (int t = 0; t < n; ++t) {
    if (open && !IntervalSet({a}).subset_of(sys.survivors(w), 1e-15)) return std::nullopt;
    const double mid = 0.5 * (a.lo + a.hi);
    const auto b = sys.map(w).locate(mid);
    if (!b) return std::nullopt;
    const Branch& br = sys.map(w).branches[*b];
    const Interval dom = br.domain();
    if (a.lo < dom.lo - 1e-15 || a.hi > dom.hi + 1e-15) return std::nullopt;
    double y0 = br(std::max(a.lo, dom.lo));
    double y1 = br(std::nextafter(std::min(a.hi, dom.hi), a.lo));
    if (std::min(a.hi, dom.hi) >= dom.hi) y1 = br.orientation() == Orientation::Increasing ? br.image().hi : br.image().lo;
    if (y1 < y0) std::swap(y0, y1);
    a = {y0, y1};
    w = sys.base.advance(w, 1);
  }
  return a;
}

}  // namespace

std::vector<FiberId> SpectralSolution::solved_fibers() const {
  std::vector<FiberId> out;
  for (const auto& d : fibers) {
    if (d.has_successor) out.push_back(d.fiber);
  }
  return out;
}

SpectralSolution solve_fiber_system(const OperatorFamily& fam, Variant variant, const SolverSettings& settings) {
  if (variant != Variant::Closed && variant != Variant::Open) {
    throw ValidationError(std::string("solver: variant must be closed or open, got ") + to_string(variant));
  }
  if (!(settings.tolerance > 0.0)) throw ValidationError("solver: tolerance must be positive");
  if (settings.max_iterations < 1) throw ValidationError("solver: max_iterations must be positive");
  return fam.base().kind() == BaseKind::FiniteCycle ? solve_cycle(fam, variant, settings)
                                                    : solve_window(fam, variant);
}

void ResidualReport::record(double r, const std::string& where) {
  ++checks;
  if (!(r <= max_residual)) {
    max_residual = r;
    worst = where;
  }
}

std::vector<GridFunction> random_test_functions(const Grid& grid, std::size_t count, std::uint64_t seed,
                                                std::string_view purpose, std::uint64_t index) {
  CounterRng rng(seed, "rpf_solver", purpose, index);
  std::vector<GridFunction> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(random_bv_function(grid, rng, k % 2 == 1));
  return out;
}

ResidualReport verify_equivariance(const OperatorFamily& fam, const SpectralSolution& sol, std::size_t count,
                                   std::uint64_t seed) {
  ResidualReport rep;
  for (const FiberId w : sol.solved_fibers()) {
    const FiberId next = fam.base().advance(w, 1);
    const auto& d = sol.at(w);
    const auto& M = fam.matrix(w, sol.variant).matrix;
    auto fs = random_test_functions(fam.grid(w), count, seed, "equivariance", w.index);
    fs.insert(fs.begin(), fam.one(w));
    for (std::size_t k = 0; k < fs.size(); ++k) {
      const Eigen::VectorXd& f = fs[k].values;
      const double lhs = sol.at(next).nu.masses.dot(M * f);
      const double rhs = d.lambda * d.nu.masses.dot(f);
      rep.record(std::abs(lhs - rhs) / vector_bv_norm(f),
                 "fiber " + std::to_string(w.index) + ", function " + std::to_string(k));
    }
  }
  return rep;
}

ResidualReport verify_eigen_equation(const OperatorFamily& fam, const SpectralSolution& sol) {
  ResidualReport rep;
  for (const FiberId w : sol.solved_fibers()) {
    const FiberId next = fam.base().advance(w, 1);
    const auto& q = sol.at(w).q.values;
    const Eigen::VectorXd lhs = fam.matrix(w, sol.variant).matrix * q;
    rep.record(sup_abs(lhs - sol.at(w).lambda * sol.at(next).q.values) / sup_abs(q),
               "fiber " + std::to_string(w.index));
  }
  return rep;
}

Eigen::VectorXd apply_fully_normalized(const OperatorFamily& fam, const SpectralSolution& sol, FiberId w,
                                       const Eigen::VectorXd& f, Variant variant) {
  const FiberId next = fam.base().advance(w, 1);
  const auto& qs = sol.at(w).q.values;
  const auto& qt = sol.at(next).q.values;
  const Eigen::VectorXd img = fam.matrix(w, variant).matrix * qs.cwiseProduct(f);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(qt.size());
  for (std::size_t i : support_of(qt)) {
    const auto k = static_cast<Eigen::Index>(i);
    out[k] = img[k] / (sol.at(w).lambda * qt[k]);
  }
  return out;
}

ResidualReport verify_t_invariance(const OperatorFamily& fam, const SpectralSolution& sol, std::size_t count,
                                   std::uint64_t seed) {
  ResidualReport rep;
  for (const FiberId w : sol.solved_fibers()) {
    const FiberId next = fam.base().advance(w, 1);
    const auto& mu_w = sol.at(w).mu.masses;
    const auto& mu_t = sol.at(next).mu.masses;
    const std::string where = "fiber " + std::to_string(w.index);

    const Eigen::VectorXd unit = apply_fully_normalized(fam, sol, w, fam.one(w).values, sol.variant);
    double unit_err = 0.0;
    for (std::size_t i : support_of(sol.at(next).q.values)) {
      unit_err = std::max(unit_err, std::abs(unit[static_cast<Eigen::Index>(i)] - 1.0));
    }
    rep.record(unit_err, where + ", L̂1 = 1");

    const auto fs = random_test_functions(fam.grid(w), count, seed, "t_invariance", w.index);
    for (std::size_t k = 0; k < fs.size(); ++k) {
      const Eigen::VectorXd& f = fs[k].values;
      const double lhs = mu_t.dot(apply_fully_normalized(fam, sol, w, f, sol.variant));
      rep.record(std::abs(lhs - mu_w.dot(f)) / vector_bv_norm(f), where + ", dual " + std::to_string(k));
    }
    if (sol.variant == Variant::Closed) {
      const auto gs = random_test_functions(fam.grid(next), count, seed, "koopman", w.index);
      for (std::size_t k = 0; k < gs.size(); ++k) {
        const double lhs = mu_t.dot(gs[k].values);
        const double rhs = mu_w.dot(koopman(fam, w, gs[k]));
        rep.record(std::abs(lhs - rhs) / vector_bv_norm(gs[k].values), where + ", Koopman " + std::to_string(k));
      }
    }
  }
  return rep;
}

ResidualReport verify_conformality(const OperatorFamily& fam, const SpectralSolution& sol, FiberId w, int n,
                                   bool branch_cells) {
  ResidualReport rep;
  if (n <= 0) {
    rep.record(0.0, "n = 0");
    return rep;
  }
  if (!fam.base().can_advance(w, n) || !sol.at(fam.base().advance(w, n - 1)).has_successor) {
    throw WindowExceeded("conformality: fiber " + std::to_string(w.index) + " cannot advance " + std::to_string(n));
  }
  double lambda_n = 1.0;
  FiberId u = w;
  for (int t = 0; t < n; ++t, u = fam.base().advance(u, 1)) lambda_n *= sol.at(u).lambda;
  const FiberId target = fam.base().advance(w, n);
  const CellMeasure& nu_t = sol.at(target).nu;
  const CellMeasure& nu_w = sol.at(w).nu;
  const Grid& grid = fam.grid(w);

  auto rhs_on = [&](const Interval& a) {
    double s = 0.0;
    for (std::size_t i : grid.cells_meeting(IntervalSet({a}))) {
      const Interval piece = intersect(grid.cell(i), a);
      const double frac = piece.length() / grid.width(i);
      const double g = weight_along(fam, w, 0.5 * (piece.lo + piece.hi), n);
      if (g > 0.0) s += frac * nu_w.masses[static_cast<Eigen::Index>(i)] / g;
    }
    return lambda_n * s;
  };
  auto check = [&](const Interval& a, const std::string& where) {
    const auto img = image_of(fam, w, a, n, sol.variant == Variant::Open);
    if (!img) return;
    const double lhs = nu_t.measure_of(IntervalSet({*img}));
    rep.record(std::abs(lhs - rhs_on(a)), where);
  };
  if (branch_cells) {
    const auto& branches = fam.system().map(w).branches;
    for (std::size_t k = 0; k < branches.size(); ++k) check(branches[k].domain(), "branch " + std::to_string(k));
  } else {
    for (std::size_t i = 0; i < grid.size(); ++i) check(grid.cell(i), "cell " + std::to_string(i));
  }
  return rep;
}

NormalizedReport verify_normalized_operators(const OperatorFamily& fam, const SpectralSolution& sol, int depth,
                                             std::size_t count, std::uint64_t seed) {
  if (sol.variant == Variant::Closed && fam.has_hole()) {
    throw ValidationError("normalized operators: pass the open solution for systems with a hole");
  }
  NormalizedReport rep;
  const BaseSystem& base = fam.base();
  const std::vector<double> rho = normalizing_constants(fam, depth);
  const auto solved = sol.solved_fibers();
  for (const FiberId w : solved) {
    const FiberId next = base.advance(w, 1);
    const auto& d = sol.at(w);
    if (!std::isnan(rho[w.index])) {
      const Eigen::VectorXd semi = apply_semi_normalized(fam, rho, w, 1, d.q.values);
      rep.semi_fixed_point = std::max(rep.semi_fixed_point,
                                      sup_abs(semi - (d.lambda / rho[w.index]) * sol.at(next).q.values) /
                                          sup_abs(sol.at(next).q.values));
      rep.rho_excess = std::max(rep.rho_excess, rho[w.index] - d.lambda);
    }
    const Eigen::VectorXd unit = apply_fully_normalized(fam, sol, w, fam.one(w).values, sol.variant);
    for (std::size_t i : support_of(sol.at(next).q.values)) {
      rep.full_unit = std::max(rep.full_unit, std::abs(unit[static_cast<Eigen::Index>(i)] - 1.0));
    }
    const auto fs = random_test_functions(fam.grid(w), count, seed, "normalized", w.index);
    for (const auto& f : fs) {
      const double lhs = sol.at(next).mu.masses.dot(apply_fully_normalized(fam, sol, w, f.values, sol.variant));
      rep.full_dual = std::max(rep.full_dual, std::abs(lhs - d.mu.masses.dot(f.values)) / vector_bv_norm(f.values));
    }
  }

  // Functional against ν on the first fiber with a long enough future.
  for (const FiberId w : solved) {
    if (!base.can_advance(w, 2)) continue;
    const FiberId next = base.advance(w, 1);
    const Functional F(fam, w, depth);
    const Functional Fn(fam, next, depth);
    CounterRng rng(seed, "rpf_solver", "functional", w.index);
    const auto& M = fam.open(w).matrix;
    for (std::size_t k = 0; k < count; ++k) {
      const Eigen::VectorXd f = random_bv_function(fam.grid(w), rng, false).values.cwiseProduct(fam.survivor_mask(w));
      if (!(sup_abs(f) > 0.0)) continue;
      const double Ff = F(f);
      const double bv = vector_bv_norm(f);
      rep.functional_identity = std::max(rep.functional_identity, std::abs(Fn(M * f) - sol.at(w).lambda * Ff) / bv);
      rep.functional_gap = std::max(rep.functional_gap, std::abs(Ff - sol.at(w).nu.masses.dot(f)) / bv);
    }
    rep.q_functional_ratio = F(sol.at(w).q.values);
    break;
  }

  // ‖L^n 1 / λ^n − ν(1) q_θⁿω‖ along the orbit of the first fiber.
  if (!solved.empty()) {
    const FiberId w = solved.front();
    Eigen::VectorXd v = fam.survivor_mask(w);
    const double nu_one = sol.at(w).nu.masses.dot(v);
    std::vector<double> gaps;
    FiberId u = w;
    for (int n = 1; n <= 40 && sol.at(u).has_successor; ++n) {
      v = fam.matrix(u, sol.variant).matrix * v / sol.at(u).lambda;
      u = base.advance(u, 1);
      gaps.push_back(sup_abs(v - nu_one * sol.at(u).q.values) / sup_abs(sol.at(u).q.values));
    }
    const LogFit fit = fit_log_decay(gaps, 1e-13);
    rep.convergence_rate = fit.points >= 2 ? std::exp(fit.slope) : 0.0;
  }
  return rep;
}

CorrelationSeries correlation_series(const OperatorFamily& fam, const SpectralSolution& sol, FiberId w,
                                     const GridFunction& f, const GridFunction& g, int n_max) {
  if (n_max < 2) throw ValidationError("correlations: n_max must be at least 2");
  CorrelationSeries cs;
  cs.fiber = w;
  const BaseSystem& base = fam.base();
  Eigen::VectorXd h = transfer_to(f, fam.grid(w)).values;
  h.array() -= sol.at(w).mu.masses.dot(h);
  FiberId u = w;
  for (int n = 0; n <= n_max; ++n) {
    const Eigen::VectorXd gu = transfer_to(g, fam.grid(u)).values;
    cs.values.push_back(sol.at(u).mu.masses.dot(h.cwiseProduct(gu)));
    if (n == n_max || !sol.at(u).has_successor) break;
    h = apply_fully_normalized(fam, sol, u, h, sol.variant);
    u = base.advance(u, 1);
  }
  const LogFit fit = fit_log_decay(cs.values, 1e-13);
  cs.fitted_points = fit.points;
  if (fit.points >= 2) {
    cs.kappa = std::exp(fit.slope);
    cs.prefactor = std::exp(fit.intercept);
  }
  return cs;
}

LogFit fit_log_decay(const std::vector<double>& y, double floor, std::size_t first) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  LogFit fit;
  for (std::size_t i = first; i < y.size(); ++i) {
    if (!(std::abs(y[i]) > floor)) continue;
    const double x = static_cast<double>(i);
    const double ly = std::log(std::abs(y[i]));
    sx += x;
    sy += ly;
    sxx += x * x;
    sxy += x * ly;
    ++fit.points;
  }
  if (fit.points == 0) return fit;
  const double n = static_cast<double>(fit.points);
  const double den = n * sxx - sx * sx;
  fit.slope = den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

}  // namespace openrpf
