#include "openrpf/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "openrpf/errors.hpp"
#include "openrpf/open_analysis.hpp"
#include "openrpf/scenarios.hpp"

namespace openrpf {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

// A named table emitted as CSV or as a JSON array of records.
struct Table {
  using Cell = std::variant<double, long long, std::string>;
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

std::string cell_text(const Table::Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

json cell_json(const Table::Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return number(*d);
  if (const auto* i = std::get_if<long long>(&c)) return *i;
  return std::get<std::string>(c);
}

class Emitter {
 public:
  Emitter(fs::path dir, std::string format, ResultBundle& bundle)
      : dir_(std::move(dir)), format_(std::move(format)), bundle_(bundle) {
    fs::create_directories(dir_);
  }

  void table(const Table& t) {
    const fs::path path = dir_ / (t.name + (format_ == "json" ? ".json" : ".csv"));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    if (format_ == "json") {
      json arr = json::array();
      for (const auto& row : t.rows) {
        json rec = json::object();
        for (std::size_t k = 0; k < t.columns.size(); ++k) rec[t.columns[k]] = cell_json(row[k]);
        arr.push_back(std::move(rec));
      }
      out << arr.dump(1) << '\n';
    } else {
      for (std::size_t k = 0; k < t.columns.size(); ++k) out << (k ? "," : "") << t.columns[k];
      out << '\n';
      for (const auto& row : t.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << cell_text(row[k]);
        out << '\n';
      }
    }
    bundle_.files.push_back(path.string());
  }

  void raw(const std::string& name, const std::function<void(std::ostream&)>& write) {
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    write(out);
    bundle_.files.push_back(path.string());
  }

  void summary(const json& j, const std::string& name = "summary.json") {
    raw(name, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
  }

 private:
  fs::path dir_;
  std::string format_;
  ResultBundle& bundle_;
};

class Stopwatch {
 public:
  explicit Stopwatch(ResultBundle& b) : bundle_(b) {}
  template <class F>
  auto time(const std::string& label, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    auto result = f();
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
    bundle_.timings.emplace_back(label, d.count());
    return result;
  }

 private:
  ResultBundle& bundle_;
};

ExperimentConfig apply_options(ExperimentConfig cfg, const RunOptions& options) {
  if (options.seed) {
    cfg.analysis.seed = *options.seed;
    cfg.cones.seed = *options.seed;
  }
  if (options.format) {
    if (*options.format != "csv" && *options.format != "json") throw ValidationError("--format: expected csv or json");
    cfg.outputs.format = *options.format;
  }
  if (options.out_dir) cfg.outputs.dir = *options.out_dir;
  return cfg;
}

json timings_json(const ResultBundle& b) {
  json t = json::object();
  for (const auto& [k, v] : b.timings) t[k] = v;
  return t;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

GridFunction observable(const Grid& grid, const std::string& source) {
  const Expression e = Expression::parse(source);
  return GridFunction::sample(grid, [&](double x) { return e(x); });
}

// Fiber used for single-fiber analyses; windows need room on both sides.
FiberId analysis_fiber(const ExperimentConfig& cfg) { return FiberId{cfg.analysis.fiber}; }

void emit_spectral(Emitter& em, const OperatorFamily& fam, const SpectralSolution& sol, bool export_matrices) {
  const std::string v = to_string(sol.variant);
  for (const auto& d : sol.fibers) {
    const std::string suffix = v + "_" + std::to_string(d.fiber.index);
    Table q{"q_" + suffix, {"x_left", "x_right", "value"}, {}};
    Table nu{"nu_" + suffix, {"x_left", "x_right", "mass"}, {}};
    Table mu{"mu_" + suffix, {"x_left", "x_right", "mass"}, {}};
    const Grid& g = d.q.grid;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      q.add({g.left(i), g.right(i), d.q.values[k]});
      nu.add({g.left(i), g.right(i), d.nu.masses[k]});
      mu.add({g.left(i), g.right(i), d.mu.masses[k]});
    }
    em.table(q);
    em.table(nu);
    em.table(mu);
    if (export_matrices && fam.has_operator(d.fiber)) {
      em.raw("matrix_" + suffix + ".csv", [&](std::ostream& out) { write_csv(out, fam.matrix(d.fiber, sol.variant)); });
    }
  }
}

json spectral_json(const SpectralSolution& sol) {
  json fibers = json::array();
  for (const auto& d : sol.fibers) {
    fibers.push_back({{"fiber", d.fiber.index},
                      {"lambda", number(d.lambda)},
                      {"residual", number(d.eigen_residual)},
                      {"mass", d.nu.masses.sum()},
                      {"normalization_residual", d.normalization_residual},
                      {"lambda_error", number(d.lambda_error)}});
  }
  return {{"variant", to_string(sol.variant)},
          {"iterations", sol.iterations},
          {"last_change", sol.last_change},
          {"start_dependence", sol.start_dependence},
          {"fibers", fibers}};
}

struct Solved {
  SpectralSolution closed;
  SpectralSolution open;
};

Solved solve_both(const OperatorFamily& fam, const ExperimentConfig& cfg, Stopwatch& sw) {
  Solved s;
  s.closed = sw.time("solve_closed", [&] { return solve_fiber_system(fam, Variant::Closed, cfg.solver); });
  s.open = fam.has_hole() ? sw.time("solve_open", [&] { return solve_fiber_system(fam, Variant::Open, cfg.solver); })
                          : [&] {
                              SpectralSolution o = s.closed;
                              o.variant = Variant::Open;
                              for (auto& d : o.fibers) d.variant = Variant::Open;
                              return o;
                            }();
  return s;
}

json run_solve(const OperatorFamily& fam, const ExperimentConfig& cfg, Emitter& em, Stopwatch& sw) {
  const Solved s = solve_both(fam, cfg, sw);
  emit_spectral(em, fam, s.closed, cfg.outputs.export_matrices);
  if (fam.has_hole()) emit_spectral(em, fam, s.open, cfg.outputs.export_matrices);
  json j = {{"closed", spectral_json(s.closed)}};
  if (fam.has_hole()) j["open"] = spectral_json(s.open);
  return j;
}

json run_escape(const OperatorFamily& fam, const ExperimentConfig& cfg, Emitter& em, Stopwatch& sw) {
  const Solved s = solve_both(fam, cfg, sw);
  const PressureReport p = expected_pressure(fam, s.closed, s.open);
  const EscapeReport e = sw.time("escape", [&] {
    return escape_rate(fam, s.closed, p, analysis_fiber(cfg), cfg.analysis.escape_n_max, cfg.analysis.geometric_depth);
  });
  const CondInvMeasure tau = conditionally_invariant(fam, s.closed, s.open);

  Table seq{"escape", {"n", "log_survivor_mass", "running_rate"}, {}};
  for (std::size_t n = 0; n < e.log_survivor_mass.size(); ++n) {
    seq.add({static_cast<long long>(n), e.log_survivor_mass[n], e.running_rate[n]});
  }
  em.table(seq);
  Table cf{"c_factors", {"fiber", "c_ratio", "c_measure", "j_mass", "lemma_residual"}, {}};
  json factors = json::array();
  for (const FiberId w : tau.fibers) {
    const std::size_t i = w.index;
    cf.add({static_cast<long long>(i), tau.c_ratio[i], tau.c_measure[i], tau.j_mass[i], tau.lemma_residual[i]});
    factors.push_back({{"fiber", i}, {"c_ratio", number(tau.c_ratio[i])}, {"c_measure", number(tau.c_measure[i])}});
  }
  em.table(cf);
  for (const FiberId w : tau.fibers) {
    const CellMeasure& t = tau.tau[w.index];
    Table tt{"tau_" + std::to_string(w.index), {"x_left", "x_right", "mass"}, {}};
    for (std::size_t i = 0; i < t.grid.size(); ++i) tt.add({t.grid.left(i), t.grid.right(i), t.masses[static_cast<Eigen::Index>(i)]});
    em.table(tt);
  }
  return {{"fiber", e.fiber.index},
          {"spectral_rate", number(e.spectral_rate)},
          {"fitted_rate", number(e.fitted_rate)},
          {"discrepancy", number(e.discrepancy)},
          {"lower_rate", number(e.lower_rate)},
          {"upper_rate", number(e.upper_rate)},
          {"local_lower", number(e.local_lower)},
          {"local_upper", number(e.local_upper)},
          {"truncated", e.truncated},
          {"geometric_depth", e.geometric_depth},
          {"geometric_discrepancy", number(e.geometric_discrepancy)},
          {"ep_closed", number(p.ep_closed)},
          {"ep_open", number(p.ep_open)},
          {"tail_slack", number(p.tail_slack)},
          {"c_factors", factors}};
}

json run_correlations(const OperatorFamily& fam, const ExperimentConfig& cfg, Emitter& em, Stopwatch& sw) {
  const Solved s = solve_both(fam, cfg, sw);
  const FiberId w = analysis_fiber(cfg);
  const GridFunction f = observable(fam.grid(w), cfg.analysis.observable_f);
  const GridFunction g = observable(fam.grid(w), cfg.analysis.observable_g);
  const CorrelationSeries cs = sw.time("correlations", [&] {
    return correlation_series(fam, s.open, w, f, g, cfg.analysis.correlation_n_max);
  });
  Table t{"correlations", {"n", "corr"}, {}};
  for (std::size_t n = 0; n < cs.values.size(); ++n) t.add({static_cast<long long>(n), cs.values[n]});
  em.table(t);
  return {{"fiber", w.index},
          {"f", cfg.analysis.observable_f},
          {"g", cfg.analysis.observable_g},
          {"kappa", cs.kappa ? number(*cs.kappa) : json(nullptr)},
          {"prefactor", number(cs.prefactor)},
          {"fitted_points", cs.fitted_points}};
}

FiberId cone_fiber(const ClassificationReport& cls, FiberId preferred) {
  for (const FiberId w : cls.fibers) {
    if (w == preferred) return w;
  }
  return cls.fibers.front();
}

json run_cones(const OperatorFamily& fam, const ExperimentConfig& cfg, Emitter& em, Stopwatch& sw, int& exit) {
  const ClassificationReport cls = sw.time("classify", [&] { return classify_fibers(fam, cfg.cones); });
  const FiberId w = cone_fiber(cls, analysis_fiber(cfg));
  const ContractionReport cr = sw.time("contraction", [&] {
    return contraction_diagnostics(fam, cls, w, cfg.analysis.contraction_iterates, cfg.analysis.contraction_pairs,
                                   cfg.cones.seed);
  });
  const LemmaReport lr = sw.time("lemmas", [&] { return check_cone_lemmas(fam, cls, w, 20, cfg.cones.seed); });

  Table fib{"cone_fibers", {"fiber", "growth", "c_epsilon", "block_log_average", "envelope_ok", "zeta_ok", "good",
                            "log_gamma", "coating_length"}, {}};
  for (std::size_t k = 0; k < cls.fibers.size(); ++k) {
    const auto& c = cls.classes[k];
    fib.add({static_cast<long long>(c.fiber.index), cls.growth[k], c.c_epsilon, c.block_log_average,
             static_cast<long long>(c.envelope_ok), static_cast<long long>(c.zeta_ok), static_cast<long long>(c.good),
             c.log_gamma, c.coating_length ? static_cast<long long>(*c.coating_length) : -1LL});
  }
  em.table(fib);
  Table ly{"lasota_yorke", {"fiber", "n", "a", "eta", "delta", "weight_sup", "A", "B", "rho_n", "C", "D",
                            "empirical_scale", "samples", "violations"}, {}};
  std::size_t violations = 0;
  for (const auto& row : cls.ly) {
    for (const auto& c : row) {
      ly.add({static_cast<long long>(c.fiber.index), static_cast<long long>(c.n), c.a, static_cast<long long>(c.eta),
              c.delta, c.weight_sup, c.A, c.B, c.rho_n, c.C, c.D, c.empirical_scale,
              static_cast<long long>(c.samples), static_cast<long long>(c.violations)});
      violations += c.violations;
    }
  }
  em.table(ly);
  Table ref{"contraction", {"n", "distance"}, {}};
  for (std::size_t n = 0; n < cr.reference_distances.size(); ++n) ref.add({static_cast<long long>(n), cr.reference_distances[n]});
  em.table(ref);
  if (violations > 0) exit = exit_code::invariant;

  json warnings = json::array();
  for (const auto& s : cls.warnings) warnings.push_back(s);
  return {{"Nc", cls.Nc},
          {"xi", number(cls.xi)},
          {"zeta", number(cls.zeta)},
          {"B", number(cls.B)},
          {"q_a", cls.q_a},
          {"R", cls.R},
          {"a_tilde", number(cls.a_tilde)},
          {"a0", number(cls.a0)},
          {"cone_a", number(cls.cone_parameter())},
          {"ly_violations", violations},
          {"contraction",
           {{"fiber", cr.fiber.index},
            {"iterates", cr.iterates},
            {"decay_rate", number(cr.decay_rate)},
            {"delta_estimate", number(cr.delta_estimate)},
            {"birkhoff_factor", number(cr.birkhoff_factor)},
            {"worst_ratio", number(cr.worst_ratio)},
            {"checked_pairs", cr.checked_pairs},
            {"images_in_contracted_cone", cr.images_in_contracted_cone},
            {"cone_margin", number(cr.cone_margin)},
            {"sup_norm_excess", number(cr.sup_norm_excess)}}},
          {"lemmas",
           {{"functional_chain", number(lr.functional_chain)},
            {"rho_chain", number(lr.rho_chain)},
            {"block_bound", number(lr.block_bound)},
            {"small_cells_level", lr.small_cells_level ? json(*lr.small_cells_level) : json(nullptr)},
            {"good_cell_level", lr.good_cell_level},
            {"good_cell_hypothesis", lr.good_cell_hypothesis},
            {"good_cell_deficit", number(lr.good_cell_deficit)},
            {"rate_weight", number(lr.rate_weight)},
            {"rate_eta", number(lr.rate_eta)},
            {"rate_inf", number(lr.rate_inf)},
            {"contracting", lr.contracting}}},
          {"warnings", warnings}};
}

// ---------------------------------------------------------------------------
// Invariant suite.

class CheckSink {
 public:
  CheckSink(std::string scenario, std::vector<CheckRow>& rows) : scenario_(std::move(scenario)), rows_(rows) {}

  // value ≤ tolerance
  void at_most(const std::string& name, double value, double tolerance) {
    rows_.push_back({scenario_, name, value, tolerance, value <= tolerance});
  }
  void holds(const std::string& name, bool ok, double value = std::numeric_limits<double>::quiet_NaN()) {
    rows_.push_back({scenario_, name, value, std::numeric_limits<double>::quiet_NaN(), ok});
  }

 private:
  std::string scenario_;
  std::vector<CheckRow>& rows_;
};

void check_scenario(const ExperimentConfig& cfg, CheckSink& sink, Stopwatch& sw) {
  const double tol = cfg.analysis.tolerance;
  const std::uint64_t seed = cfg.analysis.seed;
  const std::size_t samples = cfg.analysis.samples;
  const OperatorFamily fam = sw.time(cfg.name + ":assemble", [&] { return OperatorFamily(cfg.system, cfg.potential, cfg.discretization); });
  const BaseSystem& base = fam.base();
  const FiberId w = analysis_fiber(cfg);

  // Phase space and function space.
  for (std::size_t i = 0; i < fam.fiber_count(); ++i) {
    const SummabilityReport sr = summability_report(cfg.potential, cfg.system, FiberId{i});
    sink.holds("summable_fiber_" + std::to_string(i), std::isfinite(sr.partial_sum + sr.tail_bound), sr.partial_sum);
  }
  if (fam.has_hole()) {
    const int depth = std::min(6, base.can_advance(w, 6) ? 6 : 1);
    try {
      const double m = survivor_set(cfg.system, w, depth, std::size_t{1} << 16).cells.measure();
      sink.holds("survivor_set_nonempty", m > 0.0, m);
    } catch (const ValidationError&) {
      const double m = CellMeasure::lebesgue(fam.grid(w)).masses.dot(fam.apply_n(w, 1, fam.survivor_mask(w), Variant::Open));
      sink.holds("survivor_set_nonempty", m > 0.0, m);
    }
  }
  {
    const Functional F(fam, w, cfg.analysis.functional_depth);
    sink.at_most("functional_of_unit", std::abs(F(fam.survivor_mask(w)) - 1.0), 1e-10);
  }

  // Spectral data.
  const Solved s = solve_both(fam, cfg, sw);
  for (const SpectralSolution* sol : {&s.closed, &s.open}) {
    if (sol == &s.open && !fam.has_hole()) break;
    const std::string v = to_string(sol->variant);
    double mass = 0.0, norm = 0.0, qmin = 0.0;
    for (const auto& d : sol->fibers) {
      mass = std::max(mass, std::abs(d.nu.masses.sum() - 1.0));
      norm = std::max(norm, d.normalization_residual);
      qmin = std::min(qmin, d.q.values.minCoeff());
    }
    sink.at_most(v + ":nu_mass", mass, 1e-10);
    sink.at_most(v + ":q_normalization", norm, 1e-8);
    sink.holds(v + ":q_nonnegative", qmin >= 0.0, qmin);
    sink.at_most(v + ":eigen_residual", verify_eigen_equation(fam, *sol).max_residual, tol);
    sink.at_most(v + ":equivariance", verify_equivariance(fam, *sol, samples, seed).max_residual, tol);
    sink.at_most(v + ":t_invariance", verify_t_invariance(fam, *sol, samples, seed).max_residual, tol);
    sink.at_most(v + ":conformality", verify_conformality(fam, *sol, w, 1).max_residual, tol);
    sink.at_most(v + ":start_independence", sol->start_dependence, cfg.check.start_tolerance);
  }
  {
    double excess = -std::numeric_limits<double>::infinity();
    for (const FiberId u : s.open.solved_fibers()) {
      excess = std::max(excess, s.open.at(u).lambda - s.closed.at(u).lambda - fam.tail_bound(u));
    }
    sink.at_most("open_lambda_below_closed", excess, 1e-12);
  }
  {
    const NormalizedReport nr = verify_normalized_operators(fam, s.open, cfg.analysis.functional_depth, 20, seed);
    sink.at_most("semi_normalized_fixed_point", nr.semi_fixed_point, tol);
    sink.at_most("fully_normalized_unit", nr.full_unit, tol);
    sink.at_most("fully_normalized_dual", nr.full_dual, tol);
    sink.at_most("rho_below_lambda", nr.rho_excess, 1e-8);
    sink.at_most("functional_identity", nr.functional_identity, std::max(tol, 1e-6));
    sink.holds("pullback_convergence_rate_below_one", nr.convergence_rate < 1.0, nr.convergence_rate);
  }

  // Correlations.
  {
    const GridFunction f = observable(fam.grid(w), cfg.analysis.observable_f);
    const CorrelationSeries cs = correlation_series(fam, s.open, w, f, f, cfg.analysis.correlation_n_max);
    sink.holds("correlation_kappa_below_one", !cs.kappa || *cs.kappa < 1.0, cs.kappa.value_or(0.0));
    const CorrelationSeries flat = correlation_series(fam, s.open, w, fam.one(w), f, 4);
    double worst = 0.0;
    for (double c : flat.values) worst = std::max(worst, std::abs(c));
    sink.at_most("correlation_of_constant", worst, 1e-12);
  }

  // Open system.
  const PressureReport p = expected_pressure(fam, s.closed, s.open);
  sink.at_most("pressure_open_below_closed", p.ep_open - p.ep_closed - p.tail_slack, 1e-12);
  sink.holds("pressure_sanity_decreasing", p.sanity_decreasing);
  const EscapeReport e = escape_rate(fam, s.closed, p, w, cfg.analysis.escape_n_max, cfg.analysis.geometric_depth);
  if (base.kind() == BaseKind::FiniteCycle) {
    sink.at_most("escape_direct_vs_spectral", e.discrepancy, cfg.check.escape_tolerance);
    sink.holds("escape_local_rates_bracket_fit",
               e.local_lower - 1e-12 <= e.fitted_rate && e.fitted_rate <= e.local_upper + 1e-12, e.fitted_rate);
  }
  {
    bool bracketed = true;
    for (std::size_t n = e.log_survivor_mass.size() / 2; n < e.running_rate.size(); ++n) {
      if (n == 0) continue;
      bracketed = bracketed && e.lower_rate <= e.running_rate[n] && e.running_rate[n] <= e.upper_rate;
    }
    sink.holds("escape_running_rate_bracketed", bracketed);
    sink.at_most("escape_geometric_vs_dual", e.geometric_discrepancy, std::max(tol, 1e-9));
  }
  const CondInvMeasure tau = conditionally_invariant(fam, s.closed, s.open);
  {
    double tj = 0.0, crange = 0.0, lemma = 0.0;
    bool c_in_range = true;
    for (const FiberId u : tau.fibers) {
      tj = std::max(tj, std::abs(tau.tau[u.index].measure_of(cfg.system.survivors(u)) - 1.0));
      c_in_range = c_in_range && tau.c_ratio[u.index] > 0.0 && tau.c_ratio[u.index] <= 1.0 + tol;
      crange = std::max(crange, tau.c_ratio[u.index]);
      lemma = std::max(lemma, tau.lemma_residual[u.index]);
    }
    sink.at_most("tau_of_J", tj, 1e-10);
    sink.holds("c_factor_in_unit_interval", c_in_range, crange);
    sink.at_most("c_factor_eigen_characterization", lemma, tol);
    const ConditionalInvarianceReport ci =
        verify_conditional_invariance(fam, tau, w, cfg.analysis.invariance_depth, cfg.analysis.invariance_sets);
    sink.at_most("conditional_invariance", ci.max_residual, tol);
    sink.at_most("tau_multiplicativity", ci.multiplicativity, tol);
    sink.at_most("tau_product_rule", ci.product_rule, tol);
  }

  // Cones.
  if (cfg.check.cones) {
    const ClassificationReport cls = classify_fibers(fam, cfg.cones);
    std::size_t violations = 0;
    for (const auto& row : cls.ly) {
      for (const auto& c : row) violations += c.violations;
    }
    sink.holds("lasota_yorke_violations", violations == 0, static_cast<double>(violations));
    sink.holds("xi_positive", cls.xi > 0.0, cls.xi);
    const FiberId cw = cone_fiber(cls, w);
    const ContractionReport cr = contraction_diagnostics(fam, cls, cw, cfg.analysis.contraction_iterates,
                                                         cfg.analysis.contraction_pairs, cfg.cones.seed);
    sink.holds("cone_decay_rate_below_one", cr.decay_rate < 1.0, cr.decay_rate);
    if (cr.images_in_contracted_cone) {
      sink.at_most("birkhoff_ratio", cr.worst_ratio, cr.birkhoff_factor + 0.05);
    }
    sink.at_most("sup_norm_corollary", cr.sup_norm_excess, 1e-12);
    const LemmaReport lr = check_cone_lemmas(fam, cls, cw, 20, cfg.cones.seed);
    sink.at_most("functional_chain", lr.functional_chain, 1e-8);
    sink.at_most("rho_chain", lr.rho_chain, 1e-8);
    if (!std::isnan(lr.block_bound)) sink.at_most("block_bound", lr.block_bound, 1e-8);
    if (lr.good_cell_hypothesis) sink.at_most("good_cell", lr.good_cell_deficit, 1e-8);
  }
}

}  // namespace

std::optional<Subcommand> parse_subcommand(const std::string& name) {
  if (name == "solve") return Subcommand::Solve;
  if (name == "escape") return Subcommand::Escape;
  if (name == "correlations") return Subcommand::Correlations;
  if (name == "cones") return Subcommand::Cones;
  if (name == "check") return Subcommand::Check;
  return std::nullopt;
}

ResultBundle run(const ExperimentConfig& config, Subcommand sub, const RunOptions& options) {
  if (sub == Subcommand::Check) return run_check(options);
  const ExperimentConfig cfg = apply_options(config, options);
  ResultBundle bundle;
  bundle.scenario = cfg.name;
  bundle.config_hash = cfg.hash;
  Stopwatch sw(bundle);
  Emitter em(cfg.outputs.dir, cfg.outputs.format, bundle);
  try {
    const OperatorFamily fam =
        sw.time("assemble", [&] { return OperatorFamily(cfg.system, cfg.potential, cfg.discretization); });
    json report;
    std::string module;
    switch (sub) {
      case Subcommand::Solve:
        module = "solve";
        report = run_solve(fam, cfg, em, sw);
        break;
      case Subcommand::Escape:
        module = "escape";
        report = run_escape(fam, cfg, em, sw);
        break;
      case Subcommand::Correlations:
        module = "correlations";
        report = run_correlations(fam, cfg, em, sw);
        break;
      case Subcommand::Cones:
        module = "cones";
        report = run_cones(fam, cfg, em, sw, bundle.exit_code);
        break;
      case Subcommand::Check:
        break;
    }
    json summary = {{"scenario", cfg.name},
                    {"config_hash", hash_hex(cfg.hash)},
                    {"seed", cfg.analysis.seed},
                    {module, report},
                    {"timings", timings_json(bundle)}};
    bundle.summary_json = summary.dump(2);
    em.summary(summary);
  } catch (const ValidationError& e) {
    throw ValidationError("scenario " + cfg.name + ": " + e.what());
  } catch (const InvariantViolation& e) {
    throw InvariantViolation("scenario " + cfg.name + ": " + e.what());
  } catch (const ConvergenceError& e) {
    throw ConvergenceError("scenario " + cfg.name + ": " + e.what(), e.last_residual());
  } catch (const WindowExceeded& e) {
    throw WindowExceeded("scenario " + cfg.name + ": " + e.what());
  }
  return bundle;
}

ResultBundle run_check(const RunOptions& options) {
  ResultBundle bundle;
  bundle.scenario = "check";
  Stopwatch sw(bundle);
  std::string canon;
  for (const auto& named : scenario_library()) {
    ExperimentConfig cfg = load_scenario(named.name);
    cfg = apply_options(cfg, options);
    canon += cfg.canonical;
    CheckSink sink(cfg.name, bundle.checks);
    const auto start = std::chrono::steady_clock::now();
    try {
      check_scenario(cfg, sink, sw);
    } catch (const std::exception& e) {
      bundle.checks.push_back({cfg.name, std::string("pipeline: ") + e.what(), 0.0, 0.0, false});
    }
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
    bundle.timings.emplace_back(cfg.name, d.count());
  }
  bundle.config_hash = fnv1a64(canon);

  const std::string dir = options.out_dir.value_or("out");
  const std::string format = options.format.value_or("csv");
  Emitter em(dir, format, bundle);
  Table t{"check_summary", {"scenario", "check", "value", "tolerance", "status"}, {}};
  std::size_t failures = 0;
  json failed = json::array();
  for (const auto& r : bundle.checks) {
    t.add({r.scenario, r.check, r.value, r.tolerance, std::string(r.pass ? "pass" : "FAIL")});
    if (!r.pass) {
      ++failures;
      failed.push_back(r.scenario + ": " + r.check);
    }
  }
  em.table(t);
  json summary = {{"scenario", "check"},
                  {"config_hash", hash_hex(bundle.config_hash)},
                  {"checks", bundle.checks.size()},
                  {"failures", failures},
                  {"failed", failed},
                  {"timings", timings_json(bundle)}};
  bundle.summary_json = summary.dump(2);
  em.summary(summary, "check_summary_run.json");
  bundle.exit_code = failures ? exit_code::invariant : exit_code::success;
  return bundle;
}

int exit_code_for_current_exception(std::string& message) {
  try {
    throw;
  } catch (const ValidationError& e) {
    message = std::string("validation error: ") + e.what();
    return exit_code::validation;
  } catch (const WindowExceeded& e) {
    message = std::string("window exceeded: ") + e.what();
    return exit_code::validation;
  } catch (const InvariantViolation& e) {
    message = std::string("invariant violation: ") + e.what();
    return exit_code::invariant;
  } catch (const ConvergenceError& e) {
    message = std::string("no convergence: ") + e.what() + " (last residual " + format_double(e.last_residual()) + ")";
    return exit_code::convergence;
  } catch (const std::exception& e) {
    message = std::string("error: ") + e.what();
    return exit_code::invariant;
  }
}

}  // namespace openrpf
