#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "openrpf/cone_metric.hpp"
#include "openrpf/errors.hpp"

namespace openrpf {
namespace {

constexpr int kNoBranch = -1;
constexpr int kLeftSurvivors = -2;

// Per step: 2·branch + (in J ? 1 : 0); the orbit is cut once it leaves J or
// runs off the branches.
std::vector<int> itinerary(const RandomSystem& sys, FiberId w, int n, double x) {
  std::vector<int> code;
  code.reserve(static_cast<std::size_t>(n) + 1);
  for (int t = 0; t <= n; ++t) {
    const bool in_j = !sys.hole_at(w).contains(x);
    if (!in_j) {
      code.push_back(0);
      code.push_back(kLeftSurvivors);
      return code;
    }
    if (t == n) {
      code.push_back(1);
      return code;
    }
    const auto b = sys.map(w).locate(x);
    if (!b) {
      code.push_back(kNoBranch);
      return code;
    }
    code.push_back(2 * static_cast<int>(*b) + 1);
    x = sys.map(w).branches[*b](x);
    w = sys.base.advance(w, 1);
  }
  return code;
}

struct Runs {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::vector<std::vector<int>> codes;
};

Runs itinerary_runs(const OperatorFamily& fam, FiberId w, int n) {
  const Grid& grid = fam.grid(w);
  Runs r;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto code = itinerary(fam.system(), w, n, grid.midpoint(i));
    if (!r.codes.empty() && r.codes.back() == code) {
      r.ranges.back().second = i + 1;
    } else {
      r.ranges.emplace_back(i, i + 1);
      r.codes.push_back(std::move(code));
    }
  }
  return r;
}

// In K_{n−1} with every branch up to time n−1 defined.
bool inside_survivors(const std::vector<int>& code, int n) {
  if (static_cast<int>(code.size()) < n) return false;
  for (int t = 0; t < n; ++t) {
    if (code[static_cast<std::size_t>(t)] < 0 || (code[static_cast<std::size_t>(t)] & 1) == 0) return false;
  }
  return true;
}

bool midpoint_survives(const RandomSystem& sys, FiberId w, double x, int steps) {
  for (int t = 0; t < steps; ++t) {
    if (sys.hole_at(w).contains(x)) return false;
    const auto b = sys.map(w).locate(x);
    if (!b) return false;
    x = sys.map(w).branches[*b](x);
    w = sys.base.advance(w, 1);
  }
  return !sys.hole_at(w).contains(x);
}

double variation_range(const Eigen::VectorXd& v, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin + 1; i < end; ++i) {
    s += std::abs(v[static_cast<Eigen::Index>(i)] - v[static_cast<Eigen::Index>(i - 1)]);
  }
  return s;
}

double vector_variation(const Eigen::VectorXd& v) {
  return variation_range(v, 0, static_cast<std::size_t>(v.size()));
}

}  // namespace

std::size_t PartitionClassification::count(CellClass c) const {
  return static_cast<std::size_t>(std::count(classes.begin(), classes.end(), c));
}

PartitionClassification classify_cells(const OperatorFamily& fam, FiberId w, int n, int depth) {
  if (n < 1) throw ValidationError("classify_cells: n must be at least 1");
  if (!fam.base().can_advance(w, n)) {
    throw WindowExceeded("classify_cells: fiber " + std::to_string(w.index) + " cannot advance " +
                         std::to_string(n) + " steps");
  }
  PartitionClassification pc;
  pc.fiber = w;
  pc.n = n;
  const Grid& grid = fam.grid(w);
  const Runs runs = itinerary_runs(fam, w, n);
  pc.grid_runs = runs.ranges;
  for (const auto& [b, e] : runs.ranges) pc.cells.push_back({grid.left(b), grid.right(e - 1)});
  pc.classes.assign(runs.ranges.size(), CellClass::Outside);
  pc.functional.assign(runs.ranges.size(), 0.0);

  std::vector<std::size_t> inside;
  for (std::size_t k = 0; k < runs.ranges.size(); ++k) {
    if (inside_survivors(runs.codes[k], n)) inside.push_back(k);
  }
  const Functional F(fam, w, depth);
  const auto rows = static_cast<Eigen::Index>(grid.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < inside.size(); start += kChunk) {
    const std::size_t stop = std::min(inside.size(), start + kChunk);
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(stop - start));
    for (std::size_t c = start; c < stop; ++c) {
      const auto& [b, e] = runs.ranges[inside[c]];
      for (std::size_t i = b; i < e; ++i) block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c - start)) = 1.0;
    }
    const Eigen::VectorXd values = F.batch(block);
    for (std::size_t c = start; c < stop; ++c) {
      const double v = values[static_cast<Eigen::Index>(c - start)];
      pc.functional[inside[c]] = v;
      pc.classes[inside[c]] = v > kSupportEpsilon ? CellClass::Good : CellClass::Bad;
    }
  }

  double min_good = kInfinity;
  int run = 0;
  for (std::size_t k = 0; k < pc.classes.size(); ++k) {
    switch (pc.classes[k]) {
      case CellClass::Good:
        min_good = std::min(min_good, pc.functional[k]);
        run = 0;
        break;
      case CellClass::Bad:
        pc.eta = std::max(pc.eta, ++run);
        break;
      case CellClass::Outside:
        break;
    }
  }
  pc.delta = min_good < kInfinity ? 0.5 * min_good : 0.0;
  return pc;
}

Eigen::VectorXd open_weight(const OperatorFamily& fam, FiberId w, int n) {
  const RandomSystem& sys = fam.system();
  const Grid& grid = fam.grid(w);
  Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double x = grid.midpoint(i);
    double weight = 1.0;
    FiberId u = w;
    for (int t = 0; t < n && weight > 0.0; ++t) {
      if (sys.hole_at(u).contains(x)) {
        weight = 0.0;
        break;
      }
      const auto b = sys.map(u).locate(x);
      if (!b) {
        weight = 0.0;
        break;
      }
      weight *= fam.potential()(sys.base.symbol(u), sys.map(u), *b, x);
      x = sys.map(u).branches[*b](x);
      u = sys.base.advance(u, 1);
    }
    out[static_cast<Eigen::Index>(i)] = weight;
  }
  return out;
}

LYCoefficients measure_ly_coefficients(const OperatorFamily& fam, FiberId w, int n,
                                       std::size_t samples, std::uint64_t seed, int depth,
                                       const std::vector<double>* rho) {
  const PartitionClassification pc = classify_cells(fam, w, n, depth);
  if (pc.count(CellClass::Good) == 0 || !(pc.delta > 0.0)) {
    throw InvariantViolation("Lasota–Yorke: no good partition element at fiber " +
                             std::to_string(w.index) + ", level " + std::to_string(n));
  }
  LYCoefficients ly;
  ly.fiber = w;
  ly.n = n;
  ly.eta = pc.eta;
  ly.delta = pc.delta;
  const Eigen::VectorXd gw = open_weight(fam, w, n);
  ly.weight_sup = gw.maxCoeff();
  if (!(ly.weight_sup > 0.0)) throw InvariantViolation("Lasota–Yorke: open weight vanishes identically");
  for (const auto& [b, e] : pc.grid_runs) ly.a = std::max(ly.a, variation_range(gw, b, e) / ly.weight_sup);
  const double eta = static_cast<double>(ly.eta);
  ly.A = (ly.a + 2.0 * ly.b + 1.0 + (2.0 * ly.a + 4.0 * ly.b) * eta) * ly.weight_sup;
  ly.B = (ly.a + 2.0 * ly.b) * (1.0 + 2.0 * eta) * ly.weight_sup / ly.delta;

  std::vector<double> local;
  if (rho == nullptr) {
    local = normalizing_constants(fam, depth);
    rho = &local;
  }
  FiberId u = w;
  for (int t = 0; t < n; ++t) {
    ly.rho_n *= rho->at(u.index);
    u = fam.base().advance(u, 1);
  }
  ly.C = ly.A / ly.rho_n;
  ly.D = ly.B / ly.rho_n;

  const Functional F(fam, w, depth);
  CounterRng rng(seed, "cone_metric", "lasota_yorke", w.index * 1024 + static_cast<std::uint64_t>(n));
  const Grid& grid = fam.grid(w);
  for (std::size_t s = 0; s < samples; ++s) {
    const Eigen::VectorXd f = random_bv_function(grid, rng, true).values;
    const double lhs = vector_variation(fam.apply_n(w, n, f, Variant::Open));
    const double rhs = ly.A * vector_variation(f) + ly.B * F(f.cwiseAbs());
    if (rhs > 0.0) ly.empirical_scale = std::max(ly.empirical_scale, lhs / rhs);
    if (lhs > rhs * (1.0 + 1e-12) + 1e-15) ++ly.violations;
    ++ly.samples;
  }
  ly.A_empirical = ly.empirical_scale * ly.A;
  ly.B_empirical = ly.empirical_scale * ly.B;
  return ly;
}

ClassificationReport classify_fibers(const OperatorFamily& fam, const ConeParams& params) {
  params.validate();
  const BaseSystem& base = fam.base();
  ClassificationReport rep;
  rep.params = params;
  rep.rho = normalizing_constants(fam, params.depth);

  for (std::size_t i = 0; i < fam.fiber_count(); ++i) {
    const FiberId w{i};
    if (base.can_advance(w, 2LL * params.max_level + 2)) rep.fibers.push_back(w);
  }
  if (rep.fibers.empty()) throw ValidationError("cones: window too short for the requested levels");

  std::map<std::pair<std::size_t, int>, LYCoefficients> ly_cache;
  auto ly_at = [&](FiberId w, int n) -> const LYCoefficients& {
    const auto key = std::make_pair(w.index, n);
    auto it = ly_cache.find(key);
    if (it == ly_cache.end()) {
      it = ly_cache.emplace(key, measure_ly_coefficients(fam, w, n, params.samples, params.seed,
                                                         params.depth, &rep.rho)).first;
    }
    return it->second;
  };

  std::vector<double> logs(rep.fibers.size());
  for (int n = 1; n <= params.max_level; ++n) {
    for (std::size_t k = 0; k < rep.fibers.size(); ++k) logs[k] = std::log(ly_at(rep.fibers[k], n).C);
    if (base.average_over(rep.fibers, logs) < 0.0) {
      rep.Nc = n;
      rep.xi = -base.average_over(rep.fibers, logs) / n;
      break;
    }
  }
  if (rep.Nc == 0) {
    throw InvariantViolation("cones: mean log C stays non-negative up to level " +
                             std::to_string(params.max_level) + ", so ξ is not positive");
  }
  const int Nc = rep.Nc;

  std::map<std::size_t, double> growth;
  auto growth_at = [&](FiberId w) {
    auto it = growth.find(w.index);
    if (it != growth.end()) return it->second;
    double L = 0.0;
    for (int n = 1; n <= Nc; ++n) {
      const LYCoefficients& c = ly_at(w, n);
      L = std::max({L, 6.0, 2.0 * c.C, 2.0 * c.D + 1.0});
    }
    growth.emplace(w.index, L);
    return L;
  };
  // log of L^{N_c}_ω = Π_{t<N_c} L_{θ^t ω}; nullopt past the window.
  auto log_block_growth = [&](FiberId w) -> std::optional<double> {
    double s = 0.0;
    for (int t = 0; t < Nc; ++t) {
      if (!base.can_advance(w, t + 2LL * params.max_level + 2)) return std::nullopt;
      s += std::log(growth_at(base.advance(w, t)));
    }
    return s;
  };

  for (const FiberId& w : rep.fibers) rep.growth.push_back(growth_at(w));
  {
    std::vector<double> block;
    std::vector<FiberId> used;
    for (const FiberId& w : rep.fibers) {
      if (auto g = log_block_growth(w)) {
        block.push_back(*g);
        used.push_back(w);
      }
    }
    rep.zeta = base.average_over(used, block) / Nc;
  }
  for (const FiberId& w : rep.fibers) {
    std::vector<LYCoefficients> row;
    for (int n = 1; n <= Nc; ++n) row.push_back(ly_at(w, n));
    rep.ly.push_back(std::move(row));
  }

  // Envelope constants C_ε(ω) from signed samples up to 2N_c steps.
  std::map<std::size_t, Functional> functionals;
  auto functional_at = [&](FiberId u) -> const Functional& {
    auto it = functionals.find(u.index);
    if (it == functionals.end()) it = functionals.emplace(u.index, Functional(fam, u, params.depth)).first;
    return it->second;
  };
  rep.classes.resize(rep.fibers.size());
  std::vector<double> envelope(rep.fibers.size(), 0.0);
  for (std::size_t k = 0; k < rep.fibers.size(); ++k) {
    const FiberId w = rep.fibers[k];
    rep.classes[k].fiber = w;
    CounterRng rng(params.seed, "cone_metric", "envelope", w.index);
    const Grid& grid = fam.grid(w);
    for (std::size_t s = 0; s < params.samples; ++s) {
      Eigen::VectorXd f = random_bv_function(grid, rng, true).values;
      Eigen::VectorXd a = f.cwiseAbs();
      const double var0 = vector_variation(f);
      FiberId u = w;
      for (int n = 1; n <= 2 * Nc; ++n) {
        f = apply_semi_normalized(fam, rep.rho, u, 1, f);
        a = apply_semi_normalized(fam, rep.rho, u, 1, a);
        u = base.advance(u, 1);
        const double denom = std::exp(-(rep.xi - params.epsilon) * n) * var0 + functional_at(u)(a);
        if (denom > 0.0) envelope[k] = std::max(envelope[k], vector_variation(f) / denom);
      }
    }
    rep.classes[k].c_epsilon = envelope[k];
  }
  {
    std::vector<std::size_t> order(rep.fibers.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return envelope[x] < envelope[y]; });
    double total = 0.0;
    for (const FiberId& w : rep.fibers) total += base.weights().at(w.index);
    const double level = 1.0 - params.epsilon / 8.0;
    double cumulative = 0.0;
    rep.B = envelope[order.back()];
    for (std::size_t idx : order) {
      cumulative += base.weights().at(rep.fibers[idx].index) / total;
      if (cumulative >= level - 1e-12) {
        rep.B = envelope[idx];
        break;
      }
    }
    rep.B = std::max(1.0, rep.B);
  }

  for (int q = 1; q <= 1000000; ++q) {
    if (rep.B * q * std::exp(-rep.xi * q * Nc / 2.0) <= params.u) {
      rep.q_a = q;
      break;
    }
  }
  if (rep.q_a == 0) throw InvariantViolation("cones: no block count q_a satisfies the contraction budget");
  rep.R = rep.q_a * Nc;
  rep.a_tilde = rep.B * std::exp(rep.zeta * rep.R * std::sqrt(params.epsilon)) /
                ((1.0 - params.u) * params.v);
  rep.a0 = rep.B / params.v;
  if (!std::isfinite(rep.a_tilde)) rep.warnings.push_back("ã overflows; the cone reduces to positivity");

  std::map<std::size_t, std::size_t> position;
  for (std::size_t k = 0; k < rep.fibers.size(); ++k) position[rep.fibers[k].index] = k;
  bool truncated = false;
  for (std::size_t k = 0; k < rep.fibers.size(); ++k) {
    FiberClassification& fc = rep.classes[k];
    double sum = 0.0;
    int blocks = 0;
    FiberId u = fc.fiber;
    for (int b = 0; b < rep.q_a; ++b) {
      const auto g = log_block_growth(u);
      if (!g) {
        truncated = true;
        break;
      }
      sum += *g;
      ++blocks;
      if (!base.can_advance(u, Nc)) break;
      u = base.advance(u, Nc);
    }
    fc.log_gamma = sum;
    fc.block_log_average = blocks > 0 ? sum / (static_cast<double>(blocks) * Nc) : 0.0;
    fc.envelope_ok = fc.c_epsilon <= rep.B;
    fc.zeta_ok = blocks > 0 && std::abs(fc.block_log_average - rep.zeta) <= params.epsilon;
    fc.good = fc.envelope_ok && fc.zeta_ok;
  }
  if (truncated) rep.warnings.push_back("R-blocks cut at the window edge; Γ uses the available part");

  const double budget = rep.zeta * rep.R * std::sqrt(params.epsilon);
  for (std::size_t k = 0; k < rep.fibers.size(); ++k) {
    FiberClassification& fc = rep.classes[k];
    if (fc.good) {
      fc.coating_length = 1;
      continue;
    }
    double bad_sum = 0.0;
    FiberId u = fc.fiber;
    for (int n = 1; n <= params.coating_cap; ++n) {
      const auto it = position.find(u.index);
      if (it == position.end()) break;
      const FiberClassification& other = rep.classes[it->second];
      if (!other.good) bad_sum += other.log_gamma;
      if (n >= 2 && bad_sum / n <= budget) {
        fc.coating_length = n;
        break;
      }
      if (!base.can_advance(u, rep.R)) break;
      u = base.advance(u, rep.R);
    }
  }
  return rep;
}

LemmaReport check_cone_lemmas(const OperatorFamily& fam, const ClassificationReport& cls, FiberId w,
                              std::size_t samples, std::uint64_t seed) {
  LemmaReport rep;
  const BaseSystem& base = fam.base();
  const int depth = cls.params.depth;
  const double a = cls.cone_parameter();
  const Grid& grid = fam.grid(w);
  const Functional F(fam, w, depth);
  CounterRng rng(seed, "cone_metric", "lemmas", w.index);
  std::vector<Eigen::VectorXd> fs;
  for (std::size_t s = 0; s < samples; ++s) fs.push_back(random_bv_function(grid, rng, false).values);

  // ρ^n F(f) ≤ F(L^n f) and ρ^n ≤ F(L^n 1).
  rep.functional_chain = -kInfinity;
  rep.rho_chain = -kInfinity;
  double rho_n = 1.0;
  FiberId u = w;
  for (int n = 1; n <= 3 && base.can_advance(w, n + 1); ++n) {
    rho_n *= cls.rho.at(u.index);
    u = base.advance(u, 1);
    const Functional Fn(fam, u, depth);
    const double scale = std::max(1.0, rho_n);
    for (const auto& f : fs) {
      const double lhs = rho_n * F(f);
      const double rhs = Fn(fam.apply_n(w, n, f, Variant::Open));
      rep.functional_chain = std::max(rep.functional_chain, (lhs - rhs) / scale);
    }
    const double one = Fn(fam.apply_n(w, n, fam.survivor_mask(w), Variant::Open));
    rep.rho_chain = std::max(rep.rho_chain, (rho_n - one) / scale);
  }

  // F(L̃^R f) ≤ (ã+1) F(L̃^R 1) F(f) for f in the cone.
  const int R = std::min(cls.R, 2000);
  if (base.can_advance(w, R + 1)) {
    const FiberId t = base.advance(w, R);
    const Functional FR(fam, t, depth);
    const double one = FR(apply_semi_normalized(fam, cls.rho, w, R, fam.survivor_mask(w)));
    rep.block_bound = -kInfinity;
    for (const auto& f : fs) {
      const double lhs = FR(apply_semi_normalized(fam, cls.rho, w, R, f));
      const double rhs = (a + 1.0) * one * F(f);
      if (std::isfinite(rhs)) rep.block_bound = std::max(rep.block_bound, (lhs - rhs) / std::max(1.0, rhs));
    }
    if (!std::isfinite(rep.block_bound)) rep.block_bound = 0.0;
  } else {
    rep.block_bound = std::nan("");
  }

  // Level of the good-cell check: deepest partition with at most 1024 elements.
  int level = 1;
  for (int n = 2; n <= cls.params.max_level && base.can_advance(w, n + 1); ++n) {
    if (itinerary_runs(fam, w, n).ranges.size() > 1024) break;
    level = n;
  }
  rep.good_cell_level = level;
  rep.rate_level = level;

  std::vector<double> log_weight;
  std::vector<double> log_rho;
  {
    double lr = 0.0;
    FiberId v = w;
    for (int n = 1; n <= level; ++n) {
      log_weight.push_back(std::log(open_weight(fam, w, n).maxCoeff()));
      lr += std::log(cls.rho.at(v.index));
      log_rho.push_back(lr);
      v = base.advance(v, 1);
    }
  }
  if (std::isfinite(a)) {
    const double target = std::log(8.0) + 3.0 * std::log(a);
    for (int n = 1; n <= level; ++n) {
      if (log_weight[static_cast<std::size_t>(n - 1)] < log_rho[static_cast<std::size_t>(n - 1)] - target) {
        rep.small_cells_level = n;
        break;
      }
    }
    if (!rep.small_cells_level) {
      const double gap = (log_rho.back() - log_weight.back()) / level;
      if (gap > 0.0) rep.small_cells_level = static_cast<int>(std::ceil(target / gap));
    }
  }
  rep.good_cell_hypothesis = rep.small_cells_level && level >= *rep.small_cells_level;

  const PartitionClassification pc = classify_cells(fam, w, level, depth);
  const Cone cone = Cone::lambda(a, F);
  rep.good_cell_deficit = -kInfinity;
  for (const auto& f : fs) {
    if (!in_cone(f, cone)) continue;
    double best = 0.0;
    for (std::size_t k = 0; k < pc.classes.size(); ++k) {
      if (pc.classes[k] != CellClass::Good) continue;
      const auto& [b, e] = pc.grid_runs[k];
      best = std::max(best, f.segment(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)).minCoeff());
    }
    rep.good_cell_deficit = std::max(rep.good_cell_deficit, 0.5 * F(f) - best);
  }
  if (!std::isfinite(rep.good_cell_deficit)) rep.good_cell_deficit = 0.0;

  rep.rate_weight = log_weight.back() / level;
  rep.rate_eta = std::log(std::max(pc.eta, 1)) / level;
  {
    const FiberId t = base.advance(w, level);
    const Eigen::VectorXd v = fam.apply_n(w, level, fam.survivor_mask(w), Variant::Open);
    const Grid& tg = fam.grid(t);
    const int forward = std::min(depth, 8);
    double m = kInfinity;
    for (std::size_t i : support_of(v)) {
      if (!base.can_advance(t, forward) || midpoint_survives(fam.system(), t, tg.midpoint(i), forward)) {
        m = std::min(m, v[static_cast<Eigen::Index>(i)]);
      }
    }
    rep.rate_inf = m < kInfinity ? std::log(m) / level : -kInfinity;
  }
  rep.contracting = rep.rate_weight + rep.rate_eta < rep.rate_inf;
  return rep;
}

}  // namespace openrpf
