#include "openrpf/cone_metric.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "openrpf/errors.hpp"
#include "openrpf/rpf_solver.hpp"

namespace openrpf {
namespace {

double vector_variation(const Eigen::VectorXd& v) {
  double s = 0.0;
  for (Eigen::Index i = 1; i < v.size(); ++i) s += std::abs(v[i] - v[i - 1]);
  return s;
}

}  // namespace

Functional::Functional(const OperatorFamily& fam, FiberId w, int depth) : fam_(&fam), w_(w) {
  if (depth < 1) throw ValidationError("functional: depth must be at least 1");
  while (depth > 0 && !fam.base().can_advance(w, depth)) --depth;
  if (depth < 1) {
    throw WindowExceeded("functional: fiber " + std::to_string(w.index) + " has no successor");
  }
  depth_ = depth;
  Eigen::VectorXd v = fam.survivor_mask(w);
  FiberId u = w;
  for (int k = 0; k < depth_; ++k) {
    v = fam.open(u).matrix * v;
    u = fam.base().advance(u, 1);
    supports_.push_back(support_of(v));
    if (supports_.back().empty()) {
      throw InvariantViolation("functional: support of L^" + std::to_string(k + 1) +
                               " 1 is empty at fiber " + std::to_string(w.index) +
                               " (survivor set K_∞ looks empty)");
    }
    ones_.push_back(v);
  }
}

Eigen::VectorXd Functional::push(const Eigen::VectorXd& f) const {
  Eigen::VectorXd v = f;
  FiberId u = w_;
  for (int k = 0; k < depth_; ++k) {
    v = fam_->open(u).matrix * v;
    u = fam_->base().advance(u, 1);
  }
  return v;
}

double Functional::ratio(const Eigen::VectorXd& pushed) const {
  const Eigen::VectorXd& one = ones_.back();
  double m = kInfinity;
  for (std::size_t i : supports_.back()) {
    const auto k = static_cast<Eigen::Index>(i);
    m = std::min(m, pushed[k] / one[k]);
  }
  return m;
}

Eigen::VectorXd Functional::batch(const Eigen::MatrixXd& columns) const {
  Eigen::MatrixXd v = columns;
  FiberId u = w_;
  for (int k = 0; k < depth_; ++k) {
    v = fam_->open(u).matrix * v;
    u = fam_->base().advance(u, 1);
  }
  const Eigen::VectorXd& one = ones_.back();
  Eigen::VectorXd out(columns.cols());
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    double m = kInfinity;
    for (std::size_t i : supports_.back()) {
      const auto k = static_cast<Eigen::Index>(i);
      m = std::min(m, v(k, c) / one[k]);
    }
    out[c] = m;
  }
  return out;
}

FunctionalEstimate Functional::estimate(const GridFunction& f) const {
  FunctionalEstimate e;
  e.fiber = w_;
  e.depth = depth_;
  Eigen::VectorXd v = transfer_to(f, fam_->grid(w_)).values;
  FiberId u = w_;
  for (int k = 0; k < depth_; ++k) {
    v = fam_->open(u).matrix * v;
    u = fam_->base().advance(u, 1);
    double m = kInfinity;
    for (std::size_t i : supports_[static_cast<std::size_t>(k)]) {
      const auto j = static_cast<Eigen::Index>(i);
      m = std::min(m, v[j] / ones_[static_cast<std::size_t>(k)][j]);
    }
    e.sequence.push_back(m);
  }
  e.value = e.sequence.back();
  e.support = supports_.back();
  return e;
}

FunctionalEstimate estimate_functional(const OperatorFamily& fam, FiberId w, const GridFunction& f,
                                       int depth) {
  return Functional(fam, w, depth).estimate(f);
}

std::vector<double> normalizing_constants(const OperatorFamily& fam, int depth) {
  std::vector<double> rho(fam.fiber_count(), std::nan(""));
  for (std::size_t i = 0; i < fam.fiber_count(); ++i) {
    const FiberId w{i};
    if (!fam.base().can_advance(w, 2)) continue;
    const FiberId next = fam.base().advance(w, 1);
    const Functional F(fam, next, depth);
    rho[i] = F(fam.open(w).matrix * fam.survivor_mask(w));
  }
  return rho;
}

Eigen::VectorXd apply_semi_normalized(const OperatorFamily& fam, const std::vector<double>& rho,
                                      FiberId w, int n, Eigen::VectorXd f) {
  for (int k = 0; k < n; ++k) {
    const double r = rho.at(w.index);
    if (!(r > 0.0)) {
      throw ValidationError("semi-normalized operator: ρ unavailable at fiber " + std::to_string(w.index));
    }
    f = (fam.open(w).matrix * f) / r;
    w = fam.base().advance(w, 1);
  }
  return f;
}

bool in_cone(const Eigen::VectorXd& f, const Cone& cone, double slack) {
  if (f.size() == 0) return false;
  const double sup = f.cwiseAbs().maxCoeff();
  if (!(sup > 0.0)) return false;
  if (f.minCoeff() < -slack * sup) return false;
  if (cone.is_positive()) return true;
  const double F = (*cone.functional)(f);
  return vector_variation(f) <= cone.a * F * (1.0 + slack) + slack * sup;
}

namespace {

struct Feasibility {
  const Cone& cone;
  Eigen::VectorXd pf, pg;  // pushed f, g (Λ_a only)

  // h = s·g + t·f is in C ∪ {0}, given h ≥ 0 already.
  bool operator()(const Eigen::VectorXd& h, double s, double t) const {
    const double sup = h.cwiseAbs().maxCoeff();
    const double var = vector_variation(h);
    if (sup == 0.0) return true;
    if (cone.is_positive()) return true;
    const double F = cone.functional->ratio(s * pg + t * pf);
    return var <= cone.a * F + 1e-14 * sup;
  }
};

}  // namespace

double hilbert_distance(const Eigen::VectorXd& f, const Eigen::VectorXd& g, const Cone& cone) {
  if (f.size() != g.size()) throw ValidationError("hilbert_distance: size mismatch");
  if (!in_cone(f, cone, 1e-10)) throw ValidationError("hilbert_distance: first argument is outside the cone");
  if (!in_cone(g, cone, 1e-10)) throw ValidationError("hilbert_distance: second argument is outside the cone");

  double lo_ratio = kInfinity, hi_ratio = 0.0;
  bool unbounded = false;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if (f[i] > 0.0) {
      lo_ratio = std::min(lo_ratio, g[i] / f[i]);
      hi_ratio = std::max(hi_ratio, g[i] / f[i]);
    } else if (g[i] > 0.0) {
      unbounded = true;
    }
  }
  if (!(lo_ratio < kInfinity)) return kInfinity;

  Feasibility ok{cone, {}, {}};
  if (!cone.is_positive()) {
    ok.pf = cone.functional->push(f);
    ok.pg = cone.functional->push(g);
  }
  auto alpha_ok = [&](double a) {
    Eigen::VectorXd h = (g - a * f).cwiseMax(0.0);
    return ok(h, 1.0, -a);
  };
  auto beta_ok = [&](double b) {
    Eigen::VectorXd h = (b * f - g).cwiseMax(0.0);
    return ok(h, -1.0, b);
  };

  double alpha = std::max(lo_ratio, 0.0);
  if (alpha > 0.0 && !alpha_ok(alpha)) {
    double lo = 0.0, hi = alpha;
    while (hi - lo > 1e-10 * hi) {
      const double mid = 0.5 * (lo + hi);
      (alpha_ok(mid) ? lo : hi) = mid;
    }
    alpha = lo;
  }
  if (!(alpha > 0.0) || unbounded) return kInfinity;

  double beta = hi_ratio;
  if (!beta_ok(beta)) {
    double lo = beta, hi = 2.0 * beta;
    int grow = 0;
    while (!beta_ok(hi)) {
      lo = hi;
      hi *= 2.0;
      if (++grow > 80) return kInfinity;
    }
    while (hi - lo > 1e-10 * hi) {
      const double mid = 0.5 * (lo + hi);
      (beta_ok(mid) ? hi : lo) = mid;
    }
    beta = hi;
  }
  return std::max(0.0, std::log(beta / alpha));
}

double hilbert_distance(const GridFunction& f, const GridFunction& g, const Cone& cone) {
  return hilbert_distance(f.values, transfer_to(g, f.grid).values, cone);
}

double constant_distance_bound(const Eigen::VectorXd& f, double c, double F_value) {
  const double num = f.maxCoeff() + c * F_value;
  const double den = std::min(f.minCoeff(), (1.0 - c) * F_value);
  if (!(den > 0.0)) return kInfinity;
  return std::log(num / den);
}

void ConeParams::validate() const {
  if (!(u > 0.0 && u < 1.0)) throw ValidationError("cones: u must lie in (0,1)");
  if (!(v > 0.0 && v < 1.0)) throw ValidationError("cones: v must lie in (0,1)");
  if (!(u + v < 0.75)) throw ValidationError("cones: u + v must be below 3/4");
  if (!((1.0 - u) * v <= 0.5)) throw ValidationError("cones: (1 − u)v must not exceed 1/2");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("cones: epsilon must lie in (0,1)");
  if (a < 0.0) throw ValidationError("cones: a must be positive");
  if (depth < 1) throw ValidationError("cones: depth must be at least 1");
  if (samples < 1) throw ValidationError("cones: samples must be at least 1");
  if (max_level < 1) throw ValidationError("cones: max_level must be at least 1");
  if (coating_cap < 2) throw ValidationError("cones: coating cap must be at least 2");
}

namespace {

class FunctionalCache {
 public:
  FunctionalCache(const OperatorFamily& fam, int depth) : fam_(fam), depth_(depth) {}
  const Functional& at(FiberId w) {
    auto it = cache_.find(w.index);
    if (it == cache_.end()) it = cache_.emplace(w.index, Functional(fam_, w, depth_)).first;
    return it->second;
  }

 private:
  const OperatorFamily& fam_;
  int depth_;
  std::map<std::size_t, Functional> cache_;
};

}  // namespace

ContractionReport contraction_diagnostics(const OperatorFamily& fam, const ClassificationReport& cls,
                                          FiberId w, int iterates, std::size_t pairs,
                                          std::uint64_t seed, int reference_steps) {
  ContractionReport rep;
  rep.fiber = w;
  rep.cone_a = cls.cone_parameter();
  rep.iterates = iterates > 0 ? iterates : std::max(1, cls.R);
  rep.pairs = pairs;
  FunctionalCache functionals(fam, cls.params.depth);
  auto cone_at = [&](FiberId u) { return Cone::lambda(rep.cone_a, functionals.at(u)); };

  // Reference pair (1, 1 + 1_[0,1/2)).
  Eigen::VectorXd f = fam.one(w).values;
  Eigen::VectorXd g = f + GridFunction::indicator(fam.grid(w), IntervalSet({{0.0, 0.5}})).values;
  FiberId u = w;
  for (int n = 0; n <= reference_steps; ++n) {
    rep.reference_distances.push_back(hilbert_distance(f, g, cone_at(u)));
    if (n == reference_steps) break;
    f = apply_semi_normalized(fam, cls.rho, u, 1, f);
    g = apply_semi_normalized(fam, cls.rho, u, 1, g);
    u = fam.base().advance(u, 1);
  }
  {
    std::vector<double> tail(rep.reference_distances.begin() + 1, rep.reference_distances.end());
    // Distances below 1e-8 sit at the bisection floor and carry no rate.
    const LogFit fit = fit_log_decay(tail, 1e-8);
    rep.decay_rate = fit.points >= 2 ? std::exp(fit.slope) : 0.0;
  }

  // Random pairs plus indicator probes of good level-1 cells.
  CounterRng rng(seed, "cone_metric", "contraction", w.index);
  const Grid& grid = fam.grid(w);
  std::vector<Eigen::VectorXd> samples;
  for (std::size_t k = 0; k < 2 * pairs; ++k) samples.push_back(random_bv_function(grid, rng, false).values);
  std::vector<Eigen::VectorXd> probes;
  {
    const PartitionClassification pc = classify_cells(fam, w, 1, cls.params.depth);
    for (std::size_t k = 0; k < pc.cells.size() && probes.size() < 16; ++k) {
      if (pc.classes[k] != CellClass::Good) continue;
      Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
      for (std::size_t c = pc.grid_runs[k].first; c < pc.grid_runs[k].second; ++c) e[static_cast<Eigen::Index>(c)] = 1.0;
      if (in_cone(e, cone_at(w))) probes.push_back(e);
    }
  }
  const FiberId target = fam.base().advance(w, rep.iterates);
  const Cone after = cone_at(target);
  const Functional& F_after = functionals.at(target);
  const double contracted = (cls.params.u + cls.params.v) * rep.cone_a;

  std::vector<Eigen::VectorXd> images;
  auto push_image = [&](const Eigen::VectorXd& s) {
    Eigen::VectorXd img = apply_semi_normalized(fam, cls.rho, w, rep.iterates, s);
    const double Fv = F_after(img);
    const double margin = Fv > 0.0 ? vector_variation(img) / (contracted * Fv) : kInfinity;
    rep.cone_margin = std::max(rep.cone_margin, std::isfinite(contracted) ? margin : 0.0);
    if (std::isfinite(contracted) && margin > 1.0 + 1e-9) rep.images_in_contracted_cone = false;
    images.push_back(std::move(img));
  };
  for (const auto& s : samples) push_image(s);
  const std::size_t sample_images = images.size();
  for (const auto& p : probes) push_image(p);

  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t j = i + 1; j < images.size(); ++j) {
      rep.delta_estimate = std::max(rep.delta_estimate, hilbert_distance(images[i], images[j], after));
    }
  }
  rep.birkhoff_factor = std::tanh(rep.delta_estimate / 4.0);

  for (std::size_t k = 0; k + 1 < sample_images; k += 2) {
    const double pre = hilbert_distance(samples[k], samples[k + 1], cone_at(w));
    const double post = hilbert_distance(images[k], images[k + 1], after);
    if (pre > 0.0 && std::isfinite(pre)) {
      rep.worst_ratio = std::max(rep.worst_ratio, post / pre);
      ++rep.checked_pairs;
    }
    // ‖a − b‖ ≤ (e^Θ − 1)‖a‖ for b rescaled to the sup norm of a.
    const Eigen::VectorXd& a = images[k];
    Eigen::VectorXd b = images[k + 1] * (a.cwiseAbs().maxCoeff() / images[k + 1].cwiseAbs().maxCoeff());
    const double lhs = (a - b).cwiseAbs().maxCoeff();
    const double rhs = std::expm1(post) * a.cwiseAbs().maxCoeff();
    rep.sup_norm_excess = std::max(rep.sup_norm_excess, lhs - rhs - 1e-12 * a.cwiseAbs().maxCoeff());
  }
  return rep;
}

}  // namespace openrpf
