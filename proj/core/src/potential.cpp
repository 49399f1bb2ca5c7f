#include <algorithm>
#include <cmath>
#include <string>

#include "openrpf/errors.hpp"
#include "openrpf/transfer_op.hpp"

namespace openrpf {

Potential Potential::geometric() { return Potential{}; }

Potential Potential::constant_per_branch(std::vector<std::vector<double>> per_symbol) {
  if (per_symbol.empty()) throw ValidationError("potential: no constants given");
  Potential p;
  p.kind_ = PotentialKind::ConstantPerBranch;
  p.constants_ = std::move(per_symbol);
  return p;
}

Potential Potential::expression(std::vector<Expression> per_symbol) {
  if (per_symbol.empty()) throw ValidationError("potential: no expression given");
  Potential p;
  p.kind_ = PotentialKind::Expression;
  p.expressions_ = std::move(per_symbol);
  return p;
}

double Potential::operator()(std::size_t symbol, const Branch& b, std::size_t branch, double x) const {
  switch (kind_) {
    case PotentialKind::GeometricDerivative:
      return 1.0 / b.abs_derivative(x);
    case PotentialKind::ConstantPerBranch: {
      const auto& row = constants_[symbol < constants_.size() ? symbol : 0];
      if (row.size() == 1) return row[0];
      if (branch >= row.size()) {
        throw ValidationError("potential: no constant for branch " + std::to_string(branch) +
                              " of fiber " + std::to_string(symbol));
      }
      return row[branch];
    }
    case PotentialKind::Expression: {
      const auto& e = expressions_[symbol < expressions_.size() ? symbol : 0];
      return e(x, static_cast<double>(branch + 1));
    }
  }
  return 0.0;
}

double Potential::operator()(std::size_t symbol, const FiberMap& map, std::size_t branch, double x) const {
  return (*this)(symbol, map.branches.at(branch), branch, x);
}

namespace {

// Sup and inf over 33 interior samples plus the two domain endpoints.
std::pair<double, double> sup_inf(const Potential& g, std::size_t symbol, const Branch& b, std::size_t index) {
  const Interval d = b.domain();
  double hi = -INFINITY, lo = INFINITY;
  auto take = [&](double x) {
    const double v = g(symbol, b, index, x);
    hi = std::max(hi, v);
    lo = std::min(lo, v);
  };
  take(d.lo);
  take(d.hi);
  for (int i = 0; i < 33; ++i) take(d.lo + (i + 0.5) / 33.0 * d.length());
  return {hi, lo};
}

}  // namespace

SummabilityReport summability_report(const Potential& g, const RandomSystem& sys, FiberId w) {
  const FiberMap& map = sys.map(w);
  const std::size_t symbol = sys.base.symbol(w);
  SummabilityReport r;
  for (std::size_t i = 0; i < map.branches.size(); ++i) {
    auto [hi, lo] = sup_inf(g, symbol, map.branches[i], i);
    if (!(lo > 0.0) || !std::isfinite(hi)) {
      throw ValidationError("potential: inf g ≤ 0 or non-finite on branch " + std::to_string(i) +
                            " of fiber " + std::to_string(w.index));
    }
    r.branch_sup.push_back(hi);
    r.branch_inf.push_back(lo);
    r.partial_sum += hi;
  }
  if (!map.generator) {
    r.tail_bound = map.tail_bound.value_or(0.0);
    r.tail_analytic = true;
    return r;
  }
  if (g.kind() == PotentialKind::GeometricDerivative && map.tail_bound) {
    r.tail_bound = *map.tail_bound;
    r.tail_analytic = true;
    return r;
  }
  // Probe dropped branches K+1 and 2K+1 and bound the tail by the matching
  // power law c·k^{-p} through its integral.
  const std::size_t K = map.branches.size();
  const double s1 = sup_inf(g, symbol, map.generator(K), K).first;
  const double s2 = sup_inf(g, symbol, map.generator(2 * K), 2 * K).first;
  const double k1 = static_cast<double>(K + 1), k2 = static_cast<double>(2 * K + 1);
  const double p = std::log(s1 / s2) / std::log(k2 / k1);
  if (!(s1 > 0.0) || !(p > 1.05)) {
    throw ValidationError("potential: branch suprema decay like k^-" + std::to_string(p) +
                          "; family is not summable at K_max = " + std::to_string(K));
  }
  const double c = s1 * std::pow(k1, p);
  r.tail_bound = c * std::pow(static_cast<double>(K), 1.0 - p) / (p - 1.0);
  r.tail_analytic = false;
  return r;
}

}  // namespace openrpf
