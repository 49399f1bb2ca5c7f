#pragma once

#include <cmath>
#include <vector>

#include "openrpf/phase_space.hpp"
#include "openrpf/transfer_op.hpp"

namespace fixtures {

using namespace openrpf;

inline constexpr FiberId w0{0};
inline constexpr FiberId w1{1};

inline RandomSystem doubling(IntervalSet hole = {}) {
  return {BaseSystem::cycle(1), {doubling_map()}, Hole({std::move(hole)})};
}

inline Potential half() { return Potential::constant_per_branch({{0.5}}); }

inline OperatorFamily doubling_family(IntervalSet hole = {}, std::size_t cells = 64) {
  return OperatorFamily(doubling(std::move(hole)), half(), Discretization{cells, 1});
}

// Period-2 base: doubling with g = 1/2, then tripling with g = 1/3 and hole [2/3, 1).
inline OperatorFamily rand2_family(std::size_t cells = 96) {
  RandomSystem sys{BaseSystem::cycle(2), {doubling_map(), tripling_map()},
                   Hole({IntervalSet{}, IntervalSet({{2.0 / 3.0, 1.0}})})};
  return OperatorFamily(sys, Potential::constant_per_branch({{0.5}, {1.0 / 3.0}}), Discretization{cells, 1});
}

inline OperatorFamily gauss_family(std::size_t k_max, std::size_t cells, IntervalSet hole = {}) {
  RandomSystem sys{BaseSystem::cycle(1), {gauss_map(k_max)}, Hole({std::move(hole)})};
  return OperatorFamily(sys, Potential::geometric(), Discretization{cells, 1});
}

inline double sup_dist(const Eigen::VectorXd& a, double c) {
  return (a.array() - c).abs().maxCoeff();
}

}  // namespace fixtures
