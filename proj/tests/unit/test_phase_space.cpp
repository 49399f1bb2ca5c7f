#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "frozen_values.hpp"
#include "openrpf/errors.hpp"

using namespace openrpf;
using fixtures::w0;

namespace {

std::vector<double> endpoints(const RandomSystem& sys, int n) {
  return refine_partition(sys, w0, n).endpoints;
}

}  // namespace

TEST_CASE("partition of the doubling map") {
  CHECK(endpoints(fixtures::doubling(), 1) == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(endpoints(fixtures::doubling(), 2) == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(endpoints(fixtures::doubling(), 3).size() == 9);
}

TEST_CASE("partition with hole [0,1/4) carries hole endpoints and their preimages") {
  const auto e = endpoints(fixtures::doubling(IntervalSet({{0.0, 0.25}})), 1);
  CHECK(e == std::vector<double>{0.0, 0.125, 0.25, 0.5, 0.625, 1.0});
  // Each cell lies inside or outside the hole and inside or outside K_1.
  const RandomSystem sys = fixtures::doubling(IntervalSet({{0.0, 0.25}}));
  const IntervalSet k1 = survivor_set(sys, w0, 1).cells;
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    const IntervalSet cell({{e[i], e[i + 1]}});
    const double in = k1.intersect(cell).measure();
    CHECK((in == 0.0 || in == doctest::Approx(cell.measure())));
  }
}

TEST_CASE("every partition cell is a monotone piece of the iterate") {
  RandomSystem sys{BaseSystem::cycle(2), {gauss_map(8), tripling_map()}, Hole({IntervalSet({{0.3, 0.4}})})};
  const auto p = refine_partition(sys, w0, 2);
  for (std::size_t i = 0; i < p.cell_count(); ++i) {
    const Interval c = p.cell(i);
    // Follow 9 interior points for two steps; the order must be kept or reversed throughout.
    // Cells in the truncated gap [0, 1/9) of the Gauss fiber carry no branch.
    if (!sys.map(w0).locate(c.lo + 0.5 * (c.hi - c.lo))) continue;
    std::vector<double> ys;
    for (int s = 1; s <= 9; ++s) {
      double x = c.lo + (c.hi - c.lo) * s / 10.0;
      for (FiberId u = w0; u.index < 2; u = FiberId{u.index + 1}) {
        const auto b = sys.map(u).locate(x);
        REQUIRE(b.has_value());
        x = sys.map(u).branches[*b](x);
      }
      ys.push_back(x);
    }
    bool up = true, down = true;
    for (std::size_t k = 1; k < ys.size(); ++k) {
      up &= ys[k] > ys[k - 1];
      down &= ys[k] < ys[k - 1];
    }
    CHECK((up || down));
  }
}

TEST_CASE("survivor sets") {
  CHECK(survivor_set(fixtures::doubling(), w0, 5).cells == IntervalSet::unit());
  CHECK(survivor_set(fixtures::doubling(IntervalSet({{0.5, 1.0}})), w0, 1).cells == IntervalSet({{0.0, 0.25}}));
  CHECK(survivor_set(fixtures::doubling(IntervalSet({{0.0, 0.25}})), w0, 1).cells ==
        IntervalSet({{0.25, 0.5}, {0.625, 1.0}}));
  CHECK(survivor_set(fixtures::doubling(IntervalSet({{0.0, 0.25}})), w0, 0).cells == IntervalSet({{0.25, 1.0}}));
}

TEST_CASE("survivor sets are nested") {
  const RandomSystem sys = fixtures::doubling(IntervalSet({{0.0, 0.25}}));
  IntervalSet prev = survivor_set(sys, w0, 0).cells;
  for (int n = 1; n <= 10; ++n) {
    const IntervalSet k = survivor_set(sys, w0, n).cells;
    CHECK(k.subset_of(prev, 1e-15));
    prev = k;
  }
  // The Lebesgue masses follow the cylinder recursion 4λ² = 2λ + 1.
  const double m9 = survivor_set(sys, w0, 9).cells.measure();
  const double m10 = survivor_set(sys, w0, 10).cells.measure();
  CHECK(m10 / m9 == doctest::Approx(frozen::golden_lambda).epsilon(1e-3));
}

TEST_CASE("pullback of a target set") {
  const RandomSystem sys = fixtures::doubling(IntervalSet({{0.5, 1.0}}));
  // x ∈ [0,1/2) and 2x ∈ [0,1/4).
  CHECK(pullback_set(sys, w0, 1, IntervalSet({{0.0, 0.25}})) == IntervalSet({{0.0, 0.125}}));
  CHECK(pullback_set(sys, w0, 0, IntervalSet::unit()) == IntervalSet({{0.0, 0.5}}));
}

TEST_CASE("support sets") {
  const OperatorFamily half = fixtures::doubling_family(IntervalSet({{0.5, 1.0}}));
  CHECK(support_set(half, w0, 0).size() == 32);  // J itself
  CHECK(support_set(half, w0, 1).size() == 64);
  const OperatorFamily closed = fixtures::doubling_family();
  for (int j = 0; j < 4; ++j) CHECK(support_set(closed, w0, j).size() == 64);
  const OperatorFamily q1 = fixtures::doubling_family(IntervalSet({{0.0, 0.25}}));
  // S_0 = J, while S_1 already covers the image of J; descent starts at j = 1.
  CHECK(support_set(q1, w0, 0).size() == 48);
  for (int j = 1; j < 6; ++j) {
    const auto a = support_set(q1, w0, j), b = support_set(q1, w0, j + 1);
    for (std::size_t c : b) CHECK(std::find(a.begin(), a.end(), c) != a.end());
  }
}

TEST_CASE("Gauss branches invert to 1e-13") {
  const FiberMap m = gauss_map(64);
  REQUIRE(m.branches.size() == 64);
  REQUIRE(m.tail_bound.has_value());
  CHECK(*m.tail_bound == doctest::Approx(1.0 / 64.0));
  for (std::size_t k = 0; k < 64; k += 7) {
    const Branch& b = m.branches[k];
    CHECK(b.domain().lo == doctest::Approx(1.0 / (k + 2.0)));
    CHECK(b.orientation() == Orientation::Decreasing);
    for (double y : {0.05, 0.3, 0.77}) CHECK(std::abs(b(b.preimage(y)) - y) < 1e-13);
  }
  CHECK(m.locate(0.7).value() == 0);
  CHECK(m.locate(0.4).value() == 1);
}

TEST_CASE("nonlinear branches without a closed-form inverse") {
  const Branch b = Branch::monotone(0.0, 1.0, [](double x) { return x * x; });
  CHECK(b.preimage(0.25) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(b.abs_derivative(0.5) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("system validation") {
  RandomSystem overlap{BaseSystem::cycle(1), {affine_map({{0.0, 0.6, 1.0, 0.0}, {0.5, 1.0, 2.0, -1.0}})}, Hole()};
  CHECK_THROWS_AS(overlap.validate(), ValidationError);
  RandomSystem outside{BaseSystem::cycle(1), {affine_map({{0.0, 1.0, 2.0, 0.0}})}, Hole()};
  CHECK_THROWS_AS(outside.validate(), ValidationError);
  RandomSystem missing{BaseSystem::cycle(2), {doubling_map()}, Hole()};
  CHECK_THROWS_AS(missing.validate(), ValidationError);
  RandomSystem ok{BaseSystem::cycle(2), {doubling_map(), tripling_map()}, Hole()};
  CHECK_NOTHROW(ok.validate());
  const RandomSystem win{BaseSystem::orbit_window(2, 1, 1), {doubling_map()}, Hole()};
  CHECK_THROWS_AS(refine_partition(win, FiberId{3}, 3), WindowExceeded);
}
