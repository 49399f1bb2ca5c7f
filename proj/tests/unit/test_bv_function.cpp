#include <doctest.h>

#include <vector>

#include "openrpf/bv_function.hpp"
#include "openrpf/random.hpp"

using namespace openrpf;

namespace {

GridFunction values(std::vector<double> v) {
  GridFunction f{Grid::uniform(v.size()), Eigen::VectorXd(static_cast<Eigen::Index>(v.size()))};
  for (std::size_t i = 0; i < v.size(); ++i) f.values[static_cast<Eigen::Index>(i)] = v[i];
  return f;
}

const IntervalSet left_half({{0.0, 0.5}});

}  // namespace

TEST_CASE("variation") {
  CHECK(variation(GridFunction::constant(Grid::uniform(16), 1.0)) == 0.0);
  CHECK(variation(GridFunction::indicator(Grid::uniform(16), left_half)) == 1.0);
  CHECK(variation(values({0, 2, 1})) == 3.0);
}

TEST_CASE("norms and infima") {
  CHECK(bv_norm(GridFunction::constant(Grid::uniform(8), -2.5)) == 2.5);
  CHECK(bv_norm(GridFunction::indicator(Grid::uniform(8), left_half)) == 2.0);
  const GridFunction f = values({3, 5, 2});
  const std::vector<std::size_t> first_two{0, 1};
  CHECK(inf_on(f, first_two) == 3.0);
  CHECK(inf_on(f, IntervalSet({{0.5, 0.9}})) == 2.0);
  CHECK(sup_norm(values({-7, 1})) == 7.0);
}

TEST_CASE("integration against cell measures") {
  const Grid g = Grid::uniform(4);
  CHECK(integrate(GridFunction::constant(g, 1.0), CellMeasure::lebesgue(g)) == doctest::Approx(1.0));
  CHECK(integrate(GridFunction::indicator(g, left_half), CellMeasure::lebesgue(g)) == doctest::Approx(0.5));
  CHECK(integrate(GridFunction::sample(g, [](double x) { return x; }), CellMeasure::lebesgue(g)) ==
        doctest::Approx(0.5));
}

TEST_CASE("integration on a common refinement") {
  const Grid coarse = Grid::uniform(2);
  const Grid fine({0.0, 0.25, 0.4, 1.0});
  const GridFunction f = GridFunction::sample(coarse, [](double x) { return x < 0.5 ? 2.0 : 4.0; });
  // Lebesgue mass spread over the fine grid: ∫ f = 2·0.5 + 4·0.5.
  CHECK(integrate(f, CellMeasure::lebesgue(fine)) == doctest::Approx(3.0));
  const GridFunction t = transfer_to(f, fine);
  CHECK(t.values[2] == doctest::Approx((2.0 * 0.1 + 4.0 * 0.5) / 0.6));
}

TEST_CASE("variation is a seminorm and integrate is bounded") {
  const Grid g = Grid::uniform(64);
  CounterRng rng(3, "tests", "bv");
  for (int s = 0; s < 20; ++s) {
    const GridFunction f = random_bv_function(g, rng, true);
    const GridFunction h = random_bv_function(g, rng, true);
    GridFunction sum{g, f.values + h.values};
    GridFunction scaled{g, -3.0 * f.values};
    CHECK(variation(sum) <= variation(f) + variation(h) + 1e-12);
    CHECK(variation(scaled) == doctest::Approx(3.0 * variation(f)));
    const CellMeasure m = CellMeasure::lebesgue(g);
    CHECK(std::abs(integrate(f, m)) <= sup_norm(f) * m.total() + 1e-12);
    // Pointwise bound f ≤ var f + ∫ f dm for a probability measure m.
    CHECK(f.values.maxCoeff() <= variation(f) + integrate(f, m) + 1e-12);
  }
}

TEST_CASE("random observables are reproducible") {
  const Grid g = Grid::uniform(32);
  CounterRng a(9, "tests", "bv", 1), b(9, "tests", "bv", 1);
  const GridFunction f = random_bv_function(g, a), h = random_bv_function(g, b);
  CHECK(f.values == h.values);
  CHECK(f.values.minCoeff() >= 0.0);
}

TEST_CASE("grids") {
  const Grid g({0.0, 0.1, 0.5, 1.0});
  CHECK(g.size() == 3);
  CHECK(g.locate(0.0) == 0);
  CHECK(g.locate(0.1) == 1);
  CHECK(g.locate(1.0) == 2);
  const Eigen::VectorXd c = g.coverage(IntervalSet({{0.05, 0.3}}));
  CHECK(c[0] == doctest::Approx(0.5));
  CHECK(c[1] == doctest::Approx(0.5));
  CHECK(c[2] == 0.0);
  CHECK(g.same_as(g));
  CHECK_FALSE(g.same_as(Grid::uniform(3)));
}
