#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "openrpf/cone_metric.hpp"
#include "openrpf/errors.hpp"
#include "openrpf/random.hpp"

using namespace openrpf;
using fixtures::w0;

namespace {

const IntervalSet left_half({{0.0, 0.5}});
const IntervalSet right_half({{0.5, 1.0}});

}  // namespace

TEST_CASE("functional of the unit function is one") {
  for (const OperatorFamily& fam : {fixtures::doubling_family(), fixtures::doubling_family(IntervalSet({{0.0, 0.25}})),
                                    fixtures::rand2_family()}) {
    const Functional F(fam, w0, 10);
    CHECK(std::abs(F(fam.survivor_mask(w0)) - 1.0) < 1e-10);
  }
}

TEST_CASE("closed doubling functional approaches the Lebesgue mean") {
  const OperatorFamily fam = fixtures::doubling_family({}, 1024);
  CounterRng rng(2, "tests", "functional");
  for (int s = 0; s < 10; ++s) {
    const GridFunction f = random_bv_function(fam.grid(w0), rng, true);
    const FunctionalEstimate est = estimate_functional(fam, w0, f, 8);
    CHECK(std::abs(est.value - f.values.mean()) <= std::ldexp(variation(f), -8) + 1e-12);
    CHECK(est.value >= f.values.minCoeff() - 1e-12);
    CHECK(est.value <= f.values.maxCoeff() + 1e-12);
    for (std::size_t n = 1; n < est.sequence.size(); ++n) CHECK(est.sequence[n] >= est.sequence[n - 1] - 1e-12);
  }
}

TEST_CASE("functional vanishes on functions supported in the hole") {
  const OperatorFamily fam = fixtures::doubling_family(right_half);
  const GridFunction f = GridFunction::indicator(fam.grid(w0), right_half);
  CHECK(estimate_functional(fam, w0, f, 6).value == 0.0);
}

TEST_CASE("functional depth is limited by the window") {
  RandomSystem sys{BaseSystem::orbit_window(3, 1, 1), {doubling_map()}, Hole()};
  const OperatorFamily fam(sys, fixtures::half(), Discretization{16, 1});
  CHECK(Functional(fam, FiberId{3}, 10).depth() == 3);
  CHECK_THROWS_AS(Functional(fam, FiberId{6}, 10), WindowExceeded);
}

TEST_CASE("normalizing constants") {
  CHECK(normalizing_constants(fixtures::doubling_family(), 8)[0] == doctest::Approx(1.0));
  CHECK(normalizing_constants(fixtures::doubling_family(right_half), 8)[0] == doctest::Approx(0.5));
}

TEST_CASE("Hilbert distance in the positive cone") {
  Eigen::VectorXd f(2), g(2);
  f << 1, 1;
  g << 1, 2;
  CHECK(hilbert_distance(f, g, Cone::positive()) == doctest::Approx(std::log(2.0)).epsilon(1e-10));
  CHECK(hilbert_distance(g, 2.0 * g, Cone::positive()) == doctest::Approx(0.0));
  Eigen::VectorXd z(2);
  z << 0, 1;
  CHECK(hilbert_distance(f, z, Cone::positive()) == kInfinity);
  Eigen::VectorXd neg(2);
  neg << -1, 1;
  CHECK_THROWS_AS(hilbert_distance(f, neg, Cone::positive()), ValidationError);
}

TEST_CASE("distance to constants in a variation cone obeys the closed-form bound") {
  const OperatorFamily fam = fixtures::doubling_family({}, 256);
  const Functional F(fam, w0, 8);
  CounterRng rng(4, "tests", "cone");
  const double c = 0.5;
  for (int s = 0; s < 20; ++s) {
    const GridFunction f = random_bv_function(fam.grid(w0), rng);
    const double Ff = F(f);
    const double a = variation(f) / (c * Ff) * 1.01;  // f ∈ Λ_{ca}
    const Cone cone = Cone::lambda(a, F);
    REQUIRE(in_cone(f.values, Cone::lambda(c * a, F)));
    const Eigen::VectorXd one = fam.one(w0).values;
    CHECK(hilbert_distance(one, f.values, cone) <= constant_distance_bound(f.values, c, Ff) + 1e-8);
    CHECK(hilbert_distance(f.values, 3.0 * f.values, cone) == doctest::Approx(0.0));
  }
}

TEST_CASE("Lasota-Yorke constants for closed doubling") {
  const OperatorFamily fam = fixtures::doubling_family({}, 256);
  const LYCoefficients ly = measure_ly_coefficients(fam, w0, 1, 100, 1, 8);
  CHECK(ly.eta == 0);
  CHECK(ly.A == doctest::Approx(1.5));
  CHECK(ly.violations == 0);
  CHECK(ly.samples == 100);
  CounterRng rng(6, "tests", "ly");
  for (int s = 0; s < 50; ++s) {
    const GridFunction f = random_bv_function(fam.grid(w0), rng, true);
    const GridFunction Lf{fam.grid(w0), fam.closed(w0).apply(f.values)};
    CHECK(variation(Lf) <= 0.5 * variation(f) + 1e-12);
  }
  const GridFunction c = GridFunction::constant(fam.grid(w0), 2.0);
  CHECK(variation(GridFunction{fam.grid(w0), fam.apply_n(w0, 3, c.values, Variant::Closed)}) == 0.0);
}

TEST_CASE("Lasota-Yorke inequality is strict for the surviving half") {
  const OperatorFamily fam = fixtures::doubling_family(right_half, 64);
  const GridFunction f = GridFunction::indicator(fam.grid(w0), left_half);
  const Eigen::VectorXd Lf = fam.open(w0).apply(f.values);
  CHECK(fixtures::sup_dist(Lf, 0.5) < 1e-15);
  const LYCoefficients ly = measure_ly_coefficients(fam, w0, 1, 50, 1, 8);
  CHECK(ly.violations == 0);
  CHECK(0.0 < ly.A * variation(f) + ly.B * estimate_functional(fam, w0, f, 8).value);
}

TEST_CASE("cell classification") {
  const OperatorFamily closed = fixtures::doubling_family();
  const PartitionClassification pc = classify_cells(closed, w0, 1, 8);
  CHECK(pc.count(CellClass::Good) == pc.cells.size());
  CHECK(pc.eta == 0);
  CHECK(pc.delta == doctest::Approx(0.25));

  const OperatorFamily half = fixtures::doubling_family(right_half);
  const PartitionClassification ph = classify_cells(half, w0, 1, 8);
  REQUIRE(ph.cells.size() == 3);
  CHECK(ph.cells[1] == Interval{0.25, 0.5});
  CHECK(ph.classes[0] == CellClass::Good);
  CHECK(ph.classes[1] == CellClass::Bad);
  CHECK(ph.classes[2] == CellClass::Outside);
  CHECK(ph.functional[1] == 0.0);
  CHECK(ph.eta == 1);
  CHECK(ph.count(CellClass::Good) + ph.count(CellClass::Bad) + ph.count(CellClass::Outside) == ph.cells.size());
}

TEST_CASE("cone parameter validation") {
  ConeParams p;
  CHECK_NOTHROW(p.validate());
  p.u = 0.5;
  p.v = 0.3;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = {};
  p.epsilon = 1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = {};
  p.depth = 0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("closed doubling fiber is good") {
  const OperatorFamily fam = fixtures::doubling_family({}, 128);
  ConeParams p;
  p.epsilon = 0.1;
  p.depth = 8;
  p.samples = 20;
  p.max_level = 3;
  const ClassificationReport r = classify_fibers(fam, p);
  CHECK(r.xi > 0.0);
  REQUIRE(r.classes.size() == 1);
  CHECK(r.classes[0].good);
  CHECK(r.classes[0].coating_length == 1);
  CHECK(r.B * r.q_a * std::exp(-r.xi * r.R / 2.0) <= p.u);
  const LemmaReport lem = check_cone_lemmas(fam, r, w0, 10, 1);
  CHECK(lem.functional_chain <= 1e-8);
  CHECK(lem.rho_chain <= 1e-8);
}

TEST_CASE("the surviving half is not contracting") {
  const OperatorFamily fam = fixtures::doubling_family(right_half, 64);
  ConeParams p;
  p.depth = 8;
  p.samples = 10;
  p.max_level = 4;
  CHECK_THROWS_AS(classify_fibers(fam, p), InvariantViolation);
}

TEST_CASE("contraction for closed doubling") {
  const OperatorFamily fam = fixtures::doubling_family({}, 128);
  ConeParams p;
  p.depth = 8;
  p.samples = 20;
  p.max_level = 3;
  const ClassificationReport r = classify_fibers(fam, p);
  const ContractionReport c = contraction_diagnostics(fam, r, w0, 0, 10, 1);
  bool below = false;
  for (double d : c.reference_distances) below |= d < 1e-8;
  CHECK(below);
  CHECK(c.decay_rate < 1.0);
}

TEST_CASE("contraction and Birkhoff factor for doubling with hole [0,1/4)") {
  const OperatorFamily fam = fixtures::doubling_family(IntervalSet({{0.0, 0.25}}), 256);
  ConeParams p;
  p.depth = 12;
  p.samples = 20;
  p.max_level = 6;
  const ClassificationReport r = classify_fibers(fam, p);
  const ContractionReport c = contraction_diagnostics(fam, r, w0, 0, 10, 1);
  CHECK(c.decay_rate > 0.0);
  CHECK(c.decay_rate < 1.0);
  CHECK(c.checked_pairs > 0);
  if (c.images_in_contracted_cone) CHECK(c.worst_ratio <= c.birkhoff_factor + 0.05);
  CHECK(c.sup_norm_excess <= 1e-8);
  const LemmaReport lem = check_cone_lemmas(fam, r, w0, 10, 1);
  CHECK(lem.contracting);
  CHECK(lem.rate_weight + lem.rate_eta < lem.rate_inf);
}
