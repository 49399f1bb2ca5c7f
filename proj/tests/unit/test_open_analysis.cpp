#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "frozen_values.hpp"
#include "openrpf/open_analysis.hpp"

using namespace openrpf;
using fixtures::w0;
using fixtures::w1;

namespace {

struct Solved {
  OperatorFamily fam;
  SpectralSolution closed;
  SpectralSolution open;
};

Solved solve(OperatorFamily fam) {
  SpectralSolution c = solve_fiber_system(fam, Variant::Closed);
  SpectralSolution o = solve_fiber_system(fam, Variant::Open);
  return {std::move(fam), std::move(c), std::move(o)};
}

const IntervalSet quarter({{0.0, 0.25}});
const IntervalSet right_half({{0.5, 1.0}});

}  // namespace

TEST_CASE("expected pressure") {
  const Solved closed = solve(fixtures::doubling_family({}, 128));
  const PressureReport p = expected_pressure(closed.fam, closed.closed, closed.open);
  CHECK(std::abs(p.ep_closed) < 1e-12);
  CHECK(std::abs(p.ep_open) < 1e-12);

  const Solved half = solve(fixtures::doubling_family(right_half));
  const PressureReport ph = expected_pressure(half.fam, half.closed, half.open);
  CHECK(ph.ep_open == doctest::Approx(std::log(0.5)).epsilon(1e-12));

  const Solved r2 = solve(fixtures::rand2_family());
  const PressureReport pr = expected_pressure(r2.fam, r2.closed, r2.open);
  CHECK(pr.ep_open == doctest::Approx(frozen::rand2_ep_open).epsilon(1e-10));
  CHECK(std::abs(pr.ep_closed) < 1e-12);
  REQUIRE(pr.log_lambda_open.size() == 2);
  CHECK(pr.log_lambda_open[1] == doctest::Approx(std::log(2.0 / 3.0)));
  CHECK(pr.ep_open <= pr.ep_closed + pr.tail_slack);
}

TEST_CASE("escape rates") {
  const Solved closed = solve(fixtures::doubling_family({}, 128));
  const PressureReport p = expected_pressure(closed.fam, closed.closed, closed.open);
  const EscapeReport e = escape_rate(closed.fam, closed.closed, p, w0, 20);
  CHECK(std::abs(e.fitted_rate) < 1e-12);
  CHECK(std::abs(e.spectral_rate) < 1e-12);

  const Solved half = solve(fixtures::doubling_family(right_half));
  const PressureReport ph = expected_pressure(half.fam, half.closed, half.open);
  const EscapeReport eh = escape_rate(half.fam, half.closed, ph, w0, 30);
  CHECK(std::abs(eh.fitted_rate - std::log(2.0)) < 1e-9);
  CHECK(eh.discrepancy < 1e-9);

  const Solved q1 = solve(fixtures::doubling_family(quarter, 256));
  const PressureReport pq = expected_pressure(q1.fam, q1.closed, q1.open);
  const EscapeReport eq = escape_rate(q1.fam, q1.closed, pq, w0, 40);
  CHECK(eq.spectral_rate == doctest::Approx(frozen::golden_escape_rate).epsilon(1e-10));
  CHECK(std::abs(eq.fitted_rate - frozen::golden_escape_rate) < 1e-6);
  CHECK(eq.local_lower <= eq.fitted_rate + 1e-9);
  CHECK(eq.fitted_rate <= eq.local_upper + 1e-9);
  CHECK(eq.geometric_depth > 0);
  CHECK(eq.geometric_discrepancy < 1e-12);
  CHECK(std::isnan(eq.running_rate.front()));
  CHECK(eq.log_survivor_mass.size() == 41);
  for (std::size_t n = 1; n < eq.log_survivor_mass.size(); ++n)
    CHECK(eq.log_survivor_mass[n] <= eq.log_survivor_mass[n - 1] + 1e-15);

  const Solved r2 = solve(fixtures::rand2_family());
  const PressureReport pr = expected_pressure(r2.fam, r2.closed, r2.open);
  const EscapeReport er = escape_rate(r2.fam, r2.closed, pr, w0, 40);
  CHECK(er.spectral_rate == doctest::Approx(frozen::rand2_escape_rate).epsilon(1e-10));
  CHECK(std::abs(er.fitted_rate - frozen::rand2_escape_rate) < 1e-6);
}

TEST_CASE("conditionally invariant measure constants") {
  const Solved closed = solve(fixtures::doubling_family());
  const CondInvMeasure tc = conditionally_invariant(closed.fam, closed.closed, closed.open);
  CHECK(tc.c_ratio[0] == doctest::Approx(1.0));
  CHECK(tc.c_measure[0] == doctest::Approx(1.0));
  CHECK(tc.tau[0].total() == doctest::Approx(1.0));

  const Solved half = solve(fixtures::doubling_family(right_half));
  const CondInvMeasure th = conditionally_invariant(half.fam, half.closed, half.open);
  CHECK(th.c_ratio[0] == doctest::Approx(0.5));
  CHECK(th.c_measure[0] == doctest::Approx(0.5));
  CHECK(th.lemma_residual[0] < 1e-10);

  const Solved r2 = solve(fixtures::rand2_family());
  const CondInvMeasure tr = conditionally_invariant(r2.fam, r2.closed, r2.open);
  REQUIRE(tr.fibers.size() == 2);
  CHECK(tr.c_ratio[0] == doctest::Approx(1.0));
  CHECK(tr.c_ratio[1] == doctest::Approx(2.0 / 3.0));
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(tr.tau[i].total() == doctest::Approx(1.0));
    CHECK(tr.tau[i].measure_of(IntervalSet::unit()) == doctest::Approx(1.0));
    CHECK(tr.lemma_residual[i] < 1e-10);
  }
  CHECK(tr.tau[1].measure_of(IntervalSet({{2.0 / 3.0, 1.0}})) == 0.0);
}

TEST_CASE("conditional invariance") {
  const Solved half = solve(fixtures::doubling_family(right_half));
  const CondInvMeasure th = conditionally_invariant(half.fam, half.closed, half.open);
  // τ(T^{-1}A ∩ J) = c τ(A) for A = [0,1/4): the preimage in J is [0,1/8).
  CHECK(th.tau[0].measure_of(IntervalSet({{0.0, 0.125}})) ==
        doctest::Approx(0.5 * th.tau[0].measure_of(IntervalSet({{0.0, 0.25}}))));
  CHECK(verify_conditional_invariance(half.fam, th, w0, 0).max_residual == 0.0);
  const ConditionalInvarianceReport rh = verify_conditional_invariance(half.fam, th, w0, 1);
  CHECK(rh.sets_tested > 0);
  CHECK(rh.max_residual < 1e-12);

  const Solved q1 = solve(fixtures::doubling_family(quarter, 256));
  const CondInvMeasure tq = conditionally_invariant(q1.fam, q1.closed, q1.open);
  const ConditionalInvarianceReport rq = verify_conditional_invariance(q1.fam, tq, w0, 6);
  CHECK(rq.max_residual <= 1e-8);
  CHECK(rq.multiplicativity <= 1e-8);
  CHECK(rq.product_rule <= 1e-8);

  const Solved r2 = solve(fixtures::rand2_family());
  const CondInvMeasure tr = conditionally_invariant(r2.fam, r2.closed, r2.open);
  for (FiberId w : {w0, w1}) CHECK(verify_conditional_invariance(r2.fam, tr, w, 4).max_residual <= 1e-8);
}
