// Independent reference computations. Nothing here links against the
// library: each value is rebuilt from first principles and compared with
// the constant frozen in frozen_values.hpp.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "frozen_values.hpp"

namespace {

double q_star(double x) { return 1.0 / ((1.0 + x) * std::log(2.0)); }

// Lebesgue mass of the points i/N surviving each of `steps` steps, where
// step k sends i to mult[k]·i mod N and kills i when the image is in the hole
// [hole_lo[k]·N, hole_hi[k]·N). Exact whenever the survivor sets have
// endpoints on the 1/N lattice.
std::vector<double> survivor_masses(std::uint64_t N, const std::vector<std::uint64_t>& mult,
                                    const std::vector<std::uint64_t>& hole_lo,
                                    const std::vector<std::uint64_t>& hole_hi, int steps) {
  std::vector<std::uint64_t> alive(static_cast<std::size_t>(steps) + 1, 0);
  const std::size_t period = mult.size();
  for (std::uint64_t i = 0; i < N; ++i) {
    std::uint64_t x = i;
    for (int k = 0; k <= steps; ++k) {
      const std::size_t s = static_cast<std::size_t>(k) % period;
      if (x >= hole_lo[s] && x < hole_hi[s]) break;
      ++alive[static_cast<std::size_t>(k)];
      x = (x * mult[s]) % N;
    }
  }
  std::vector<double> out;
  for (auto a : alive) out.push_back(static_cast<double>(a) / static_cast<double>(N));
  return out;
}

}  // namespace

TEST_CASE("cylinder matrix power iteration gives the golden eigenvalue") {
  // Open doubling, g = 1/2, hole [0,1/4), acting on functions constant on
  // [1/4,1/2), [1/2,3/4), [3/4,1).
  const double M[3][3] = {{0.0, 0.5, 0.0}, {0.5, 0.0, 0.5}, {0.5, 0.0, 0.5}};
  std::vector<double> v{1.0, 1.0, 1.0};
  double lambda = 0.0;
  for (int it = 0; it < 500; ++it) {
    std::vector<double> w(3, 0.0);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) w[r] += M[r][c] * v[c];
    const double s = w[0] + w[1] + w[2];
    lambda = s / (v[0] + v[1] + v[2]);
    for (int r = 0; r < 3; ++r) v[r] = w[r] / s;
  }
  CHECK(lambda == doctest::Approx(frozen::golden_lambda).epsilon(1e-15));
  CHECK(4 * lambda * lambda - 2 * lambda - 1 == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(-std::log(lambda) == doctest::Approx(frozen::golden_escape_rate).epsilon(1e-15));
}

TEST_CASE("Gauss density satisfies the fixed-point equation by substitution") {
  const int terms = 1000000;
  for (double x : {0.0, 0.1, 0.25, 0.5, 0.75, 0.99}) {
    double sum = 0.0;
    for (int k = terms; k >= 1; --k) {
      const double y = k + x;
      sum += q_star(1.0 / y) / (y * y);
    }
    // The remaining terms are below ∫_terms^∞ (t+x)^{-2} q*(0) dt.
    CHECK(std::abs(sum - q_star(x)) < 2.0 / terms);
  }
}

TEST_CASE("Gauss summability constants") {
  double s1 = 0.0;
  for (int k = 1; k <= 64; ++k) s1 += 1.0 / (static_cast<double>(k) * k);
  CHECK(s1 == doctest::Approx(frozen::gauss_s1_64).epsilon(1e-15));
  double tail = 0.0;
  for (int k = 200000; k >= 65; --k) tail += 1.0 / (static_cast<double>(k) * k);
  CHECK(tail < frozen::gauss_tail_64);
  CHECK(tail > 1.0 / 65.0);
}

TEST_CASE("brute-force survivor masses, doubling with hole [0,1/4)") {
  const std::uint64_t N = std::uint64_t{1} << 22;
  const auto m = survivor_masses(N, {2}, {0}, {N / 4}, 20);
  CHECK(m[0] == 0.75);
  CHECK(m[1] == frozen::doubling_q1_k1);
  CHECK(m[20] / m[19] == doctest::Approx(frozen::golden_lambda).epsilon(1e-7));
  const double rate = -std::log(m[20] / m[10]) / 10.0;
  CHECK(rate == doctest::Approx(frozen::golden_escape_rate).epsilon(1e-6));
}

TEST_CASE("brute-force survivor masses, doubling with hole [1/2,1)") {
  const std::uint64_t N = std::uint64_t{1} << 22;
  const auto m = survivor_masses(N, {2}, {N / 2}, {N}, 20);
  for (int n = 0; n <= 20; ++n) CHECK(m[static_cast<std::size_t>(n)] == std::ldexp(1.0, -(n + 1)));
  CHECK(m[1] == frozen::doubling_half_k1);
}

TEST_CASE("brute-force survivor masses, period-2 doubling/tripling") {
  std::uint64_t N = 1;
  for (int i = 0; i < 8; ++i) N *= 6;
  // Fiber 0 doubles with no hole; fiber 1 triples with hole [2/3, 1).
  const auto m = survivor_masses(N, {2, 3}, {N, 2 * N / 3}, {N, N}, 16);
  for (int n = 0; n <= 16; ++n) {
    CHECK(m[static_cast<std::size_t>(n)] ==
          doctest::Approx(std::pow(2.0 / 3.0, (n + 1) / 2)).epsilon(1e-12));
  }
  const double rate = -std::log(m[16] / m[8]) / 8.0;
  CHECK(rate == doctest::Approx(frozen::rand2_escape_rate).epsilon(1e-12));
  CHECK(0.5 * (std::log(1.0) + std::log(2.0 / 3.0)) == doctest::Approx(frozen::rand2_ep_open).epsilon(1e-15));
}

TEST_CASE("dense correlation oracle for closed doubling with f = g = x") {
  const int n_cells = 4096;
  // Ulam matrix from branch images: source cell i under x ↦ 2x mod 1 covers
  // two target cells, each with weight (1/2)·overlap/width.
  std::vector<std::vector<std::pair<int, double>>> rows(n_cells);
  const double h = 1.0 / n_cells;
  for (int i = 0; i < n_cells; ++i) {
    const double lo = i * h, hi = lo + h;
    const double shift = lo < 0.5 ? 0.0 : 1.0;
    const double ylo = 2 * lo - shift, yhi = 2 * hi - shift;
    for (int j = static_cast<int>(ylo / h); j < n_cells && j * h < yhi; ++j) {
      const double overlap = std::min(yhi, (j + 1) * h) - std::max(ylo, j * h);
      if (overlap > 0) rows[static_cast<std::size_t>(j)].push_back({i, 0.5 * overlap / h});
    }
  }
  std::vector<double> f(n_cells);
  for (int i = 0; i < n_cells; ++i) f[static_cast<std::size_t>(i)] = (i + 0.5) * h - 0.5;
  std::vector<double> g = f, corr;
  for (int n = 0; n <= 30; ++n) {
    double c = 0.0;
    for (int i = 0; i < n_cells; ++i) c += g[static_cast<std::size_t>(i)] * f[static_cast<std::size_t>(i)] * h;
    corr.push_back(c);
    std::vector<double> next(n_cells, 0.0);
    for (int j = 0; j < n_cells; ++j)
      for (auto [i, w] : rows[static_cast<std::size_t>(j)]) next[static_cast<std::size_t>(j)] += w * g[static_cast<std::size_t>(i)];
    g = next;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (int n = 0; n <= 30; ++n) {
    const double c = std::abs(corr[static_cast<std::size_t>(n)]);
    if (c <= 1e-13) continue;
    const double y = std::log(c);
    sx += n; sy += y; sxx += n * n; sxy += n * y; ++m;
  }
  const double kappa = std::exp((m * sxy - sx * sy) / (m * sxx - sx * sx));
  CHECK(kappa == doctest::Approx(frozen::doubling_x_kappa).epsilon(1e-12));
  CHECK(kappa <= 0.51);
  CHECK(corr[0] == doctest::Approx(frozen::doubling_x_corr0).epsilon(1e-14));
  CHECK(corr[1] == doctest::Approx(frozen::doubling_x_corr1).epsilon(1e-14));
}
