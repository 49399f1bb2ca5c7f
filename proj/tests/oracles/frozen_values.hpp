#pragma once

// Reference values computed by oracle_checks.cpp without the library and
// frozen here. Unit and acceptance tests compare against these constants.
namespace frozen {

// Leading eigenvalue of the 3x3 cylinder matrix of doubling with hole [0, 1/4).
inline constexpr double golden_lambda = 0.80901699437494745;
inline constexpr double golden_escape_rate = 0.21193535550034182;

// Σ_{k ≤ 64} 1/k² and the integral bound on the rest.
inline constexpr double gauss_s1_64 = 1.629430501408887;
inline constexpr double gauss_tail_64 = 1.0 / 64.0;

// Lebesgue measure of the one-step survivor sets of doubling.
inline constexpr double doubling_q1_k1 = 0.625;  // hole [0, 1/4)
inline constexpr double doubling_half_k1 = 0.25;  // hole [1/2, 1)

// Period-2 doubling/tripling, hole [2/3, 1) on the tripling fiber.
inline constexpr double rand2_ep_open = -0.20273255405408222;  // (1/2) log(2/3)
inline constexpr double rand2_escape_rate = 0.20273255405408222;

// Closed doubling, f = g = x at 4096 cell midpoints, fitted over |corr| > 1e-13.
inline constexpr double doubling_x_kappa = 0.49326569680826216;
inline constexpr double doubling_x_corr0 = 0.083333328366279602;
inline constexpr double doubling_x_corr1 = 0.041666656732559204;

}  // namespace frozen
