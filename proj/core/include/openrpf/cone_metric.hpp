#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "openrpf/transfer_op.hpp"

namespace openrpf {

inline constexpr double kSupportEpsilon = 1e-12;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct FunctionalEstimate {
  FiberId fiber;
  double value = 0.0;
  int depth = 0;
  std::vector<std::size_t> support;  // S(depth, depth), cells of grid(θ^depth ω)
  std::vector<double> sequence;      // inf-ratios for n = 1..depth
};

// Depth-truncated F_ω. Precomputes L^k 1 for k ≤ depth so that evaluating
// F on a new function costs `depth` sparse products.
class Functional {
 public:
  Functional(const OperatorFamily& fam, FiberId w, int depth);

  FiberId fiber() const { return w_; }
  int depth() const { return depth_; }
  const std::vector<std::size_t>& support() const { return supports_.back(); }

  FunctionalEstimate estimate(const GridFunction& f) const;
  double operator()(const Eigen::VectorXd& f) const { return ratio(push(f)); }
  double operator()(const GridFunction& f) const { return (*this)(f.values); }

  // L^depth f and the inf-ratio of an already pushed vector. F is concave and
  // positively homogeneous, and F(g − a f) only needs push(g) − a·push(f).
  Eigen::VectorXd push(const Eigen::VectorXd& f) const;
  double ratio(const Eigen::VectorXd& pushed) const;
  // F of every column of a dense block at once.
  Eigen::VectorXd batch(const Eigen::MatrixXd& columns) const;

 private:
  const OperatorFamily* fam_;
  FiberId w_;
  int depth_;
  std::vector<Eigen::VectorXd> ones_;  // L^k 1, k = 1..depth
  std::vector<std::vector<std::size_t>> supports_;
};

FunctionalEstimate estimate_functional(const OperatorFamily& fam, FiberId w,
                                       const GridFunction& f, int depth);

// ρ_ω = F_θω(L_ω 1_ω) for every fiber with enough successors.
std::vector<double> normalizing_constants(const OperatorFamily& fam, int depth);

// Iterate of the semi-normalized operator L̃ = L/ρ.
Eigen::VectorXd apply_semi_normalized(const OperatorFamily& fam, const std::vector<double>& rho,
                                      FiberId w, int n, Eigen::VectorXd f);

// Positive cone when `functional` is null, otherwise Λ_a. a = ∞ leaves only
// positivity.
struct Cone {
  double a = kInfinity;
  const Functional* functional = nullptr;

  static Cone positive() { return {}; }
  static Cone lambda(double a, const Functional& F) { return {a, &F}; }
  bool is_positive() const { return functional == nullptr || !(a < kInfinity); }
};

bool in_cone(const Eigen::VectorXd& f, const Cone& cone, double slack = 1e-12);
// log(β/α); +∞ when β is unbounded or α vanishes. Throws ValidationError if
// either argument is outside the cone.
double hilbert_distance(const Eigen::VectorXd& f, const Eigen::VectorXd& g, const Cone& cone);
double hilbert_distance(const GridFunction& f, const GridFunction& g, const Cone& cone);
// log[(sup f + cF(f)) / min{inf f, (1−c)F(f)}], the bound on Θ(1, f) in Λ_a
// for f ∈ Λ_{ca}.
double constant_distance_bound(const Eigen::VectorXd& f, double c, double F_value);

enum class CellClass { Good, Bad, Outside };

struct PartitionClassification {
  FiberId fiber;
  int n = 0;
  std::vector<Interval> cells;                                 // Ũ
  std::vector<std::pair<std::size_t, std::size_t>> grid_runs;  // [begin, end) grid cells
  std::vector<CellClass> classes;
  std::vector<double> functional;  // F_ω(1_U)
  int eta = 0;
  double delta = 0.0;  // half the smallest good F(1_U)

  std::size_t count(CellClass c) const;
};

// Ũ is built from maximal runs of grid cells sharing their n-step itinerary
// (branch index and hole membership at times 0..n).
PartitionClassification classify_cells(const OperatorFamily& fam, FiberId w, int n, int depth);

// Sup of g^n_ω over grid midpoints, with the open weight vanishing off K_{ω,n−1}.
Eigen::VectorXd open_weight(const OperatorFamily& fam, FiberId w, int n);

struct LYCoefficients {
  FiberId fiber;
  int n = 0;
  double a = 0.0;  // partition parameters of P_{ω,n}(a, b)
  double b = 1.0;
  int eta = 0;
  double delta = 0.0;
  double weight_sup = 0.0;  // ‖g^n_ω‖_∞
  double A = 0.0;           // constructive
  double B = 0.0;
  double rho_n = 1.0;  // ρ^n_ω
  double C = 0.0;      // A / ρ^n
  double D = 0.0;      // B / ρ^n
  double empirical_scale = 0.0;  // max over samples of var(L^n f)/(A var f + B F|f|)
  double A_empirical = 0.0;
  double B_empirical = 0.0;
  std::size_t samples = 0;
  std::size_t violations = 0;
};

LYCoefficients measure_ly_coefficients(const OperatorFamily& fam, FiberId w, int n,
                                       std::size_t samples, std::uint64_t seed, int depth,
                                       const std::vector<double>* rho = nullptr);

struct ConeParams {
  double u = 0.25;
  double v = 0.4;
  double epsilon = 0.1;
  double a = 0.0;  // explicit cone parameter; 0 means use ã
  int depth = 20;
  std::size_t samples = 100;
  int max_level = 8;
  int coating_cap = 64;
  std::uint64_t seed = 1;

  void validate() const;  // throws ValidationError
};

struct FiberClassification {
  FiberId fiber;
  double c_epsilon = 0.0;  // measured envelope constant C_ε(ω)
  double block_log_average = 0.0;  // (1/q_a) Σ log L^{N_c} over the R-block
  bool envelope_ok = false;
  bool zeta_ok = false;
  bool good = false;
  double log_gamma = 0.0;  // log Γ(ω)
  std::optional<int> coating_length;  // nullopt = exceeded the cap
};

struct ClassificationReport {
  ConeParams params;
  int Nc = 0;
  double xi = 0.0;
  double zeta = 0.0;
  double B = 1.0;
  int q_a = 0;
  int R = 0;
  double a_tilde = 0.0;
  double a0 = 0.0;
  std::vector<double> rho;
  std::vector<double> growth;                    // L_ω
  std::vector<std::vector<LYCoefficients>> ly;   // [fiber][n-1], n = 1..Nc
  std::vector<FiberId> fibers;                   // classified fibers
  std::vector<FiberClassification> classes;
  std::vector<std::string> warnings;

  double cone_parameter() const { return params.a > 0.0 ? params.a : a_tilde; }
};

// Throws InvariantViolation when no level up to max_level has negative mean
// log C (ξ would not be positive).
ClassificationReport classify_fibers(const OperatorFamily& fam, const ConeParams& params);

struct ContractionReport {
  FiberId fiber;
  int iterates = 0;      // block length applied to sample pairs
  double cone_a = 0.0;   // parameter of the cone the samples live in
  std::vector<double> reference_distances;  // Θ(L̃^n 1, L̃^n(1 + 1_[0,1/2))), n = 0..
  double decay_rate = 0.0;  // D fitted from reference distances above 1e-8; 0 when they collapse
  std::size_t pairs = 0;
  std::size_t checked_pairs = 0;
  double delta_estimate = 0.0;  // Δ_est, a lower bound for the image diameter
  double birkhoff_factor = 0.0;  // tanh(Δ_est / 4)
  double worst_ratio = 0.0;      // max post/pre
  bool images_in_contracted_cone = true;
  double cone_margin = 0.0;        // max var / ((u+v)ã F) over images
  double sup_norm_excess = 0.0;    // max of lhs − rhs in the sup-norm corollary
};

ContractionReport contraction_diagnostics(const OperatorFamily& fam,
                                          const ClassificationReport& cls, FiberId w,
                                          int iterates, std::size_t pairs, std::uint64_t seed,
                                          int reference_steps = 30);

struct LemmaReport {
  double functional_chain = 0.0;   // max(ρ^n F(f) − F(L^n f)), ≤ 0 expected
  double rho_chain = 0.0;          // max(ρ^n − F(L^n 1))
  double block_bound = 0.0;        // max(F(L̃^{lR} f) − (ã+1)F(L̃^{lR}1)F(f))
  std::optional<int> small_cells_level;  // first n with ‖g^n‖ < ρ^n/(8ã³)
  int good_cell_level = 0;               // partition level used for the next check
  bool good_cell_hypothesis = false;     // that level reaches small_cells_level
  double good_cell_deficit = 0.0;  // max over f of F(f)/2 − max_good inf_U f
  double rate_weight = 0.0;        // (1/n) log ‖g^n‖
  double rate_eta = 0.0;           // (1/n) log max(η^n, 1)
  double rate_inf = 0.0;           // (1/n) log inf_{S(n,∞)} L^n 1
  int rate_level = 0;
  bool contracting = false;        // rate_weight + rate_eta < rate_inf
};

LemmaReport check_cone_lemmas(const OperatorFamily& fam, const ClassificationReport& cls,
                              FiberId w, std::size_t samples, std::uint64_t seed);

}  // namespace openrpf
