#ifndef FOCKFK_COMMLAB_HPP
#define FOCKFK_COMMLAB_HPP

#include <functional>
#include <string>
#include <vector>

#include "fockfk/fock.hpp"
#include "fockfk/model.hpp"

namespace fockfk {

// Scalar function library for the difference calculus: t^n, F_eps^{+-alpha},
// F_{eps,E}, e^{a F_eps} with F_eps(t) = t / (1 + eps t) and
// F_{eps,E}(t) = (E + t) / (1 + eps (E + t)).
struct ScalarFunction {
  enum class Kind { power, f_eps_pow, f_eps_e, exp_f_eps };
  Kind kind = Kind::power;
  double n = 1.0;      // power exponent
  double alpha = 1.0;  // f_eps exponent (may be negative)
  double eps = 0.0;
  double E = 1.0;
  double a = 1.0;      // exponential rate

  double operator()(double t) const;
};

struct DifferenceSpec {
  ScalarFunction f;
  std::vector<double> shifts;  // positive
  std::vector<double> deltas;  // in [0,1], one per shift
};

// iterated difference by inclusion-exclusion over shift subsets
double difference_op(const DifferenceSpec& spec, double t);

struct ScanRecord {
  std::string label;
  double ratio_sup = 0.0;        // sup |LHS| / (bound without the constant)
  double refined_ratio = 0.0;    // same on the doubled grid
  double refinement_change = 0.0;  // relative change under doubling
  bool refused = false;          // hypothesis violation (e.g. eps > a)
  bool pass = false;
};

// difference-quotient bounds for inverse powers, powers, and exponentials
// of the regularized ramp
enum class LeibnizBound { inverse_power, power, exponential };

struct ScanOptions {
  double alpha = 1.0;
  double eps = 0.0;
  double a = 1.0;
  std::vector<double> deltas;
  int t_points = 24;
  double t_lo = 0.25, t_hi = 4.0;
  int s_points = 12;
  double s_lo = 0.05, s_hi = 2.0;
};

ScanRecord difference_bound_scan(LeibnizBound bound, const ScanOptions& opts);

// pull-through a(p_L) F(dGamma(v)) = F(dGamma(v) + sum v(p)) a(p_L), exact on
// the truncation
double pull_through_residual(const FockContext& ctx,
                             const std::function<double(double)>& F, const RVec& v,
                             const std::vector<int>& modes, const Vec& psi);

struct MultiCommutatorData {
  std::function<double(double)> F1, F2, F3;
  RVec v1, v2, v3;                 // per-mode multiplication weights
  std::vector<Vec> creation_g;     // g_j, j in J (N entries)
  std::vector<Vec> annihilation_g; // g_l, l in L (M entries)
  Vec phi, psi;                    // fock-part vectors
};

// residual of the multi-commutator partition identity; both sides are exact
// finite sums once mode integrals are counting sums
double multi_commutator_residual(const FockContext& ctx,
                                 const MultiCommutatorData& data);

struct CommNormRecord {
  double norm = 0.0;       // exact ||T|| by SVD
  double bound_shape = 0.0;  // lemma RHS without the constant
  double ratio = 0.0;
  double ratio_refined = 0.0;  // same at boson_cap + 2
  double refinement_change = 0.0;
  double inversion_residual = 0.0;  // comm-inv1 / comm-inv2
  bool skipped = false;
  bool pass = false;
};

struct CommNormSpec {
  // exponents of Lemma A.4: T = (1+dG(v))^{-n/2} F^{sigma-beta+kappa}
  //   {ad...ad F^alpha} F^{tau-gamma-kappa} (1+dG(v))^{-m/2}
  double alpha = 1.0, beta = 0.5, gamma = 0.5, sigma = 0.0, tau = 0.0,
         kappa = 0.0;
  int m = 0, n = 0;
  double eps = 0.0;
  double E = 1.0;
  bool exponential = false;  // Lemma A.6 with delta = beta + gamma
  double delta = 0.5;
  RVec v;                    // per-mode weight (defaults to omega)
  std::vector<Vec> creation_g;
  std::vector<Vec> annihilation_g;
};

CommNormRecord commutator_norm_check(const FockContext& ctx, const CommNormSpec& spec);

// The weighted-commutator application maps T1, T2, T+- behind the moment
// machinery, assembled as matrices, with measured norm-to-coupling ratios.
struct WeightCommutatorRecord {
  double t1_norm = 0.0, t2_norm = 0.0, tplus_norm = 0.0, tminus_norm = 0.0;
  double g_bound = 0.0;   // circle-norm shape for T1 and T+-
  double qf_bound = 0.0;  // circle-norm shape for T2
  double t1_ratio = 0.0, t2_ratio = 0.0, tpm_ratio = 0.0;
  double inversion_residual = 0.0;
};

WeightCommutatorRecord weight_commutator_check(const FockContext& ctx, const CoefficientVector& c,
                      const RVec& x, const WeightSpec& weight);

// k-th derivative of e^{a F_eps(t)}: closed Faa di Bruno coefficients against
// central finite differences
double faa_di_bruno_residual(double a, double eps, double t, int k, double h);

}  // namespace fockfk

#endif
