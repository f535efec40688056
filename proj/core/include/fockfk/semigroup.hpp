#ifndef FOCKFK_SEMIGROUP_HPP
#define FOCKFK_SEMIGROUP_HPP

#include <functional>
#include <string>
#include <vector>

#include "fockfk/flow.hpp"
#include "fockfk/fock.hpp"
#include "fockfk/model.hpp"
#include "fockfk/stoch.hpp"

namespace fockfk {

// Fock-valued function on a uniform 1-d grid with linear interpolation;
// endpoints outside the grid use the declared extension.
struct GridFunction {
  enum class Extension { zero, clamp };
  RVec nodes;
  std::vector<Vec> values;  // one Fock vector per node
  Extension extension = Extension::zero;
  // optional spatial weight e^F with Lipschitz constant a
  std::function<double(double)> weight_F;
  double lipschitz_a = 0.0;

  Vec at(double x, int dim) const;
};

GridFunction constant_function(const RVec& nodes, const Vec& value);

struct ApplyResult {
  Vec mean;
  RVec se;          // componentwise standard error (|.| of the complex entry)
  int paths = 0;
};

// (T_t^V Psi)(x) = E[ W_t^V[B^x]^* Psi(B_t^x) ]
ApplyResult apply(const FockContext& ctx, const CoefficientVector& c,
                  const PotentialSpec& V, const GridFunction& psi, double t,
                  double x, int n, int steps, std::uint64_t seed);

struct KernelEstimate {
  Mat mean;
  RMat se;  // per entry
  int paths = 0;
  double t = 0.0;
  double x = 0.0, y = 0.0;

  double combined_se() const { return se.norm(); }
};

// T_t^V(x, y) = p_t(x, y) E[ W_t^V[b^{t;y,x}] ]; the bridge runs y -> x.
KernelEstimate kernel(const FockContext& ctx, const CoefficientVector& c,
                      const PotentialSpec& V, double t, double x, double y, int n,
                      int steps, std::uint64_t seed);

// scalar Feynman-Kac kernel S_t^V(x,y) = p_t(x,y) E[e^{-int V}]
struct ScalarKernelEstimate {
  double mean = 0.0;
  double se = 0.0;
};
ScalarKernelEstimate scalar_kernel(const PotentialSpec& V, double t, double x,
                                   double y, int n, int steps, std::uint64_t seed);

struct KernelIdentityRecord {
  double symmetry_residual = 0.0;
  double symmetry_error = 0.0;  // combined MC error bar
  double ck_residual = 0.0;     // Chapman-Kolmogorov
  double ck_error = 0.0;        // combined MC + quadrature error bar
  double ck_quad_error = 0.0;   // Richardson estimate of the z-quadrature error
  double transfer_residual = 0.0;  // bridge transfer with a supplied bounded A
  double transfer_error = 0.0;
  double quad_tail = 0.0;       // Gaussian envelope mass outside the z-grid
  bool pass = false;
};

struct KernelIdentityOptions {
  int paths = 2000;     // the (t,x,y) kernels
  int ck_paths = 0;     // Chapman-Kolmogorov z-grid kernels (0 = paths)
  int steps = 100;
  std::uint64_t seed = 1;
  int z_points = 33;    // odd, Simpson rule
  double z_margin = 4.0;  // z-grid halfwidth in units of sqrt(t)
  // z nodes whose scalar heat envelope is below cut * max are not sampled;
  // their certified contribution goes into the error bar instead
  double envelope_cut = 0.0;
  std::function<Mat(double)> transfer_A;  // bounded operator-valued A(z)
};

KernelIdentityRecord kernel_identities_residual(const FockContext& ctx,
                                                const CoefficientVector& c,
                                                const PotentialSpec& V, double t,
                                                double s, double x, double y,
                                                const KernelIdentityOptions& opts);

// The four-line weight family acting on the Fock factor: polynomial in
// dGamma(kappa) or in t dGamma(varpi), and their exponential variants.
struct TableWeight {
  int line = 1;  // 1..4
  double alpha = 1.0;
  double delta = 0.25;
  RVec varpi, kappa;
  double t_star = 2.0;

  RVec diag(const FockContext& ctx, double t) const;
  bool hypothesis(const FockContext& ctx, const CoefficientVector& c,
                  const std::vector<RVec>& grid, double* norm_out) const;
  NormSpec star_norm() const;
};

struct NormSuiteRecord {
  double lhs = 0.0;          // discrete L^p -> L^q norm of e^F Y_t T Y_0^-1 e^-F
  double rhs = 0.0;          // calibrated envelope
  double calibration = 0.0;  // measured c=0 constant per (nu, p, q)
  bool skipped = false;
  bool pass = false;
  std::string note;
};

struct NormSuiteOptions {
  double p = 2.0, q = 2.0;
  double lipschitz_a = 0.0;
  int grid_points = 9;
  double grid_halfwidth = 2.0;
  int paths = 400;
  int steps = 50;
  std::uint64_t seed = 1;
  int power_iterations = 20;
  const double* calibration = nullptr;  // reuse a measured c=0 constant
};

NormSuiteRecord weighted_norm_suite(const FockContext& ctx,
                                    const CoefficientVector& c,
                                    const PotentialSpec& V, double t,
                                    const TableWeight& weight,
                                    const NormSuiteOptions& opts);

// Assembles the grid operator from kernel estimates and measures its discrete
// L^p -> L^q norm (power iteration for 1 < p, q < infinity, direct formulas at
// the endpoints).
Mat grid_operator(const FockContext& ctx, const CoefficientVector& c,
                  const PotentialSpec& V, double t, const RVec& nodes, int paths,
                  int steps, std::uint64_t seed);
double lpq_norm(const Mat& op, int block_dim, const RVec& nodes, double p, double q,
                int iterations, std::uint64_t seed);

struct ContinuityTable {
  std::string label;
  std::vector<double> index;       // sequence parameter (n or t)
  std::vector<double> difference;  // measured norms
  double noise_floor = 0.0;
  bool decreasing = false;         // monotone past the noise floor
  int offending_index = -1;
};

struct ContinuitySuiteOptions {
  int paths = 1500;
  int steps = 60;
  std::uint64_t seed = 1;
  std::vector<double> x_probe;  // evaluation points
  double t = 0.5;
};

// potential continuity: || (T^{V_n} - T^V) Psi ||_infty over the probe points,
// common random numbers across members
ContinuityTable potential_continuity_table(const FockContext& ctx,
                                           const CoefficientVector& c,
                                           const std::vector<PotentialSpec>& vseq,
                                           const PotentialSpec& vlimit,
                                           const GridFunction& psi,
                                           const ContinuitySuiteOptions& opts);

ContinuityTable coupling_continuity_table(const FockContext& ctx,
                                          const std::vector<CoefficientVector>& cseq,
                                          const CoefficientVector& climit,
                                          const PotentialSpec& V,
                                          const GridFunction& psi,
                                          const ContinuitySuiteOptions& opts);

// || T_t Psi - Psi || as t decreases to 0
ContinuityTable strong_continuity_table(const FockContext& ctx,
                                        const CoefficientVector& c,
                                        const PotentialSpec& V,
                                        const GridFunction& psi,
                                        const std::vector<double>& times,
                                        const ContinuitySuiteOptions& opts);

// modulus of continuity of x -> Y (T_t Psi)(x) over shrinking separations
ContinuityTable equicontinuity_table(const FockContext& ctx,
                                     const CoefficientVector& c,
                                     const PotentialSpec& V, const GridFunction& psi,
                                     const TableWeight& weight,
                                     const std::vector<double>& separations,
                                     const ContinuitySuiteOptions& opts);

// kernel difference || Y (T^{V_n,n}(x,y) - T^V(x,y)) || over a pair grid
ContinuityTable kernel_continuity_table(const FockContext& ctx,
                                        const std::vector<CoefficientVector>& cseq,
                                        const std::vector<PotentialSpec>& vseq,
                                        const CoefficientVector& climit,
                                        const PotentialSpec& vlimit,
                                        const TableWeight& weight,
                                        const std::vector<std::pair<double, double>>& xy,
                                        const ContinuitySuiteOptions& opts);

void finalize_table(ContinuityTable& table);

}  // namespace fockfk

#endif
