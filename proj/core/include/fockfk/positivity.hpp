#ifndef FOCKFK_POSITIVITY_HPP
#define FOCKFK_POSITIVITY_HPP

#include <cstdint>
#include <limits>
#include <vector>

#include "fockfk/fock.hpp"
#include "fockfk/model.hpp"

namespace fockfk {

// Q-space picture of the scalar (L = 1) truncated Fock space. Per mode, a
// Gauss-Hermite grid of the given order; the transform matrix sends the
// occupation basis to weighted Hermite-function values on the product grid so
// that each conjugate field (or field) becomes multiplication by the node
// coordinate. With order = boson_cap + 1 the pre-image of the grid functions
// is the whole truncation and the diagonalization is exact: the leaked
// Hermite function vanishes at the nodes.
struct QTransform {
  enum class Variant { conjugate_field, field };
  Variant variant = Variant::conjugate_field;
  int order = 0;
  RVec nodes1d;    // per-mode Gauss-Hermite nodes (Hermite-function scale)
  RVec weights1d;
  Mat transform;   // (order^K) x fock_dim
  int mode_count = 0;
  std::vector<std::vector<int>> basis;  // occupation tuples of the context

  int grid_size() const { return static_cast<int>(transform.rows()); }
  // coordinate of grid point g in mode j (the multiplication value of the
  // conjugate field resp. field of e_j)
  double coordinate(int g, int j) const;
  double isometry_defect() const;     // || V^* V - id ||
  // Residual of V (P w P) = diag(coordinate) V on the subspace where the
  // compression is exact (total bosons <= cap - 1); the full-space residual
  // picks up the top sector for K >= 2 and is reported separately.
  double diag_residual(const FockContext& ctx) const;
  double diag_residual_full(const FockContext& ctx) const;

  // Value of the Q-space representative at an arbitrary point (one coordinate
  // per mode, in the multiplication-value scale). Used to audit global
  // nonnegativity of cone samples beyond the quadrature nodes.
  Cplx evaluate(const Vec& psi, const RVec& coords) const;
};

QTransform q_transform(const FockContext& ctx, QTransform::Variant variant,
                       int order = 0);

struct ConeResult {
  bool real_subspace = false;  // Gamma(-C) psi = psi
  bool in_cone = false;
  bool strictly_positive = false;
  double min_value = 0.0;
  Vec positive_part;  // decomposition hint when rejected
  Vec negative_part;
};

// Membership in the cone P via point evaluation on the Q grid; psi must lie in
// the completely real subspace, otherwise the psi = psi_+ - psi_- hint is
// returned. The -1e-10 ||psi|| slack is the configured grid certificate.
ConeResult cone_check(const Vec& psi, const QTransform& qt, double slack = 1e-10);

// A_s[f] = sum_n (i^n / n!) a*(f)^n e^{-s dGamma(omega)}; the series breaks
// off at the boson cap.
FockOperator factor_A(const FockContext& ctx, double s, const Vec& f);

// closed form of A_s[f]^* W(g) Omega, both sides projected onto the
// truncation; the projection defect of the coherent tail is reported
struct WeylFactorResidual {
  double residual = 0.0;
  double projection_defect = 0.0;
};
WeylFactorResidual factor_weyl_residual(const FockContext& ctx, double s,
                                        const Vec& f, const Vec& g);

// Q-grid matrix M = V A V^*. Entrywise positivity of this matrix is NOT a
// valid rendering of positivity improvement on a truncated space: the
// pullbacks of the grid point masses stick out of the truncated cone, and
// already the compressed identity has negative far-corner entries. It is
// reported for transparency only; certification goes through cone samples.
Mat q_matrix(const QTransform& qt, const Mat& a);

// Audited cone samples: truncated vectors whose Q-representative is
// nonnegative on a fine audit grid covering the node range (hence genuine
// elements of the truncated cone, not just grid-nonnegative ones). The first
// sample is always the vacuum.
std::vector<Vec> cone_samples(const FockContext& ctx, const QTransform& qt, int n,
                              std::uint64_t seed, int audit_points = 41,
                              double audit_span = 1.5);

// min over the audit grid of the Q representative (global positivity check)
double q_min_value(const QTransform& qt, const Vec& psi, int audit_points = 41,
                   double audit_span = 1.5);

// Q-grid matrices as CSV heat-tables for offline plotting
std::string q_matrix_to_csv(const QTransform& qt, const Mat& q_mat);

struct PositivityRecord {
  double oracle_sample_min = 0.0;  // min over cone samples of grid-min of K u
  double oracle_pair_min = 0.0;    // min over pairs of <u, K v>
  double oracle_entry_min = 0.0;   // raw min entry of V K V^*, reported only
  double mc_margin = 0.0;          // min over pairs of <u, K v> - 3 se
  double ground_state_min = 0.0;   // audit-grid minimum of the ground state
  double spectral_gap = 0.0;
  bool improving_confirmed = false;
  bool pass = false;
};

struct PositivityOptions {
  int paths = 10000;
  int steps = 200;
  std::uint64_t seed = 1;
  int samples = 5;
};

// Positivity improvement of the kernel in the scalar case: the cone is P for
// F = 0 and Gamma(i) P for G = 0 (Nelson variant); the mixed case F != 0 and
// G != 0 is refused. Certification runs over audited cone samples against
// both the lattice oracle and the Monte Carlo kernel at (t, x, y).
PositivityRecord kernel_positivity_suite(const FockContext& ctx,
                                         const CoefficientVector& c,
                                         const PotentialSpec& V,
                                         const Lattice& lattice, double t,
                                         double x, double y,
                                         const PositivityOptions& opts);

}  // namespace fockfk

#endif
