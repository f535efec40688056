#ifndef FOCKFK_MODEL_HPP
#define FOCKFK_MODEL_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fockfk/fock.hpp"

namespace fockfk {

struct SpinAlgebra {
  int spin_dim = 1;
  std::vector<Mat> sigma;  // Hermitian spin_dim x spin_dim

  int couplings() const { return static_cast<int>(sigma.size()); }
};

SpinAlgebra scalar_spin();           // L = 1, no couplings
SpinAlgebra pauli_spin();            // L = 2, the three Pauli matrices

// Coefficient vector c_x = (G_x, q_x, sigma . F_x). Amplitudes are per-mode
// complex numbers; quadrature weights of any continuum dispersion are folded
// into them so that downstream mode sums are plain counting sums.
struct CoefficientVector {
  int mode_count = 0;
  int nu = 1;  // spatial dimension
  SpinAlgebra spin;

  // G(x): mode_count x nu, q(x): mode_count, F(x): mode_count x S
  std::function<Mat(const RVec&)> G;
  std::function<Vec(const RVec&)> q;
  std::function<Mat(const RVec&)> F;

  // conjugation C acting on per-mode amplitude vectors (antilinear); the
  // default is entrywise complex conjugation
  std::function<Vec(const Vec&)> conj_C;

  bool smooth = true;
  bool bounded = true;

  Vec apply_C(const Vec& v) const { return conj_C ? conj_C(v) : Vec(v.conjugate()); }
  bool is_zero() const { return !G && !q && !F; }

  Mat G_at(const RVec& x) const;
  Vec q_at(const RVec& x) const;
  Mat F_at(const RVec& x) const;
};

CoefficientVector zero_coupling(int mode_count, int nu, const SpinAlgebra& spin);

struct PotentialSpec {
  enum class Tag { bounded_continuous, kato_coulomb, confining };
  Tag tag = Tag::bounded_continuous;
  std::function<double(const RVec&)> V;
  std::vector<RVec> singular_sites;  // Coulomb centres

  double operator()(const RVec& x) const { return V ? V(x) : 0.0; }
  bool is_zero() const { return !V; }
};

PotentialSpec zero_potential();

// H(x) = 1/2 field(G_x)^2 - (i/2) field(q_x) - sigma . field(F_x) + dGamma(omega).
// Self-adjoint iff q_x = 0; the Hermitian flag is set accordingly.
FockOperator fiber_hamiltonian(const FockContext& ctx, const CoefficientVector& c,
                               const RVec& x);

// mho(x) = ||M(x)||^2 with M_ij(x) = ||omega^{-1/2} (sigma . F_x)_ij||.
double mho(const FockContext& ctx, const CoefficientVector& c, const RVec& x);
double mho_sup(const FockContext& ctx, const CoefficientVector& c,
               const std::vector<RVec>& x_grid);

enum class NormKind {
  frak_k,        // (sum (omega^-1 + omega^2) |v|^2)^(1/2)
  circle_poly,   // c_alpha ||(varpi+kappa)^(1/2)(1+varpi+kappa)^(|alpha|-1/2) v||
  circle_exp,    // c |delta|^(1/2) ||{(t0 varpi/2+kappa) v ( . )^2/omega}^(1/2) e^{..} v||
  star1,         // c_alpha ||kappa^(1/2)(1+kappa)^(alpha-1/2) v||
  star2,         // as star1 with varpi
  star3,         // c delta^(1/2) ||(kappa v kappa^2/omega)^(1/2) e^{delta kappa} v||
  star4,         // c t* delta^(1/2) ||varpi^(1/2) e^{delta t* varpi/2} v||
};

struct NormSpec {
  NormKind kind = NormKind::frak_k;
  RVec varpi, kappa;
  double alpha = 1.0;
  double delta = 0.5;
  double t0 = 1.0;
  double t_star = 2.0;
  double prefactor = 1.0;  // stands in for the paper's unspecified c_alpha / c
};

double mode_norm(const FockContext& ctx, const NormSpec& spec, const Vec& v);
// All component rows of c at x stacked: returns the norm of the coefficient
// vector, i.e. the root of the summed squared component norms.
double coupling_norm(const FockContext& ctx, const CoefficientVector& c,
                     const RVec& x, const NormSpec& spec);
double coupling_norm_sup(const FockContext& ctx, const CoefficientVector& c,
                         const std::vector<RVec>& x_grid, const NormSpec& spec);
// circle norm of the G block resp. the (q, sigma.F) block, as used by the
// weighted moment bounds
double g_circle_norm(const FockContext& ctx, const CoefficientVector& c,
                     const RVec& x, const NormSpec& spec);
double qf_circle_norm(const FockContext& ctx, const CoefficientVector& c,
                      const RVec& x, const NormSpec& spec);

// QED coupling preset on a discrete, k -> -k symmetric momentum grid with
// quadrature weights; two polarizations per grid point.
struct QedGrid {
  std::vector<Eigen::Vector3d> k;
  std::vector<double> weight;
};

// Returns the coupling together with the context frequencies (omega_j = |k_j|).
struct QedPreset {
  CoefficientVector coupling;
  RVec omega;
};

QedPreset qed_coupling_preset(const QedGrid& grid,
                              const std::function<double(const Eigen::Vector3d&)>& chi,
                              bool with_spin, const Eigen::Vector3d& pol_axis);

// Uniform spatial lattice used by the matrix-exponential oracle.
struct Lattice {
  RVec nodes;       // 1-d node coordinates (nu = 1 at desk scale)
  double spacing = 0.0;
  bool periodic = false;

  int size() const { return static_cast<int>(nodes.size()); }
};

Lattice make_lattice(double lo, double hi, int points, bool periodic);

// Hermitian matrix of dimension lattice.size() * ctx.dim(): covariant
// finite-difference Laplacian with Peierls phases exp(i h field(G_mid)) on the
// edges, plus dGamma(omega) - sigma . field(F) + V on the diagonal. Coulomb
// sites are clamped at |x - R| < h/2 for lattice use only.
Mat lattice_hamiltonian(const FockContext& ctx, const CoefficientVector& c,
                        const PotentialSpec& V, const Lattice& lat);

double potential_on_lattice(const PotentialSpec& V, const Lattice& lat, double x);

}  // namespace fockfk

#endif
