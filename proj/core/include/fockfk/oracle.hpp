#ifndef FOCKFK_ORACLE_HPP
#define FOCKFK_ORACLE_HPP

#include <vector>

#include "fockfk/fock.hpp"
#include "fockfk/model.hpp"

namespace fockfk {

// Reference computations on the lattice (x) truncated-Fock space; everything
// here goes through exact eigendecompositions.

struct ExpmResult {
  Mat matrix;
  double inverse_residual = 0.0;  // ||expm(t) expm(-t) - id||
};

ExpmResult expm(const Mat& h, double t);

struct GroundState {
  double energy = 0.0;
  Vec state;
  double gap = 0.0;          // next eigenvalue - energy
  bool degenerate = false;   // gap below 1e-10, bug signal in the scalar case
};

// Smallest eigenvalue and eigenvector; the phase is fixed so the component of
// largest modulus is positive real (the positivity module then certifies
// strict cone positivity in the scalar case).
GroundState ground_state(const Mat& h);

struct DecayRecord {
  double plain_sup = 0.0;     // sup_x e^{a|x|} ||Psi(x)||
  double weighted_sup = 0.0;  // sup_x e^{a|x|} ||(1+dGamma(omega))^alpha Psi(x)||
  int argmax_node = 0;
  bool edge_dominated = false;  // maximizer on the grid boundary
};

DecayRecord decay_check(const FockContext& ctx, const Lattice& lat, const Vec& psi,
                        double a, double alpha);

struct IrResidual {
  double residual = 0.0;        // safe-subspace part
  double edge_residual = 0.0;   // truncation-edge part, reported separately
  double number_identity = 0.0; // | sum_j ||a_j Psi||^2 - ||dGamma(1)^(1/2) Psi||^2 |
};

// Exact commutator identity behind the infrared bound: for an exact eigenpair
// (E, Psi) of H and H_int := H - dGamma(omega) - V,
//   (H - E + omega_j) a_j Psi = [H_int, a_j] Psi
// holds on the subspace with total bosons <= boson_cap - 1. The lattice H must
// have been assembled on ctx (x) lat.
IrResidual ir_identity_residual(const FockContext& ctx, const Lattice& lat,
                                const Mat& h, const Mat& h_minus_interaction,
                                double energy, const Vec& psi, int mode);

// Lattice surrogate for the ionization threshold: infimum of Rayleigh
// quotients over states supported at |x| >= radius. Context only.
double sigma_surrogate(const FockContext& ctx, const Lattice& lat, const Mat& h,
                       double radius);

}  // namespace fockfk

#endif
