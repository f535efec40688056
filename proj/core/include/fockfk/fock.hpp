#ifndef FOCKFK_FOCK_HPP
#define FOCKFK_FOCK_HPP

#include <map>
#include <string>
#include <vector>

#include "fockfk/common.hpp"
#include "fockfk/linalg.hpp"

namespace fockfk {

// Truncated multi-mode Fock space C^L (x) F_trunc. The occupation basis
// collects all tuples (n_1..n_K) with sum <= boson_cap, ordered graded
// lexicographically: by total boson number first, ties broken with n_1
// descending, then recursively. The ordering is fixed; reports and exported
// matrices reference basis indices.
struct FockContext {
  int mode_count = 0;
  RVec omega;
  int boson_cap = 0;
  int spin_dim = 1;
  std::vector<std::vector<int>> basis;
  std::vector<int> total_bosons;          // per basis entry
  std::vector<Mat> lowering;              // per mode, fock part only

  int fock_dim() const { return static_cast<int>(basis.size()); }
  int dim() const { return spin_dim * fock_dim(); }
  int vacuum_index() const { return 0; }

  int index_of(const std::vector<int>& occ) const;  // -1 if outside the cap

  // index helpers for the full space, index = s * fock_dim() + b
  int full_index(int spin, int fock) const { return spin * fock_dim() + fock; }

  // Diagonal 0/1 projector onto states with total bosons <= boson_cap - margin.
  // All operators here are compressions P A P of the untruncated ones; on this
  // subspace a product of up to `margin` creation-type factors is exact.
  RVec safe_mask(int margin) const;

 private:
  std::map<std::vector<int>, int> index_;
  friend FockContext build_context(int, const RVec&, int, int);
};

FockContext build_context(int mode_count, const RVec& omega, int boson_cap,
                          int spin_dim);

// All operators act on the full space C^L (x) F_trunc (identity on the spin
// factor unless stated otherwise).
struct FockOperator {
  Mat matrix;
  bool hermitian = false;
  bool diagonal = false;
};

enum class LadderKind { create, annihilate, field, conjugate_field };

// a(f) = sum_j conj(f_j) a_j, a^*(f) = sum_j f_j a_j^*,
// field(f) = a^*(f) + a(f), conjugate_field(f) = field(i f).
FockOperator ladder(const FockContext& ctx, const Vec& f, LadderKind kind);

// W(g) = exp(-i conjugate_field(g)).
FockOperator weyl(const FockContext& ctx, const Vec& g);

// dGamma(kappa), diagonal with entry sum_j n_j kappa_j.
FockOperator second_quantize(const FockContext& ctx, const RVec& kappa);

// fock-part builders used when composing with spin matrices
Mat field_fock(const FockContext& ctx, const Vec& f);
Mat lowering_fock(const FockContext& ctx, const Vec& f);  // a(f)
RVec second_quantize_diag(const FockContext& ctx, const RVec& kappa);

Mat spin_tensor(const FockContext& ctx, const Mat& sigma, const Mat& fock_part);
Mat lift_fock(const FockContext& ctx, const Mat& fock_part);  // id_L (x) A
FockOperator diagonal_operator(const FockContext& ctx, const RVec& fock_diag);

struct WeightSpec {
  enum class Kind { polynomial, exponential };
  Kind kind = Kind::polynomial;
  double exponent = 1.0;  // alpha (|alpha| >= 1/2) or delta (0 < |delta| <= 1)
  RVec varpi;             // per mode, varpi <= omega
  RVec kappa;             // per mode, >= 0
  double eps = 0.0;       // in [0,1]; 0 is allowed on the truncation
  double t0 = 1.0;
  double t = 0.0;
};

void validate(const FockContext& ctx, const WeightSpec& spec);

// Diagonal values of Theta^(alpha)_{eps,t} resp. Xi^(delta)_{eps,t} over the
// occupation basis, and of the logarithmic derivative Theta^{-1} dTheta/dt.
RVec weight_diag(const FockContext& ctx, const WeightSpec& spec);
RVec weight_rate_diag(const FockContext& ctx, const WeightSpec& spec);
FockOperator weight_operator(const FockContext& ctx, const WeightSpec& spec);

// Operator JSON: {dim, basis, entries: [[row, col, re, im], ...]}, entries
// below 1e-15 in modulus omitted.
std::string operator_to_json(const FockContext& ctx, const FockOperator& op);

}  // namespace fockfk

#endif
