#ifndef FOCKFK_LINALG_HPP
#define FOCKFK_LINALG_HPP

#include "fockfk/common.hpp"

namespace fockfk {

// exp(-t H) for Hermitian H through an eigendecomposition.
Mat expm_hermitian(const Mat& h, double t, double herm_tol = 1e-10);

// exp(i s A) for Hermitian A (unitary result).
Mat expm_i_hermitian(const Mat& a, double s);

// exp(M) for a general complex matrix, Pade 13 with scaling and squaring.
Mat expm_general(const Mat& m);

// Largest singular value.
double op_norm(const Mat& m);

double herm_defect(const Mat& m);

Mat kron(const Mat& a, const Mat& b);

}  // namespace fockfk

#endif
