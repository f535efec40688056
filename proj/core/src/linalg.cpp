#include "fockfk/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

namespace fockfk {

double herm_defect(const Mat& m) {
  const double scale = m.norm();
  if (scale == 0.0) return 0.0;
  return (m - m.adjoint()).norm() / scale;
}

Mat expm_hermitian(const Mat& h, double t, double herm_tol) {
  require(h.rows() == h.cols(), "expm_hermitian: matrix must be square");
  require(herm_defect(h) <= herm_tol,
          "expm_hermitian: matrix is not Hermitian within tolerance");
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  require(es.info() == Eigen::Success, "expm_hermitian: eigensolver failed");
  const RVec lam = es.eigenvalues();
  Vec e(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) e[i] = std::exp(-t * lam[i]);
  return es.eigenvectors() * e.asDiagonal() * es.eigenvectors().adjoint();
}

Mat expm_i_hermitian(const Mat& a, double s) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  require(es.info() == Eigen::Success, "expm_i_hermitian: eigensolver failed");
  const RVec lam = es.eigenvalues();
  Vec e(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    e[i] = std::exp(kI * (s * lam[i]));
  return es.eigenvectors() * e.asDiagonal() * es.eigenvectors().adjoint();
}

namespace {

// Pade 13 coefficients (Higham 2005).
constexpr double kPade13[] = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0,  129060195264000.0,   10559470521600.0,
    670442572800.0,      33522128640.0,       1323241920.0,
    40840800.0,          960960.0,            16380.0,
    182.0,               1.0};

}  // namespace

Mat expm_general(const Mat& m) {
  require(m.rows() == m.cols(), "expm_general: matrix must be square");
  const Eigen::Index n = m.rows();
  const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  const double theta13 = 5.371920351148152;
  Mat a = m;
  if (norm > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
    a /= std::pow(2.0, squarings);
  }
  const Mat a2 = a * a;
  const Mat a4 = a2 * a2;
  const Mat a6 = a2 * a4;
  const Mat id = Mat::Identity(n, n);
  const Mat u = a * (a6 * (kPade13[13] * a6 + kPade13[11] * a4 + kPade13[9] * a2) +
                     kPade13[7] * a6 + kPade13[5] * a4 + kPade13[3] * a2 +
                     kPade13[1] * id);
  const Mat v = a6 * (kPade13[12] * a6 + kPade13[10] * a4 + kPade13[8] * a2) +
                kPade13[6] * a6 + kPade13[4] * a4 + kPade13[2] * a2 +
                kPade13[0] * id;
  Mat r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return r;
}

double op_norm(const Mat& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()[0];
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace fockfk
