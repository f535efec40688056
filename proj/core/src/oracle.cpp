#include "fockfk/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

namespace fockfk {

ExpmResult expm(const Mat& h, double t) {
  require(h.rows() == h.cols(), "expm: matrix must be square");
  require(h.rows() <= 4000, "expm: dimension cap 4000 exceeded");
  ExpmResult out;
  out.matrix = expm_hermitian(h, t);
  const Mat back = expm_hermitian(h, -t);
  out.inverse_residual =
      (out.matrix * back - Mat::Identity(h.rows(), h.cols())).norm();
  return out;
}

GroundState ground_state(const Mat& h) {
  require(h.rows() == h.cols(), "ground_state: matrix must be square");
  require(herm_defect(h) <= 1e-10, "ground_state: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  require(es.info() == Eigen::Success, "ground_state: eigensolver failed");
  GroundState gs;
  gs.energy = es.eigenvalues()[0];
  gs.state = es.eigenvectors().col(0);
  gs.gap = es.eigenvalues().size() > 1 ? es.eigenvalues()[1] - gs.energy : 0.0;
  gs.degenerate = gs.gap < 1e-10;

  Eigen::Index imax = 0;
  gs.state.cwiseAbs().maxCoeff(&imax);
  const Cplx z = gs.state[imax];
  if (std::abs(z) > 0.0) gs.state *= std::conj(z) / std::abs(z);
  return gs;
}

DecayRecord decay_check(const FockContext& ctx, const Lattice& lat, const Vec& psi,
                        double a, double alpha) {
  require(psi.size() == static_cast<Eigen::Index>(lat.size()) * ctx.dim(),
          "decay_check: state size does not match lattice x Fock dimension");
  DecayRecord rec;
  const int d = ctx.dim();
  const RVec dg = second_quantize_diag(ctx, ctx.omega);
  for (int i = 0; i < lat.size(); ++i) {
    const Vec block = psi.segment(i * d, d);
    const double w = std::exp(a * std::abs(lat.nodes[i]));
    double plain = block.norm();
    double weighted2 = 0.0;
    for (int s = 0; s < ctx.spin_dim; ++s)
      for (int b = 0; b < ctx.fock_dim(); ++b)
        weighted2 += std::pow(1.0 + dg[b], 2.0 * alpha) *
                     std::norm(block[ctx.full_index(s, b)]);
    if (w * plain > rec.plain_sup) {
      rec.plain_sup = w * plain;
      rec.argmax_node = i;
    }
    rec.weighted_sup = std::max(rec.weighted_sup, w * std::sqrt(weighted2));
  }
  rec.edge_dominated = rec.argmax_node == 0 || rec.argmax_node == lat.size() - 1;
  return rec;
}

IrResidual ir_identity_residual(const FockContext& ctx, const Lattice& lat,
                                const Mat& h, const Mat& h_minus_interaction,
                                double energy, const Vec& psi, int mode) {
  require(mode >= 0 && mode < ctx.mode_count, "ir_identity_residual: bad mode");
  const int d = ctx.dim();
  const int n = lat.size() * d;
  require(h.rows() == n && psi.size() == n,
          "ir_identity_residual: dimension mismatch");

  // a_j on lattice (x) spin (x) Fock
  const Mat aj_fock = ctx.lowering[static_cast<std::size_t>(mode)];
  const Mat aj_site = lift_fock(ctx, aj_fock);
  Mat aj = Mat::Zero(n, n);
  for (int i = 0; i < lat.size(); ++i) aj.block(i * d, i * d, d, d) = aj_site;

  const Mat h_int = h - h_minus_interaction;  // dGamma + V part removed by caller
  const Vec lhs = (h - energy * Mat::Identity(n, n) + ctx.omega[mode] * Mat::Identity(n, n)) *
                  (aj * psi);
  const Vec rhs = h_int * (aj * psi) - aj * (h_int * psi);

  // restrict to total bosons <= cap - 1; the complement is truncation edge
  const RVec mask = ctx.safe_mask(1);
  IrResidual out;
  double safe2 = 0.0, edge2 = 0.0;
  for (int i = 0; i < lat.size(); ++i)
    for (int s = 0; s < ctx.spin_dim; ++s)
      for (int b = 0; b < ctx.fock_dim(); ++b) {
        const Cplx diff = lhs[i * d + ctx.full_index(s, b)] -
                          rhs[i * d + ctx.full_index(s, b)];
        if (mask[b] > 0.5)
          safe2 += std::norm(diff);
        else
          edge2 += std::norm(diff);
      }
  out.residual = std::sqrt(safe2);
  out.edge_residual = std::sqrt(edge2);

  // number identity sum_j ||a_j Psi||^2 = ||dGamma(1)^(1/2) Psi||^2
  double lhs_n = 0.0;
  for (int j = 0; j < ctx.mode_count; ++j) {
    const Mat aj_f = lift_fock(ctx, ctx.lowering[static_cast<std::size_t>(j)]);
    for (int i = 0; i < lat.size(); ++i)
      lhs_n += (aj_f * psi.segment(i * d, d)).squaredNorm();
  }
  double rhs_n = 0.0;
  for (int i = 0; i < lat.size(); ++i)
    for (int s = 0; s < ctx.spin_dim; ++s)
      for (int b = 0; b < ctx.fock_dim(); ++b)
        rhs_n += ctx.total_bosons[static_cast<std::size_t>(b)] *
                 std::norm(psi[i * d + ctx.full_index(s, b)]);
  out.number_identity = std::abs(lhs_n - rhs_n);
  return out;
}

double sigma_surrogate(const FockContext& ctx, const Lattice& lat, const Mat& h,
                       double radius) {
  const int d = ctx.dim();
  std::vector<int> outside;
  for (int i = 0; i < lat.size(); ++i)
    if (std::abs(lat.nodes[i]) >= radius) outside.push_back(i);
  if (outside.empty()) return std::numeric_limits<double>::infinity();
  const int m = static_cast<int>(outside.size()) * d;
  Mat sub(m, m);
  for (std::size_t a = 0; a < outside.size(); ++a)
    for (std::size_t b = 0; b < outside.size(); ++b)
      sub.block(static_cast<Eigen::Index>(a) * d, static_cast<Eigen::Index>(b) * d,
                d, d) = h.block(outside[a] * d, outside[b] * d, d, d);
  Eigen::SelfAdjointEigenSolver<Mat> es(sub);
  return es.eigenvalues()[0];
}

}  // namespace fockfk
