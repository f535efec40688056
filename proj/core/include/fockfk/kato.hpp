#ifndef FOCKFK_KATO_HPP
#define FOCKFK_KATO_HPP

#include <functional>
#include <string>
#include <vector>

#include "fockfk/common.hpp"
#include "fockfk/model.hpp"

namespace fockfk {

// g_r-convolution seminorm sup_x int g_r(x-y) |V(y)| dy with
// g_r(z) = 1_{|z|<r} (-ln|z|) for nu = 2 and 1_{|z|<r} |z|^{2-nu} for nu = 3.
// Membership in the Kato class is certified as a decreasing-in-r trend plus
// finiteness, never as the true r -> 0 limit.
struct KatoQuadrature {
  int radial_points = 24;
  int angular_points = 16;
};

double kato_seminorm(const std::function<double(const RVec&)>& V, double r, int nu,
                     const std::vector<RVec>& x_grid,
                     const KatoQuadrature& quad = {});

struct KatoTrend {
  std::vector<double> r;
  std::vector<double> value;
  bool decreasing = false;
  bool finite = false;
};

KatoTrend kato_trend(const std::function<double(const RVec&)>& V,
                     const std::vector<double>& radii, int nu,
                     const std::vector<RVec>& x_grid,
                     const KatoQuadrature& quad = {});

struct KhasminskiiRecord {
  std::vector<double> t_grid;
  std::vector<double> moment_sup;    // sup_z E[e^{-p int V(B^z)}]
  std::vector<double> moment_se;
  double c_fit = 0.0;                // log-linear growth rate
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<double> smalltime;     // E|e^{-int V} - 1|^p, decreasing table
  bool smalltime_decreasing = false;
  bool envelope_ok = false;          // R^2 >= 0.9
  bool finite = false;
  bool advisory_more_paths = false;  // SE > mean somewhere
  // bridge moment bound at a probe pair, with the fitted constant
  double bridge_lhs = 0.0;
  double bridge_rhs = 0.0;
};

struct KhasminskiiOptions {
  double p = 1.0;
  int paths = 4000;
  int steps = 64;
  std::uint64_t seed = 1;
  std::vector<RVec> z_grid;
  std::vector<double> t_grid = {0.1, 0.2, 0.4, 0.7, 1.0};
  double bridge_x = 0.0, bridge_y = 0.5;  // first coordinate probe
};

KhasminskiiRecord khasminskii_check(const PotentialSpec& V, int nu,
                                    const KhasminskiiOptions& opts);

// c_gamma(V) = sup_x int_0^inf e^{-t gamma} E|V(B_t^x)| dt, Monte Carlo with a
// truncated time quadrature; the bd-cgammaV upper bound is evaluated with
// A = sum_l l e^{-(l-1)/2}.
double c_gamma_estimate(const PotentialSpec& V, int nu, double gamma,
                        const std::vector<RVec>& x_grid, int paths, int steps,
                        double t_max, std::uint64_t seed);

struct FormBoundRecord {
  double c_gamma = 0.0;
  double min_eigenvalue = 0.0;  // of (c/2)(-Lap) + gamma c - |V| on the lattice
  double slack = 0.0;           // discretization allowance
  bool pass = false;
};

FormBoundRecord form_bound_check(const PotentialSpec& V, double gamma, int nu,
                                 int lattice_points, double halfwidth,
                                 double c_gamma);

}  // namespace fockfk

#endif
