#include "fockfk/kato.hpp"

#include <cmath>

#include "fockfk/parallel.hpp"
#include "fockfk/rng.hpp"
#include "fockfk/stoch.hpp"

namespace fockfk {

namespace {

// Gauss-Legendre on [0, 1]
void gauss_legendre01(int n, RVec& nodes, RVec& weights) {
  RMat j = RMat::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    j(k - 1, k) = b;
    j(k, k - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<RMat> es(j);
  nodes.resize(n);
  weights.resize(n);
  for (int k = 0; k < n; ++k) {
    nodes[k] = 0.5 * (es.eigenvalues()[k] + 1.0);
    weights[k] = sqr(es.eigenvectors()(0, k));  // weights on [-1,1] halved
  }
}

}  // namespace

double kato_seminorm(const std::function<double(const RVec&)>& V, double r, int nu,
                     const std::vector<RVec>& x_grid, const KatoQuadrature& quad) {
  require(nu == 2 || nu == 3, "kato_seminorm: nu must be 2 or 3");
  require(r > 0.0, "kato_seminorm: radius must be positive");

  RVec rn, rw;
  gauss_legendre01(quad.radial_points, rn, rw);

  double sup = 0.0;
  for (const auto& x : x_grid) {
    double acc = 0.0;
    if (nu == 3) {
      RVec cn, cw;
      gauss_legendre01(quad.angular_points, cn, cw);
      const int nphi = quad.angular_points;
      for (int ir = 0; ir < rn.size(); ++ir) {
        const double rho = r * rn[ir];
        // g_r |z|^2 d|z| = |z|^{2-nu} |z|^2 = rho, radial factor rho
        const double radial = r * rw[ir] * rho;
        for (int ic = 0; ic < cn.size(); ++ic) {
          const double ct = 2.0 * cn[ic] - 1.0;
          const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
          for (int ip = 0; ip < nphi; ++ip) {
            const double phi = 2.0 * M_PI * ip / nphi;
            RVec y(3);
            y[0] = x[0] - rho * st * std::cos(phi);
            y[1] = x[1] - rho * st * std::sin(phi);
            y[2] = x[2] - rho * ct;
            const double vv = std::abs(V(y));
            if (std::isfinite(vv))
              acc += radial * (2.0 * cw[ic]) * (2.0 * M_PI / nphi) * vv;
          }
        }
      }
    } else {
      for (int ir = 0; ir < rn.size(); ++ir) {
        const double rho = r * rn[ir];
        const double radial = r * rw[ir] * (-std::log(rho)) * rho;
        for (int ip = 0; ip < quad.angular_points; ++ip) {
          const double phi = 2.0 * M_PI * ip / quad.angular_points;
          RVec y(2);
          y[0] = x[0] - rho * std::cos(phi);
          y[1] = x[1] - rho * std::sin(phi);
          const double vv = std::abs(V(y));
          if (std::isfinite(vv))
            acc += radial * (2.0 * M_PI / quad.angular_points) * vv;
        }
      }
    }
    sup = std::max(sup, acc);
  }
  return sup;
}

KatoTrend kato_trend(const std::function<double(const RVec&)>& V,
                     const std::vector<double>& radii, int nu,
                     const std::vector<RVec>& x_grid, const KatoQuadrature& quad) {
  KatoTrend out;
  out.r = radii;
  for (double r : radii) out.value.push_back(kato_seminorm(V, r, nu, x_grid, quad));
  out.finite = true;
  for (double v : out.value)
    if (!std::isfinite(v)) out.finite = false;
  out.decreasing = true;
  for (std::size_t i = 1; i < out.value.size(); ++i)
    if (out.r[i] < out.r[i - 1] && out.value[i] > out.value[i - 1] * (1.0 + 1e-9))
      out.decreasing = false;
  return out;
}

KhasminskiiRecord khasminskii_check(const PotentialSpec& V, int nu,
                                    const KhasminskiiOptions& opts) {
  KhasminskiiRecord rec;
  rec.t_grid = opts.t_grid;
  std::vector<RVec> z_grid = opts.z_grid;
  if (z_grid.empty()) z_grid.push_back(RVec::Zero(nu));

  rec.finite = true;
  for (double t : opts.t_grid) {
    double sup_mean = 0.0, sup_se = 0.0;
    for (const auto& z : z_grid) {
      TimeGrid grid{t, opts.steps};
      PathBundle paths = sample_paths(PathBundle::Kind::brownian, z, std::nullopt,
                                      grid, opts.paths, opts.seed);
      auto ints = potential_integrals(V, paths);
      double mean = 0.0;
      int used = 0;
      for (int p = 0; p < paths.count(); ++p) {
        bool flagged = false;
        for (int f : paths.flagged)
          if (f == p) flagged = true;
        if (flagged) continue;
        mean += std::exp(-opts.p * ints.values[static_cast<std::size_t>(p)]);
        ++used;
      }
      mean /= std::max(1, used);
      double var = 0.0;
      for (int p = 0; p < paths.count(); ++p) {
        bool flagged = false;
        for (int f : paths.flagged)
          if (f == p) flagged = true;
        if (flagged) continue;
        var += sqr(std::exp(-opts.p * ints.values[static_cast<std::size_t>(p)]) - mean);
      }
      const double se = std::sqrt(var / std::max(1, used - 1) / std::max(1, used));
      if (se > mean) rec.advisory_more_paths = true;
      if (mean > sup_mean) {
        sup_mean = mean;
        sup_se = se;
      }
    }
    if (!std::isfinite(sup_mean)) rec.finite = false;
    rec.moment_sup.push_back(sup_mean);
    rec.moment_se.push_back(sup_se);
  }

  // log-linear fit log m(t) = intercept + c t
  const int n = static_cast<int>(opts.t_grid.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = std::log(std::max(1e-300, rec.moment_sup[static_cast<std::size_t>(i)]));
    sx += opts.t_grid[static_cast<std::size_t>(i)];
    sy += y;
    sxx += sqr(opts.t_grid[static_cast<std::size_t>(i)]);
    sxy += opts.t_grid[static_cast<std::size_t>(i)] * y;
  }
  const double denom = n * sxx - sx * sx;
  rec.c_fit = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  rec.intercept = (sy - rec.c_fit * sx) / n;
  double ss_res = 0.0, ss_tot = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = std::log(std::max(1e-300, rec.moment_sup[static_cast<std::size_t>(i)]));
    ss_res += sqr(y - rec.intercept - rec.c_fit * opts.t_grid[static_cast<std::size_t>(i)]);
    ss_tot += sqr(y - sy / n);
  }
  rec.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  rec.envelope_ok = rec.r_squared >= 0.9;

  // small-time moments E |e^{-int V} - 1|^p over the same t grid
  for (double t : opts.t_grid) {
    TimeGrid grid{t, opts.steps};
    PathBundle paths = sample_paths(PathBundle::Kind::brownian, z_grid[0],
                                    std::nullopt, grid, opts.paths, opts.seed);
    auto ints = potential_integrals(V, paths);
    double mean = 0.0;
    int used = 0;
    for (int p = 0; p < paths.count(); ++p) {
      bool flagged = false;
      for (int f : paths.flagged)
        if (f == p) flagged = true;
      if (flagged) continue;
      mean += std::pow(std::abs(std::exp(-ints.values[static_cast<std::size_t>(p)]) - 1.0),
                       opts.p);
      ++used;
    }
    rec.smalltime.push_back(mean / std::max(1, used));
  }
  rec.smalltime_decreasing = true;
  for (std::size_t i = 1; i < rec.smalltime.size(); ++i)
    if (rec.smalltime[i] < rec.smalltime[i - 1] * (1.0 - 1e-9))
      rec.smalltime_decreasing = false;

  // bridge moment bound at a probe pair with the fitted constant
  {
    const double t = opts.t_grid.back();
    RVec from(nu), to(nu);
    from.setZero();
    to.setZero();
    from[0] = opts.bridge_y;  // kernel orientation y -> x
    to[0] = opts.bridge_x;
    TimeGrid grid{t, opts.steps};
    PathBundle paths = sample_paths(PathBundle::Kind::bridge, from, to, grid,
                                    opts.paths, opts.seed);
    auto ints = potential_integrals(V, paths);
    double mean = 0.0;
    int used = 0;
    for (int p = 0; p < paths.count(); ++p) {
      bool flagged = false;
      for (int f : paths.flagged)
        if (f == p) flagged = true;
      if (flagged) continue;
      mean += std::exp(-opts.p * ints.values[static_cast<std::size_t>(p)]);
      ++used;
    }
    mean /= std::max(1, used);
    rec.bridge_lhs = heat_kernel(t, from, to) * mean;
    const double cfit = std::max(std::exp(rec.intercept + rec.c_fit * t), 1.0);
    rec.bridge_rhs = cfit * std::pow(t, -0.5 * nu) *
                     std::exp(-sqr(opts.bridge_x - opts.bridge_y) / (4.0 * t));
  }
  return rec;
}

double c_gamma_estimate(const PotentialSpec& V, int nu, double gamma,
                        const std::vector<RVec>& x_grid, int paths, int steps,
                        double t_max, std::uint64_t seed) {
  double sup = 0.0;
  for (const auto& x : x_grid) {
    TimeGrid grid{t_max, steps};
    PathBundle bundle = sample_paths(PathBundle::Kind::brownian, x, std::nullopt,
                                     grid, paths, seed);
    // time quadrature of e^{-t gamma} E|V(B_t)| on the step midpoints
    double acc = 0.0;
    const double dt = grid.dt();
    for (int k = 0; k < steps; ++k) {
      double mean = 0.0;
      for (int p = 0; p < bundle.count(); ++p) {
        const RVec mid = 0.5 * (bundle.values[static_cast<std::size_t>(p)].row(k) +
                                bundle.values[static_cast<std::size_t>(p)].row(k + 1))
                             .transpose();
        const double vv = std::abs(V(mid));
        if (std::isfinite(vv)) mean += vv;
      }
      mean /= bundle.count();
      acc += dt * std::exp(-gamma * grid.node(k)) * mean;
    }
    sup = std::max(sup, acc);
  }
  return sup;
}

FormBoundRecord form_bound_check(const PotentialSpec& V, double gamma, int nu,
                                 int lattice_points, double halfwidth,
                                 double c_gamma) {
  FormBoundRecord rec;
  rec.c_gamma = c_gamma;
  require(nu >= 1 && nu <= 3, "form_bound_check: nu in 1..3");

  const int g = lattice_points;
  const double h = 2.0 * halfwidth / (g - 1);
  long n = 1;
  for (int d2 = 0; d2 < nu; ++d2) n *= g;
  RMat m = RMat::Zero(n, n);

  auto coord = [&](long idx, int d2) {
    long rem = idx;
    for (int l = nu - 1; l > d2; --l) rem /= g;
    return -halfwidth + (rem % g) * h;
  };
  for (long i = 0; i < n; ++i) {
    RVec x(nu);
    for (int d2 = 0; d2 < nu; ++d2) x[d2] = coord(i, d2);
    double vv = std::abs(V(x));
    if (!std::isfinite(vv)) vv = std::abs(V(RVec(x.array() + 0.5 * h)));
    m(i, i) = 0.5 * c_gamma * (2.0 * nu) / sqr(h) + gamma * c_gamma - vv;
    long stride = 1;
    for (int d2 = nu - 1; d2 >= 0; --d2) {
      const long pos = (i / stride) % g;
      if (pos + 1 < g) {
        m(i, i + stride) = -0.5 * c_gamma / sqr(h);
        m(i + stride, i) = -0.5 * c_gamma / sqr(h);
      }
      stride *= g;
    }
  }
  Eigen::SelfAdjointEigenSolver<RMat> es(m);
  rec.min_eigenvalue = es.eigenvalues()[0];
  rec.slack = 0.5 * c_gamma / sqr(h) * 1e-8 + 1e-9;
  // discretization slack: the lattice Laplacian underestimates the quadratic
  // form by O(h^2) on the potential's scale
  double vmax = 0.0;
  for (long i = 0; i < n; ++i) vmax = std::max(vmax, -m(i, i));
  rec.slack += sqr(h) * std::max(1.0, vmax);
  rec.pass = rec.min_eigenvalue >= -rec.slack;
  return rec;
}

}  // namespace fockfk
