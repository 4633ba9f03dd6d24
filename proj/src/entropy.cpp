#include "aggdiff/entropy.hpp"

#include <algorithm>
#include <cmath>

#include "aggdiff/closed_forms.hpp"
#include "aggdiff/error.hpp"
#include "aggdiff/numerics.hpp"

namespace aggdiff {

double entropy_H(const DensityField& theta, double m) {
  require(m > 1.0, ErrorCode::invalid_argument, "entropy H needs m > 1");
  const auto& g = theta.grid();
  double acc = 0.0;
  for (int i = 0; i < theta.size(); ++i) {
    if (theta[i] == 0.0) continue;
    double r = g.center(i);
    acc += g.volume(i) * (std::pow(theta[i], m) / (m - 1.0) + 0.5 * r * r * theta[i]);
  }
  return acc;
}

double entropy_I(const DensityField& theta, double m, double floor_ratio) {
  require(m > 1.0, ErrorCode::invalid_argument, "entropy production needs m > 1");
  const auto& g = theta.grid();
  const int n = theta.size();
  double peak = lp_norm(theta, std::numeric_limits<double>::infinity());
  if (peak == 0.0) return 0.0;
  const double floor = floor_ratio * peak, h = g.spacing();
  std::vector<double> pressure(n);
  for (int i = 0; i < n; ++i) pressure[i] = m / (m - 1.0) * std::pow(theta[i], m - 1.0);
  auto live = [&](int i) { return i >= 0 && i < n && theta[i] > floor; };
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!live(i)) continue;
    double grad;
    bool left = i == 0 || live(i - 1), right = live(i + 1);
    double p_left = i == 0 ? pressure[0] : pressure[i - 1];
    if (left && right)
      grad = (pressure[i + 1] - p_left) / (2.0 * h);
    else if (right)
      grad = (pressure[i + 1] - pressure[i]) / h;
    else if (left && i > 0)
      grad = (pressure[i] - pressure[i - 1]) / h;
    else
      continue;
    double v = grad + g.center(i);
    acc += g.volume(i) * theta[i] * v * v;
  }
  return acc;
}

double stationary_entropy(double mass, int dim) {
  auto prof = stationary_profile(mass, dim);
  const double m = prof.m, area = numerics::sphere_area(dim);
  return numerics::integrate_adaptive(
      [&](double r) {
        double t = prof(r);
        return area * std::pow(r, dim - 1) * (std::pow(t, m) / (m - 1.0) + 0.5 * r * r * t);
      },
      0.0, prof.support_radius(), 1e-13);
}

double relative_entropy(const DensityField& theta, double M, int dim) {
  require(theta.grid().dim() == dim, ErrorCode::grid_mismatch, "density dimension differs");
  double have = mass(theta);
  require(std::abs(have - M) <= 1e-6 * M, ErrorCode::mass_mismatch,
          "relative entropy: density mass " + std::to_string(have) + " differs from " + std::to_string(M));
  const double m = 2.0 - 2.0 / dim;
  return entropy_H(theta, m) - entropy_H(stationary_profile_on_grid(M, theta.grid_ptr()), m);
}

LogSobolevAudit log_sobolev_slack(const DensityField& f, int dim) {
  LogSobolevAudit out;
  out.h_rel = relative_entropy(f, mass(f), dim);
  out.half_i = 0.5 * entropy_I(f, 2.0 - 2.0 / dim);
  out.slack = out.half_i - out.h_rel;
  return out;
}

CsiszarKullback csiszar_kullback_ratio(const DensityField& theta, double M, int dim, double tol) {
  CsiszarKullback out;
  out.h_rel = relative_entropy(theta, M, dim);
  auto ref = stationary_profile_on_grid(M, theta.grid_ptr());
  out.l1 = l1_distance(theta, ref);
  if (out.h_rel <= tol) {
    out.indeterminate = true;
    out.ratio = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.ratio = out.l1 / std::sqrt(out.h_rel);
  return out;
}

EquiIntegrability equi_integrability_bound(const DensityField& theta, double k, double m) {
  require(k > 0.0, ErrorCode::invalid_argument, "truncation level must be > 0");
  require(m > 1.0, ErrorCode::invalid_argument, "equi-integrability bound needs m > 1");
  EquiIntegrability out;
  out.truncated_l1 = mass(truncated_part(theta, k));
  out.bound = std::pow(k, 1.0 - m) * std::pow(lp_norm(theta, m), m);
  return out;
}

Exponents exponents(double q, double m, int dim) {
  require(dim >= 2, ErrorCode::invalid_argument, "dimension must be >= 2");
  require(q >= 1.0, ErrorCode::invalid_argument, "q must be >= 1");
  require(q < dim / (dim - 1.0), ErrorCode::invalid_argument, "q must be below d/(d-1) so that epsilon > 0");
  require(m > 1.0, ErrorCode::invalid_argument, "m must be > 1");
  double inv_p = 1.0 + (m - 1.0) / (2.0 * m) - 1.0 / q;
  require(inv_p > 0.0, ErrorCode::domain, "no finite p for these exponents");
  return {1.0 / inv_p, dim / q - dim + 1.0};
}

EntropyReport entropy_report(const DensityField& theta, double M) {
  const int d = theta.grid().dim();
  EntropyReport rep;
  rep.m = 2.0 - 2.0 / d;
  rep.dim = d;
  rep.mass = M;
  rep.cells = theta.size();
  rep.r_max = theta.grid().r_max();
  rep.H = entropy_H(theta, rep.m);
  rep.I = entropy_I(theta, rep.m);
  rep.H_rel = relative_entropy(theta, M, d);
  return rep;
}

}  // namespace aggdiff
