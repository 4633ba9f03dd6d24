#include "aggdiff/closed_forms.hpp"

#include <algorithm>
#include <cmath>

#include "aggdiff/error.hpp"
#include "aggdiff/numerics.hpp"

namespace aggdiff {

using numerics::pi;

namespace {

// int_0^1 (1 - s^2)^n s^{d-1} ds
double beta_moment(int d, double n) {
  return 0.5 * std::exp(std::lgamma(0.5 * d) + std::lgamma(n + 1.0) - std::lgamma(0.5 * d + n + 1.0));
}

double porous_exponent(int d) { return 2.0 - 2.0 / d; }

}  // namespace

double barenblatt_c1(double mass, int dim) {
  require(mass > 0.0, ErrorCode::invalid_argument, "barenblatt mass must be positive");
  require(dim >= 3, ErrorCode::invalid_argument, "barenblatt profile needs d >= 3 (m = 2 - 2/d > 1)");
  const double m = porous_exponent(dim), n = 1.0 / (m - 1.0);
  const double kappa = (m - 1.0) / (2.0 * m * dim);
  // mass = area * (C1/kappa)^{d/2} C1^n J
  const double j = beta_moment(dim, n);
  const double power = 0.5 * dim + n;
  return std::pow(mass * std::pow(kappa, 0.5 * dim) / (numerics::sphere_area(dim) * j), 1.0 / power);
}

BarenblattProfile barenblatt_profile(double mass, int dim) {
  return {mass, dim, porous_exponent(dim), barenblatt_c1(mass, dim)};
}

double BarenblattProfile::operator()(double t, double r) const {
  require(t > 0.0, ErrorCode::domain, "barenblatt profile needs t > 0");
  const double kappa = (m - 1.0) / (2.0 * m * dim);
  double xi = r * std::pow(t, -1.0 / dim);
  double base = c1 - kappa * xi * xi;
  if (base <= 0.0) return 0.0;
  return std::pow(base, 1.0 / (m - 1.0)) / t;
}

double BarenblattProfile::support_radius(double t) const {
  require(t > 0.0, ErrorCode::domain, "barenblatt profile needs t > 0");
  return std::pow(t, 1.0 / dim) * std::sqrt(2.0 * m * dim * c1 / (m - 1.0));
}

double barenblatt_eval(const BarenblattProfile& profile, double t, double r) { return profile(t, r); }

StationaryProfile stationary_profile(double mass, int dim) {
  require(mass > 0.0, ErrorCode::invalid_argument, "stationary profile mass must be positive");
  require(dim >= 3, ErrorCode::invalid_argument, "stationary profile needs d >= 3");
  const double m = porous_exponent(dim), n = 1.0 / (m - 1.0), beta = (m - 1.0) / m;
  // mass = area * beta^n C^n (2C)^{d/2} J
  const double j = beta_moment(dim, n);
  const double denom = numerics::sphere_area(dim) * std::pow(beta, n) * std::pow(2.0, 0.5 * dim) * j;
  return {mass, dim, m, std::pow(mass / denom, 1.0 / (n + 0.5 * dim))};
}

double StationaryProfile::operator()(double xi) const {
  double base = c - 0.5 * xi * xi;
  if (base <= 0.0) return 0.0;
  return std::pow((m - 1.0) / m * base, 1.0 / (m - 1.0));
}

double StationaryProfile::support_radius() const { return std::sqrt(2.0 * c); }

DensityField stationary_profile_on_grid(double mass, const GridPtr& grid) {
  auto prof = stationary_profile(mass, grid->dim());
  auto fill = [&](double c) {
    StationaryProfile p = prof;
    p.c = c;
    return sample_centers(grid, [&](double r) { return p(r); });
  };
  double lo = 0.0, hi = prof.c;
  while (aggdiff::mass(fill(hi)) < mass) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (aggdiff::mass(fill(mid)) < mass ? lo : hi) = mid;
  }
  return fill(0.5 * (lo + hi));
}

double stationary_profile_eval(double mass, int dim, double xi) { return stationary_profile(mass, dim)(xi); }

// ---------------------------------------------------------------------------
// Gaussian semigroups

namespace {

// (4 pi a)^{-d/2} int_lo^hi area rho^{d-1} w(rho) exp(-(r - c rho)^2 / (4a)) <angular factor> drho
double gaussian_radial(const RadialFunction& w, int d, double a, double c, double r, double support, bool dipole) {
  const double width = 40.0 * std::sqrt(a);
  double lo = std::max(0.0, (r - width) / c);
  double hi = std::min(support, (r + width) / c);
  if (hi <= lo) return 0.0;
  const double area = numerics::sphere_area(d);
  const double norm = std::pow(4.0 * pi * a, -0.5 * d);
  auto f = [&](double rho) {
    double val = w(rho);
    if (val == 0.0) return 0.0;
    double z = r * c * rho / (2.0 * a);
    double ang = dipole ? numerics::sphere_mean_cos_exp(d, z) : numerics::sphere_mean_exp(d, z);
    double gap = r - c * rho;
    return area * std::pow(rho, d - 1) * val * std::exp(-gap * gap / (4.0 * a)) * ang;
  };
  // Split at the kernel peak so the adaptive rule sees the narrow part.
  double peak = r / c;
  double acc = 0.0;
  if (peak > lo && peak < hi)
    acc = numerics::integrate_adaptive(f, lo, peak, 1e-12) + numerics::integrate_adaptive(f, peak, hi, 1e-12);
  else
    acc = numerics::integrate_adaptive(f, lo, hi, 1e-12);
  return norm * acc;
}

std::vector<double> sample_signed(const GridPtr& grid, Sampling sampling, const std::function<double(double)>& g) {
  const int n = grid->size(), d = grid->dim();
  std::vector<double> out(n, 0.0);
  if (sampling == Sampling::centers) {
    for (int i = 0; i < n; ++i) out[i] = g(grid->center(i));
    return out;
  }
  static const double nodes[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  static const double weights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const double area = numerics::sphere_area(d);
  for (int i = 0; i < n; ++i) {
    double a = grid->face(i), b = grid->face(i + 1), mid = 0.5 * (a + b), half = 0.5 * (b - a), acc = 0.0;
    for (int k = 0; k < 3; ++k) {
      double r = mid + half * nodes[k];
      acc += weights[k] * std::pow(r, d - 1) * g(r);
    }
    out[i] = acc * half * area / grid->volume(i);
  }
  return out;
}

DensityField to_density(const GridPtr& grid, std::vector<double> values) {
  for (double& v : values) v = std::max(0.0, v);
  return DensityField(grid, std::move(values));
}

}  // namespace

double heat_semigroup_at(const RadialFunction& f, int dim, double t, double r, double support) {
  require(t >= 0.0, ErrorCode::domain, "heat semigroup needs t >= 0");
  if (t == 0.0) return r <= support ? f(r) : 0.0;
  return gaussian_radial(f, dim, t, 1.0, r, support, false);
}

double fokker_planck_at(const RadialFunction& w, int dim, double tau, double r, double support, bool dipole) {
  require(tau >= 0.0, ErrorCode::domain, "Fokker-Planck semigroup needs tau >= 0");
  if (tau == 0.0) return r <= support ? w(r) : 0.0;
  return gaussian_radial(w, dim, -std::expm1(-tau), std::exp(-0.5 * tau), r, support, dipole);
}

std::vector<double> heat_semigroup(const RadialFunction& f, double t, const GridPtr& grid, Sampling sampling,
                                   double support) {
  require(t >= 0.0, ErrorCode::domain, "heat semigroup needs t >= 0");
  return sample_signed(grid, sampling, [&](double r) { return heat_semigroup_at(f, grid->dim(), t, r, support); });
}

std::vector<double> fokker_planck_semigroup(const RadialFunction& w, double tau, const GridPtr& grid,
                                            Sampling sampling, double support, bool dipole) {
  require(tau >= 0.0, ErrorCode::domain, "Fokker-Planck semigroup needs tau >= 0");
  return sample_signed(grid, sampling,
                       [&](double r) { return fokker_planck_at(w, grid->dim(), tau, r, support, dipole); });
}

RadialFunction interpolant(const GridPtr& grid, std::span<const double> values) {
  require(static_cast<int>(values.size()) == grid->size(), ErrorCode::grid_mismatch, "values do not match grid");
  const int n = grid->size();
  std::vector<double> x, y;
  for (int i = 2; i >= 0; --i) {
    if (i >= n) continue;
    x.push_back(-grid->center(i));
    y.push_back(values[i]);
  }
  for (int i = 0; i < n; ++i) {
    x.push_back(grid->center(i));
    y.push_back(values[i]);
  }
  auto spline = std::make_shared<numerics::CubicSpline>(std::move(x), std::move(y));
  double last = grid->center(n - 1);
  return [spline, last](double r) { return r > last ? 0.0 : (*spline)(r); };
}

DensityField heat_semigroup(const DensityField& u0, double t, Sampling sampling) {
  require(t >= 0.0, ErrorCode::domain, "heat semigroup needs t >= 0");
  if (t == 0.0) return u0;
  auto f = interpolant(u0.grid_ptr(), u0.values());
  return to_density(u0.grid_ptr(), heat_semigroup(f, t, u0.grid_ptr(), sampling, u0.grid().r_max()));
}

DensityField fokker_planck_semigroup(const DensityField& w, double tau, Sampling sampling) {
  require(tau >= 0.0, ErrorCode::domain, "Fokker-Planck semigroup needs tau >= 0");
  if (tau == 0.0) return w;
  auto f = interpolant(w.grid_ptr(), w.values());
  return to_density(w.grid_ptr(), fokker_planck_semigroup(f, tau, w.grid_ptr(), sampling, w.grid().r_max()));
}

// ---------------------------------------------------------------------------
// Similarity variables

double SimilarityFrame::stretch(double t) const {
  if (mode == RescaleMode::nonlinear) return dim * (t + shift) + 1.0;
  return t + shift + 1.0;
}

double SimilarityFrame::tau_of(double t) const {
  if (mode == RescaleMode::nonlinear) return std::log(stretch(t)) / dim;
  return std::log(stretch(t));
}

double SimilarityFrame::time_of(double tau) const {
  if (mode == RescaleMode::nonlinear) return (std::exp(dim * tau) - 1.0) / dim - shift;
  return std::exp(tau) - 1.0 - shift;
}

double SimilarityFrame::dilation(double tau) const {
  return mode == RescaleMode::nonlinear ? std::exp(tau) : std::exp(0.5 * tau);
}

SimilaritySnapshot to_similarity(const DensityField& u, double t, const SimilarityFrame& frame, const GridPtr& xi_grid) {
  require(t >= 0.0, ErrorCode::domain, "similarity transform needs t >= 0");
  require(u.grid().dim() == frame.dim, ErrorCode::grid_mismatch, "frame and field dimensions differ");
  double tau = frame.tau_of(t);
  SimilaritySnapshot out{DensityField(xi_grid), tau, 0.0};
  out.theta = remap_dilated(u, 1.0 / frame.dilation(tau), xi_grid, &out.clipped_mass);
  return out;
}

PhysicalSnapshot from_similarity(const DensityField& theta, double tau, const SimilarityFrame& frame,
                                 const GridPtr& x_grid) {
  require(tau >= frame.tau0() - 1e-14, ErrorCode::domain, "tau precedes the frame origin");
  require(theta.grid().dim() == frame.dim, ErrorCode::grid_mismatch, "frame and field dimensions differ");
  PhysicalSnapshot out{DensityField(x_grid), frame.time_of(tau), 0.0};
  out.u = remap_dilated(theta, frame.dilation(tau), x_grid, &out.clipped_mass);
  return out;
}

double shift_from_lambda(double lambda, RescaleMode mode, int dim) {
  require(lambda >= 1.0, ErrorCode::invalid_argument, "shift_from_lambda requires lambda >= 1");
  if (mode == RescaleMode::linear_d2) return lambda * lambda - 1.0;
  return (std::pow(lambda, dim) - 1.0) / dim;
}

}  // namespace aggdiff
