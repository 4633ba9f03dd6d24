#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "aggdiff/fields.hpp"

namespace aggdiff {

using RadialFunction = std::function<double(double)>;

// U(t, x; M) = t^{-1} (C1 - (m-1)/(2md) |x|^2 t^{-2/d})_+^{1/(m-1)}, m = 2 - 2/d.
struct BarenblattProfile {
  double mass = 0.0;
  int dim = 0;
  double m = 0.0;
  double c1 = 0.0;

  double operator()(double t, double r) const;
  double support_radius(double t) const;
};

double barenblatt_c1(double mass, int dim);
BarenblattProfile barenblatt_profile(double mass, int dim);
double barenblatt_eval(const BarenblattProfile& profile, double t, double r);

// theta_M(xi) = ((m-1)/m (C - |xi|^2 / 2))_+^{1/(m-1)}, the steady state of the
// rescaled equation with unit confinement.
struct StationaryProfile {
  double mass = 0.0;
  int dim = 0;
  double m = 0.0;
  double c = 0.0;

  double operator()(double xi) const;
  double support_radius() const;
};

StationaryProfile stationary_profile(double mass, int dim);

// Discrete minimizer of the cell-centered entropy on `grid`: the point values
// of theta_M at the centers with C rescaled so that the discrete mass is exact.
DensityField stationary_profile_on_grid(double mass, const GridPtr& grid);
double stationary_profile_eval(double mass, int dim, double xi);

// How semigroup results are reported on a grid.
enum class Sampling { centers, cell_averages };

// e^{t Lap} f at radius r. `support` bounds the support of f.
double heat_semigroup_at(const RadialFunction& f, int dim, double t, double r,
                         double support = std::numeric_limits<double>::infinity());

// S(tau) w at radius r, with S(tau) the Fokker-Planck semigroup of
// L w = Lap w + (1/2) div(xi w):
//   S(tau) w(xi) = (4 pi a)^{-d/2} int exp(-|xi - e^{-tau/2} xi'|^2 / (4a)) w(xi') dxi',  a = 1 - e^{-tau}.
// With `dipole` set, w stands for the field g(r) x_1 / r (or the radial vector
// field g(r) x / r) and the return value is the profile h with S(tau) w = h(r) x_1 / r.
double fokker_planck_at(const RadialFunction& w, int dim, double tau, double r,
                        double support = std::numeric_limits<double>::infinity(), bool dipole = false);

std::vector<double> heat_semigroup(const RadialFunction& f, double t, const GridPtr& grid,
                                   Sampling sampling = Sampling::centers,
                                   double support = std::numeric_limits<double>::infinity());
std::vector<double> fokker_planck_semigroup(const RadialFunction& w, double tau, const GridPtr& grid,
                                            Sampling sampling = Sampling::centers,
                                            double support = std::numeric_limits<double>::infinity(),
                                            bool dipole = false);

// Field versions: the input is interpolated through the cell centers.
DensityField heat_semigroup(const DensityField& u0, double t, Sampling sampling = Sampling::centers);
DensityField fokker_planck_semigroup(const DensityField& w, double tau, Sampling sampling = Sampling::centers);

// Cubic interpolant through the cell centers, even about 0 and zero beyond the last center.
RadialFunction interpolant(const GridPtr& grid, std::span<const double> values);

// (t, x, u) <-> (tau, xi, theta).
//   nonlinear: s = d (t + T) + 1, xi = s^{-1/d} x, theta = s u, tau = log(s) / d
//   linear_d2: s = (t + T) + 1,   xi = s^{-1/2} x, theta = s u, tau = log(s)
struct SimilarityFrame {
  RescaleMode mode = RescaleMode::nonlinear;
  int dim = 3;
  double shift = 0.0;

  double stretch(double t) const;   // s(t)
  double tau_of(double t) const;
  double time_of(double tau) const;
  double tau0() const { return tau_of(0.0); }
  // x = dilation(tau) * xi
  double dilation(double tau) const;
};

struct SimilaritySnapshot {
  DensityField theta;
  double tau = 0.0;
  double clipped_mass = 0.0;
};

struct PhysicalSnapshot {
  DensityField u;
  double t = 0.0;
  double clipped_mass = 0.0;
};

SimilaritySnapshot to_similarity(const DensityField& u, double t, const SimilarityFrame& frame, const GridPtr& xi_grid);
PhysicalSnapshot from_similarity(const DensityField& theta, double tau, const SimilarityFrame& frame,
                                 const GridPtr& x_grid);

// linear_d2: T = lambda^2 - 1; nonlinear: T = (lambda^d - 1) / d.
double shift_from_lambda(double lambda, RescaleMode mode, int dim);

}  // namespace aggdiff
