#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace aggdiff::numerics {

inline constexpr double pi = 3.14159265358979323846;

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Gauss-Legendre rule of the given order; rules are cached per order and
// shared, so the returned reference stays valid for the program lifetime.
const GaussRule& gauss_legendre(int order);

// Integral of f over [a, b] with a fixed Gauss-Legendre rule.
double integrate(const std::function<double(double)>& f, double a, double b, int order = 16);

// Adaptive Gauss-Kronrod style integration by recursive bisection comparing
// two Gauss orders. Used by oracles and one-off setup integrals.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol = 1e-12, int max_depth = 40);

// Area of the unit sphere S^{d-1} in R^d.
double sphere_area(int d);

// Volume of the unit ball in R^d.
double ball_volume(int d);

// e^{-z} I_nu(z) for z >= 0, accurate for all z.
double scaled_bessel_i(double nu, double z);

// Mean over S^{d-1} of exp(z (cos phi - 1)), and of cos(phi) exp(z (cos phi - 1)),
// where phi is the angle to a fixed direction.
double sphere_mean_exp(int d, double z);
double sphere_mean_cos_exp(int d, double z);

// Normalized angular density of phi on [0, pi] for the uniform measure on S^{d-1}.
double angular_weight(int d, double phi);

// Natural cubic spline through (x_i, y_i), x strictly increasing.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> x, std::vector<double> y);
  double operator()(double x) const;
  double derivative(double x) const;
  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }
  bool empty() const { return x_.empty(); }

 private:
  std::size_t segment(double x) const;
  std::vector<double> x_, y_, m_;  // m_: second derivatives at knots
};

// Ordinary least squares y = a + b x.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_stderr = 0.0;
};
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace aggdiff::numerics
