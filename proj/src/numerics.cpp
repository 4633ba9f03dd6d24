#include "aggdiff/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "aggdiff/error.hpp"

namespace aggdiff::numerics {

namespace {

GaussRule make_rule(int order) {
  GaussRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double pn = order == 1 ? x : p1;
      double pnm1 = order == 1 ? 1.0 : p0;
      dp = order * (x * pn - pnm1) / (x * x - 1.0);
      double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[order - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[order - 1 - i] = w;
  }
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int order) {
  require(order >= 1 && order <= 1024, ErrorCode::invalid_argument, "Gauss order out of range");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<GaussRule>(make_rule(order));
  return *slot;
}

double integrate(const std::function<double(double)>& f, double a, double b, int order) {
  const auto& rule = gauss_legendre(order);
  double half = 0.5 * (b - a), mid = 0.5 * (a + b), sum = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) sum += rule.weights[k] * f(mid + half * rule.nodes[k]);
  return sum * half;
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol, int max_depth) {
  struct Piece {
    double a, b;
    int depth;
  };
  double scale = integrate([&](double x) { return std::abs(f(x)); }, a, b, 40);
  if (scale == 0.0) scale = 1e-300;
  std::vector<Piece> stack{{a, b, 0}};
  double total = 0.0;
  while (!stack.empty()) {
    Piece p = stack.back();
    stack.pop_back();
    double lo = integrate(f, p.a, p.b, 10);
    double hi = integrate(f, p.a, p.b, 20);
    if (std::abs(hi - lo) <= rel_tol * scale || p.depth >= max_depth) {
      total += hi;
    } else {
      double mid = 0.5 * (p.a + p.b);
      stack.push_back({p.a, mid, p.depth + 1});
      stack.push_back({mid, p.b, p.depth + 1});
    }
  }
  return total;
}

double sphere_area(int d) { return 2.0 * std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d); }

double ball_volume(int d) { return sphere_area(d) / d; }

double scaled_bessel_i(double nu, double z) {
  if (z <= 0.0) return nu == 0.0 ? 1.0 : 0.0;
  if (z < 500.0) return std::cyl_bessel_i(nu, z) * std::exp(-z);
  // Large-argument expansion of e^{-z} I_nu(z).
  double mu = 4.0 * nu * nu, term = 1.0, sum = 1.0;
  for (int k = 1; k < 20; ++k) {
    term *= -(mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (k * 8.0 * z);
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum / std::sqrt(2.0 * pi * z);
}

namespace {

// Mean of e^{z cos phi} over the sphere as a power series; k-th term of the
// derivative series as well. Good for z < 1.
void small_z_series(int d, double z, double& mean, double& mean_cos) {
  double half = 0.5 * d;
  double q = 0.25 * z * z;
  double term = 1.0;  // Gamma(d/2) (z/2)^{2k} / (k! Gamma(k + d/2)) at k = 0
  mean = 1.0;
  mean_cos = 0.0;
  for (int k = 1; k < 40; ++k) {
    term *= q / (k * (k - 1 + half));
    mean += term;
    // derivative of (z/2)^{2k} is k (z/2)^{2k-1}
    mean_cos += term * 2.0 * k / z;
    if (term < 1e-18 * mean) break;
  }
  double damp = std::exp(-z);
  mean *= damp;
  mean_cos *= damp;
}

}  // namespace

double sphere_mean_exp(int d, double z) {
  if (z < 1.0) {
    double mean, mean_cos;
    small_z_series(d, z, mean, mean_cos);
    return mean;
  }
  double nu = 0.5 * d - 1.0;
  return std::tgamma(0.5 * d) * std::pow(2.0 / z, nu) * scaled_bessel_i(nu, z);
}

double sphere_mean_cos_exp(int d, double z) {
  if (z < 1.0) {
    double mean, mean_cos;
    small_z_series(d, z, mean, mean_cos);
    return mean_cos;
  }
  double nu = 0.5 * d - 1.0;
  return std::tgamma(0.5 * d) * std::pow(2.0 / z, nu) * scaled_bessel_i(nu + 1.0, z);
}

double angular_weight(int d, double phi) {
  double norm = std::sqrt(pi) * std::tgamma(0.5 * (d - 1)) / std::tgamma(0.5 * d);
  return d == 2 ? 1.0 / pi : std::pow(std::sin(phi), d - 2) / norm;
}

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  require(n >= 2 && y_.size() == n, ErrorCode::invalid_argument, "spline needs >= 2 matching samples");
  for (std::size_t i = 1; i < n; ++i)
    require(x_[i] > x_[i - 1], ErrorCode::invalid_argument, "spline abscissae must increase");
  m_.assign(n, 0.0);
  if (n < 3) return;
  // Tridiagonal solve for the natural spline second derivatives.
  std::vector<double> c(n, 0.0), r(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
    double a = h0 / 6.0, b = (h0 + h1) / 3.0, cc = h1 / 6.0;
    double rhs = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
    double denom = b - a * c[i - 1];
    c[i] = cc / denom;
    r[i] = (rhs - a * r[i - 1]) / denom;
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    m_[i] = r[i] - c[i] * m_[i + 1];
    if (i == 1) break;
  }
}

std::size_t CubicSpline::segment(double x) const {
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
  return std::min(i, x_.size() - 2);
}

double CubicSpline::operator()(double x) const {
  std::size_t i = segment(x);
  double h = x_[i + 1] - x_[i];
  double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
  return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double CubicSpline::derivative(double x) const {
  std::size_t i = segment(x);
  double h = x_[i + 1] - x_[i];
  double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
  return (y_[i + 1] - y_[i]) / h + ((1.0 - 3.0 * a * a) * m_[i] + (3.0 * b * b - 1.0) * m_[i + 1]) * h / 6.0;
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  require(n >= 2 && y.size() == n, ErrorCode::invalid_argument, "least squares needs >= 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, ErrorCode::numeric, "degenerate abscissae in least squares");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double e = y[i] - fit.intercept - fit.slope * x[i];
    sse += e * e;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  fit.slope_stderr = n > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
  return fit;
}

}  // namespace aggdiff::numerics
