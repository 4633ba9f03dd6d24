#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "aggdiff/error.hpp"
#include "aggdiff/kernels.hpp"

using namespace aggdiff;
using std::numbers::pi;

namespace {

// Composite Simpson rule, n even.
template <class F>
double simpson(F f, double a, double b, int n) {
  double h = (b - a) / n, s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("newtonian gradient matches the derivative of the potential") {
  auto k = InteractionKernel::newtonian(3);
  CHECK(k.gradient(2.0) == doctest::Approx(-1.0 / (16.0 * pi)).epsilon(1e-14));
  // -d/dr of 1/(4 pi r) by central difference
  double h = 1e-5, r = 2.0;
  double fd = (1.0 / (4 * pi * (r + h)) - 1.0 / (4 * pi * (r - h))) / (2 * h);
  CHECK(k.gradient(r) == doctest::Approx(fd).epsilon(1e-8));
  auto k2 = InteractionKernel::newtonian(2);
  CHECK(k2.gradient(0.5) == doctest::Approx(-1.0 / (2 * pi * 0.5)).epsilon(1e-14));
  CHECK_THROWS_AS(k.gradient(0.0), Error);
}

TEST_CASE("bessel gradient against closed forms") {
  // d = 3: K = exp(-r)/(4 pi r); d = 2: K = K0(r)/(2 pi)
  auto k3 = InteractionKernel::bessel(3, 1.0);
  for (double r : {0.01, 0.3, 1.0, 4.0, 20.0})
    CHECK(k3.gradient(r) == doctest::Approx(-(1 + r) * std::exp(-r) / (4 * pi * r * r)).epsilon(1e-12));
  auto k2 = InteractionKernel::bessel(2, 4.0);
  for (double r : {0.01, 0.5, 2.0})
    CHECK(k2.gradient(r) == doctest::Approx(-2.0 * std::cyl_bessel_k(1.0, 2.0 * r) / (2 * pi)).epsilon(1e-12));
  // The interpolated table used inside the operator stays close to the direct formula.
  for (double r : {1e-3, 0.07, 0.9, 3.3, 11.0})
    CHECK(k2.gradient_extended(r) == doctest::Approx(k2.gradient(r)).epsilon(1e-8));
}

TEST_CASE("gaussian and power decay families") {
  auto g = InteractionKernel::gaussian(3, 1.0);
  CHECK(g.gradient(0.0) == 0.0);
  CHECK(std::abs(g.gradient(1e-8)) < 1e-8);
  auto p = InteractionKernel::power_decay(3, 2.0, 1.0);
  // |k'(r)| <= r^{-gamma} with this normalization, so |k'(10)| <= 10^{-2}
  CHECK(std::abs(p.gradient(10.0)) <= 1e-2);
  for (double r : {0.5, 1.0, 3.0, 30.0, 300.0}) CHECK(std::abs(p.gradient(r)) <= std::pow(r, -2.0));
  CHECK(p.gradient(10.0) / p.gradient(1.0) == doctest::Approx(10.0 * std::pow(101.0, -1.5) * std::pow(2.0, 1.5)));
  CHECK(p.gradient(1.0) == doctest::Approx(-std::pow(2.0, -1.5)));
  CHECK(p.gradient(1.0) < 0.0);
  CHECK_THROWS_AS(InteractionKernel::gaussian(3, -1.0), Error);
}

TEST_CASE("tabulated kernel refuses to extrapolate") {
  std::vector<double> r, kp;
  for (int i = 1; i <= 20; ++i) {
    r.push_back(0.1 * i);
    kp.push_back(-std::exp(-0.1 * i));
  }
  auto t = InteractionKernel::tabulated(3, r, kp);
  CHECK(t.gradient(1.05) == doctest::Approx(-std::exp(-1.05)).epsilon(1e-4));
  try {
    t.gradient(5.0);
    FAIL("expected an extrapolation error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::extrapolation);
  }
}

TEST_CASE("L^q norms of the kernel gradient") {
  for (double q : {1.0, 1.2, 1.49, 2.0, 3.0}) CHECK(lq_gradient_norm(InteractionKernel::newtonian(3), q).divergent);
  for (double q : {1.0, 1.5, 1.9}) CHECK(lq_gradient_norm(InteractionKernel::newtonian(2), q).divergent);
  CHECK_FALSE(has_subcritical_lq_norm(InteractionKernel::newtonian(2)));

  auto b2 = lq_gradient_norm(InteractionKernel::bessel(2, 1.0), 1.0);
  REQUIRE_FALSE(b2.divergent);
  CHECK(b2.value == doctest::Approx(pi / 2).epsilon(1e-7));  // int_0^inf r K1(r) dr
  auto b3 = lq_gradient_norm(InteractionKernel::bessel(3, 1.0), 1.0);
  CHECK(b3.value == doctest::Approx(2.0).epsilon(1e-7));  // int (1 + r) e^{-r} dr

  // gaussian sigma = 1, d = 3: 4 pi (2 pi)^{-3/2} int r^3 e^{-r^2/2} dr, computed at two resolutions
  auto oracle = [](int n) {
    return 4 * pi * std::pow(2 * pi, -1.5) * simpson([](double r) { return r * r * r * std::exp(-0.5 * r * r); }, 0.0, 14.0, n);
  };
  CHECK(std::abs(oracle(4000) - oracle(8000)) < 1e-8);
  auto g = lq_gradient_norm(InteractionKernel::gaussian(3, 1.0), 1.0);
  CHECK(g.value == doctest::Approx(oracle(8000)).epsilon(1e-8));
  CHECK(g.value == doctest::Approx(1.5957691216057307).epsilon(1e-10));

  double q = 0.0;
  CHECK(has_subcritical_lq_norm(InteractionKernel::power_decay(3, 2.5, 1.0), &q));
  CHECK(q >= 1.0);
  CHECK(q < 1.5);
  CHECK_THROWS_AS(lq_gradient_norm(InteractionKernel::gaussian(3, 1.0), 0.5), Error);
}

TEST_CASE("admissibility probe") {
  auto n = admissibility_probe(InteractionKernel::newtonian(3), 10.0, 200);
  CHECK(n.kn_ok);
  CHECK(n.mn_ok);
  CHECK(n.bd_ok);
  auto g = admissibility_probe(InteractionKernel::gaussian(3, 1.0), 10.0, 200);
  CHECK(g.kn_ok);
  CHECK(g.mn_ok);
  CHECK(g.bd_ok);

  std::vector<double> r, kp;
  for (int i = 1; i <= 200; ++i) {
    r.push_back(0.05 * i);
    kp.push_back(-std::exp(-0.05 * i) * (1.5 + std::sin(6.0 * 0.05 * i)));
  }
  auto osc = admissibility_probe(InteractionKernel::tabulated(3, r, kp), 10.0, 400);
  CHECK_FALSE(osc.mn_ok);
  CHECK_FALSE(osc.details.empty());
}

TEST_CASE("convolution operator: zero density and linearity") {
  auto grid = make_grid(3, 48, 6.0);
  auto kernel = std::make_shared<InteractionKernel>(InteractionKernel::gaussian(3, 1.0));
  RadialConvolutionOperator op(kernel, grid);
  DensityField zero(grid);
  for (double w : op.at_centers(zero)) CHECK(w == 0.0);

  DensityField u(grid), v(grid), sum(grid);
  for (int i = 0; i < grid->size(); ++i) {
    double r = grid->center(i);
    u[i] = std::exp(-r * r);
    v[i] = 1.0 / (1.0 + r * r * r * r);
    sum[i] = 2.0 * u[i] + v[i];
  }
  auto wu = op.at_centers(u), wv = op.at_centers(v), ws = op.at_centers(sum);
  for (int i = 0; i < grid->size(); ++i) CHECK(ws[i] == doctest::Approx(2.0 * wu[i] + wv[i]).epsilon(1e-12));
}

TEST_CASE("gaussian kernel matrix row against direct quadrature") {
  auto grid = make_grid(3, 32, 6.0);
  auto kernel = std::make_shared<InteractionKernel>(InteractionKernel::gaussian(3, 1.0));
  RadialConvolutionOperator op(kernel, grid);
  const int j = 7;
  double a = grid->face(j), b = grid->face(j + 1);
  for (int i : {0, 3, 7, 8, 15, 31}) {
    double r = grid->center(i);
    // radial component at (r,0,0) of the field of a unit-density shell a < rho < b
    double direct = simpson(
        [&](double rho) {
          return rho * rho * simpson(
                                 [&](double phi) {
                                   double dist = std::sqrt(r * r + rho * rho - 2 * r * rho * std::cos(phi));
                                   if (dist == 0.0) return 0.0;
                                   return 2 * pi * std::sin(phi) * kernel->gradient(dist) * (r - rho * std::cos(phi)) / dist;
                                 },
                                 0.0, pi, 400);
        },
        a, b, 40);
    CHECK(op.center_weight(i, j) == doctest::Approx(direct).epsilon(1e-6).scale(1e-12));
  }
}

TEST_CASE("newtonian ball: shell theorem against Monte Carlo") {
  const double M = 2.0;
  auto grid = make_grid(3, 64, 4.0);
  DensityField ball(grid);
  double vol = 4.0 / 3.0 * pi;
  for (int i = 0; i < 16; ++i) ball[i] = M / vol;  // radius 1 = face 16
  auto kernel = std::make_shared<InteractionKernel>(InteractionKernel::newtonian(3));
  RadialConvolutionOperator shell(kernel, grid);
  ConvolutionOptions opts;
  opts.force_matrix = true;
  RadialConvolutionOperator matrix(kernel, grid, opts);
  REQUIRE(shell.uses_shell_theorem());
  REQUIRE_FALSE(matrix.uses_shell_theorem());
  auto ws = shell.at_centers(ball), wm = matrix.at_centers(ball);

  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int i : {24, 40, 60}) {
    double r = grid->center(i);
    double acc = 0.0;
    int n = 0;
    while (n < 400000) {
      double y1 = unif(rng), y2 = unif(rng), y3 = unif(rng);
      if (y1 * y1 + y2 * y2 + y3 * y3 > 1.0) continue;
      ++n;
      double dx = r - y1, dist = std::sqrt(dx * dx + y2 * y2 + y3 * y3);
      acc += kernel->gradient(dist) * dx / dist;
    }
    double mc = M * acc / n;
    CHECK(std::abs(mc) == doctest::Approx(M / (4 * pi * r * r)).epsilon(0.01));
    CHECK(ws[i] == doctest::Approx(-M / (4 * pi * r * r)).epsilon(1e-6));
    CHECK(wm[i] == doctest::Approx(ws[i]).epsilon(1e-6));
  }
}

TEST_CASE("newtonian d = 2: mass in the first cell") {
  const double M = 3.0;
  auto grid = make_grid(2, 200, 10.0);
  DensityField u(grid);
  u[0] = M / grid->volume(0);
  RadialConvolutionOperator op(std::make_shared<InteractionKernel>(InteractionKernel::newtonian(2)), grid);
  auto w = attraction_velocity(op, u);
  for (int i : {5, 50, 199}) CHECK(std::abs(w[i]) == doctest::Approx(M / (2 * pi * grid->center(i))).epsilon(1e-6));
}

TEST_CASE("velocity at the first center vanishes under refinement") {
  auto kernel = std::make_shared<InteractionKernel>(InteractionKernel::bessel(2, 1.0));
  double prev = 1e300;
  for (int n : {32, 64, 128}) {
    auto grid = make_grid(2, n, 6.0);
    DensityField u = sample_centers(grid, [](double r) { return std::exp(-r * r); });
    RadialConvolutionOperator op(kernel, grid);
    double w0 = std::abs(op.at_centers(u)[0]);
    CHECK(w0 < 0.7 * prev);
    prev = w0;
  }
}

TEST_CASE("operator memory cap") {
  auto grid = make_grid(3, 200, 5.0);
  ConvolutionOptions opts;
  opts.max_entries = 1000;
  try {
    RadialConvolutionOperator op(std::make_shared<InteractionKernel>(InteractionKernel::gaussian(3, 1.0)), grid, opts);
    FAIL("expected memory_cap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::memory_cap);
  }
}
