#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "aggdiff/closed_forms.hpp"
#include "aggdiff/entropy.hpp"
#include "aggdiff/error.hpp"
#include "aggdiff/numerics.hpp"

using namespace aggdiff;
using std::numbers::pi;

namespace {

template <class F>
double simpson(F f, double a, double b, int n) {
  double h = (b - a) / n, s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// Mass of (C - k r^2)_+^{1/(m-1)} in d dimensions by quadrature, then bisection on C.
double c1_oracle(double mass, int d) {
  double m = 2.0 - 2.0 / d, k = (m - 1) / (2 * m * d), area = numerics::sphere_area(d);
  auto mass_of = [&](double c) {
    double R = std::sqrt(c / k);
    return area * simpson([&](double r) { return std::pow(std::max(0.0, c - k * r * r), 1 / (m - 1)) * std::pow(r, d - 1); },
                          0.0, R, 20000);
  };
  double lo = 1e-8, hi = 50.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (mass_of(mid) < mass ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double radial_mass(const std::function<double(double)>& f, int d, double R) {
  return numerics::sphere_area(d) * simpson([&](double r) { return f(r) * std::pow(r, d - 1); }, 0.0, R, 40000);
}

}  // namespace

TEST_CASE("Barenblatt constant") {
  // Pinned from an independent 30-digit quadrature + bisection.
  CHECK(barenblatt_c1(1.0, 3) == doctest::Approx(0.38305279194939329).epsilon(1e-13));
  CHECK(barenblatt_c1(10.0, 3) == doctest::Approx(0.63897056802676528).epsilon(1e-13));
  for (int d : {3, 4, 5})
    for (double M : {0.5, 1.0, 7.0}) CHECK(barenblatt_c1(M, d) == doctest::Approx(c1_oracle(M, d)).epsilon(1e-9));
  CHECK(barenblatt_c1(2.0, 3) > barenblatt_c1(1.0, 3));
  CHECK_THROWS_AS(barenblatt_c1(-1.0, 3), Error);
  CHECK_THROWS_AS(barenblatt_c1(1.0, 2), Error);
}

TEST_CASE("Barenblatt profile") {
  for (double M : {1.0, 10.0}) {
    auto bb = barenblatt_profile(M, 3);
    CHECK(radial_mass([&](double r) { return bb(1.0, r); }, 3, bb.support_radius(1.0)) ==
          doctest::Approx(M).epsilon(1e-8));
  }
  auto bb = barenblatt_profile(1.0, 3);
  for (double t : {0.5, 1.0, 10.0, 1e4}) {
    CHECK(barenblatt_eval(bb, t, 0.0) == doctest::Approx(std::pow(bb.c1, 3.0) / t).epsilon(1e-14));
    CHECK(barenblatt_eval(bb, t, 1.01 * bb.support_radius(t)) == 0.0);
    for (double x : {0.1, 0.7, 2.0}) {
      double y = x * std::pow(t, -1.0 / 3);
      CHECK(bb(t, x) == doctest::Approx(bb(1.0, y) / t).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(bb(0.0, 1.0), Error);
}

TEST_CASE("stationary profile") {
  for (double M : {1.0, 5.0}) {
    auto th = stationary_profile(M, 3);
    CHECK(radial_mass(th, 3, th.support_radius()) == doctest::Approx(M).epsilon(1e-8));
  }
  CHECK(stationary_profile(1.0, 3).c == doctest::Approx(2.2098308983762623).epsilon(1e-12));
  CHECK(stationary_profile_eval(1.0, 3, 5.0) == 0.0);

  auto grid = make_grid(3, 512, 4.0);
  auto disc = stationary_profile_on_grid(1.0, grid);
  CHECK(mass(disc) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(entropy_I(disc, 4.0 / 3) < 1e-3);
}

TEST_CASE("similarity variables reproduce the Barenblatt solution") {
  const double M = 2.0;
  const int d = 3;
  auto th = stationary_profile(M, d);
  auto bb = barenblatt_profile(M, d);
  SimilarityFrame frame{RescaleMode::nonlinear, d, 0.0};
  for (double t : {0.0, 1.0, 5.0, 40.0}) {
    double s = frame.stretch(t);
    CHECK(s == doctest::Approx(d * t + 1));
    for (double x : {0.0, 0.3, 1.0, 2.5}) {
      double u = th(x * std::pow(s, -1.0 / d)) / s;
      CHECK(u == doctest::Approx(bb(t + 1.0 / d, x)).epsilon(1e-12).scale(1e-14));
    }
  }
  // On a grid the correspondence holds up to resampling error.
  auto xi = make_grid(d, 400, 4.0);
  auto xg = make_grid(d, 400, 12.0);
  double prev = 1e300;
  for (int n : {200, 400}) {
    xi = make_grid(d, n, 4.0);
    xg = make_grid(d, n, 12.0);
    DensityField theta = sample_cell_averages(xi, th);
    double tau = frame.tau_of(5.0);
    auto phys = from_similarity(theta, tau, frame, xg);
    CHECK(std::abs(phys.t - 5.0) < 1e-12);
    DensityField ref = sample_cell_averages(xg, [&](double x) { return bb(5.0 + 1.0 / d, x); });
    double err = l1_distance(phys.u, ref);
    CHECK(err < 1e-3);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("heat semigroup") {
  auto grid = make_grid(2, 400, 12.0);
  auto f = [](double r) { return std::exp(-r * r / 2) / (2 * pi); };
  auto same = heat_semigroup(f, 0.0, grid);
  for (int i = 0; i < grid->size(); i += 37) CHECK(same[i] == doctest::Approx(f(grid->center(i))).epsilon(1e-14));

  const double s = 0.5;
  auto gauss = [](double var, double r) { return std::exp(-r * r / (2 * var)) / (2 * pi * var); };
  for (double t : {0.1, 1.0, 10.0}) {
    auto big = make_grid(2, 800, 40.0);
    auto v = heat_semigroup([&](double r) { return gauss(2 * s, r); }, t, big, Sampling::cell_averages);
    double mass = 0.0;
    for (int i = 0; i < big->size(); ++i) mass += v[i] * big->volume(i);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
    auto w = heat_semigroup([&](double r) { return gauss(2 * s, r); }, t, grid);
    for (int i = 0; i < grid->size(); i += 13)
      CHECK(std::abs(w[i] - gauss(2 * (s + t), grid->center(i))) < 1e-7 * gauss(2 * (s + t), 0.0));
  }
  CHECK_THROWS_AS(heat_semigroup(f, -1.0, grid), Error);
}

TEST_CASE("Fokker-Planck semigroup") {
  auto grid = make_grid(2, 300, 12.0);
  auto G = [](double r) { return std::exp(-r * r / 4) / (4 * pi); };
  auto f = [](double r) { return std::exp(-r * r) * (1 + r); };
  auto id = fokker_planck_semigroup(f, 0.0, grid);
  for (int i = 0; i < grid->size(); i += 29) CHECK(id[i] == doctest::Approx(f(grid->center(i))).epsilon(1e-14));
  for (double tau : {0.3, 2.0, 7.0}) {
    auto v = fokker_planck_semigroup(G, tau, grid);
    for (int i = 0; i < grid->size(); i += 7) CHECK(std::abs(v[i] - G(grid->center(i))) < 1e-7 * G(0.0));
  }
}

namespace {

double fitted_l2beta_rate(const std::function<double(double)>& dipole_profile) {
  auto grid = make_grid(2, 400, 20.0);
  std::vector<double> taus, norms;
  for (double tau = 1.0; tau <= 5.0 + 1e-12; tau += 0.25) {
    auto h = fokker_planck_semigroup(dipole_profile, tau, grid, Sampling::centers,
                                     std::numeric_limits<double>::infinity(), true);
    for (double& v : h) v = std::abs(v);
    taus.push_back(tau);
    norms.push_back(std::log(weighted_l2_norm(DensityField(grid, h), 2.5)));
  }
  return -numerics::least_squares(taus, norms).slope;
}

}  // namespace

TEST_CASE("Fokker-Planck semigroup: zero-mass decay in L^2(beta)") {
  // G(x - e_1) - G(x + e_1) with G the fixed point; its cos(theta) harmonic.
  double rate = fitted_l2beta_rate(
      [](double r) { return std::exp(-(r * r + 1.0) / 4.0) * std::cyl_bessel_i(1.0, r / 2.0) / pi; });
  CHECK(rate == doctest::Approx(0.5121753223531641).epsilon(1e-6));
  CHECK(std::abs(rate - 0.5) <= 0.05);
}

TEST_CASE("Fokker-Planck semigroup: dipole narrower than the fixed point") {
  // x_1 e^{-|x|^2} widens toward the fixed-point width, slowing the fitted rate on [1, 5].
  double rate = fitted_l2beta_rate([](double r) { return r * std::exp(-r * r); });
  CHECK(rate == doctest::Approx(0.41853338064022383).epsilon(1e-6));
}

TEST_CASE("gradient commutes with the Fokker-Planck semigroup") {
  // grad S(tau) w = e^{tau/2} S(tau) grad w for radial w, in the dipole representation.
  auto w = [](double r) { return std::exp(-r * r) * (2 + std::cos(r)); };
  auto dw = [](double r) { return std::exp(-r * r) * (-2 * r * (2 + std::cos(r)) - std::sin(r)); };
  const double tau = 0.7;
  std::vector<double> errs;
  for (int n : {50, 100, 200}) {
    auto grid = make_grid(3, n, 8.0);
    auto s = fokker_planck_semigroup(w, tau, grid);
    auto sg = fokker_planck_semigroup(dw, tau, grid, Sampling::centers, std::numeric_limits<double>::infinity(), true);
    double h = grid->spacing(), err = 0.0;
    for (int i = 1; i + 1 < n; ++i) {
      double grad = (s[i + 1] - s[i - 1]) / (2 * h);
      err = std::max(err, std::abs(grad - std::exp(tau / 2) * sg[i]));
    }
    errs.push_back(err);
  }
  CHECK(errs[2] < 1e-3);
  CHECK(std::log2(errs[0] / errs[1]) > 1.8);
  CHECK(std::log2(errs[1] / errs[2]) > 1.8);
}

TEST_CASE("semigroup composition") {
  auto fine = make_grid(3, 1200, 10.0);
  auto w = [](double r) { return std::exp(-r * r) + 0.5 * std::exp(-std::pow(r - 1.5, 2)); };
  DensityField once = fokker_planck_semigroup(DensityField(fine, fokker_planck_semigroup(w, 0.4, fine)), 0.6);
  auto both = fokker_planck_semigroup(w, 1.0, fine);
  double top = *std::max_element(both.begin(), both.end());
  for (int i = 0; i < fine->size(); i += 11) CHECK(std::abs(once[i] - both[i]) < 1e-6 * top);

  DensityField heat_twice = heat_semigroup(DensityField(fine, heat_semigroup(w, 0.3, fine)), 0.2);
  auto heat_once = heat_semigroup(w, 0.5, fine);
  for (int i = 0; i < fine->size(); i += 11) CHECK(std::abs(heat_twice[i] - heat_once[i]) < 1e-6 * heat_once[0]);
}

TEST_CASE("similarity transforms") {
  SimilarityFrame lin{RescaleMode::linear_d2, 2, 3.0};
  CHECK(lin.stretch(1.0) == doctest::Approx(5.0));
  CHECK(lin.tau_of(1.0) == doctest::Approx(std::log(5.0)));
  CHECK(lin.dilation(lin.tau_of(1.0)) == doctest::Approx(std::sqrt(5.0)));
  CHECK(lin.time_of(lin.tau_of(2.5)) == doctest::Approx(2.5));

  auto grid = make_grid(3, 400, 10.0);
  SimilarityFrame frame{RescaleMode::nonlinear, 3, 0.0};
  DensityField u = sample_cell_averages(grid, [](double r) { return std::exp(-r * r / 2); });
  auto sim = to_similarity(u, 2.0, frame, grid);
  CHECK(mass(sim.theta) == doctest::Approx(mass(u)).epsilon(1e-10));
  auto back = from_similarity(sim.theta, sim.tau, frame, grid);
  CHECK(back.t == doctest::Approx(2.0));
  CHECK(l1_distance(back.u, u) / mass(u) < 1e-3);
  CHECK_THROWS_AS(from_similarity(sim.theta, frame.tau0() - 1.0, frame, grid), Error);

  // theta(tau_0) = f for rescaled data with the matching shift.
  const double lambda = 2.0;
  auto wide = make_grid(3, 800, 24.0);
  DensityField f = sample_cell_averages(wide, [](double r) { return r < 2.0 ? std::pow(4 - r * r, 2) : 0.0; });
  auto u0 = rescale_initial(f, lambda, RescaleMode::nonlinear, wide).field;
  SimilarityFrame shifted{RescaleMode::nonlinear, 3, shift_from_lambda(lambda, RescaleMode::nonlinear, 3)};
  auto theta0 = to_similarity(u0, 0.0, shifted, wide);
  CHECK(theta0.tau == doctest::Approx(std::log(lambda)));
  CHECK(l1_distance(theta0.theta, f) / mass(f) < 1e-3);
}

TEST_CASE("shift from lambda") {
  CHECK(shift_from_lambda(1.0, RescaleMode::nonlinear, 3) == 0.0);
  CHECK(shift_from_lambda(1.0, RescaleMode::linear_d2, 2) == 0.0);
  CHECK(shift_from_lambda(2.0, RescaleMode::nonlinear, 3) == doctest::Approx(7.0 / 3.0).epsilon(1e-15));
  CHECK(shift_from_lambda(3.0, RescaleMode::linear_d2, 2) == doctest::Approx(8.0).epsilon(1e-15));
  CHECK_THROWS_AS(shift_from_lambda(0.5, RescaleMode::nonlinear, 3), Error);
}
