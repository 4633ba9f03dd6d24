#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "aggdiff/closed_forms.hpp"
#include "aggdiff/entropy.hpp"
#include "aggdiff/error.hpp"

using namespace aggdiff;

namespace {

constexpr double kM = 4.0 / 3.0;  // m for d = 3

DensityField normalized(const GridPtr& grid, const std::function<double(double)>& f, double M) {
  DensityField u = sample_centers(grid, f);
  double have = mass(u);
  for (int i = 0; i < u.size(); ++i) u[i] *= M / have;
  return u;
}

DensityField dilated_theta(const GridPtr& grid, double M, double s) {
  auto th = stationary_profile(M, 3);
  return normalized(grid, [&](double r) { return th(r / s); }, M);
}

DensityField random_density(const GridPtr& grid, std::mt19937_64& rng, double M) {
  std::uniform_real_distribution<double> amp(0.2, 2.0), width(0.4, 1.6), center(0.0, 1.5);
  double a1 = amp(rng), w1 = width(rng), c1 = center(rng), a2 = amp(rng), w2 = width(rng), c2 = center(rng);
  return normalized(grid,
                    [&](double r) {
                      return a1 * std::exp(-std::pow((r - c1) / w1, 2)) + a2 * std::exp(-std::pow((r - c2) / w2, 2));
                    },
                    M);
}

}  // namespace

TEST_CASE("entropy of the minimizer") {
  // Pinned from an independent 30-digit quadrature of the closed form.
  const double h_min = 1.8080434623078510;
  CHECK(stationary_entropy(1.0, 3) == doctest::Approx(h_min).epsilon(1e-10));
  double e1 = std::abs(entropy_H(stationary_profile_on_grid(1.0, make_grid(3, 256, 4.0)), kM) - h_min);
  double e2 = std::abs(entropy_H(stationary_profile_on_grid(1.0, make_grid(3, 1024, 4.0)), kM) - h_min);
  CHECK(e2 < 1e-4);
  CHECK(e2 < e1);

  auto grid = make_grid(3, 256, 6.0);
  CHECK(entropy_H(DensityField(grid), kM) == 0.0);
  CHECK(entropy_I(DensityField(grid), kM) == 0.0);
  double h_disc = entropy_H(stationary_profile_on_grid(1.0, grid), kM);
  std::mt19937_64 rng(11);
  for (int k = 0; k < 20; ++k) CHECK(entropy_H(random_density(grid, rng, 1.0), kM) >= h_disc);
  for (double s : {0.7, 0.95, 1.05, 1.4}) CHECK(entropy_H(dilated_theta(grid, 1.0, s), kM) > h_disc);
}

TEST_CASE("entropy production") {
  auto th = stationary_profile(1.0, 3);
  double prev = 1e300;
  for (int n : {128, 256, 512}) {
    auto grid = make_grid(3, n, 4.0);
    CHECK(entropy_I(stationary_profile_on_grid(1.0, grid), kM) < 1e-8);
    // cell averages of theta_M carry an O(h) error at the support edge
    double i0 = entropy_I(sample_cell_averages(grid, th), kM);
    CHECK(i0 < 0.05);
    CHECK(i0 < prev);
    prev = i0;
  }
  auto grid = make_grid(3, 256, 6.0);
  CHECK(entropy_I(dilated_theta(grid, 1.0, 1.1), kM) > 0.01);
}

TEST_CASE("relative entropy") {
  auto grid = make_grid(3, 256, 6.0);
  CHECK(std::abs(relative_entropy(stationary_profile_on_grid(1.0, grid), 1.0, 3)) < 1e-12);
  CHECK(relative_entropy(dilated_theta(grid, 1.0, 1.1), 1.0, 3) > 0.0);
  CHECK(relative_entropy(dilated_theta(grid, 1.0, 0.9), 1.0, 3) > 0.0);
  try {
    relative_entropy(dilated_theta(grid, 1.0, 1.1), 2.0, 3);
    FAIL("expected mass_mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::mass_mismatch);
  }
}

TEST_CASE("log-Sobolev inequality") {
  auto grid = make_grid(3, 256, 6.0);
  auto at_min = log_sobolev_slack(stationary_profile_on_grid(1.0, grid), 3);
  CHECK(std::abs(at_min.h_rel) < 1e-12);
  CHECK(std::abs(at_min.slack) < 1e-3);

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> masses(0.2, 5.0);
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 100; ++k) {
    auto audit = log_sobolev_slack(random_density(grid, rng, masses(rng)), 3);
    worst = std::min(worst, audit.slack);
  }
  CHECK(worst >= -1e-4);

  for (double s = 0.5; s <= 2.0 + 1e-12; s += 0.1) {
    auto audit = log_sobolev_slack(dilated_theta(grid, 1.0, s), 3);
    CHECK(audit.slack >= -1e-4);
    if (std::abs(s - 1.0) < 1e-9) CHECK(std::abs(audit.slack) < 1e-3);
  }
}

TEST_CASE("Csiszar-Kullback ratio") {
  auto grid = make_grid(3, 512, 6.0);
  CHECK(csiszar_kullback_ratio(stationary_profile_on_grid(1.0, grid), 1.0, 3).indeterminate);
  double top = 0.0;
  for (double eps : {0.2, 0.1, 0.05, 0.02, 0.01, 0.005}) {
    auto ck = csiszar_kullback_ratio(dilated_theta(grid, 1.0, 1.0 + eps), 1.0, 3);
    REQUIRE_FALSE(ck.indeterminate);
    CHECK(std::isfinite(ck.ratio));
    top = std::max(top, ck.ratio);
  }
  CHECK(top < 10.0);
  auto bump = normalized(grid, [](double r) { return std::exp(-std::pow((r - 3.0) / 0.3, 2)); }, 1.0);
  auto ck = csiszar_kullback_ratio(bump, 1.0, 3);
  CHECK(std::isfinite(ck.ratio));
  CHECK(ck.ratio > 0.0);
}

TEST_CASE("equi-integrability bound") {
  auto grid = make_grid(3, 256, 6.0);
  auto theta = stationary_profile_on_grid(1.0, grid);
  double top = lp_norm(theta, std::numeric_limits<double>::infinity());
  auto above = equi_integrability_bound(theta, 1.5 * top, kM);
  CHECK(above.truncated_l1 == 0.0);
  CHECK(above.bound > 0.0);
  auto half = equi_integrability_bound(theta, stationary_profile_eval(1.0, 3, 0.0) / 2, kM);
  CHECK(half.truncated_l1 > 0.0);
  CHECK(half.truncated_l1 <= half.bound);

  std::mt19937_64 rng(5);
  int holds = 0, total = 0;
  for (int k = 0; k < 50; ++k) {
    auto u = random_density(grid, rng, 1.0);
    double peak = lp_norm(u, std::numeric_limits<double>::infinity());
    for (double frac : {0.01, 0.1, 0.3, 0.6, 0.9, 1.2}) {
      auto b = equi_integrability_bound(u, frac * peak, kM);
      ++total;
      holds += b.truncated_l1 <= b.bound;
    }
  }
  CHECK(holds == total);
  CHECK_THROWS_AS(equi_integrability_bound(theta, 0.0, kM), Error);
}

TEST_CASE("integrability exponents") {
  auto e1 = exponents(1.0, kM, 3);
  CHECK(e1.p == doctest::Approx(2 * kM / (kM - 1)).epsilon(1e-14));
  CHECK(e1.p == doctest::Approx(8.0));
  CHECK(e1.epsilon == doctest::Approx(1.0));
  auto e2 = exponents(1.2, kM, 3);
  CHECK(1.0 / e2.p == doctest::Approx(1.0 + 1.0 / 8 - 5.0 / 6).epsilon(1e-14));
  CHECK(e2.p == doctest::Approx(24.0 / 7));
  CHECK(e2.epsilon == doctest::Approx(0.5));
  CHECK_THROWS_AS(exponents(1.5, kM, 3), Error);
  CHECK_THROWS_AS(exponents(0.9, kM, 3), Error);
}

TEST_CASE("entropy report") {
  auto grid = make_grid(3, 128, 5.0);
  auto r = entropy_report(dilated_theta(grid, 2.0, 1.2), 2.0);
  CHECK(r.H_rel > 0.0);
  CHECK(r.I > 0.0);
  CHECK(r.dim == 3);
  CHECK(r.cells == 128);
  CHECK(r.m == doctest::Approx(kM));
}
