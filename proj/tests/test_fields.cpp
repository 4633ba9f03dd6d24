#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>

#include "aggdiff/closed_forms.hpp"
#include "aggdiff/error.hpp"
#include "aggdiff/fields.hpp"

using namespace aggdiff;
using std::numbers::pi;

namespace {

DensityField random_field(const GridPtr& grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> amp(0.1, 3.0), width(0.2, 1.5), center(0.0, 2.0);
  double a1 = amp(rng), w1 = width(rng), c1 = center(rng);
  double a2 = amp(rng), w2 = width(rng), c2 = center(rng);
  return sample_centers(grid, [&](double r) {
    return a1 * std::exp(-std::pow((r - c1) / w1, 2)) + a2 * std::exp(-std::pow((r - c2) / w2, 2));
  });
}

}  // namespace

TEST_CASE("grid geometry") {
  auto g = make_grid(3, 10, 2.0);
  CHECK(g->spacing() == doctest::Approx(0.2));
  double vol = 0.0;
  for (double v : g->volumes()) vol += v;
  CHECK(vol == doctest::Approx(4.0 / 3.0 * pi * 8.0).epsilon(1e-14));
  CHECK(g->face_area(10) == doctest::Approx(4 * pi * 4.0));
  CHECK_THROWS_AS(make_grid(1, 10, 1.0), Error);
  CHECK_THROWS_AS(make_grid(2, 0, 1.0), Error);
  CHECK_THROWS_AS(DensityField(g, std::vector<double>(10, -1.0)), Error);
  CHECK_THROWS_AS(DensityField(g, std::vector<double>(9, 1.0)), Error);
}

TEST_CASE("L^p norms") {
  auto g = make_grid(3, 300, 3.0);
  DensityField zero(g);
  CHECK(lp_norm(zero, 1.0) == 0.0);
  CHECK(lp_norm(zero, std::numeric_limits<double>::infinity()) == 0.0);
  CHECK(mass(zero) == 0.0);
  CHECK(second_moment(zero) == 0.0);

  DensityField ball = sample_cell_averages(g, [](double r) { return r < 1.0 ? 1.0 : 0.0; });
  CHECK(lp_norm(ball, 1.0) == doctest::Approx(4.0 * pi / 3.0).epsilon(1e-10));
  CHECK(lp_norm(ball, std::numeric_limits<double>::infinity()) == doctest::Approx(1.0));
  CHECK_THROWS_AS(lp_norm(ball, 0.5), Error);

  auto fine = make_grid(3, 2048, 3.0);
  auto bb = barenblatt_profile(1.0, 3);
  DensityField u = sample_cell_averages(fine, [&](double r) { return bb(1.0, r); });
  CHECK(lp_norm(u, 1.0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("weighted L^2 norm") {
  auto g = make_grid(2, 400, 4.0);
  DensityField ball = sample_cell_averages(g, [](double r) { return r < 1.0 ? 1.0 : 0.0; });
  CHECK(weighted_l2_norm(ball, 0.0) == doctest::Approx(lp_norm(ball, 2.0)).epsilon(1e-14));
  CHECK(weighted_l2_norm(ball, 1.0) == doctest::Approx(std::sqrt(7.0 * pi / 3.0)).epsilon(1e-4));

  // Spreading at fixed mass raises the moment-weighted norm.
  auto wide = make_grid(3, 800, 40.0);
  DensityField f = sample_centers(wide, [](double r) { return r < 1.0 ? std::pow(1 - r * r, 2) : 0.0; });
  double prev = 0.0;
  for (double lambda : {1.0, 2.0, 4.0}) {
    double w = weighted_l2_norm(rescale_initial(f, lambda, RescaleMode::nonlinear, wide).field, 3.0);
    CHECK(w > prev);
    prev = w;
  }
}

TEST_CASE("mass and second moment of a Gaussian") {
  const double M = 2.5, t = 0.7;
  auto g = make_grid(2, 1000, 12.0);
  DensityField u = sample_cell_averages(g, [&](double r) { return M / (4 * pi * t) * std::exp(-r * r / (4 * t)); });
  CHECK(mass(u) == doctest::Approx(M).epsilon(1e-10));
  CHECK(second_moment(u) == doctest::Approx(4 * t * M).epsilon(1e-4));
  auto bb = barenblatt_profile(M, 3);
  auto g3 = make_grid(3, 1000, 8.0);
  for (double tt : {1.0, 10.0})
    CHECK(mass(sample_cell_averages(g3, [&](double r) { return bb(tt, r); })) == doctest::Approx(M).epsilon(1e-8));
}

TEST_CASE("rescaled initial data") {
  auto g = make_grid(3, 1200, 60.0);
  DensityField f = sample_cell_averages(g, [](double r) { return std::exp(-r * r / 2); });
  auto same = rescale_initial(f, 1.0, RescaleMode::nonlinear, g);
  for (int i = 0; i < g->size(); ++i) CHECK(same.field[i] == f[i]);
  double inf = std::numeric_limits<double>::infinity();
  for (double lambda : {2.0, 8.0}) {
    auto u0 = rescale_initial(f, lambda, RescaleMode::nonlinear, g);
    CHECK(mass(u0.field) == doctest::Approx(mass(f)).epsilon(1e-6));
    CHECK(lp_norm(u0.field, inf) == doctest::Approx(std::pow(lambda, -3.0) * lp_norm(f, inf)).epsilon(1e-4));
    CHECK(u0.clipped_mass < 1e-8 * mass(f));
  }
  try {
    rescale_initial(f, 20.0, RescaleMode::nonlinear, g);
    FAIL("expected domain_too_small");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::domain_too_small);
  }
  CHECK_THROWS_AS(rescale_initial(f, 0.5, RescaleMode::nonlinear, g), Error);
}

TEST_CASE("truncation and the slicing inequality") {
  auto g = make_grid(3, 200, 5.0);
  std::mt19937_64 rng(7);
  DensityField theta = random_field(g, rng);
  auto t0 = truncated_part(theta, 0.0);
  for (int i = 0; i < g->size(); ++i) CHECK(t0[i] == theta[i]);
  double top = lp_norm(theta, std::numeric_limits<double>::infinity());
  CHECK(mass(truncated_part(theta, top)) == 0.0);
  CHECK_THROWS_AS(truncated_part(theta, -1.0), Error);

  std::uniform_real_distribution<double> pick(1.1, 6.0), frac(0.0, 1.0);
  int checked = 0;
  for (int sample = 0; sample < 100; ++sample) {
    DensityField u = random_field(g, rng);
    double p = pick(rng);
    double k = frac(rng) * lp_norm(u, std::numeric_limits<double>::infinity());
    double lhs = std::pow(lp_norm(u, p), p);
    double rhs = std::pow(2.0, p - 1) * (std::pow(lp_norm(truncated_part(u, k), p), p) + std::pow(k, p - 1) * mass(u));
    CHECK(lhs <= rhs * (1 + 1e-12));
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("dilation remap") {
  auto g = make_grid(3, 400, 8.0);
  DensityField u = sample_cell_averages(g, [](double r) { return std::exp(-r * r); });
  double clipped = -1.0;
  DensityField v = remap_dilated(u, 1.5, g, &clipped);
  CHECK(mass(v) == doctest::Approx(mass(u)).epsilon(1e-8));
  CHECK(clipped < 1e-8);
  // v(x) = 1.5^{-3} u(x / 1.5)
  CHECK(v[0] == doctest::Approx(std::pow(1.5, -3.0) * u[0]).epsilon(1e-3));
}

TEST_CASE("snapshot CSV round trip") {
  auto g = make_grid(2, 37, 3.0);
  std::mt19937_64 rng(3);
  DensityField u = random_field(g, rng);
  auto path = std::filesystem::temp_directory_path() / "aggdiff_fields_roundtrip.csv";
  write_snapshot_csv(u, path);
  DensityField back = read_snapshot_csv(path, 2);
  REQUIRE(back.size() == u.size());
  CHECK(back.grid() == u.grid());
  for (int i = 0; i < u.size(); ++i) CHECK(back[i] == u[i]);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_snapshot_csv(path, 2), Error);
}
