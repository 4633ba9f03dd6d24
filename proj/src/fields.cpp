#include "aggdiff/fields.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "aggdiff/error.hpp"
#include "aggdiff/numerics.hpp"

namespace aggdiff {

RadialGrid::RadialGrid(int dim, int cells, double r_max) : dim_(dim), r_max_(r_max) {
  require(dim >= 2, ErrorCode::invalid_argument, "grid dimension must be >= 2");
  require(cells >= 2, ErrorCode::invalid_argument, "grid needs at least 2 cells");
  require(r_max > 0.0 && std::isfinite(r_max), ErrorCode::invalid_argument, "grid radius must be positive");
  h_ = r_max / cells;
  const double area = numerics::sphere_area(dim);
  centers_.resize(cells);
  volumes_.resize(cells);
  centroids_.resize(cells);
  for (int i = 0; i < cells; ++i) {
    double a = i * h_, b = (i + 1) * h_;
    centers_[i] = (i + 0.5) * h_;
    double ad = std::pow(a, dim), bd = std::pow(b, dim);
    volumes_[i] = area * (bd - ad) / dim;
    centroids_[i] = dim * (std::pow(b, dim + 1) - std::pow(a, dim + 1)) / ((dim + 1) * (bd - ad));
  }
}

double RadialGrid::face_area(int i) const { return numerics::sphere_area(dim_) * std::pow(face(i), dim_ - 1); }

GridPtr make_grid(int dim, int cells, double r_max) { return std::make_shared<const RadialGrid>(dim, cells, r_max); }

DensityField::DensityField(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), 0.0) {}

DensityField::DensityField(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  require(static_cast<int>(values_.size()) == grid_->size(), ErrorCode::grid_mismatch,
          "density values do not match the grid size");
  for (double v : values_)
    require(v >= 0.0 && std::isfinite(v), ErrorCode::invalid_argument, "density values must be finite and >= 0");
}

DensityField sample_cell_averages(const GridPtr& grid, const std::function<double(double)>& f) {
  static const double nodes[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  static const double weights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const int d = grid->dim();
  const double area = numerics::sphere_area(d);
  DensityField out(grid);
  for (int i = 0; i < grid->size(); ++i) {
    double a = grid->face(i), b = grid->face(i + 1);
    double mid = 0.5 * (a + b), half = 0.5 * (b - a), acc = 0.0;
    for (int k = 0; k < 3; ++k) {
      double r = mid + half * nodes[k];
      acc += weights[k] * std::pow(r, d - 1) * f(r);
    }
    out[i] = std::max(0.0, acc * half * area / grid->volume(i));
  }
  return out;
}

DensityField sample_centers(const GridPtr& grid, const std::function<double(double)>& f) {
  DensityField out(grid);
  for (int i = 0; i < grid->size(); ++i) out[i] = std::max(0.0, f(grid->center(i)));
  return out;
}

double lp_norm(const DensityField& u, double p) {
  require(p >= 1.0, ErrorCode::invalid_argument, "lp_norm requires p >= 1");
  if (std::isinf(p)) {
    double peak = 0.0;
    for (double v : u.values()) peak = std::max(peak, v);
    return peak;
  }
  const auto& g = u.grid();
  double acc = 0.0;
  for (int i = 0; i < u.size(); ++i) acc += g.volume(i) * std::pow(u[i], p);
  return std::pow(acc, 1.0 / p);
}

double weighted_l2_norm(const DensityField& u, double beta) {
  const auto& g = u.grid();
  double acc = 0.0;
  for (int i = 0; i < u.size(); ++i) {
    double r = g.center(i);
    acc += g.volume(i) * std::pow(1.0 + r * r, 2.0 * beta) * u[i] * u[i];
  }
  return std::sqrt(acc);
}

double mass(const DensityField& u) {
  const auto& g = u.grid();
  double acc = 0.0;
  for (int i = 0; i < u.size(); ++i) acc += g.volume(i) * u[i];
  return acc;
}

double second_moment(const DensityField& u) {
  // Exact second moment of the piecewise-constant density: sum of u_i * int_cell r^2.
  const auto& g = u.grid();
  const int d = g.dim();
  const double area = numerics::sphere_area(d);
  double acc = 0.0;
  for (int i = 0; i < u.size(); ++i) {
    double a = g.face(i), b = g.face(i + 1);
    acc += u[i] * area * (std::pow(b, d + 2) - std::pow(a, d + 2)) / (d + 2);
  }
  return acc;
}

double l1_distance(const DensityField& u, const DensityField& v) {
  require(u.grid() == v.grid(), ErrorCode::grid_mismatch, "l1_distance on different grids");
  const auto& g = u.grid();
  double acc = 0.0;
  for (int i = 0; i < u.size(); ++i) acc += g.volume(i) * std::abs(u[i] - v[i]);
  return acc;
}

DensityField truncated_part(const DensityField& theta, double level) {
  require(level >= 0.0, ErrorCode::invalid_argument, "truncation level must be >= 0");
  DensityField out(theta.grid_ptr());
  for (int i = 0; i < theta.size(); ++i) out[i] = std::max(theta[i] - level, 0.0);
  return out;
}

namespace {

double minmod(double a, double b) {
  if (a * b <= 0.0) return 0.0;
  return std::abs(a) < std::abs(b) ? a : b;
}

}  // namespace

DensityField remap_dilated(const DensityField& u, double dilation, const GridPtr& target, double* clipped_mass) {
  require(dilation > 0.0, ErrorCode::invalid_argument, "dilation must be positive");
  const auto& src = u.grid();
  require(src.dim() == target->dim(), ErrorCode::grid_mismatch, "remap between different dimensions");
  const int d = src.dim();
  const int n = src.size();
  const double area = numerics::sphere_area(d);
  const auto& rule = numerics::gauss_legendre(4);

  std::vector<double> slope(n, 0.0);
  for (int j = 0; j < n; ++j) {
    double left = j == 0 ? 0.0 : (u[j] - u[j - 1]) / (src.centroid(j) - src.centroid(j - 1));
    double right = j == n - 1 ? (0.0 - u[j]) / src.spacing() : (u[j + 1] - u[j]) / (src.centroid(j + 1) - src.centroid(j));
    slope[j] = j == 0 ? 0.0 : minmod(left, right);
  }

  std::vector<double> target_mass(target->size(), 0.0);
  double lost = 0.0;
  const double ht = target->spacing();
  for (int j = 0; j < n; ++j) {
    if (u[j] == 0.0 && slope[j] == 0.0) continue;
    // Mass of the source reconstruction over source radii [lo, hi].
    auto piece_mass = [&](double lo, double hi) {
      double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo), acc = 0.0;
      for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        double rho = mid + half * rule.nodes[k];
        double val = u[j] + slope[j] * (rho - src.centroid(j));
        acc += rule.weights[k] * std::pow(rho, d - 1) * val;
      }
      return std::max(0.0, acc * half * area);
    };
    double a = src.face(j), b = src.face(j + 1);
    double xa = a * dilation, xb = b * dilation;
    int k0 = static_cast<int>(std::floor(xa / ht));
    for (int k = std::max(k0, 0); ; ++k) {
      double lo = std::max(xa, k * ht), hi = std::min(xb, (k + 1) * ht);
      if (lo >= xb) break;
      if (hi <= lo) continue;
      double m = piece_mass(lo / dilation, hi / dilation);
      if (k < target->size())
        target_mass[k] += m;
      else
        lost += m;
    }
  }
  DensityField out(target);
  for (int k = 0; k < target->size(); ++k) out[k] = target_mass[k] / target->volume(k);
  if (clipped_mass) *clipped_mass = lost;
  return out;
}

RescaledData rescale_initial(const DensityField& f, double lambda, RescaleMode mode, const GridPtr& target) {
  require(lambda >= 1.0, ErrorCode::invalid_argument, "rescaling requires lambda >= 1");
  if (mode == RescaleMode::linear_d2)
    require(f.grid().dim() == 2, ErrorCode::invalid_argument, "linear rescaling is defined for d = 2");
  if (lambda == 1.0 && f.grid() == *target) return {DensityField(target, {f.values().begin(), f.values().end()}), 0.0, {}};
  RescaledData out{remap_dilated(f, lambda, target, nullptr), 0.0, {}};
  double total = mass(f);
  double kept = mass(out.field);
  out.clipped_mass = std::max(0.0, total - kept);
  if (out.clipped_mass > 0.0) {
    std::ostringstream msg;
    msg << "rescaled data clipped at r_max = " << target->r_max() << ": lost mass " << out.clipped_mass;
    out.warning = msg.str();
  }
  if (total > 0.0 && out.clipped_mass > 1e-6 * total)
    fail(ErrorCode::domain_too_small, "domain too small for rescaled data: " + out.warning);
  return out;
}

void write_snapshot_csv(const DensityField& u, const std::filesystem::path& path) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::io, "cannot open " + path.string() + " for writing");
  os << "r_center,u\n";
  char buf[64];
  for (int i = 0; i < u.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", u.grid().center(i), u[i]);
    os << buf;
  }
  require(static_cast<bool>(os), ErrorCode::io, "write failed for " + path.string());
}

DensityField read_snapshot_csv(const std::filesystem::path& path, int dim) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::io, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::io, path.string() + ": empty file");
  std::vector<double> r, u;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto comma = line.find(',');
    require(comma != std::string::npos, ErrorCode::io, path.string() + ":" + std::to_string(lineno) + ": expected r,u");
    try {
      r.push_back(std::stod(line.substr(0, comma)));
      u.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      fail(ErrorCode::io, path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  require(r.size() >= 2, ErrorCode::io, path.string() + ": need at least two rows");
  double h = 2.0 * r[0];
  for (std::size_t i = 0; i < r.size(); ++i)
    require(std::abs(r[i] - (i + 0.5) * h) <= 1e-9 * (1.0 + r[i]), ErrorCode::io,
            path.string() + ": centers are not a uniform cell-centered mesh");
  auto grid = make_grid(dim, static_cast<int>(r.size()), h * r.size());
  return DensityField(grid, std::move(u));
}

}  // namespace aggdiff
