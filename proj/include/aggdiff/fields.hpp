#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aggdiff {

// Uniform cell-centered mesh on the ball of radius r_max in R^d.
class RadialGrid {
 public:
  RadialGrid(int dim, int cells, double r_max);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(centers_.size()); }
  double r_max() const { return r_max_; }
  double spacing() const { return h_; }

  // face(i) is the inner face of cell i; face(size()) == r_max.
  double face(int i) const { return i * h_; }
  double center(int i) const { return centers_[i]; }
  double volume(int i) const { return volumes_[i]; }
  double face_area(int i) const;  // area of the sphere through face(i)
  // Volume-weighted mean radius of cell i.
  double centroid(int i) const { return centroids_[i]; }

  std::span<const double> centers() const { return centers_; }
  std::span<const double> volumes() const { return volumes_; }

  bool operator==(const RadialGrid& other) const {
    return dim_ == other.dim_ && size() == other.size() && r_max_ == other.r_max_;
  }

 private:
  int dim_;
  double r_max_;
  double h_;
  std::vector<double> centers_, volumes_, centroids_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

GridPtr make_grid(int dim, int cells, double r_max);

// Cell averages of a nonnegative radial density on a shared grid.
class DensityField {
 public:
  explicit DensityField(GridPtr grid);
  DensityField(GridPtr grid, std::vector<double> values);

  const RadialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  int size() const { return static_cast<int>(values_.size()); }

  double operator[](int i) const { return values_[i]; }
  double& operator[](int i) { return values_[i]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

// Cell averages of a radial function f(r) using a 3-point Gauss rule per cell,
// weighted by r^{d-1}.
DensityField sample_cell_averages(const GridPtr& grid, const std::function<double(double)>& f);

// Point values at cell centers.
DensityField sample_centers(const GridPtr& grid, const std::function<double(double)>& f);

double lp_norm(const DensityField& u, double p);  // p = infinity allowed
double weighted_l2_norm(const DensityField& u, double beta);
double mass(const DensityField& u);
double second_moment(const DensityField& u);
double l1_distance(const DensityField& u, const DensityField& v);

DensityField truncated_part(const DensityField& theta, double level);

// Conservative remap of u onto `target` after the spatial dilation
// x -> dilation * x with amplitude preserving mass: result(x) = dilation^{-d} u(x / dilation).
// Second order (limited linear reconstruction); mass outside target is dropped
// and reported through `clipped_mass` when non-null.
DensityField remap_dilated(const DensityField& u, double dilation, const GridPtr& target,
                           double* clipped_mass = nullptr);

enum class RescaleMode { linear_d2, nonlinear };

struct RescaledData {
  DensityField field;
  double clipped_mass = 0.0;
  std::string warning;
};

// u0(x) = lambda^{-d} f(x / lambda) sampled on `target`.
RescaledData rescale_initial(const DensityField& f, double lambda, RescaleMode mode, const GridPtr& target);

// CSV snapshots: header "r_center,u" followed by one row per cell.
void write_snapshot_csv(const DensityField& u, const std::filesystem::path& path);
DensityField read_snapshot_csv(const std::filesystem::path& path, int dim);

}  // namespace aggdiff
