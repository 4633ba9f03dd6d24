#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aggdiff/fields.hpp"
#include "aggdiff/numerics.hpp"

namespace aggdiff {

enum class KernelFamily { newtonian, bessel, gaussian, power_decay, tabulated };

std::string to_string(KernelFamily family);

// Radial interaction potential K(x) = k(|x|). Every built-in family is stored
// with k' <= 0, so the drift grad(K * u) points toward the mass (attraction).
class InteractionKernel {
 public:
  static InteractionKernel newtonian(int dim);
  static InteractionKernel bessel(int dim, double alpha);
  static InteractionKernel gaussian(int dim, double sigma);
  // k'(r) = -r / (r0^2 + r^2)^{(gamma + 1) / 2}
  static InteractionKernel power_decay(int dim, double gamma, double r0);
  static InteractionKernel tabulated(int dim, std::vector<double> r, std::vector<double> k_prime);

  KernelFamily family() const { return family_; }
  int dim() const { return dim_; }
  double alpha() const { return p1_; }
  double sigma() const { return p1_; }
  double gamma() const { return p1_; }
  double core_radius() const { return p2_; }

  // k'(r). Throws on r <= 0 for singular families and outside the sample
  // range for tabulated kernels.
  double gradient(double r) const;
  // k(r); tabulated kernels have no potential and throw.
  double potential(double r) const;

  // Decay class: |grad K| <~ r^{-gamma}. Infinity for gaussian and bessel.
  double decay_exponent() const;
  bool singular_at_origin() const;
  // Length below which the profile of k' changes shape (zero for newtonian).
  double length_scale() const;
  // Beyond length_scale() * cutoff_factor() the gradient is negligible
  // (infinite for algebraically decaying families).
  double cutoff_factor() const;

  // k' used inside convolutions: tabulated kernels are extended linearly to
  // zero below their first sample and by zero beyond the last.
  double gradient_extended(double r) const;

  std::string describe() const;

 private:
  InteractionKernel(KernelFamily family, int dim, double p1, double p2);
  double bessel_gradient(double r) const;

  KernelFamily family_;
  int dim_;
  double p1_ = 0.0, p2_ = 0.0;
  std::shared_ptr<const numerics::CubicSpline> table_;
  // Log-spaced table of r^{d-1} k'(r) for the bessel family.
  std::shared_ptr<const std::vector<double>> bessel_table_;
  double table_log_min_ = 0.0, table_log_step_ = 0.0;
};

struct LqNorm {
  bool divergent = false;
  double value = std::numeric_limits<double>::quiet_NaN();
};

// sphere_area * int_0^inf |k'(r)|^q r^{d-1} dr, or DIVERGENT.
LqNorm lq_gradient_norm(const InteractionKernel& kernel, double q);

// True when ||grad K||_q is finite for some q in [1, d/(d-1)).
bool has_subcritical_lq_norm(const InteractionKernel& kernel, double* witness_q = nullptr);

struct AdmissibilityReport {
  bool kn_ok = false;
  bool mn_ok = false;
  bool bd_ok = false;
  double delta = 0.0;
  double bd_sup = 0.0;
  std::string details;
};

struct AdmissibilityOptions {
  double delta = 0.0;  // 0 selects min(1, r_max / 10)
  double bd_bound = 100.0;
};

AdmissibilityReport admissibility_probe(const InteractionKernel& kernel, double r_max, int n_samples,
                                        const AdmissibilityOptions& options = {});

struct ConvolutionOptions {
  int quadrature_order = 64;
  // Kernel dilation: the operator uses scale^{d-1} k'(scale * r), which is the
  // similarity-variable form of the attraction term.
  double scale = 1.0;
  // Build the quadrature matrix even for the newtonian family.
  bool force_matrix = false;
  std::size_t max_entries = std::size_t{1} << 26;
};

// Maps cell densities to the radial component of (grad K * u) at cell
// centers and at interior faces. Immutable after construction.
class RadialConvolutionOperator {
 public:
  RadialConvolutionOperator(std::shared_ptr<const InteractionKernel> kernel, GridPtr grid,
                            const ConvolutionOptions& options = {});

  const RadialGrid& grid() const { return *grid_; }
  const InteractionKernel& kernel() const { return *kernel_; }
  double scale() const { return options_.scale; }
  bool uses_shell_theorem() const { return shell_theorem_; }
  int quadrature_order() const { return options_.quadrature_order; }

  // Radial velocity at the cell centers.
  std::vector<double> at_centers(const DensityField& u) const;
  // Radial velocity at faces 0..n (faces 0 and n included; face 0 is zero).
  std::vector<double> at_faces(const DensityField& u) const;

  // Row access for verification: weight of cell j in the velocity at center i.
  double center_weight(int i, int j) const;

 private:
  std::vector<double> shell_theorem(const DensityField& u, bool faces) const;
  void check(const DensityField& u) const;

  std::shared_ptr<const InteractionKernel> kernel_;
  GridPtr grid_;
  ConvolutionOptions options_;
  bool shell_theorem_ = false;
  std::vector<double> center_matrix_;  // n x n, row-major
  std::vector<double> face_matrix_;    // (n + 1) x n
};

// Radial component at radius r of (grad K * u) for a unit-density shell
// occupying radii [a, b], with the dilated kernel scale^{d-1} k'(scale r).
double shell_field(const InteractionKernel& kernel, double scale, double r, double a, double b, int order);

std::vector<double> attraction_velocity(const RadialConvolutionOperator& op, const DensityField& u);

}  // namespace aggdiff
