#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aggdiff/closed_forms.hpp"
#include "aggdiff/fields.hpp"
#include "aggdiff/kernels.hpp"

namespace aggdiff {

enum class Variables { physical, similarity };

enum class RunStatus { running, completed, blowup_detected, domain_exhausted, step_limit };

std::string to_string(Variables v);
std::string to_string(RunStatus s);

struct BlowupThresholds {
  double peak_factor = 1e3;     // peak >= peak_factor * initial peak
  double dt_floor_ratio = 0.8;  // dt <= dt_floor_ratio * initial dt
  int moment_window = 50;       // steps over which the second moment must decrease
};

struct SolverConfig {
  int dim = 2;
  double m = 1.0;
  std::shared_ptr<const InteractionKernel> kernel;  // null: pure diffusion
  Variables variables = Variables::physical;
  double shift = 0.0;  // similarity time shift T
  int cells = 256;
  double r_max = 10.0;
  double cfl = 0.25;
  double t_end = 1.0;  // physical time
  // Diagnostics every diag_interval of log-time: tau in similarity mode,
  // log(1 + t) in physical mode.
  double diag_interval = 0.05;
  int snapshot_every = 0;  // in diagnostic samples; 0 keeps only the final snapshot
  BlowupThresholds blowup;
  double theta_floor = 1e-12;
  double rebuild_dtau = 0.1;
  double exhaustion_fraction = 1e-6;
  long max_steps = 20'000'000;
  double lp_exponent = 0.0;  // 0 selects 2m/(m-1) for m > 1 and 2 for m = 1
  double beta = 2.5;         // weight of the L^2(beta) norm
  int quadrature_order = 64;

  RescaleMode frame_mode() const { return m == 1.0 ? RescaleMode::linear_d2 : RescaleMode::nonlinear; }
  SimilarityFrame frame() const { return {frame_mode(), dim, shift}; }
  void validate() const;
};

struct DiagnosticSample {
  double t = 0.0;
  double tau = 0.0;
  double mass = 0.0;
  double linf = 0.0;  // physical variables
  double lp = 0.0;
  double l2beta = 0.0;  // of the evolved field (theta in similarity mode)
  double second_moment = 0.0;
  double H = 0.0, I = 0.0, H_rel = 0.0;  // NaN unless m > 1 in similarity mode
  double ref_l1 = 0.0;                   // NaN without a reference
  double dt = 0.0;
  double clipped_mass = 0.0;
};

struct DiagnosticsSeries {
  std::vector<DiagnosticSample> samples;
  RunStatus status = RunStatus::running;
  Variables variables = Variables::physical;
  bool pure_diffusion = true;
  double initial_mass = 0.0;
  double initial_peak = 0.0;
  double initial_dt = 0.0;
  double final_t = 0.0;
  double outflow = 0.0;
  long steps = 0;
  std::string message;
};

// Reference density on the state grid, in the state's variables.
using ReferenceFn = std::function<std::vector<double>(double t, double tau, const GridPtr& grid)>;
using SnapshotFn = std::function<void(const DensityField& field, double t, double tau, int index)>;

struct SolverState {
  DensityField field;
  double t = 0.0;
  double tau = 0.0;
  double clipped_mass = 0.0;
  double outflow = 0.0;
  long steps = 0;
};

class Solver {
 public:
  // u0 lives on the evolved grid: x in physical mode, xi in similarity mode.
  Solver(SolverConfig config, const DensityField& u0);

  const SolverConfig& config() const { return config_; }
  const SolverState& state() const { return state_; }
  const GridPtr& grid() const { return grid_; }

  // Stable step in the evolution variable (t or tau).
  double cfl_dt() const;
  void step(double dt);

  // Face velocities (faces 0..n) used by the current operator, including the
  // similarity drift.
  std::vector<double> face_velocity(std::span<const double> values) const;
  // d(field)/d(evolution time) for the given cell values.
  std::vector<double> rate(std::span<const double> values) const;

  // Face fluxes (per unit area) for cell values u and transport velocities v.
  std::vector<double> face_flux(std::span<const double> u, const std::vector<double>& v) const;

  double physical_peak() const;
  double physical_lp(double p) const;

 private:
  void refresh_operator();
  double stretch() const;

  SolverConfig config_;
  GridPtr grid_;
  SolverState state_;
  std::unique_ptr<RadialConvolutionOperator> op_;
  double op_tau_ = 0.0;
};

DiagnosticsSeries simulate(const SolverConfig& config, const DensityField& u0, const ReferenceFn& reference = {},
                           const SnapshotFn& on_snapshot = {});

// All three blow-up conditions; moments are the trailing second-moment values.
bool detect_blowup(const BlowupThresholds& thresholds, double initial_peak, double peak, double initial_dt, double dt,
                   std::span<const double> trailing_moments);

// max_k |dH_rel/dtau + I| / (1 + I) with centered differences in tau.
double dissipation_residual(const DiagnosticsSeries& series);

}  // namespace aggdiff
