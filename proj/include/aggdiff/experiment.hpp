#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aggdiff/config.hpp"
#include "aggdiff/entropy.hpp"
#include "aggdiff/solver.hpp"

namespace aggdiff {

enum class Profile { gaussian, ball, barenblatt, csv };
enum class Reference { none, heat, barenblatt };
enum class Classification { global_spreading, blowup, inconclusive };

std::string to_string(Profile p);
std::string to_string(Reference r);
std::string to_string(Classification c);

struct ScenarioConfig {
  std::string name = "scenario";
  SolverConfig solver;  // shift is filled in per lambda
  double t_end_relative = 0.0;  // when > 0: t_end = t_end_relative * (T + 1)

  Profile profile = Profile::gaussian;
  double variance = 1.0;  // gaussian, per axis
  double radius = 1.0;    // ball
  std::filesystem::path csv_path;
  double mass = 1.0;
  std::vector<double> lambdas{1.0};

  Reference reference = Reference::none;
  std::string fit_series = "linf";
  std::optional<std::pair<double, double>> window;       // absolute times
  std::optional<std::pair<double, double>> window_rel;   // fractions of t_end
  double spreading_exponent = -0.5;  // L^inf decay needed for global_spreading

  std::filesystem::path output_dir;  // empty: no files
  int workers = 0;                   // 0: hardware concurrency

  double t_end_for(double lambda) const;
  double shift_for(double lambda) const;
  std::pair<double, double> window_for(double lambda) const;
};

ScenarioConfig parse_scenario(const config::Document& doc, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

// Interaction kernel from an inline table { family = "...", ... }; null for "none".
std::shared_ptr<const InteractionKernel> kernel_from_table(const config::Table& table, int dim,
                                                           const std::filesystem::path& base_dir,
                                                           const std::string& context);
// Two-column CSV (r, k_prime) with a header line.
InteractionKernel load_tabulated_kernel(const std::filesystem::path& path, int dim);

// Profile f on the given grid, with mass cfg.mass (csv profiles are used as read
// unless the scenario sets a mass).
DensityField initial_profile(const ScenarioConfig& cfg, const GridPtr& grid);

struct FitResult {
  double exponent = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double stderr_ = 0.0;
  int samples = 0;
};

// Least-squares slope of log y against log t over t in [lo, hi].
FitResult fit_rate(std::span<const double> t, std::span<const double> y, double lo, double hi);

// Named column of a diagnostics series: t, tau, mass, linf, lp, l2beta,
// second_moment, H, I, H_rel, ref_l1, dt, clipped_mass.
std::vector<double> series_column(const DiagnosticsSeries& series, const std::string& name);
const std::vector<std::string>& diagnostic_columns();

struct RunResult {
  double lambda = 1.0;
  double shift = 0.0;
  double t_end = 0.0;
  DiagnosticsSeries series;
  std::optional<FitResult> linf_fit;
  std::optional<FitResult> series_fit;  // the configured fit series
  std::optional<FitResult> ref_fit;     // L^1 distance to the reference
  Classification classification = Classification::inconclusive;
  std::string note;
  std::filesystem::path dir;
};

RunResult run_single(const ScenarioConfig& cfg, double lambda);

struct SweepResult {
  std::vector<RunResult> runs;  // lambda ascending
  bool bracket_found = false;
  double lambda_blowup = 0.0;    // largest blowup lambda adjacent to ...
  double lambda_spreading = 0.0; // ... the smallest spreading lambda
  std::string hint;
  std::vector<std::string> notes;
};

// Runs every lambda on a bounded worker pool and classifies the outcomes.
// Kernels without a finite subcritical gradient norm are rejected.
SweepResult lambda_sweep(const ScenarioConfig& cfg);

// Runs all lambdas of the scenario; with more than one lambda the result also
// carries the sweep bookkeeping (without the kernel hypothesis check).
SweepResult run_scenario(const ScenarioConfig& cfg);

// Classification bookkeeping used by the sweep; exposed for testing.
void classify_sweep(SweepResult& result);

// Export
void write_diagnostics_jsonl(const DiagnosticsSeries& series, const std::filesystem::path& path);
DiagnosticsSeries read_diagnostics_jsonl(const std::filesystem::path& path);
void write_diagnostics_csv(const DiagnosticsSeries& series, const std::filesystem::path& path);
std::string run_summary_json(const ScenarioConfig& cfg, const RunResult& run);
std::string sweep_summary_json(const ScenarioConfig& cfg, const SweepResult& sweep);
void write_sweep_csv(const SweepResult& sweep, const std::filesystem::path& path);
std::string fit_json(const std::string& series, double lo, double hi, const FitResult& fit);
std::string entropy_report_json(const std::string& source, const EntropyReport& report);

// %.17g, with null for non-finite values.
std::string json_number(double v);

}  // namespace aggdiff
