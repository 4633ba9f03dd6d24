// Command-line front end over the C API.
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aggdiff/aggdiff.h"

namespace {

constexpr int kCompleted = 0;
constexpr int kError = 1;
constexpr int kBlowup = 2;

int report_error(const char* what) {
  std::fprintf(stderr, "aggdiff: %s: %s\n", what, aggdiff_last_error());
  return kError;
}

int run_config(const std::string& path, const std::string& output, bool sweep) {
  aggdiff_scenario* s = nullptr;
  if (aggdiff_scenario_load(path.c_str(), &s) != AGGDIFF_OK) return report_error("config");
  if (!output.empty() && aggdiff_scenario_set_output_dir(s, output.c_str()) != AGGDIFF_OK) {
    aggdiff_scenario_destroy(s);
    return report_error("config");
  }
  aggdiff_outcome outcome{};
  char* summary = nullptr;
  aggdiff_status st = sweep ? aggdiff_scenario_sweep(s, &outcome, &summary) : aggdiff_scenario_run(s, &outcome, &summary);
  aggdiff_scenario_destroy(s);
  if (st != AGGDIFF_OK) return report_error(sweep ? "sweep" : "simulate");
  std::fputs(summary, stdout);
  aggdiff_string_free(summary);
  std::fprintf(stderr, "%d run(s): %d completed, %d blowup, %d inconclusive, %d failed\n", outcome.runs,
               outcome.completed, outcome.blowups, outcome.inconclusive, outcome.failed);
  if (outcome.failed > 0) return kError;
  if (!sweep && outcome.blowups > 0) return kBlowup;
  return kCompleted;
}

int entropy_audit(const std::vector<std::string>& files, double mass, int dim) {
  int code = kCompleted;
  for (const auto& file : files) {
    aggdiff_field* f = nullptr;
    if (aggdiff_field_read_csv(file.c_str(), dim, &f) != AGGDIFF_OK) {
      code = report_error(file.c_str());
      continue;
    }
    char* json = nullptr;
    aggdiff_status st = aggdiff_entropy_audit(f, mass, file.c_str(), &json);
    aggdiff_field_destroy(f);
    if (st != AGGDIFF_OK) {
      code = report_error(file.c_str());
      continue;
    }
    std::printf("%s\n", json);
    aggdiff_string_free(json);
  }
  return code;
}

int fit(const std::string& file, const std::string& series, const std::vector<double>& window) {
  aggdiff_fit r{};
  if (aggdiff_fit_jsonl(file.c_str(), series.c_str(), window[0], window[1], &r) != AGGDIFF_OK)
    return report_error("fit");
  std::printf(
      "{\"series\": \"%s\", \"window\": [%.17g, %.17g], \"exponent\": %.17g, \"intercept\": %.17g, \"r2\": %.17g, "
      "\"stderr\": %.17g, \"samples\": %d}\n",
      series.c_str(), window[0], window[1], r.exponent, r.intercept, r.r2, r.stderr_, r.samples);
  return kCompleted;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radial aggregation-diffusion solver and experiment runner"};
  app.set_version_flag("--version", std::string(aggdiff_version()));
  app.require_subcommand(1);

  std::string config_path, output_dir;
  auto* simulate = app.add_subcommand("simulate", "Run every lambda of a scenario");
  simulate->add_option("config", config_path, "Scenario file")->required()->check(CLI::ExistingFile);
  simulate->add_option("-o,--output", output_dir, "Override the output directory");

  std::string sweep_path, sweep_output;
  auto* sweep = app.add_subcommand("sweep", "Lambda sweep with spreading/blowup classification");
  sweep->add_option("config", sweep_path, "Scenario file")->required()->check(CLI::ExistingFile);
  sweep->add_option("-o,--output", sweep_output, "Override the output directory");

  std::vector<std::string> snapshots;
  double mass = 0.0;
  int dim = 0;
  auto* audit = app.add_subcommand("entropy-audit", "Entropy report for similarity-variable snapshots");
  audit->add_option("snapshots", snapshots, "Snapshot CSV files (r_center,u)")->required()->check(CLI::ExistingFile);
  audit->add_option("--mass", mass, "Mass M")->required()->check(CLI::PositiveNumber);
  audit->add_option("--dim", dim, "Dimension")->required()->check(CLI::PositiveNumber);

  std::string diag_path, series = "linf";
  std::vector<double> window;
  auto* fitcmd = app.add_subcommand("fit", "Power-law fit of a diagnostics series");
  fitcmd->add_option("diagnostics", diag_path, "diagnostics.jsonl")->required()->check(CLI::ExistingFile);
  fitcmd->add_option("--series", series, "Series name")->capture_default_str();
  fitcmd->add_option("--window", window, "Fit window a b")->required()->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kError;
  }

  if (*simulate) return run_config(config_path, output_dir, false);
  if (*sweep) return run_config(sweep_path, sweep_output, true);
  if (*audit) return entropy_audit(snapshots, mass, dim);
  return fit(diag_path, series, window);
}
