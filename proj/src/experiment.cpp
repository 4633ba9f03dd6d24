#include "aggdiff/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "aggdiff/closed_forms.hpp"
#include "aggdiff/entropy.hpp"
#include "aggdiff/error.hpp"
#include "aggdiff/numerics.hpp"

namespace aggdiff {

namespace fs = std::filesystem;

std::string to_string(Profile p) {
  switch (p) {
    case Profile::gaussian: return "gaussian";
    case Profile::ball: return "ball";
    case Profile::barenblatt: return "barenblatt";
    case Profile::csv: return "csv";
  }
  return "unknown";
}

std::string to_string(Reference r) {
  switch (r) {
    case Reference::none: return "none";
    case Reference::heat: return "heat";
    case Reference::barenblatt: return "barenblatt";
  }
  return "unknown";
}

std::string to_string(Classification c) {
  switch (c) {
    case Classification::global_spreading: return "global_spreading";
    case Classification::blowup: return "blowup";
    case Classification::inconclusive: return "inconclusive";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Scenario configuration

double ScenarioConfig::shift_for(double lambda) const {
  return solver.variables == Variables::similarity ? shift_from_lambda(lambda, solver.frame_mode(), solver.dim) : 0.0;
}

double ScenarioConfig::t_end_for(double lambda) const {
  if (t_end_relative > 0.0) return t_end_relative * (shift_for(lambda) + 1.0);
  return solver.t_end;
}

std::pair<double, double> ScenarioConfig::window_for(double lambda) const {
  double te = t_end_for(lambda);
  if (window) return *window;
  if (window_rel) return {window_rel->first * te, window_rel->second * te};
  return {te / 10.0, te};
}

InteractionKernel load_tabulated_kernel(const fs::path& path, int dim) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::io, "cannot open kernel table " + path.string());
  std::string line;
  std::vector<double> r, kp;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto comma = line.find(',');
    require(comma != std::string::npos, ErrorCode::io, path.string() + ":" + std::to_string(lineno) + ": expected two columns");
    char* end = nullptr;
    double a = std::strtod(line.c_str(), &end);
    if (end == line.c_str()) {
      require(lineno == 1, ErrorCode::io, path.string() + ":" + std::to_string(lineno) + ": non-numeric row");
      continue;  // header
    }
    double b = std::strtod(line.c_str() + comma + 1, &end);
    r.push_back(a);
    kp.push_back(b);
  }
  require(r.size() >= 8, ErrorCode::insufficient_resolution,
          path.string() + ": tabulated kernel needs at least 8 samples, found " + std::to_string(r.size()));
  for (std::size_t i = 1; i < r.size(); ++i)
    require(r[i] > r[i - 1], ErrorCode::invalid_argument, path.string() + ": radii must be strictly increasing");
  return InteractionKernel::tabulated(dim, std::move(r), std::move(kp));
}

std::shared_ptr<const InteractionKernel> kernel_from_table(const config::Table& t, int dim, const fs::path& base,
                                                           const std::string& context) {
  std::string family = config::table_string(t, "family", context);
  auto num = [&](const char* key, double fallback) {
    auto v = config::table_number_opt(t, key, context);
    return v ? *v : fallback;
  };
  if (family == "none") return nullptr;
  if (family == "newtonian") return std::make_shared<InteractionKernel>(InteractionKernel::newtonian(dim));
  if (family == "bessel") return std::make_shared<InteractionKernel>(InteractionKernel::bessel(dim, num("alpha", 1.0)));
  if (family == "gaussian") return std::make_shared<InteractionKernel>(InteractionKernel::gaussian(dim, num("sigma", 1.0)));
  if (family == "power_decay")
    return std::make_shared<InteractionKernel>(
        InteractionKernel::power_decay(dim, config::table_number(t, "gamma", context), num("r0", 1.0)));
  if (family == "tabulated") {
    fs::path file = config::table_string(t, "file", context);
    if (file.is_relative()) file = base / file;
    return std::make_shared<InteractionKernel>(load_tabulated_kernel(file, dim));
  }
  fail(ErrorCode::config, context + ": unknown kernel family '" + family +
                              "' (expected none, newtonian, bessel, gaussian, power_decay, tabulated)");
}

ScenarioConfig parse_scenario(const config::Document& doc, const fs::path& base) {
  doc.expect_keys("", {"name", "dim", "m", "variables", "kernel"});
  doc.expect_keys("solver", {"cells", "r_max", "cfl", "t_end", "t_end_relative", "diag_interval", "snapshot_every",
                             "peak_factor", "dt_floor_ratio", "moment_window", "max_steps", "rebuild_dtau",
                             "quadrature_order", "lp_exponent", "beta", "theta_floor", "exhaustion_fraction"});
  doc.expect_keys("initial", {"profile", "variance", "radius", "file", "mass", "lambda"});
  doc.expect_keys("fit", {"reference", "series", "window", "window_relative", "spreading_exponent"});
  doc.expect_keys("output", {"dir"});
  doc.expect_keys("sweep", {"workers"});
  for (const auto& s : doc.sections())
    if (s != "" && s != "solver" && s != "initial" && s != "fit" && s != "output" && s != "sweep")
      fail(ErrorCode::config, doc.origin() + ": unknown section [" + s + "]");

  ScenarioConfig cfg;
  cfg.name = doc.string_or("", "name", "scenario");
  auto& sc = cfg.solver;
  double dim = doc.number("", "dim");
  if (dim != std::floor(dim) || dim < 2) doc.fail_at("", "dim", "must be an integer >= 2");
  sc.dim = static_cast<int>(dim);
  sc.m = doc.number_or("", "m", sc.dim == 2 ? 1.0 : 2.0 - 2.0 / sc.dim);
  if (sc.m == 1.0 && sc.dim != 2)
    doc.fail_at("", "m", "m = 1 is covered only for d = 2 (linear theorem: d = 2, m = 1)");
  if (sc.m != 1.0 && (sc.dim < 3 || std::abs(sc.m - (2.0 - 2.0 / sc.dim)) > 1e-12))
    doc.fail_at("", "m", "m must equal 2 - 2/d with d >= 3 (nonlinear theorem: L^1-critical m = 2 - 2/d)");
  std::string vars = doc.string_or("", "variables", "physical");
  if (vars == "physical")
    sc.variables = Variables::physical;
  else if (vars == "similarity")
    sc.variables = Variables::similarity;
  else
    doc.fail_at("", "variables", "expected physical or similarity");
  if (doc.has("", "kernel")) {
    const auto* v = doc.find("", "kernel");
    std::string context = doc.origin() + ":" + std::to_string(v->line) + ": kernel";
    if (v->is_string() && std::get<std::string>(v->data) == "none")
      sc.kernel = nullptr;
    else
      sc.kernel = kernel_from_table(doc.table("", "kernel"), sc.dim, base, context);
  }

  sc.cells = static_cast<int>(doc.number_or("solver", "cells", sc.cells));
  sc.r_max = doc.number_or("solver", "r_max", sc.r_max);
  sc.cfl = doc.number_or("solver", "cfl", sc.cfl);
  if (doc.has("solver", "t_end") == doc.has("solver", "t_end_relative"))
    doc.fail_at("solver", "t_end", "set exactly one of t_end and t_end_relative");
  sc.t_end = doc.number_or("solver", "t_end", 0.0);
  cfg.t_end_relative = doc.number_or("solver", "t_end_relative", 0.0);
  if (doc.has("solver", "t_end") && sc.t_end <= 0.0) doc.fail_at("solver", "t_end", "must be > 0");
  if (doc.has("solver", "t_end_relative") && cfg.t_end_relative <= 0.0)
    doc.fail_at("solver", "t_end_relative", "must be > 0");
  if (cfg.t_end_relative > 0.0) sc.t_end = cfg.t_end_relative;
  sc.diag_interval = doc.number_or("solver", "diag_interval", sc.diag_interval);
  sc.snapshot_every = static_cast<int>(doc.number_or("solver", "snapshot_every", sc.snapshot_every));
  sc.blowup.peak_factor = doc.number_or("solver", "peak_factor", sc.blowup.peak_factor);
  sc.blowup.dt_floor_ratio = doc.number_or("solver", "dt_floor_ratio", sc.blowup.dt_floor_ratio);
  sc.blowup.moment_window = static_cast<int>(doc.number_or("solver", "moment_window", sc.blowup.moment_window));
  sc.max_steps = static_cast<long>(doc.number_or("solver", "max_steps", static_cast<double>(sc.max_steps)));
  sc.rebuild_dtau = doc.number_or("solver", "rebuild_dtau", sc.rebuild_dtau);
  sc.quadrature_order = static_cast<int>(doc.number_or("solver", "quadrature_order", sc.quadrature_order));
  sc.lp_exponent = doc.number_or("solver", "lp_exponent", sc.lp_exponent);
  sc.beta = doc.number_or("solver", "beta", sc.beta);
  sc.theta_floor = doc.number_or("solver", "theta_floor", sc.theta_floor);
  sc.exhaustion_fraction = doc.number_or("solver", "exhaustion_fraction", sc.exhaustion_fraction);
  try {
    sc.validate();
  } catch (const Error& e) {
    fail(ErrorCode::config, doc.origin() + ": [solver]: " + e.what());
  }

  std::string profile = doc.string_or("initial", "profile", "gaussian");
  if (profile == "gaussian")
    cfg.profile = Profile::gaussian;
  else if (profile == "ball")
    cfg.profile = Profile::ball;
  else if (profile == "barenblatt")
    cfg.profile = Profile::barenblatt;
  else if (profile == "csv")
    cfg.profile = Profile::csv;
  else
    doc.fail_at("initial", "profile", "expected gaussian, ball, barenblatt or csv");
  cfg.variance = doc.number_or("initial", "variance", cfg.variance);
  cfg.radius = doc.number_or("initial", "radius", cfg.radius);
  if (cfg.variance <= 0.0) doc.fail_at("initial", "variance", "must be > 0");
  if (cfg.radius <= 0.0) doc.fail_at("initial", "radius", "must be > 0");
  if (cfg.profile == Profile::barenblatt && sc.dim < 3)
    doc.fail_at("initial", "profile", "barenblatt profile needs d >= 3");
  if (cfg.profile == Profile::csv) {
    cfg.csv_path = doc.string("initial", "file");
    if (cfg.csv_path.is_relative()) cfg.csv_path = base / cfg.csv_path;
    cfg.mass = doc.number_or("initial", "mass", 0.0);
  } else {
    cfg.mass = doc.number("initial", "mass");
    if (cfg.mass <= 0.0) doc.fail_at("initial", "mass", "must be > 0");
  }
  if (doc.has("initial", "lambda")) cfg.lambdas = doc.list("initial", "lambda");
  if (cfg.lambdas.empty()) doc.fail_at("initial", "lambda", "needs at least one value");
  for (double l : cfg.lambdas)
    if (!(l >= 1.0)) doc.fail_at("initial", "lambda", "values must be >= 1");

  std::string ref = doc.string_or("fit", "reference", "auto");
  if (ref == "auto")
    cfg.reference = sc.m == 1.0 ? Reference::heat : Reference::barenblatt;
  else if (ref == "none")
    cfg.reference = Reference::none;
  else if (ref == "heat")
    cfg.reference = Reference::heat;
  else if (ref == "barenblatt")
    cfg.reference = Reference::barenblatt;
  else
    doc.fail_at("fit", "reference", "expected auto, none, heat or barenblatt");
  if (cfg.reference == Reference::heat && sc.m != 1.0)
    doc.fail_at("fit", "reference", "heat reference needs m = 1");
  if (cfg.reference == Reference::barenblatt && sc.m == 1.0)
    doc.fail_at("fit", "reference", "barenblatt reference needs m = 2 - 2/d");
  cfg.fit_series = doc.string_or("fit", "series", cfg.fit_series);
  const auto& cols = diagnostic_columns();
  if (std::find(cols.begin(), cols.end(), cfg.fit_series) == cols.end() || cfg.fit_series == "t")
    doc.fail_at("fit", "series", "unknown diagnostics series '" + cfg.fit_series + "'");
  auto read_window = [&](const char* key) -> std::optional<std::pair<double, double>> {
    if (!doc.has("fit", key)) return std::nullopt;
    auto w = doc.list("fit", key);
    if (w.size() != 2 || !(w[0] > 0.0) || !(w[1] > w[0])) doc.fail_at("fit", key, "expected [lo, hi] with 0 < lo < hi");
    return std::make_pair(w[0], w[1]);
  };
  cfg.window = read_window("window");
  cfg.window_rel = read_window("window_relative");
  if (cfg.window && cfg.window_rel) doc.fail_at("fit", "window", "set at most one of window and window_relative");
  if (cfg.window && cfg.t_end_relative == 0.0 && cfg.window->second > sc.t_end * (1.0 + 1e-12))
    doc.fail_at("fit", "window", "window extends past t_end");
  cfg.spreading_exponent = doc.number_or("fit", "spreading_exponent", cfg.spreading_exponent);

  if (doc.has("output", "dir")) {
    cfg.output_dir = doc.string("output", "dir");
    if (cfg.output_dir.is_relative()) cfg.output_dir = base / cfg.output_dir;
  }
  cfg.workers = static_cast<int>(doc.number_or("sweep", "workers", 0));
  return cfg;
}

ScenarioConfig load_scenario(const fs::path& path) {
  return parse_scenario(config::Document::load(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Initial data and references

DensityField initial_profile(const ScenarioConfig& cfg, const GridPtr& grid) {
  const int d = grid->dim();
  const double area = numerics::sphere_area(d);
  DensityField f(grid);
  switch (cfg.profile) {
    case Profile::gaussian: {
      double v = cfg.variance, norm = cfg.mass * std::pow(2.0 * numerics::pi * v, -0.5 * d);
      f = sample_cell_averages(grid, [&](double r) { return norm * std::exp(-0.5 * r * r / v); });
      break;
    }
    case Profile::ball: {
      double level = cfg.mass / (numerics::ball_volume(d) * std::pow(cfg.radius, d));
      for (int i = 0; i < grid->size(); ++i) {
        double a = grid->face(i), b = std::min(grid->face(i + 1), cfg.radius);
        if (b <= a) break;
        f[i] = level * area * (std::pow(b, d) - std::pow(a, d)) / d / grid->volume(i);
      }
      break;
    }
    case Profile::barenblatt: {
      auto prof = stationary_profile(cfg.mass, d);
      f = sample_cell_averages(grid, [&](double r) { return prof(r); });
      break;
    }
    case Profile::csv: {
      auto read = read_snapshot_csv(cfg.csv_path, d);
      require(read.grid() == *grid, ErrorCode::grid_mismatch,
              cfg.csv_path.string() + ": profile grid differs from the solver grid (cells / r_max)");
      f = DensityField(grid, std::vector<double>(read.values().begin(), read.values().end()));
      if (cfg.mass <= 0.0) return f;
      break;
    }
  }
  double have = mass(f);
  require(have > 0.0, ErrorCode::invalid_argument, "initial profile has zero mass on the grid");
  for (double& v : f.values()) v *= cfg.mass / have;
  return f;
}

namespace {

std::vector<double> normalized_centers(const GridPtr& grid, double target, const std::function<double(double)>& fn) {
  auto f = sample_centers(grid, fn);
  double have = mass(f);
  std::vector<double> out(f.values().begin(), f.values().end());
  if (have > 0.0)
    for (double& v : out) v *= target / have;
  return out;
}

ReferenceFn make_reference(const ScenarioConfig& cfg, double lambda, const DensityField& start) {
  const auto& sc = cfg.solver;
  const int d = sc.dim;
  const double M = mass(start);
  const bool similarity = sc.variables == Variables::similarity;
  SimilarityFrame frame{sc.frame_mode(), d, cfg.shift_for(lambda)};
  switch (cfg.reference) {
    case Reference::none: return {};
    case Reference::heat: {
      if (cfg.profile == Profile::gaussian) {
        // Heat flow keeps a Gaussian: variance lambda^2 v + 2t per axis (physical).
        double v0 = lambda * lambda * cfg.variance;
        return [=](double t, double, const GridPtr& grid) {
          double var = v0 + 2.0 * t;
          if (similarity) var /= frame.stretch(t);
          return normalized_centers(grid, M, [&](double r) { return std::exp(-0.5 * r * r / var); });
        };
      }
      // General data: Fokker-Planck semigroup in similarity variables, heat semigroup otherwise.
      auto field = std::make_shared<DensityField>(start);
      double tau0 = frame.tau0();
      return [=](double t, double tau, const GridPtr&) {
        DensityField out = similarity ? fokker_planck_semigroup(*field, tau - tau0) : heat_semigroup(*field, t);
        double have = mass(out);
        std::vector<double> vals(out.values().begin(), out.values().end());
        if (have > 0.0)
          for (double& v : vals) v *= M / have;
        return vals;
      };
    }
    case Reference::barenblatt: {
      if (similarity) {
        auto eq = stationary_profile_on_grid(M, start.grid_ptr());
        std::vector<double> vals(eq.values().begin(), eq.values().end());
        return [vals](double, double, const GridPtr&) { return vals; };
      }
      auto prof = barenblatt_profile(M, d);
      double offset = shift_from_lambda(lambda, RescaleMode::nonlinear, d) + 1.0 / d;
      return [=](double t, double, const GridPtr& grid) {
        return normalized_centers(grid, M, [&](double r) { return prof(t + offset, r); });
      };
    }
  }
  return {};
}

}  // namespace

// ---------------------------------------------------------------------------
// Fits

FitResult fit_rate(std::span<const double> t, std::span<const double> y, double lo, double hi) {
  require(t.size() == y.size(), ErrorCode::invalid_argument, "fit_rate: t and y differ in length");
  require(lo > 0.0 && hi > lo, ErrorCode::invalid_argument, "fit_rate: window must satisfy 0 < lo < hi");
  std::vector<double> x, ly;
  const double slack = 1e-9 * hi;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < lo - slack || t[i] > hi + slack) continue;
    require(y[i] > 0.0 && std::isfinite(y[i]), ErrorCode::domain,
            "fit_rate: nonpositive or non-finite sample at t = " + json_number(t[i]));
    x.push_back(std::log(t[i]));
    ly.push_back(std::log(y[i]));
  }
  require(x.size() >= 10, ErrorCode::insufficient_resolution,
          "fit_rate: window [" + json_number(lo) + ", " + json_number(hi) + "] holds " + std::to_string(x.size()) +
              " samples; at least 10 are needed");
  auto fit = numerics::least_squares(x, ly);
  return {fit.slope, fit.intercept, fit.r2, fit.slope_stderr, static_cast<int>(x.size())};
}

const std::vector<std::string>& diagnostic_columns() {
  static const std::vector<std::string> cols{"t",  "tau", "mass",  "linf",   "lp", "l2beta",      "second_moment",
                                             "H",  "I",   "H_rel", "ref_l1", "dt", "clipped_mass"};
  return cols;
}

namespace {

double column_value(const DiagnosticSample& s, std::size_t k) {
  switch (k) {
    case 0: return s.t;
    case 1: return s.tau;
    case 2: return s.mass;
    case 3: return s.linf;
    case 4: return s.lp;
    case 5: return s.l2beta;
    case 6: return s.second_moment;
    case 7: return s.H;
    case 8: return s.I;
    case 9: return s.H_rel;
    case 10: return s.ref_l1;
    case 11: return s.dt;
    case 12: return s.clipped_mass;
  }
  return 0.0;
}

double& column_ref(DiagnosticSample& s, std::size_t k) {
  switch (k) {
    case 0: return s.t;
    case 1: return s.tau;
    case 2: return s.mass;
    case 3: return s.linf;
    case 4: return s.lp;
    case 5: return s.l2beta;
    case 6: return s.second_moment;
    case 7: return s.H;
    case 8: return s.I;
    case 9: return s.H_rel;
    case 10: return s.ref_l1;
    case 11: return s.dt;
    default: return s.clipped_mass;
  }
}

std::size_t column_index(const std::string& name) {
  const auto& cols = diagnostic_columns();
  auto it = std::find(cols.begin(), cols.end(), name);
  require(it != cols.end(), ErrorCode::invalid_argument, "unknown diagnostics series '" + name + "'");
  return static_cast<std::size_t>(it - cols.begin());
}

std::optional<FitResult> try_fit(const DiagnosticsSeries& series, const std::string& column, double lo, double hi,
                                 std::string* why) {
  try {
    return fit_rate(series_column(series, "t"), series_column(series, column), lo, hi);
  } catch (const Error& e) {
    if (why) *why = e.what();
    return std::nullopt;
  }
}

std::string format_lambda(double lambda) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", lambda);
  return buf;
}

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out + "\"";
}

std::string fit_object(const std::optional<FitResult>& fit) {
  if (!fit) return "null";
  std::ostringstream os;
  os << "{\"exponent\": " << json_number(fit->exponent) << ", \"intercept\": " << json_number(fit->intercept)
     << ", \"r2\": " << json_number(fit->r2) << ", \"stderr\": " << json_number(fit->stderr_)
     << ", \"samples\": " << fit->samples << "}";
  return os.str();
}

std::string timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::io, "cannot open " + path.string() + " for writing");
  os << text;
  require(static_cast<bool>(os), ErrorCode::io, "write failed for " + path.string());
}

}  // namespace

std::vector<double> series_column(const DiagnosticsSeries& series, const std::string& name) {
  std::size_t k = column_index(name);
  std::vector<double> out;
  out.reserve(series.samples.size());
  for (const auto& s : series.samples) out.push_back(column_value(s, k));
  return out;
}

std::string json_number(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Runs

RunResult run_single(const ScenarioConfig& cfg, double lambda) {
  require(lambda >= 1.0, ErrorCode::invalid_argument, "lambda must be >= 1");
  RunResult run;
  run.lambda = lambda;
  run.shift = cfg.shift_for(lambda);
  run.t_end = cfg.t_end_for(lambda);

  SolverConfig sc = cfg.solver;
  sc.shift = run.shift;
  sc.t_end = run.t_end;
  auto grid = make_grid(sc.dim, sc.cells, sc.r_max);
  DensityField f = initial_profile(cfg, grid);
  DensityField start = f;
  if (sc.variables == Variables::physical && lambda != 1.0) start = rescale_initial(f, lambda, sc.frame_mode(), grid).field;

  if (!cfg.output_dir.empty()) {
    run.dir = cfg.output_dir / ("lambda_" + format_lambda(lambda));
    fs::create_directories(run.dir / "snapshots");
  }
  SnapshotFn snap;
  if (!run.dir.empty()) {
    snap = [&](const DensityField& field, double, double, int index) {
      if (index < 0) {
        write_snapshot_csv(field, run.dir / "final.csv");
        return;
      }
      char name[32];
      std::snprintf(name, sizeof name, "snap_%04d.csv", index);
      write_snapshot_csv(field, run.dir / "snapshots" / name);
    };
  }

  run.series = simulate(sc, start, make_reference(cfg, lambda, start), snap);

  auto [lo, hi] = cfg.window_for(lambda);
  std::string why;
  run.linf_fit = try_fit(run.series, "linf", lo, hi, &why);
  run.series_fit = cfg.fit_series == "linf" ? run.linf_fit : try_fit(run.series, cfg.fit_series, lo, hi, nullptr);
  if (cfg.reference != Reference::none) run.ref_fit = try_fit(run.series, "ref_l1", lo, hi, nullptr);

  switch (run.series.status) {
    case RunStatus::blowup_detected:
      run.classification = Classification::blowup;
      break;
    case RunStatus::completed:
      if (run.linf_fit && run.linf_fit->exponent <= cfg.spreading_exponent) {
        run.classification = Classification::global_spreading;
      } else {
        run.classification = Classification::inconclusive;
        run.note = run.linf_fit ? "L^inf decay exponent " + json_number(run.linf_fit->exponent) +
                                      " is slower than the spreading threshold " + json_number(cfg.spreading_exponent)
                                : "no L^inf fit: " + why;
      }
      break;
    default:
      run.classification = Classification::inconclusive;
      run.note = "run ended with status " + to_string(run.series.status);
  }

  if (!run.dir.empty()) {
    write_diagnostics_jsonl(run.series, run.dir / "diagnostics.jsonl");
    write_text(run.dir / "summary.json", run_summary_json(cfg, run));
  }
  return run;
}

void classify_sweep(SweepResult& res) {
  auto& runs = res.runs;
  std::sort(runs.begin(), runs.end(), [](const RunResult& a, const RunResult& b) { return a.lambda < b.lambda; });
  // Monotone consistency: spreading at a smaller lambda than a blowup is contradictory.
  std::vector<bool> bad(runs.size(), false);
  for (std::size_t a = 0; a < runs.size(); ++a)
    for (std::size_t b = a + 1; b < runs.size(); ++b)
      if (runs[a].classification == Classification::global_spreading &&
          runs[b].classification == Classification::blowup) {
        bad[a] = bad[b] = true;
        res.notes.push_back("monotone-consistency violation: spreading at lambda = " + format_lambda(runs[a].lambda) +
                            " but blowup at lambda = " + format_lambda(runs[b].lambda));
      }
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (bad[i]) {
      runs[i].classification = Classification::inconclusive;
      runs[i].note = "marked inconclusive by the monotone-consistency check";
    }

  res.bracket_found = false;
  for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
    if (runs[i].classification == Classification::blowup &&
        runs[i + 1].classification == Classification::global_spreading) {
      res.bracket_found = true;
      res.lambda_blowup = runs[i].lambda;
      res.lambda_spreading = runs[i + 1].lambda;
      break;
    }
  }
  if (res.bracket_found) return;
  bool any_blow = false, any_spread = false;
  for (const auto& r : runs) {
    any_blow |= r.classification == Classification::blowup;
    any_spread |= r.classification == Classification::global_spreading;
  }
  if (any_spread && !any_blow)
    res.hint = "open bracket: every conclusive run spreads; lower lambda (or raise the mass) to locate lambda_0";
  else if (any_blow && !any_spread)
    res.hint = "open bracket: every conclusive run blows up; widen the lambda range upward";
  else if (!any_blow && !any_spread)
    res.hint = "open bracket: no conclusive runs; refine the grid or extend t_end";
  else
    res.hint = "open bracket: blowup and spreading runs are separated by inconclusive lambdas; refine the lambda grid";
}

namespace {

SweepResult run_all(const ScenarioConfig& cfg) {
  std::vector<double> lambdas = cfg.lambdas;
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  SweepResult res;
  res.runs.resize(lambdas.size());
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  std::size_t workers = cfg.workers > 0 ? static_cast<std::size_t>(cfg.workers) : hw;
  workers = std::min(workers, lambdas.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < lambdas.size(); i = next++) {
      try {
        res.runs[i] = run_single(cfg, lambdas[i]);
      } catch (const std::exception& e) {
        RunResult failed;
        failed.lambda = lambdas[i];
        failed.shift = cfg.shift_for(lambdas[i]);
        failed.classification = Classification::inconclusive;
        failed.note = std::string("run failed: ") + e.what();
        res.runs[i] = std::move(failed);
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  classify_sweep(res);
  if (!cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / "sweep_summary.json", sweep_summary_json(cfg, res));
    write_sweep_csv(res, cfg.output_dir / "sweep.csv");
  }
  return res;
}

}  // namespace

SweepResult lambda_sweep(const ScenarioConfig& cfg) {
  if (cfg.solver.kernel) {
    double q = 0.0;
    require(has_subcritical_lq_norm(*cfg.solver.kernel, &q), ErrorCode::config,
            "sweep rejected: " + cfg.solver.kernel->describe() +
                " has ||grad K||_q = DIVERGENT for every q < d/(d-1); the lambda_0 theorem requires grad K in L^q "
                "for some q in [1, d/(d-1))");
  }
  return run_all(cfg);
}

SweepResult run_scenario(const ScenarioConfig& cfg) { return run_all(cfg); }

// ---------------------------------------------------------------------------
// Export

void write_diagnostics_jsonl(const DiagnosticsSeries& series, const fs::path& path) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::io, "cannot open " + path.string() + " for writing");
  const auto& cols = diagnostic_columns();
  for (const auto& s : series.samples) {
    os << '{';
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (k) os << ", ";
      os << '"' << cols[k] << "\": " << json_number(column_value(s, k));
    }
    os << "}\n";
  }
  require(static_cast<bool>(os), ErrorCode::io, "write failed for " + path.string());
}

DiagnosticsSeries read_diagnostics_jsonl(const fs::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::io, "cannot open " + path.string());
  DiagnosticsSeries series;
  const auto& cols = diagnostic_columns();
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::io, path.string() + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    require(j.is_object(), ErrorCode::io, path.string() + ":" + std::to_string(lineno) + ": expected an object");
    DiagnosticSample s;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      auto it = j.find(cols[k]);
      double v = std::numeric_limits<double>::quiet_NaN();
      if (it != j.end() && it->is_number()) v = it->get<double>();
      column_ref(s, k) = v;
    }
    series.samples.push_back(s);
  }
  return series;
}

void write_diagnostics_csv(const DiagnosticsSeries& series, const fs::path& path) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::io, "cannot open " + path.string() + " for writing");
  const auto& cols = diagnostic_columns();
  for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
  os << '\n';
  char buf[40];
  for (const auto& s : series.samples) {
    for (std::size_t k = 0; k < cols.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", column_value(s, k));
      os << (k ? "," : "") << buf;
    }
    os << '\n';
  }
  require(static_cast<bool>(os), ErrorCode::io, "write failed for " + path.string());
}

std::string run_summary_json(const ScenarioConfig& cfg, const RunResult& run) {
  const auto& s = run.series;
  auto [lo, hi] = cfg.window_for(run.lambda);
  double final_mass = s.samples.empty() ? std::numeric_limits<double>::quiet_NaN() : s.samples.back().mass;
  double clipped = s.samples.empty() ? 0.0 : s.samples.back().clipped_mass;
  std::ostringstream os;
  os << "{\n"
     << "  \"name\": " << json_string(cfg.name) << ",\n"
     << "  \"lambda\": " << json_number(run.lambda) << ",\n"
     << "  \"shift\": " << json_number(run.shift) << ",\n"
     << "  \"t_end\": " << json_number(run.t_end) << ",\n"
     << "  \"dim\": " << cfg.solver.dim << ",\n"
     << "  \"m\": " << json_number(cfg.solver.m) << ",\n"
     << "  \"variables\": " << json_string(to_string(cfg.solver.variables)) << ",\n"
     << "  \"kernel\": " << json_string(cfg.solver.kernel ? cfg.solver.kernel->describe() : "none") << ",\n"
     << "  \"mass\": " << json_number(s.initial_mass) << ",\n"
     << "  \"status\": " << json_string(to_string(s.status)) << ",\n"
     << "  \"classification\": " << json_string(to_string(run.classification)) << ",\n"
     << "  \"final_t\": " << json_number(s.final_t) << ",\n"
     << "  \"steps\": " << s.steps << ",\n"
     << "  \"final_mass\": " << json_number(final_mass) << ",\n"
     << "  \"clipped_mass\": " << json_number(clipped) << ",\n"
     << "  \"outflow\": " << json_number(s.outflow) << ",\n"
     << "  \"blowup_thresholds\": {\"peak_factor\": " << json_number(cfg.solver.blowup.peak_factor)
     << ", \"dt_floor_ratio\": " << json_number(cfg.solver.blowup.dt_floor_ratio)
     << ", \"moment_window\": " << cfg.solver.blowup.moment_window << "},\n"
     << "  \"fit_window\": [" << json_number(lo) << ", " << json_number(hi) << "],\n"
     << "  \"fits\": {\"linf\": " << fit_object(run.linf_fit) << ", " << json_string(cfg.fit_series) << ": "
     << fit_object(run.series_fit) << ", \"ref_l1\": " << fit_object(run.ref_fit) << "},\n"
     << "  \"reference\": " << json_string(to_string(cfg.reference)) << ",\n"
     << "  \"message\": " << json_string(s.message) << ",\n"
     << "  \"note\": " << json_string(run.note) << ",\n"
     << "  \"created\": " << json_string(timestamp()) << "\n"
     << "}\n";
  return os.str();
}

std::string sweep_summary_json(const ScenarioConfig& cfg, const SweepResult& sweep) {
  std::ostringstream os;
  os << "{\n  \"name\": " << json_string(cfg.name) << ",\n  \"runs\": [\n";
  for (std::size_t i = 0; i < sweep.runs.size(); ++i) {
    const auto& r = sweep.runs[i];
    os << "    {\"lambda\": " << json_number(r.lambda) << ", \"classification\": "
       << json_string(to_string(r.classification)) << ", \"status\": " << json_string(to_string(r.series.status))
       << ", \"linf_exponent\": " << json_number(r.linf_fit ? r.linf_fit->exponent : NAN)
       << ", \"ref_l1_exponent\": " << json_number(r.ref_fit ? r.ref_fit->exponent : NAN)
       << ", \"note\": " << json_string(r.note) << "}" << (i + 1 < sweep.runs.size() ? "," : "") << "\n";
  }
  os << "  ],\n  \"bracket\": ";
  if (sweep.bracket_found)
    os << "[" << json_number(sweep.lambda_blowup) << ", " << json_number(sweep.lambda_spreading) << "]";
  else
    os << "null";
  os << ",\n  \"hint\": " << json_string(sweep.hint) << ",\n  \"notes\": [";
  for (std::size_t i = 0; i < sweep.notes.size(); ++i) os << (i ? ", " : "") << json_string(sweep.notes[i]);
  os << "],\n  \"created\": " << json_string(timestamp()) << "\n}\n";
  return os.str();
}

void write_sweep_csv(const SweepResult& sweep, const fs::path& path) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::io, "cannot open " + path.string() + " for writing");
  os << "lambda,classification,status,linf_exponent,ref_l1_exponent\n";
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : sweep.runs)
    os << num(r.lambda) << ',' << to_string(r.classification) << ',' << to_string(r.series.status) << ','
       << num(r.linf_fit ? r.linf_fit->exponent : NAN) << ',' << num(r.ref_fit ? r.ref_fit->exponent : NAN) << '\n';
  require(static_cast<bool>(os), ErrorCode::io, "write failed for " + path.string());
}

std::string fit_json(const std::string& series, double lo, double hi, const FitResult& fit) {
  std::ostringstream os;
  os << "{\"series\": " << json_string(series) << ", \"window\": [" << json_number(lo) << ", " << json_number(hi)
     << "], \"exponent\": " << json_number(fit.exponent) << ", \"intercept\": " << json_number(fit.intercept)
     << ", \"r2\": " << json_number(fit.r2) << ", \"stderr\": " << json_number(fit.stderr_)
     << ", \"samples\": " << fit.samples << "}";
  return os.str();
}

std::string entropy_report_json(const std::string& source, const EntropyReport& r) {
  std::ostringstream os;
  os << "{\"source\": " << json_string(source) << ", \"H\": " << json_number(r.H) << ", \"I\": " << json_number(r.I)
     << ", \"H_rel\": " << json_number(r.H_rel) << ", \"mass\": " << json_number(r.mass)
     << ", \"m\": " << json_number(r.m) << ", \"dim\": " << r.dim << ", \"cells\": " << r.cells
     << ", \"r_max\": " << json_number(r.r_max) << "}";
  return os.str();
}

}  // namespace aggdiff
