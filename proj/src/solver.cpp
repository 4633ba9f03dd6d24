#include "aggdiff/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "aggdiff/entropy.hpp"
#include "aggdiff/error.hpp"

namespace aggdiff {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string to_string(Variables v) { return v == Variables::physical ? "physical" : "similarity"; }

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::running: return "running";
    case RunStatus::completed: return "completed";
    case RunStatus::blowup_detected: return "blowup_detected";
    case RunStatus::domain_exhausted: return "domain_exhausted";
    case RunStatus::step_limit: return "step_limit";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  require(dim >= 2, ErrorCode::config, "dim must be >= 2");
  if (m == 1.0) {
    require(dim == 2, ErrorCode::config, "m = 1 requires d = 2 (linear diffusion theorem hypothesis: d = 2, m = 1)");
  } else {
    double critical = 2.0 - 2.0 / dim;
    require(dim >= 3 && std::abs(m - critical) < 1e-12, ErrorCode::config,
            "m must equal 2 - 2/d with d >= 3 (nonlinear theorem hypothesis: m = 2 - 2/d)");
  }
  require(cfl > 0.0 && cfl <= 1.0, ErrorCode::config, "cfl must lie in (0, 1]");
  require(cells >= 4, ErrorCode::config, "cells must be >= 4");
  require(r_max > 0.0, ErrorCode::config, "r_max must be > 0");
  require(t_end > 0.0, ErrorCode::config, "t_end must be > 0");
  require(shift >= 0.0, ErrorCode::config, "time shift must be >= 0");
  require(diag_interval > 0.0, ErrorCode::config, "diag_interval must be > 0");
  require(blowup.peak_factor > 1.0, ErrorCode::config, "peak_factor must be > 1");
  require(blowup.dt_floor_ratio > 0.0 && blowup.dt_floor_ratio <= 1.0, ErrorCode::config,
          "dt_floor_ratio must lie in (0, 1]");
  require(blowup.moment_window >= 2, ErrorCode::config, "moment_window must be >= 2");
  require(rebuild_dtau > 0.0, ErrorCode::config, "rebuild_dtau must be > 0");
  require(max_steps > 0, ErrorCode::config, "max_steps must be > 0");
  if (kernel) require(kernel->dim() == dim, ErrorCode::config, "kernel dimension differs from dim");
}

Solver::Solver(SolverConfig config, const DensityField& u0)
    : config_(std::move(config)), grid_(make_grid(config_.dim, config_.cells, config_.r_max)), state_{DensityField(grid_)} {
  config_.validate();
  require(u0.grid() == *grid_, ErrorCode::grid_mismatch, "initial data is not on the solver grid");
  state_.field = DensityField(grid_, std::vector<double>(u0.values().begin(), u0.values().end()));
  state_.t = 0.0;
  state_.tau = config_.variables == Variables::similarity ? config_.frame().tau0() : 0.0;
  refresh_operator();
}

double Solver::stretch() const {
  return config_.variables == Variables::similarity ? config_.frame().stretch(state_.t) : 1.0;
}

void Solver::refresh_operator() {
  if (!config_.kernel) return;
  if (op_ && (op_->uses_shell_theorem() || config_.variables == Variables::physical)) return;
  if (op_ && state_.tau < op_tau_ + config_.rebuild_dtau) return;
  ConvolutionOptions opts;
  opts.quadrature_order = config_.quadrature_order;
  if (config_.variables == Variables::similarity)
    opts.scale = config_.frame().dilation(state_.tau + 0.5 * config_.rebuild_dtau);
  op_ = std::make_unique<RadialConvolutionOperator>(config_.kernel, grid_, opts);
  op_tau_ = state_.tau;
}

std::vector<double> Solver::face_velocity(std::span<const double> values) const {
  const int n = grid_->size();
  std::vector<double> v(n + 1, 0.0);
  if (op_) v = op_->at_faces(DensityField(grid_, std::vector<double>(values.begin(), values.end())));
  if (config_.variables == Variables::similarity) {
    double c = config_.frame_mode() == RescaleMode::nonlinear ? 1.0 : 0.5;
    for (int f = 0; f <= n; ++f) v[f] -= c * grid_->face(f);
  }
  v[0] = 0.0;
  return v;
}

namespace {

// Bernoulli function x / (e^x - 1).
double bernoulli(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - 0.5 * x;
  return x / std::expm1(x);
}

}  // namespace

std::vector<double> Solver::face_flux(std::span<const double> u, const std::vector<double>& v) const {
  const int n = grid_->size();
  const double h = grid_->spacing(), m = config_.m;
  std::vector<double> flux(n + 1, 0.0);
  if (m == 1.0) {
    // Scharfetter-Gummel: exact for exponential equilibria of a piecewise constant drift.
    for (int f = 1; f < n; ++f) {
      double pe = v[f] * h;
      flux[f] = (bernoulli(-pe) * u[f - 1] - bernoulli(pe) * u[f]) / h;
    }
    return flux;
  }
  // Upwinded velocity of the pressure P = m/(m-1) u^{m-1} plus the transport field.
  std::vector<double> pressure(n);
  for (int i = 0; i < n; ++i) pressure[i] = m / (m - 1.0) * std::pow(u[i], m - 1.0);
  for (int f = 1; f < n; ++f) {
    double vt = v[f] - (pressure[f] - pressure[f - 1]) / h;
    flux[f] = vt > 0.0 ? vt * u[f - 1] : vt * u[f];
  }
  return flux;
}

std::vector<double> Solver::rate(std::span<const double> u) const {
  const int n = grid_->size();
  auto flux = face_flux(u, face_velocity(u));
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = -(grid_->face_area(i + 1) * flux[i + 1] - grid_->face_area(i) * flux[i]) / grid_->volume(i);
  return out;
}

double Solver::cfl_dt() const {
  const int n = grid_->size(), d = config_.dim;
  const double h = grid_->spacing(), m = config_.m;
  auto u = state_.field.values();
  auto v = face_velocity(u);
  double best = std::numeric_limits<double>::infinity();
  for (int f = 1; f < n; ++f) {
    double diff = 1.0, speed = std::abs(v[f]);
    if (m != 1.0) {
      double p0 = std::pow(u[f - 1], m - 1.0), p1 = std::pow(u[f], m - 1.0);
      diff = 0.5 * m * (p0 + p1);
      speed = std::abs(v[f]) + m / (m - 1.0) * std::abs(p1 - p0) / h;
    }
    best = std::min(best, h * h / (2.0 * d * diff + h * speed + 1e-12));
  }
  return config_.cfl * best;
}

void Solver::step(double dt) {
  require(dt > 0.0, ErrorCode::invalid_argument, "step needs dt > 0");
  refresh_operator();
  const int n = grid_->size();
  auto& field = state_.field;
  std::vector<double> u0(field.values().begin(), field.values().end());

  // Virtual outflow: the flux the interior profile would carry through the
  // outer wall if the wall were absent.
  {
    auto pm = [&](double x) { return config_.m == 1.0 ? x : std::pow(x, config_.m); };
    double grad = (pm(u0[n - 1]) - pm(u0[n - 2])) / grid_->spacing();
    auto v = face_velocity(u0);
    double leak = std::max(0.0, -grad + v[n] * u0[n - 1]);
    state_.outflow += dt * grid_->face_area(n) * leak;
  }

  auto clip = [&](std::vector<double>& u) {
    for (int i = 0; i < n; ++i) {
      if (u[i] < 0.0) {
        state_.clipped_mass += -u[i] * grid_->volume(i);
        u[i] = 0.0;
      }
    }
  };
  auto k1 = rate(u0);
  std::vector<double> u1(n);
  for (int i = 0; i < n; ++i) u1[i] = u0[i] + dt * k1[i];
  clip(u1);
  auto k2 = rate(u1);
  for (int i = 0; i < n; ++i) u1[i] = 0.5 * u0[i] + 0.5 * (u1[i] + dt * k2[i]);
  clip(u1);
  std::copy(u1.begin(), u1.end(), field.values().begin());

  if (config_.variables == Variables::similarity) {
    state_.tau += dt;
    state_.t = config_.frame().time_of(state_.tau);
  } else {
    state_.t += dt;
  }
  ++state_.steps;
}

double Solver::physical_peak() const {
  return lp_norm(state_.field, std::numeric_limits<double>::infinity()) / stretch();
}

double Solver::physical_lp(double p) const {
  return std::pow(stretch(), -1.0 + 1.0 / p) * lp_norm(state_.field, p);
}

bool detect_blowup(const BlowupThresholds& th, double initial_peak, double peak, double initial_dt, double dt,
                   std::span<const double> moments) {
  if (!(peak >= th.peak_factor * initial_peak)) return false;
  if (!(dt <= th.dt_floor_ratio * initial_dt)) return false;
  if (moments.size() < 2) return false;
  return moments.back() < moments.front();
}

DiagnosticsSeries simulate(const SolverConfig& config, const DensityField& u0, const ReferenceFn& reference,
                           const SnapshotFn& on_snapshot) {
  Solver solver(config, u0);
  const auto& cfg = solver.config();
  const bool similarity = cfg.variables == Variables::similarity;
  const auto frame = cfg.frame();
  const double p = cfg.lp_exponent > 0.0 ? cfg.lp_exponent : (cfg.m == 1.0 ? 2.0 : 2.0 * cfg.m / (cfg.m - 1.0));
  const bool with_entropy = similarity && cfg.m > 1.0;

  DiagnosticsSeries series;
  series.variables = cfg.variables;
  series.pure_diffusion = cfg.kernel == nullptr;
  series.initial_mass = mass(solver.state().field);
  series.initial_peak = solver.physical_peak();
  const double h_min = with_entropy && series.initial_mass > 0.0
                           ? entropy_H(stationary_profile_on_grid(series.initial_mass, solver.grid()), cfg.m)
                           : 0.0;

  // Log-time clock used for the diagnostic cadence.
  auto clock = [&](const SolverState& s) { return similarity ? s.tau : std::log1p(s.t); };
  const double clock_end = similarity ? frame.tau_of(cfg.t_end) : std::log1p(cfg.t_end);
  double next_sample = clock(solver.state());
  int snapshot_index = 0;
  double last_dt = solver.cfl_dt();
  series.initial_dt = last_dt;

  auto record = [&]() {
    const auto& st = solver.state();
    DiagnosticSample s;
    s.t = st.t;
    s.tau = st.tau;
    s.mass = mass(st.field);
    s.linf = solver.physical_peak();
    s.lp = solver.physical_lp(p);
    s.l2beta = weighted_l2_norm(st.field, cfg.beta);
    double dil2 = similarity ? std::pow(frame.dilation(st.tau), 2) : 1.0;
    s.second_moment = dil2 * second_moment(st.field);
    s.H = s.I = s.H_rel = kNaN;
    if (with_entropy) {
      s.H = entropy_H(st.field, cfg.m);
      s.I = entropy_I(st.field, cfg.m, cfg.theta_floor);
      s.H_rel = s.H - h_min;
    }
    s.ref_l1 = kNaN;
    if (reference) {
      auto ref = reference(st.t, st.tau, solver.grid());
      double acc = 0.0;
      for (int i = 0; i < st.field.size(); ++i) acc += solver.grid()->volume(i) * std::abs(st.field[i] - ref[i]);
      s.ref_l1 = acc;
    }
    s.dt = last_dt;
    s.clipped_mass = st.clipped_mass;
    series.samples.push_back(s);
    if (on_snapshot && cfg.snapshot_every > 0 && (series.samples.size() - 1) % cfg.snapshot_every == 0)
      on_snapshot(st.field, st.t, st.tau, snapshot_index++);
  };

  std::deque<double> moments;
  const double tiny = 1e-12 * std::max(1.0, std::abs(clock_end));
  RunStatus status = RunStatus::running;
  while (status == RunStatus::running) {
    const double now = clock(solver.state());
    if (now >= next_sample - tiny) {
      record();
      next_sample = std::min(next_sample + cfg.diag_interval, clock_end);
      if (now >= clock_end - tiny) {
        status = RunStatus::completed;
        break;
      }
    }
    if (solver.state().steps >= cfg.max_steps) {
      status = RunStatus::step_limit;
      break;
    }
    double dt = solver.cfl_dt();
    // Clamp so the step lands on the next sample time.
    double target = similarity ? next_sample : std::expm1(next_sample);
    double current = similarity ? solver.state().tau : solver.state().t;
    double remaining = target - current;
    if (remaining <= 0.0) remaining = dt;
    double taken = std::min(dt, remaining);
    if (remaining - taken < 1e-9 * remaining) taken = remaining;
    last_dt = dt;
    solver.step(taken);

    const auto& st = solver.state();
    if (st.outflow > cfg.exhaustion_fraction * series.initial_mass) {
      status = RunStatus::domain_exhausted;
      break;
    }
    double dil2 = similarity ? std::pow(frame.dilation(st.tau), 2) : 1.0;
    moments.push_back(dil2 * second_moment(st.field));
    if (static_cast<int>(moments.size()) > cfg.blowup.moment_window) moments.pop_front();
    std::vector<double> trail(moments.begin(), moments.end());
    if (static_cast<int>(trail.size()) == cfg.blowup.moment_window &&
        detect_blowup(cfg.blowup, series.initial_peak, solver.physical_peak(), series.initial_dt, dt, trail)) {
      status = RunStatus::blowup_detected;
      break;
    }
  }
  if (status != RunStatus::completed) record();

  series.status = status;
  series.final_t = solver.state().t;
  series.outflow = solver.state().outflow;
  series.steps = solver.state().steps;
  std::ostringstream msg;
  msg << to_string(status) << " at t = " << series.final_t << " after " << series.steps << " steps";
  series.message = msg.str();
  if (on_snapshot) on_snapshot(solver.state().field, solver.state().t, solver.state().tau, -1);
  return series;
}

double dissipation_residual(const DiagnosticsSeries& series) {
  require(series.pure_diffusion, ErrorCode::invalid_argument,
          "dissipation identity dH/dtau = -I holds only without interaction kernel");
  require(series.variables == Variables::similarity, ErrorCode::invalid_argument,
          "dissipation residual needs a similarity-variable run");
  const auto& s = series.samples;
  require(s.size() >= 3, ErrorCode::insufficient_resolution, "dissipation residual needs >= 3 samples");
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < s.size(); ++k) {
    double dtau = s[k + 1].tau - s[k - 1].tau;
    if (dtau <= 0.0) continue;
    double slope = (s[k + 1].H_rel - s[k - 1].H_rel) / dtau;
    require(std::isfinite(slope) && std::isfinite(s[k].I), ErrorCode::numeric, "series lacks entropy diagnostics");
    worst = std::max(worst, std::abs(slope + s[k].I) / (1.0 + s[k].I));
  }
  return worst;
}

}  // namespace aggdiff
