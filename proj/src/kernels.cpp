#include "aggdiff/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aggdiff/error.hpp"

namespace aggdiff {

using numerics::pi;

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::newtonian: return "newtonian";
    case KernelFamily::bessel: return "bessel";
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::power_decay: return "power_decay";
    case KernelFamily::tabulated: return "tabulated";
  }
  return "unknown";
}

namespace {

constexpr double kBesselTableLo = 1e-10;  // in units of 1/sqrt(alpha)
constexpr double kBesselTableHi = 60.0;
constexpr int kBesselPerDecade = 1500;

}  // namespace

InteractionKernel::InteractionKernel(KernelFamily family, int dim, double p1, double p2)
    : family_(family), dim_(dim), p1_(p1), p2_(p2) {
  require(dim >= 2, ErrorCode::invalid_argument, "kernel dimension must be >= 2");
}

InteractionKernel InteractionKernel::newtonian(int dim) { return {KernelFamily::newtonian, dim, 0.0, 0.0}; }

InteractionKernel InteractionKernel::bessel(int dim, double alpha) {
  require(alpha > 0.0, ErrorCode::invalid_argument, "bessel screening rate must be > 0");
  InteractionKernel k{KernelFamily::bessel, dim, alpha, 0.0};
  const double a = std::sqrt(alpha);
  const double lo = std::log(kBesselTableLo / a), hi = std::log(kBesselTableHi / a);
  const double step = std::log(10.0) / kBesselPerDecade;
  const int count = static_cast<int>(std::ceil((hi - lo) / step)) + 4;
  auto table = std::make_shared<std::vector<double>>(count);
  for (int i = 0; i < count; ++i) {
    double r = std::exp(lo + (i - 1) * step);
    (*table)[i] = std::pow(r, dim - 1) * k.bessel_gradient(r);
  }
  k.bessel_table_ = std::move(table);
  k.table_log_min_ = lo - step;
  k.table_log_step_ = step;
  return k;
}

InteractionKernel InteractionKernel::gaussian(int dim, double sigma) {
  require(sigma > 0.0, ErrorCode::invalid_argument, "gaussian width must be > 0");
  return {KernelFamily::gaussian, dim, sigma, 0.0};
}

InteractionKernel InteractionKernel::power_decay(int dim, double gamma, double r0) {
  require(gamma > 0.0, ErrorCode::invalid_argument, "power decay exponent must be > 0");
  require(r0 > 0.0, ErrorCode::invalid_argument, "power decay core radius must be > 0");
  return {KernelFamily::power_decay, dim, gamma, r0};
}

InteractionKernel InteractionKernel::tabulated(int dim, std::vector<double> r, std::vector<double> k_prime) {
  require(r.size() == k_prime.size(), ErrorCode::invalid_argument, "tabulated kernel: column lengths differ");
  require(r.size() >= 4, ErrorCode::insufficient_resolution, "tabulated kernel needs at least 4 samples");
  require(r.front() > 0.0, ErrorCode::invalid_argument, "tabulated kernel radii must be > 0");
  InteractionKernel k{KernelFamily::tabulated, dim, 0.0, 0.0};
  k.table_ = std::make_shared<numerics::CubicSpline>(std::move(r), std::move(k_prime));
  return k;
}

double InteractionKernel::bessel_gradient(double r) const {
  const double a = std::sqrt(p1_), nu = 0.5 * dim_ - 1.0;
  return -std::pow(2.0 * pi, -0.5 * dim_) * std::pow(a, nu + 1.0) * std::pow(r, -nu) *
         std::cyl_bessel_k(nu + 1.0, a * r);
}

double InteractionKernel::gradient(double r) const {
  switch (family_) {
    case KernelFamily::newtonian:
      require(r > 0.0, ErrorCode::domain, "newtonian gradient is singular at r = 0");
      return -std::pow(r, 1 - dim_) / numerics::sphere_area(dim_);
    case KernelFamily::bessel:
      require(r > 0.0, ErrorCode::domain, "bessel gradient is singular at r = 0");
      return bessel_gradient(r);
    case KernelFamily::gaussian: {
      require(r >= 0.0, ErrorCode::domain, "negative radius");
      double s2 = p1_ * p1_;
      return -r / s2 * std::pow(2.0 * pi * s2, -0.5 * dim_) * std::exp(-0.5 * r * r / s2);
    }
    case KernelFamily::power_decay:
      require(r >= 0.0, ErrorCode::domain, "negative radius");
      return -r * std::pow(p2_ * p2_ + r * r, -0.5 * (p1_ + 1.0));
    case KernelFamily::tabulated:
      if (r < table_->x_min() || r > table_->x_max()) {
        std::ostringstream msg;
        msg << "tabulated kernel evaluated at r = " << r << " outside [" << table_->x_min() << ", "
            << table_->x_max() << "]";
        fail(ErrorCode::extrapolation, msg.str());
      }
      return (*table_)(r);
  }
  return 0.0;
}

double InteractionKernel::gradient_extended(double r) const {
  switch (family_) {
    case KernelFamily::bessel: {
      if (r <= 0.0) return 0.0;
      double x = (std::log(r) - table_log_min_) / table_log_step_;
      const auto& t = *bessel_table_;
      double scale = std::pow(r, 1 - dim_);
      if (x <= 1.0) return t[1] * scale;
      if (x >= static_cast<double>(t.size()) - 3.0) return 0.0;
      // Cubic Lagrange interpolation on four neighbouring log-spaced knots.
      int i = static_cast<int>(x);
      double f = x - i;
      double y0 = t[i - 1], y1 = t[i], y2 = t[i + 1], y3 = t[i + 2];
      double v = y1 + 0.5 * f * (y2 - y0 + f * (2.0 * y0 - 5.0 * y1 + 4.0 * y2 - y3 + f * (3.0 * (y1 - y2) + y3 - y0)));
      return v * scale;
    }
    case KernelFamily::tabulated:
      if (r <= 0.0) return 0.0;
      if (r < table_->x_min()) return (*table_)(table_->x_min()) * r / table_->x_min();
      if (r > table_->x_max()) return 0.0;
      return (*table_)(r);
    default:
      return r > 0.0 ? gradient(r) : 0.0;
  }
}

double InteractionKernel::potential(double r) const {
  switch (family_) {
    case KernelFamily::newtonian:
      require(r > 0.0, ErrorCode::domain, "newtonian potential is singular at r = 0");
      if (dim_ == 2) return -std::log(r) / (2.0 * pi);
      return std::pow(r, 2 - dim_) / ((dim_ - 2) * numerics::sphere_area(dim_));
    case KernelFamily::bessel: {
      require(r > 0.0, ErrorCode::domain, "bessel potential is singular at r = 0");
      const double a = std::sqrt(p1_), nu = 0.5 * dim_ - 1.0;
      return std::pow(2.0 * pi, -0.5 * dim_) * std::pow(a / r, nu) * std::cyl_bessel_k(nu, a * r);
    }
    case KernelFamily::gaussian: {
      double s2 = p1_ * p1_;
      return std::pow(2.0 * pi * s2, -0.5 * dim_) * std::exp(-0.5 * r * r / s2);
    }
    case KernelFamily::power_decay: {
      double base = p2_ * p2_ + r * r;
      if (std::abs(p1_ - 1.0) < 1e-14) return -0.5 * std::log(base);
      return std::pow(base, 0.5 * (1.0 - p1_)) / (p1_ - 1.0);
    }
    case KernelFamily::tabulated:
      fail(ErrorCode::invalid_argument, "tabulated kernels carry k' only; no potential");
  }
  return 0.0;
}

double InteractionKernel::decay_exponent() const {
  switch (family_) {
    case KernelFamily::newtonian: return dim_ - 1.0;
    case KernelFamily::power_decay: return p1_;
    case KernelFamily::tabulated: {
      double r1 = table_->x_max(), r0 = 0.5 * r1;
      double g0 = std::abs((*table_)(r0)), g1 = std::abs((*table_)(r1));
      if (g1 == 0.0 || g0 == 0.0) return std::numeric_limits<double>::infinity();
      return -std::log(g1 / g0) / std::log(r1 / r0);
    }
    default: return std::numeric_limits<double>::infinity();
  }
}

bool InteractionKernel::singular_at_origin() const {
  return family_ == KernelFamily::newtonian || family_ == KernelFamily::bessel;
}

double InteractionKernel::length_scale() const {
  switch (family_) {
    case KernelFamily::newtonian: return 0.0;
    case KernelFamily::bessel: return 1.0 / std::sqrt(p1_);
    case KernelFamily::gaussian: return p1_;
    case KernelFamily::power_decay: return p2_;
    case KernelFamily::tabulated: return table_->x_min();
  }
  return 0.0;
}

double InteractionKernel::cutoff_factor() const {
  switch (family_) {
    case KernelFamily::bessel: return 45.0;
    case KernelFamily::gaussian: return 12.0;
    case KernelFamily::tabulated: return table_->x_max() / table_->x_min();
    default: return std::numeric_limits<double>::infinity();
  }
}

std::string InteractionKernel::describe() const {
  std::ostringstream os;
  os << to_string(family_) << "(d=" << dim_;
  switch (family_) {
    case KernelFamily::bessel: os << ", alpha=" << p1_; break;
    case KernelFamily::gaussian: os << ", sigma=" << p1_; break;
    case KernelFamily::power_decay: os << ", gamma=" << p1_ << ", r0=" << p2_; break;
    case KernelFamily::tabulated: os << ", samples in [" << table_->x_min() << ", " << table_->x_max() << "]"; break;
    default: break;
  }
  os << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// L^q norm of the gradient

namespace {

// Integral over one decade [r, 10 r] of |k'|^q r^{d-1} dr in log variables.
double decade_integral(const InteractionKernel& k, double q, double r) {
  const double lo = std::log(r), hi = lo + std::log(10.0);
  const int d = k.dim();
  return numerics::integrate(
      [&](double s) {
        double x = std::exp(s);
        return std::pow(std::abs(k.gradient_extended(x)), q) * std::pow(x, d);
      },
      lo, hi, 32);
}

// Sum of decade integrals walking outward (step = +1) or inward (step = -1).
// Returns false when the increments do not decay.
bool sum_decades(const InteractionKernel& k, double q, double start, int step, double& total) {
  total = 0.0;
  double prev = -1.0;
  double r = step > 0 ? start : start / 10.0;
  for (int n = 0; n < 80; ++n) {
    double inc = decade_integral(k, q, r);
    if (!std::isfinite(inc)) return false;
    total += inc;
    if (n >= 3 && inc <= 1e-14 * total) return true;
    if (n >= 6 && prev > 0.0) {
      double ratio = inc / prev;
      if (ratio >= 0.95) return false;
      if (inc <= 1e-10 * total) {
        total += inc * ratio / (1.0 - ratio);
        return true;
      }
    }
    prev = inc;
    r = step > 0 ? r * 10.0 : r / 10.0;
  }
  return false;
}

}  // namespace

LqNorm lq_gradient_norm(const InteractionKernel& kernel, double q) {
  require(q >= 1.0, ErrorCode::invalid_argument, "lq_gradient_norm requires q >= 1");
  double pivot = kernel.length_scale() > 0.0 ? kernel.length_scale() : 1.0;
  double core = 0.0, tail = 0.0;
  LqNorm out;
  if (!sum_decades(kernel, q, pivot, -1, core) || !sum_decades(kernel, q, pivot, +1, tail)) {
    out.divergent = true;
    return out;
  }
  out.value = std::pow(numerics::sphere_area(kernel.dim()) * (core + tail), 1.0 / q);
  return out;
}

bool has_subcritical_lq_norm(const InteractionKernel& kernel, double* witness_q) {
  const double qc = kernel.dim() / (kernel.dim() - 1.0);
  for (int i = 0; i <= 12; ++i) {
    double q = 1.0 + (0.99 * qc - 1.0) * i / 12.0;
    if (!lq_gradient_norm(kernel, q).divergent) {
      if (witness_q) *witness_q = q;
      return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Admissibility probe

namespace {

bool monotone(const std::vector<double>& v) {
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  double tol = 1e-9 * scale;
  bool up = true, down = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    double diff = v[i] - v[i - 1];
    if (diff < -tol) up = false;
    if (diff > tol) down = false;
  }
  return up || down;
}

}  // namespace

AdmissibilityReport admissibility_probe(const InteractionKernel& kernel, double r_max, int n_samples,
                                        const AdmissibilityOptions& options) {
  require(r_max > 0.0, ErrorCode::invalid_argument, "probe radius must be positive");
  require(n_samples >= 8, ErrorCode::insufficient_resolution, "admissibility probe needs >= 8 samples");
  AdmissibilityReport rep;
  rep.delta = options.delta > 0.0 ? options.delta : std::min(1.0, r_max / 10.0);
  const int d = kernel.dim();
  double r_lo = r_max * 1e-4;
  double r_hi = r_max;
  if (kernel.family() == KernelFamily::tabulated) {
    double x0 = kernel.length_scale(), x1 = x0 * kernel.cutoff_factor();
    r_lo = std::max(r_lo, x0 * 1.001);
    r_hi = std::min(r_hi, x1 * 0.999);
    require(r_hi > r_lo, ErrorCode::insufficient_resolution, "tabulated kernel range does not overlap the probe range");
  }
  const double eta = 1e-4;
  auto k1 = [&](double r) { return kernel.gradient(r); };
  auto k2 = [&](double r) { return (k1(r * (1 + eta)) - k1(r * (1 - eta))) / (2 * eta * r); };
  auto k3 = [&](double r) { return (k1(r * (1 + eta)) - 2 * k1(r) + k1(r * (1 - eta))) / (eta * r * eta * r); };

  std::vector<double> near;
  for (int i = 0; i < n_samples; ++i) {
    double r = r_lo * std::pow(std::min(rep.delta, r_hi) / r_lo, static_cast<double>(i) / (n_samples - 1));
    near.push_back(r);
  }
  std::vector<double> g1, g2, g1_over_r;
  for (double r : near) {
    g1.push_back(k1(r));
    g2.push_back(k2(r));
    g1_over_r.push_back(k1(r) / r);
  }
  bool sign_pos = true, sign_neg = true;
  for (double g : g1) {
    if (g > 0.0) sign_neg = false;
    if (g < 0.0) sign_pos = false;
  }
  rep.kn_ok = sign_pos || sign_neg;
  bool k2_mono = monotone(g2), k1r_mono = monotone(g1_over_r);
  rep.mn_ok = k2_mono && k1r_mono;

  double sup = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    double r = r_lo * std::pow(r_hi / r_lo, static_cast<double>(i) / (n_samples - 1));
    double third = std::abs(k3(r)) + 3.0 * std::abs(k2(r) - k1(r) / r) / r;
    sup = std::max(sup, third * std::pow(r, d + 1));
  }
  rep.bd_sup = sup;
  rep.bd_ok = std::isfinite(sup) && sup <= options.bd_bound;

  std::ostringstream os;
  os << kernel.describe() << ": delta=" << rep.delta << " k'-sign-constant=" << rep.kn_ok
     << " k''-monotone=" << k2_mono << " k'/r-monotone=" << k1r_mono << " sup|D3K| r^(d+1)=" << sup
     << " (bound " << options.bd_bound << ")";
  rep.details = os.str();
  return rep;
}

// ---------------------------------------------------------------------------
// Radial convolution

namespace {

struct ShellIntegrator {
  const InteractionKernel& kernel;
  double scale;
  int order;
  int dim;
  double ell;     // kernel length in the dilated frame
  double cutoff;  // distance beyond which the dilated kernel vanishes
  double weight_norm;
  double amplitude;

  ShellIntegrator(const InteractionKernel& k, double s, int o)
      : kernel(k), scale(s), order(o), dim(k.dim()) {
    ell = k.length_scale() / s;
    cutoff = std::isfinite(k.cutoff_factor()) ? k.cutoff_factor() * ell : std::numeric_limits<double>::infinity();
    weight_norm = dim == 2 ? pi : std::sqrt(pi) * std::tgamma(0.5 * (dim - 1)) / std::tgamma(0.5 * dim);
    amplitude = std::pow(s, dim - 1);
  }

  double weight(double phi) const { return dim == 2 ? 1.0 / pi : std::pow(std::sin(phi), dim - 2) / weight_norm; }

  double dilated_gradient(double dist) const { return amplitude * kernel.gradient_extended(scale * dist); }

  // Angular mean of the radial component at radius r from a unit sphere of radius rho.
  double angular(double r, double rho) const {
    double gap = std::abs(r - rho);
    double phi_max = pi;
    if (std::isfinite(cutoff)) {
      if (cutoff <= gap) return 0.0;
      if (cutoff < r + rho) {
        double c = (r * r + rho * rho - cutoff * cutoff) / (2.0 * r * rho);
        phi_max = std::acos(std::clamp(c, -1.0, 1.0));
      }
    }
    auto f = [&](double phi) {
      double c = std::cos(phi);
      double dist = std::sqrt(std::max(gap * gap + 2.0 * r * rho * (1.0 - c), 1e-300));
      return weight(phi) * dilated_gradient(dist) * (r - rho * c) / dist;
    };
    double phi_c = std::max(gap / std::sqrt(r * rho), 1e-14);
    if (phi_c >= 0.25 * phi_max) return numerics::integrate(f, 0.0, phi_max, order);
    const int panel_order = std::max(8, order / 8);
    double acc = numerics::integrate(f, 0.0, phi_c, panel_order);
    for (double lo = phi_c; lo < phi_max; lo *= 2.0) acc += numerics::integrate(f, lo, std::min(2.0 * lo, phi_max), panel_order);
    return acc;
  }

  double radial_piece(double r, double p, double q) const {
    const double L = q - p;
    if (L <= 0.0) return 0.0;
    const double area = numerics::sphere_area(dim);
    auto f = [&](double rho) { return area * std::pow(rho, dim - 1) * angular(r, rho); };
    double dist = r <= p ? p - r : (r >= q ? r - q : 0.0);
    double w_stop = ell > 0.0 ? std::max({0.5 * dist, std::min(L, ell / 8.0), 1e-9 * L}) : L;
    if (dist >= L || w_stop >= L) return numerics::integrate(f, p, q, 6);
    // Geometric panels refined toward the end nearest r.
    bool toward_p = std::abs(r - p) <= std::abs(r - q);
    double acc = 0.0, lo = 0.0, hi = w_stop;
    while (lo < L) {
      double a = toward_p ? p + lo : q - hi;
      double b = toward_p ? p + hi : q - lo;
      acc += numerics::integrate(f, a, b, 6);
      lo = hi;
      hi = std::min(2.0 * hi, L);
    }
    return acc;
  }

  double shell(double r, double a, double b) const {
    if (std::isfinite(cutoff)) {
      a = std::max(a, r - cutoff);
      b = std::min(b, r + cutoff);
      if (b <= a) return 0.0;
    }
    if (r > a && r < b) return radial_piece(r, a, r) + radial_piece(r, r, b);
    return radial_piece(r, a, b);
  }
};

}  // namespace

double shell_field(const InteractionKernel& kernel, double scale, double r, double a, double b, int order) {
  require(r > 0.0, ErrorCode::domain, "shell_field needs r > 0");
  require(scale > 0.0, ErrorCode::invalid_argument, "kernel scale must be positive");
  return ShellIntegrator(kernel, scale, order).shell(r, a, b);
}

RadialConvolutionOperator::RadialConvolutionOperator(std::shared_ptr<const InteractionKernel> kernel, GridPtr grid,
                                                     const ConvolutionOptions& options)
    : kernel_(std::move(kernel)), grid_(std::move(grid)), options_(options) {
  require(kernel_ != nullptr && grid_ != nullptr, ErrorCode::invalid_argument, "operator needs a kernel and a grid");
  require(kernel_->dim() == grid_->dim(), ErrorCode::grid_mismatch, "kernel and grid dimensions differ");
  require(options_.quadrature_order >= 8, ErrorCode::invalid_argument, "quadrature order must be >= 8");
  require(options_.scale > 0.0, ErrorCode::invalid_argument, "kernel scale must be positive");
  shell_theorem_ = kernel_->family() == KernelFamily::newtonian && !options_.force_matrix;
  if (shell_theorem_) return;

  const std::size_t n = static_cast<std::size_t>(grid_->size());
  if (2 * n * n + n > options_.max_entries) {
    std::ostringstream msg;
    msg << "convolution matrix for n = " << n << " exceeds the entry cap " << options_.max_entries;
    fail(ErrorCode::memory_cap, msg.str());
  }
  ShellIntegrator integ(*kernel_, options_.scale, options_.quadrature_order);
  center_matrix_.assign(n * n, 0.0);
  face_matrix_.assign((n + 1) * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double a = grid_->face(static_cast<int>(j)), b = grid_->face(static_cast<int>(j) + 1);
    for (std::size_t i = 0; i < n; ++i) center_matrix_[i * n + j] = integ.shell(grid_->center(static_cast<int>(i)), a, b);
    for (std::size_t f = 1; f <= n; ++f) face_matrix_[f * n + j] = integ.shell(grid_->face(static_cast<int>(f)), a, b);
  }
}

void RadialConvolutionOperator::check(const DensityField& u) const {
  require(u.grid() == *grid_, ErrorCode::grid_mismatch, "density is not on the operator grid");
}

std::vector<double> RadialConvolutionOperator::shell_theorem(const DensityField& u, bool faces) const {
  const int n = grid_->size(), d = grid_->dim();
  const double area = numerics::sphere_area(d);
  std::vector<double> out(faces ? n + 1 : n, 0.0);
  double enclosed = 0.0;
  for (int i = 0; i < n; ++i) {
    if (faces) {
      enclosed += grid_->volume(i) * u[i];
      double rf = grid_->face(i + 1);
      out[i + 1] = -enclosed / (area * std::pow(rf, d - 1));
    } else {
      double rc = grid_->center(i);
      double partial = u[i] * area * (std::pow(rc, d) - std::pow(grid_->face(i), d)) / d;
      out[i] = -(enclosed + partial) / (area * std::pow(rc, d - 1));
      enclosed += grid_->volume(i) * u[i];
    }
  }
  return out;
}

std::vector<double> RadialConvolutionOperator::at_centers(const DensityField& u) const {
  check(u);
  if (shell_theorem_) return shell_theorem(u, false);
  const std::size_t n = static_cast<std::size_t>(grid_->size());
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &center_matrix_[i * n];
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * u[static_cast<int>(j)];
    out[i] = acc;
  }
  return out;
}

std::vector<double> RadialConvolutionOperator::at_faces(const DensityField& u) const {
  check(u);
  if (shell_theorem_) return shell_theorem(u, true);
  const std::size_t n = static_cast<std::size_t>(grid_->size());
  std::vector<double> out(n + 1, 0.0);
  auto vals = u.values();
  for (std::size_t f = 1; f <= n; ++f) {
    const double* row = &face_matrix_[f * n];
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * vals[j];
    out[f] = acc;
  }
  return out;
}

double RadialConvolutionOperator::center_weight(int i, int j) const {
  if (shell_theorem_) {
    DensityField unit(grid_);
    unit[j] = 1.0;
    return shell_theorem(unit, false)[i];
  }
  const std::size_t n = static_cast<std::size_t>(grid_->size());
  return center_matrix_[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)];
}

std::vector<double> attraction_velocity(const RadialConvolutionOperator& op, const DensityField& u) {
  return op.at_centers(u);
}

}  // namespace aggdiff
