#pragma once

#include "aggdiff/fields.hpp"

namespace aggdiff {

// H[theta] = 1/(m-1) int theta^m + 1/2 int |xi|^2 theta
double entropy_H(const DensityField& theta, double m);

// I[theta] = int theta |m/(m-1) grad theta^{m-1} + xi|^2. Cells below
// floor_ratio * max(theta) are treated as vacuum.
double entropy_I(const DensityField& theta, double m, double floor_ratio = 1e-12);

// H[theta_M] for m = 2 - 2/d, by quadrature of the closed form.
double stationary_entropy(double mass, int dim);

// H[theta] - H[theta_M], with theta_M the discrete minimizer on the same grid
// (so the value is >= 0 up to roundoff); mass(theta) must equal `mass` to 1e-6 relative.
double relative_entropy(const DensityField& theta, double mass, int dim);

struct LogSobolevAudit {
  double h_rel = 0.0;
  double half_i = 0.0;
  double slack = 0.0;  // half_i - h_rel
};

LogSobolevAudit log_sobolev_slack(const DensityField& f, int dim);

struct CsiszarKullback {
  double ratio = 0.0;  // |theta - theta_M|_1 / sqrt(H_rel)
  double l1 = 0.0;
  double h_rel = 0.0;
  bool indeterminate = false;
};

CsiszarKullback csiszar_kullback_ratio(const DensityField& theta, double mass, int dim, double tol = 1e-10);

struct EquiIntegrability {
  double truncated_l1 = 0.0;  // |(theta - k)_+|_1
  double bound = 0.0;         // k^{1-m} |theta|_m^m
};

EquiIntegrability equi_integrability_bound(const DensityField& theta, double k, double m);

struct Exponents {
  double p = 0.0;
  double epsilon = 0.0;
};

// 1/p = 1 + (m-1)/(2m) - 1/q and epsilon = d/q - d + 1, for 1 <= q < d/(d-1).
Exponents exponents(double q, double m, int dim);

struct EntropyReport {
  double H = 0.0;
  double I = 0.0;
  double H_rel = 0.0;
  double mass = 0.0;
  double m = 0.0;
  int dim = 0;
  int cells = 0;
  double r_max = 0.0;
};

// Full report for a similarity-variable density of the given mass (m = 2 - 2/d).
EntropyReport entropy_report(const DensityField& theta, double mass);

}  // namespace aggdiff
