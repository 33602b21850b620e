#pragma once

#include <functional>

namespace mixbma {

struct QuadOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-9;
  int max_intervals = 4000;
};

struct QuadResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int intervals = 0;
  bool converged = false;
};

// Adaptive Gauss-Kronrod (G7/K15) on a finite interval.  Bisects the
// interval with the largest error estimate until the summed estimate meets
// max(abs_tol, rel_tol * |value|).  Throws std::runtime_error on
// non-convergence, reporting the error reached.  Interior nodes only, so
// integrands may be singular at the endpoints themselves.
QuadResult integrate(const std::function<double(double)>& f, double a,
                     double b, const QuadOptions& opt = {});

struct LogQuadResult {
  double log_value = 0.0;  // log of the integral of exp(log_f)
  double rel_error = 0.0;
  int intervals = 0;
};

// Integrate exp(log_f) over [a, b] without overflow: the maximum of log_f on
// a coarse scan is subtracted before exponentiating and restored afterwards.
LogQuadResult integrate_log(const std::function<double(double)>& log_f,
                            double a, double b, const QuadOptions& opt = {});

}  // namespace mixbma
