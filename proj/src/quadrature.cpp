#include "mixbma/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace mixbma {

namespace {

// 15-point Kronrod abscissae (positive half) with the embedded 7-point
// Gauss rule at the odd indices.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

constexpr double kWgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

constexpr double kWg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
};

Panel g7k15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double kron = 0.0, gauss = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double fi = (i == 7)
                          ? f(c)
                          : f(c - h * kXgk[i]) + f(c + h * kXgk[i]);
    kron += kWgk[i] * fi;
    if (i % 2 == 1) gauss += kWg[i / 2] * fi;
  }
  kron *= h;
  gauss *= h;
  if (std::isnan(kron))
    throw std::runtime_error("integrand produced NaN");
  return {a, b, kron, std::abs(kron - gauss)};
}

}  // namespace

QuadResult integrate(const std::function<double(double)>& f, double a,
                     double b, const QuadOptions& opt) {
  if (!(a < b)) throw std::invalid_argument("integration needs a < b");
  std::vector<Panel> panels{g7k15(f, a, b)};
  for (;;) {
    double value = 0.0, error = 0.0;
    size_t worst = 0;
    for (size_t i = 0; i < panels.size(); ++i) {
      value += panels[i].value;
      error += panels[i].error;
      if (panels[i].error > panels[worst].error) worst = i;
    }
    const double target = std::max(opt.abs_tol, opt.rel_tol * std::abs(value));
    if (error <= target)
      return {value, error, static_cast<int>(panels.size()), true};
    if (static_cast<int>(panels.size()) >= opt.max_intervals) {
      std::ostringstream os;
      os << "quadrature failed to converge: error estimate " << error
         << " above target " << target << " after " << panels.size()
         << " intervals";
      throw std::runtime_error(os.str());
    }
    const Panel w = panels[worst];
    const double mid = 0.5 * (w.a + w.b);
    panels[worst] = g7k15(f, w.a, mid);
    panels.push_back(g7k15(f, mid, w.b));
  }
}

LogQuadResult integrate_log(const std::function<double(double)>& log_f,
                            double a, double b, const QuadOptions& opt) {
  if (!(a < b)) throw std::invalid_argument("integration needs a < b");
  // Coarse interior scan for the max; endpoints excluded so endpoint
  // singularities of log_f stay out of the shift.
  constexpr int kScan = 257;
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 1; i < kScan; ++i) {
    const double x = a + (b - a) * i / kScan;
    m = std::max(m, log_f(x));
  }
  if (!std::isfinite(m))
    throw std::runtime_error("log-integrand has no finite values on scan");
  const auto f = [&](double x) { return std::exp(log_f(x) - m); };
  const QuadResult q = integrate(f, a, b, opt);
  if (!(q.value > 0.0))
    throw std::runtime_error("log-domain integral is not positive");
  return {m + std::log(q.value), q.error_estimate / q.value, q.intervals};
}

}  // namespace mixbma
