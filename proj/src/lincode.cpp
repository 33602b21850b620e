#include "mixbma/lincode.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace mixbma::lincode {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLogPi = std::log(3.14159265358979323846264338327950288);
const double kLogHalf = std::log(0.5);

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Type-1 empirical quantile, matching the weighted rule with equal weights.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const long m = static_cast<long>(sorted.size());
  long i = static_cast<long>(std::ceil(q * static_cast<double>(m))) - 1;
  i = std::clamp(i, 0L, m - 1);
  return sorted[static_cast<size_t>(i)];
}

}  // namespace

LinCodeData::LinCodeData(Eigen::VectorXd x, Eigen::VectorXd y)
    : LinCodeData(std::move(x), std::move(y),
                  [](double v) {
                    Eigen::RowVectorXd r(1);
                    r[0] = v;
                    return r;
                  },
                  1) {}

LinCodeData::LinCodeData(Eigen::VectorXd x, Eigen::VectorXd y, BasisFn basis,
                         int p)
    : x_(std::move(x)), y_(std::move(y)), basis_(std::move(basis)) {
  if (x_.size() != y_.size())
    throw std::invalid_argument("x and y differ in length");
  if (p < 1) throw std::invalid_argument("design needs p >= 1");
  if (!basis_) throw std::invalid_argument("missing basis function");
  for (Eigen::Index i = 0; i < x_.size(); ++i)
    if (!std::isfinite(x_[i]) || !std::isfinite(y_[i]))
      throw std::invalid_argument("data contains non-finite values");
  g_.resize(x_.size(), p);
  for (Eigen::Index i = 0; i < x_.size(); ++i) {
    const Eigen::RowVectorXd row = basis_(x_[i]);
    if (row.size() != p)
      throw std::invalid_argument("basis row has wrong length");
    g_.row(i) = row;
  }
  finish_init();
}

void LinCodeData::finish_init() {
  const long n = x_.size();
  const int p = static_cast<int>(g_.cols());
  if (n - p < 3)
    throw std::invalid_argument(
        "need n - p >= 3 for a proper noise posterior");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g_);
  if (qr.rank() < p)
    throw std::invalid_argument("design matrix is rank deficient");
}

LinCodeData LinCodeData::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty data file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,y")
    throw std::runtime_error("expected header 'x,y' in " + path);
  std::vector<double> xs, ys;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("malformed data row: '" + line + "'");
    xs.push_back(std::stod(line.substr(0, comma)));
    ys.push_back(std::stod(line.substr(comma + 1)));
  }
  Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(xs.data(), xs.size());
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), ys.size());
  return LinCodeData(std::move(x), std::move(y));
}

void LinCodeData::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write data file: " + path);
  out << "x,y\n";
  char buf[80];
  for (Eigen::Index i = 0; i < x_.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x_[i], y_[i]);
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void KernelSpec::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (!(jitter >= 0.0))
    throw std::invalid_argument("jitter must be non-negative");
}

Eigen::MatrixXd se_kernel(const Eigen::VectorXd& x, const KernelSpec& spec) {
  spec.validate();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]))
      throw std::invalid_argument("covariates must be finite");
  const long n = x.size();
  Eigen::MatrixXd corr(n, n);
  for (long i = 0; i < n; ++i) {
    corr(i, i) = 1.0 + spec.jitter;
    for (long j = 0; j < i; ++j) {
      const double d = (x[i] - x[j]) / spec.gamma;
      corr(i, j) = corr(j, i) = std::exp(-d * d);
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(
        "correlation matrix is not positive definite; increase the jitter");
  return corr;
}

CollapsedM0 collapsed_m0(const LinCodeData& data) {
  const long n = data.n();
  const int p = data.p();
  const double q = static_cast<double>(n - p);

  CollapsedM0 out;
  const Eigen::MatrixXd a = data.g().transpose() * data.g();
  const Eigen::LLT<Eigen::MatrixXd> llt_a(a);
  if (llt_a.info() != Eigen::Success)
    throw std::runtime_error("design matrix is rank deficient");
  out.mu0 = llt_a.solve(data.g().transpose() * data.y());
  out.sigma0 = llt_a.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::VectorXd r = data.y() - data.g() * out.mu0;
  out.resid_norm = r.norm();
  if (!(out.resid_norm > 1e-12 * data.y().norm()))
    throw std::runtime_error("degenerate data: zero residual");
  const double log_det_sigma0 = -log_det_from_llt(llt_a);
  out.log_m0 = kLogHalf + std::lgamma(q / 2.0) - (q / 2.0) * kLogPi +
               0.5 * log_det_sigma0 - q * std::log(out.resid_norm);
  out.sigma0_llt.compute(out.sigma0);
  if (out.sigma0_llt.info() != Eigen::Success)
    throw std::runtime_error("Sigma0 factorization failed");
  return out;
}

CollapsedM1 collapsed_m1_given_k(const LinCodeData& data,
                                 const Eigen::MatrixXd& corr, double k) {
  if (!(k >= 0.0)) throw std::invalid_argument("k must be non-negative");
  const long n = data.n();
  const int p = data.p();
  const double q = static_cast<double>(n - p);

  CollapsedM1 out;
  out.k = k;
  const Eigen::MatrixXd vk =
      Eigen::MatrixXd::Identity(n, n) + k * corr;
  out.vk_llt.compute(vk);
  if (out.vk_llt.info() != Eigen::Success)
    throw std::runtime_error("V_k factorization failed");

  // Whiten once; every determinant and norm below reuses the factor.
  const auto l = out.vk_llt.matrixL();
  const Eigen::VectorXd wy = l.solve(data.y());
  const Eigen::MatrixXd wg = l.solve(data.g());
  const Eigen::MatrixXd a = wg.transpose() * wg;
  const Eigen::LLT<Eigen::MatrixXd> llt_a(a);
  if (llt_a.info() != Eigen::Success)
    throw std::runtime_error("whitened design is rank deficient");
  out.mu1 = llt_a.solve(wg.transpose() * wy);
  out.sigma1 = llt_a.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::VectorXd wres = wy - wg * out.mu1;
  out.whitened_resid_norm = wres.norm();
  if (!(out.whitened_resid_norm > 1e-12 * wy.norm()))
    throw std::runtime_error("degenerate data: zero whitened residual");

  const double log_det_v = log_det_from_llt(out.vk_llt);
  const double log_det_sigma1 = -log_det_from_llt(llt_a);
  out.log_evidence = kLogHalf + std::lgamma(q / 2.0) - (q / 2.0) * kLogPi +
                     0.5 * (log_det_sigma1 - log_det_v) -
                     q * std::log(out.whitened_resid_norm);
  out.sigma1_llt.compute(out.sigma1);
  if (out.sigma1_llt.info() != Eigen::Success)
    throw std::runtime_error("Sigma1 factorization failed");
  return out;
}

LinCodeCollapsed::LinCodeCollapsed(LinCodeData data, KernelSpec kernel,
                                   double p0, double p1, int grid_size,
                                   bool use_grid)
    : data_(std::move(data)),
      kernel_(kernel),
      p0_(p0),
      p1_(p1),
      grid_size_(grid_size),
      use_grid_(use_grid) {
  kernel_.validate();
  if (!(p0_ > 0.0) || !(p1_ > 0.0) || std::abs(p0_ + p1_ - 1.0) > 1e-12)
    throw std::invalid_argument("model weights must be positive and sum to 1");
  if (use_grid_ && grid_size_ < 2)
    throw std::invalid_argument("kappa grid needs at least 2 nodes");
  corr_ = se_kernel(data_.x(), kernel_);
  corr_llt_.compute(corr_);
  if (corr_llt_.info() != Eigen::Success)
    throw std::runtime_error(
        "correlation matrix is not positive definite; increase the jitter");
  m0_ = collapsed_m0(data_);
  if (use_grid_) {
    grid_.reserve(static_cast<size_t>(grid_size_));
    for (int i = 0; i < grid_size_; ++i) {
      const double kappa = (i + 0.5) / static_cast<double>(grid_size_);
      grid_.push_back(collapsed_m1_given_k(data_, corr_, 1.0 / kappa));
    }
  }
}

int LinCodeCollapsed::snap(double kappa) const {
  const int i = static_cast<int>(
      std::floor(kappa * static_cast<double>(grid_size_)));
  return std::clamp(i, 0, grid_size_ - 1);
}

double LinCodeCollapsed::log_evidence_m1(double kappa) const {
  if (!(kappa > 0.0 && kappa < 1.0)) return -kInf;
  if (use_grid_) return grid_[static_cast<size_t>(snap(kappa))].log_evidence;
  return collapsed_m1_given_k(data_, corr_, 1.0 / kappa).log_evidence;
}

double LinCodeCollapsed::log_evidence_m1_exact(double kappa) const {
  if (!(kappa > 0.0 && kappa < 1.0)) return -kInf;
  return collapsed_m1_given_k(data_, corr_, 1.0 / kappa).log_evidence;
}

CollapsedM1 LinCodeCollapsed::conditionals_at(double kappa) const {
  if (!(kappa > 0.0 && kappa < 1.0))
    throw std::invalid_argument("kappa must lie in (0, 1)");
  if (use_grid_) return grid_[static_cast<size_t>(snap(kappa))];
  return collapsed_m1_given_k(data_, corr_, 1.0 / kappa);
}

double LinCodeCollapsed::kappa_log_posterior(double kappa) const {
  if (!(kappa > 0.0 && kappa < 1.0)) return -kInf;
  Eigen::VectorXd terms(2);
  terms[0] = std::log(p0_) + m0_.log_m0;
  terms[1] = std::log(p1_) + log_evidence_m1(kappa);
  return logsumexp(terms);
}

double LinCodeCollapsed::conditional_model_prob_m0(double kappa) const {
  Eigen::VectorXd terms(2);
  terms[0] = std::log(p0_) + m0_.log_m0;
  terms[1] = std::log(p1_) + log_evidence_m1(kappa);
  return std::exp(terms[0] - logsumexp(terms));
}

MixtureEnsemble LinCodeCollapsed::make_ensemble() const {
  std::vector<CandidateModel> models(2);
  models[0].name = "m0";
  models[0].prior_weight = p0_;
  const double lm0 = m0_.log_m0;
  models[0].log_likelihood = [lm0](const Eigen::VectorXd&) { return lm0; };
  models[1].name = "m1";
  models[1].prior_weight = p1_;
  models[1].log_likelihood = [this](const Eigen::VectorXd& th) {
    return log_evidence_m1(th[0]);
  };
  LogPriorFn prior = [](const Eigen::VectorXd& th) {
    return (th[0] > 0.0 && th[0] < 1.0) ? 0.0 : -kInf;
  };
  return MixtureEnsemble(std::move(models), std::move(prior),
                         {{"kappa", CoordTransform::identity}});
}

ChainConfig default_config(std::uint64_t seed) {
  ChainConfig c;
  c.iterations = 10000;
  c.burn_in = 1000;
  c.thin = 5;
  c.seed = seed;
  return c;
}

Chain run_kappa_imh(const LinCodeCollapsed& collapsed,
                    const ChainConfig& config) {
  const MixtureEnsemble ensemble = collapsed.make_ensemble();
  const ProposalSpec proposal = ProposalSpec::independent(
      Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
  return run_chain(ensemble, Eigen::VectorXd::Constant(1, 0.5), proposal,
                   config);
}

std::vector<ReconstructionDraw> reconstruct(const Chain& chain,
                                            const LinCodeCollapsed& collapsed,
                                            Rng& rng) {
  if (chain.size() == 0) throw std::invalid_argument("empty chain");
  const LinCodeData& data = collapsed.data();
  const long n = data.n();
  const int p = data.p();
  const double q = static_cast<double>(n - p);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);

  std::vector<ReconstructionDraw> out;
  out.reserve(static_cast<size_t>(chain.size()));
  Eigen::VectorXd z(p), zn(n);
  for (long s = 0; s < chain.size(); ++s) {
    ReconstructionDraw d;
    d.kappa = chain.draws(s, 0);
    const double pm0 = collapsed.conditional_model_prob_m0(d.kappa);
    d.zeta = rng.bernoulli(1.0 - pm0) ? 1 : 0;
    if (d.zeta == 0) {
      const CollapsedM0& c = collapsed.m0();
      d.tau = rng.gamma(q / 2.0, c.resid_norm * c.resid_norm / 2.0);
      const double lambda = 1.0 / std::sqrt(d.tau);
      for (int j = 0; j < p; ++j) z[j] = rng.normal();
      d.theta = c.mu0 + lambda * (c.sigma0_llt.matrixL() * z).eval();
      d.delta = Eigen::VectorXd::Zero(n);
    } else {
      const CollapsedM1 c = collapsed.conditionals_at(d.kappa);
      d.tau = rng.gamma(
          q / 2.0, c.whitened_resid_norm * c.whitened_resid_norm / 2.0);
      const double lambda = 1.0 / std::sqrt(d.tau);
      for (int j = 0; j < p; ++j) z[j] = rng.normal();
      d.theta = c.mu1 + lambda * (c.sigma1_llt.matrixL() * z).eval();
      // V = k Corr V_k^{-1}; Corr and V_k commute, so the product is
      // symmetric up to round-off and gets symmetrized explicitly.
      Eigen::MatrixXd v = c.k * c.vk_llt.solve(collapsed.corr());
      v = 0.5 * (v + v.transpose()).eval();
      Eigen::LLT<Eigen::MatrixXd> llt_v(v);
      if (llt_v.info() != Eigen::Success) {
        llt_v.compute(v + 1e-12 * eye);
        if (llt_v.info() != Eigen::Success)
          throw std::runtime_error("V_delta factorization failed");
      }
      const Eigen::VectorXd m = v * (data.y() - data.g() * d.theta);
      for (long j = 0; j < n; ++j) zn[j] = rng.normal();
      d.delta = m + lambda * (llt_v.matrixL() * zn).eval();
    }
    out.push_back(std::move(d));
  }
  return out;
}

TendencyPrediction predict_tendency(
    const std::vector<ReconstructionDraw>& draws,
    const LinCodeCollapsed& collapsed, const Eigen::VectorXd& x_grid) {
  if (draws.empty()) throw std::invalid_argument("no reconstruction draws");
  const LinCodeData& data = collapsed.data();
  const long n = data.n();
  const long m = static_cast<long>(draws.size());
  const long g_pts = x_grid.size();
  const double gamma = collapsed.kernel().gamma;

  TendencyPrediction out;
  out.x = x_grid;

  // GP conditional weights alpha_s = Corr^{-1} delta_s, one solve per
  // discrepancy draw.
  std::vector<Eigen::VectorXd> alpha(static_cast<size_t>(m));
  for (long s = 0; s < m; ++s)
    if (draws[static_cast<size_t>(s)].zeta == 1)
      alpha[static_cast<size_t>(s)] =
          collapsed.corr_llt().solve(draws[static_cast<size_t>(s)].delta);

  std::vector<long> group0, group1, all;
  for (long s = 0; s < m; ++s) {
    all.push_back(s);
    (draws[static_cast<size_t>(s)].zeta == 0 ? group0 : group1).push_back(s);
  }
  if (group0.empty())
    out.warnings.push_back("no draws assigned to m0; curves omitted");
  if (group1.empty())
    out.warnings.push_back("no draws assigned to m1; curves omitted");

  Eigen::MatrixXd tendency(m, g_pts);
  Eigen::VectorXd c(n);
  for (long gi = 0; gi < g_pts; ++gi) {
    const double xstar = x_grid[gi];
    const Eigen::RowVectorXd h = data.basis_row(xstar);
    long snap_idx = -1;
    for (long i = 0; i < n; ++i) {
      const double d = (xstar - data.x()[i]) / gamma;
      c[i] = std::exp(-d * d);
      if (std::abs(xstar - data.x()[i]) <= 1e-12) snap_idx = i;
    }
    for (long s = 0; s < m; ++s) {
      const auto& dr = draws[static_cast<size_t>(s)];
      double t = h.dot(dr.theta);
      if (dr.zeta == 1)
        // At an observed point the reconstructed delta is used verbatim;
        // elsewhere the GP conditional mean interpolates it.
        t += (snap_idx >= 0) ? dr.delta[snap_idx]
                             : c.dot(alpha[static_cast<size_t>(s)]);
      tendency(s, gi) = t;
    }
  }

  const auto band = [&](const std::vector<long>& group, TendencyBand& b) {
    if (group.empty()) return;
    b.present = true;
    b.mean.resize(g_pts);
    b.q025.resize(g_pts);
    b.q975.resize(g_pts);
    std::vector<double> vals(group.size());
    for (long gi = 0; gi < g_pts; ++gi) {
      double acc = 0.0;
      for (size_t i = 0; i < group.size(); ++i) {
        vals[i] = tendency(group[i], gi);
        acc += vals[i];
      }
      b.mean[gi] = acc / static_cast<double>(group.size());
      std::sort(vals.begin(), vals.end());
      b.q025[gi] = quantile_sorted(vals, 0.025);
      b.q975[gi] = quantile_sorted(vals, 0.975);
    }
  };
  band(group0, out.m0);
  band(group1, out.m1);
  band(all, out.bma);
  return out;
}

SimulatedLinCode simulate_lincode(long n, double theta_true,
                                  double lambda_true, double k_true,
                                  const KernelSpec& spec,
                                  std::uint64_t seed) {
  if (n < 4) throw std::invalid_argument("simulate needs n >= 4");
  if (!(lambda_true > 0.0))
    throw std::invalid_argument("lambda_true must be positive");
  if (!(k_true >= 0.0))
    throw std::invalid_argument("k_true must be non-negative");
  Eigen::VectorXd x(n);
  for (long i = 0; i < n; ++i)
    x[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  const Eigen::MatrixXd corr = se_kernel(x, spec);
  const Eigen::LLT<Eigen::MatrixXd> llt(corr);

  Rng rng(seed);
  Eigen::VectorXd z(n);
  for (long i = 0; i < n; ++i) z[i] = rng.normal();
  // scale 0 at k_true = 0 zeroes delta exactly, keeping the draw layout
  // independent of k_true.
  const Eigen::VectorXd delta =
      (lambda_true * std::sqrt(k_true)) * (llt.matrixL() * z).eval();
  Eigen::VectorXd eps(n);
  for (long i = 0; i < n; ++i) eps[i] = lambda_true * rng.normal();

  const Eigen::VectorXd y = theta_true * x + delta + eps;
  return {LinCodeData(x, y), delta};
}

}  // namespace mixbma::lincode
