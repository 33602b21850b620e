#include "mixbma/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mixbma/core.hpp"

namespace mixbma::oracle {

namespace {

const double kLog2Pi = std::log(2.0 * 3.14159265358979323846264338327950288);

double softplus(double eta) {
  return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
}

void require_positive_total(const poisgeo::CountData& data) {
  if (data.total() < 1)
    throw std::runtime_error(
        "marginal undefined (improper prior mass at lambda -> 0)");
}

// Stable p0 a / (p0 a + p1 b) from log a, log b.
double prob_from_logs(double p0, double log_a, double p1, double log_b) {
  return 1.0 / (1.0 + std::exp(std::log(p1) + log_b - std::log(p0) - log_a));
}

}  // namespace

LogMarginal quad_marginal_poisgeo(const poisgeo::CountData& data,
                                  PoisGeoModel model,
                                  const QuadratureSpec& spec) {
  require_positive_total(data);
  // Per-observation pmf sums on the eta = log(lambda) axis, where the
  // Jeffreys prior contributes nothing: intentionally not the pooled
  // S_n-based closed-form algebra this oracle exists to validate.
  const std::vector<long>& y = data.counts();
  const auto log_f = [&](double eta) {
    double acc = 0.0;
    if (model == PoisGeoModel::pois) {
      for (long yi : y)
        acc += static_cast<double>(yi) * eta - std::exp(eta) -
               std::lgamma(static_cast<double>(yi) + 1.0);
    } else {
      for (long yi : y)
        acc += static_cast<double>(yi) * eta -
               (static_cast<double>(yi) + 1.0) * softplus(eta);
    }
    return acc;
  };
  const double center =
      std::log(std::max(static_cast<double>(data.total()), 1.0) /
               static_cast<double>(data.n()));
  QuadOptions opt;
  opt.abs_tol = spec.abs_tol;
  opt.rel_tol = 0.1 * spec.rel_tol;
  const LogQuadResult r = integrate_log(log_f, center - spec.eta_halfwidth,
                                        center + spec.eta_halfwidth, opt);
  return {r.log_value, r.rel_error};
}

double quad_posterior_prob_m0(const poisgeo::CountData& data, double p0,
                              double p1, const QuadratureSpec& spec) {
  const LogMarginal m0 = quad_marginal_poisgeo(data, PoisGeoModel::pois, spec);
  const LogMarginal m1 = quad_marginal_poisgeo(data, PoisGeoModel::geo, spec);
  return prob_from_logs(p0, m0.log_value, p1, m1.log_value);
}

ExactPoisGeoSampler::ExactPoisGeoSampler(const poisgeo::CountData& data,
                                         double p0, double p1,
                                         const QuadratureSpec& spec)
    : data_(data), p0_(p0), p1_(p1) {
  require_positive_total(data_);
  if (!(p0 > 0.0) || !(p1 > 0.0) || std::abs(p0 + p1 - 1.0) > 1e-12)
    throw std::invalid_argument("model weights must be positive and sum to 1");
  prob_m0_ = quad_posterior_prob_m0(data_, p0, p1, spec);
}

ExactDraw ExactPoisGeoSampler::draw(Rng& rng) const {
  const double sn = static_cast<double>(data_.total());
  const double n = static_cast<double>(data_.n());
  ExactDraw d;
  d.component = rng.uniform() < prob_m0_ ? 0 : 1;
  if (d.component == 0) {
    d.lambda = rng.gamma(sn, n);
  } else {
    const double u = rng.beta(sn, n);
    d.lambda = u / (1.0 - u);
  }
  return d;
}

std::vector<ExactDraw> ExactPoisGeoSampler::sample(long count,
                                                   Rng& rng) const {
  std::vector<ExactDraw> out(static_cast<size_t>(count));
  for (auto& d : out) d = draw(rng);
  return out;
}

Chain ExactPoisGeoSampler::as_chain(const std::vector<ExactDraw>& draws) const {
  const MixtureEnsemble ensemble = poisgeo::make_ensemble(data_, p0_, p1_);
  const long S = static_cast<long>(draws.size());
  Chain chain;
  chain.draws.resize(S, 1);
  chain.per_model_loglik.resize(S, 2);
  chain.iteration.resize(static_cast<size_t>(S));
  Eigen::VectorXd eta(1);
  for (long s = 0; s < S; ++s) {
    eta[0] = std::log(draws[static_cast<size_t>(s)].lambda);
    const MixtureLogDensity d = log_mixture_density(ensemble, eta);
    chain.draws(s, 0) = eta[0];
    chain.per_model_loglik.row(s) = d.per_model_loglik.transpose();
    chain.iteration[static_cast<size_t>(s)] = s;
  }
  chain.acceptance_rate = 1.0;
  return chain;
}

ConjugateGaussian conjugate_gaussian_case(double y) {
  ConjugateGaussian out;
  const double sqrt_2pi = std::exp(0.5 * kLog2Pi);
  out.m0 = std::exp(-0.5 * y * y) / sqrt_2pi;
  out.m1 = std::exp(-0.25 * y * y) / (sqrt_2pi * std::sqrt(2.0));
  // log m1 - log m0 = y^2/4 - (1/2) log 2; the stable form survives tails
  // where the densities themselves underflow.
  out.prob_m0 =
      1.0 / (1.0 + std::exp(0.25 * y * y - 0.5 * std::log(2.0)));
  return out;
}

MixtureEnsemble make_conjugate_gaussian_ensemble(double y, double p0,
                                                 double p1) {
  std::vector<CandidateModel> models(2);
  models[0].name = "m0";
  models[0].prior_weight = p0;
  const double log_f0 = -0.5 * y * y - 0.5 * kLog2Pi;
  models[0].log_likelihood = [log_f0](const Eigen::VectorXd&) {
    return log_f0;
  };
  models[1].name = "m1";
  models[1].prior_weight = p1;
  models[1].log_likelihood = [y](const Eigen::VectorXd& th) {
    const double r = y - th[0];
    return -0.5 * r * r - 0.5 * kLog2Pi;
  };
  LogPriorFn prior = [](const Eigen::VectorXd& th) {
    return -0.5 * th[0] * th[0] - 0.5 * kLog2Pi;
  };
  return MixtureEnsemble(std::move(models), std::move(prior),
                         {{"mu", CoordTransform::identity}});
}

ChainConfig conjugate_gaussian_config(std::uint64_t seed) {
  ChainConfig c;
  c.iterations = 100000;
  c.burn_in = 10000;
  c.thin = 10;
  c.seed = seed;
  return c;
}

ProposalSpec conjugate_gaussian_proposal() {
  return ProposalSpec::random_walk(Eigen::VectorXd::Constant(1, 1.0));
}

KappaMarginal quad_kappa_marginal_lincode(
    const lincode::LinCodeCollapsed& collapsed, const QuadratureSpec& spec) {
  QuadOptions opt;
  opt.abs_tol = spec.abs_tol;
  opt.rel_tol = 0.1 * spec.rel_tol;
  const LogQuadResult r = integrate_log(
      [&](double kappa) { return collapsed.log_evidence_m1_exact(kappa); },
      0.0, 1.0, opt);
  KappaMarginal out;
  out.log_m1 = r.log_value;
  out.rel_error = r.rel_error;
  out.prob_m0 = prob_from_logs(collapsed.p0(), collapsed.m0().log_m0,
                               collapsed.p1(), r.log_value);
  return out;
}

double quad2d_lincode_evidence(const lincode::LinCodeData& data,
                               const Eigen::MatrixXd& corr, double k,
                               const QuadratureSpec& spec) {
  if (data.p() != 1)
    throw std::invalid_argument("2-d quadrature oracle handles p = 1 only");
  const long n = data.n();
  const double nd = static_cast<double>(n);

  const Eigen::MatrixXd vk =
      Eigen::MatrixXd::Identity(n, n) + k * corr;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(vk);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("V_k factorization failed in the oracle");
  const double log_det_v = ldlt.vectorD().array().log().sum();

  // Independent centering: SVD least squares, plain residual scale.
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      data.g(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double theta_hat = svd.solve(data.y())[0];
  const double s = std::sqrt(
      (data.y() - data.g() * theta_hat).squaredNorm() / (nd - 1.0));
  const double g_norm = data.g().col(0).norm();

  // Quadratic form r^T V_k^{-1} r through the LDLT solve.
  const auto log_f = [&](double theta, double eta) {
    const Eigen::VectorXd r = data.y() - data.g() * theta;
    const double q = ldlt.solve(r).dot(r);
    return -0.5 * nd * kLog2Pi - 0.5 * log_det_v - nd * eta -
           0.5 * q * std::exp(-2.0 * eta);
  };

  // Windows wide enough for the heavy t tails (df = n - p >= 3); the
  // adaptive rule disposes of the dead zones cheaply.
  const double w_theta =
      200.0 * (s / g_norm) * std::sqrt(1.0 + k * nd) + 1e-3;
  const double eta_c = std::log(s);
  const double eta_hw = 16.0 + std::log1p(k);

  QuadOptions inner_opt;
  inner_opt.abs_tol = spec.abs_tol;
  inner_opt.rel_tol = 0.01 * spec.rel_tol;
  QuadOptions outer_opt;
  outer_opt.abs_tol = spec.abs_tol;
  outer_opt.rel_tol = spec.rel_tol;

  const auto outer = [&](double theta) {
    return integrate_log([&](double eta) { return log_f(theta, eta); },
                         eta_c - eta_hw, eta_c + eta_hw, inner_opt)
        .log_value;
  };
  return integrate_log(outer, theta_hat - w_theta, theta_hat + w_theta,
                       outer_opt)
      .log_value;
}

}  // namespace mixbma::oracle
