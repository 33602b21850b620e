#pragma once

#include <cstdint>
#include <vector>

#include "mixbma/lincode.hpp"
#include "mixbma/poisgeo.hpp"
#include "mixbma/quadrature.hpp"
#include "mixbma/rng.hpp"
#include "mixbma/sampler.hpp"

namespace mixbma::oracle {

// Brute-force ground truth kept deliberately apart from the estimators it
// checks: marginals by adaptive quadrature, an exact iid sampler for the
// count-data mixture posterior, and one fully analytic Gaussian case.

struct QuadratureSpec {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  // The lambda axis is integrated as eta = log(lambda) on a window of this
  // half-width around the crude mode; the integrand underflows far inside
  // it for every dataset in scope.
  double eta_halfwidth = 40.0;
};

enum class PoisGeoModel { pois, geo };

struct LogMarginal {
  double log_value = 0.0;
  double rel_error = 0.0;
};

// Marginal likelihood of the count data under one model and the 1/lambda
// prior, via quadrature over eta = log lambda.  The integrand re-sums the
// per-observation pmf terms; it never touches the closed forms it is used
// to validate.
LogMarginal quad_marginal_poisgeo(const poisgeo::CountData& data,
                                  PoisGeoModel model,
                                  const QuadratureSpec& spec = {});

// pi(M0 | y) from the quadrature marginals.
double quad_posterior_prob_m0(const poisgeo::CountData& data, double p0,
                              double p1, const QuadratureSpec& spec = {});

struct ExactDraw {
  double lambda = 0.0;
  int component = 0;  // 0 = Poisson posterior, 1 = Geometric posterior
};

// Exact iid sampler for the mixture posterior: a Gamma(S_n, n) component
// and a Beta-prime component lambda = u/(1-u), u ~ Beta(S_n, n), mixed with
// the quadrature-derived pi(M0|y).  The iid counterpart to the MCMC chain
// for the variance-bound check.
class ExactPoisGeoSampler {
 public:
  ExactPoisGeoSampler(const poisgeo::CountData& data, double p0, double p1,
                      const QuadratureSpec& spec = {});

  double prob_m0() const { return prob_m0_; }
  ExactDraw draw(Rng& rng) const;
  std::vector<ExactDraw> sample(long count, Rng& rng) const;

  // Package iid draws as a Chain (coordinate eta = log lambda with the
  // per-model log-likelihoods filled in), so the production analysis path
  // can run on them unchanged.
  Chain as_chain(const std::vector<ExactDraw>& draws) const;

 private:
  poisgeo::CountData data_;
  double p0_ = 0.5, p1_ = 0.5;
  double prob_m0_ = 0.0;
};

// Analytic end-to-end check: y ~ N(0,1) against y|mu ~ N(mu,1) with shared
// prior mu ~ N(0,1); both marginals are normal densities in y.
struct ConjugateGaussian {
  double m0 = 0.0;       // phi(y; 0, 1)
  double m1 = 0.0;       // phi(y; 0, 2)
  double prob_m0 = 0.0;  // equal model weights
};

ConjugateGaussian conjugate_gaussian_case(double y);

// The matching sampling ensemble over mu (prior N(0,1), identity coord).
MixtureEnsemble make_conjugate_gaussian_ensemble(double y, double p0 = 0.5,
                                                 double p1 = 0.5);
ChainConfig conjugate_gaussian_config(std::uint64_t seed);
ProposalSpec conjugate_gaussian_proposal();

struct KappaMarginal {
  double log_m1 = 0.0;     // integral of [y | k=1/kappa, M1] over (0,1)
  double rel_error = 0.0;
  double prob_m0 = 0.0;    // p0 m0 / (p0 m0 + p1 m1)
};

// 1-d quadrature over kappa of the exactly recomputed collapsed evidence
// (the grid approximation is bypassed on purpose).
KappaMarginal quad_kappa_marginal_lincode(
    const lincode::LinCodeCollapsed& collapsed,
    const QuadratureSpec& spec = {});

// 2-d quadrature over (theta, log lambda) of the un-collapsed discrepancy
// model evidence at fixed k, for p = 1 designs.  Centering comes from an
// SVD least-squares fit, the V_k algebra from an LDLT factorization -
// neither shared with the collapse path under test.
double quad2d_lincode_evidence(const lincode::LinCodeData& data,
                               const Eigen::MatrixXd& corr, double k,
                               const QuadratureSpec& spec = {});

}  // namespace mixbma::oracle
