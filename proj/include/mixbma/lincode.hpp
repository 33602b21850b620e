#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mixbma/core.hpp"
#include "mixbma/rng.hpp"
#include "mixbma/sampler.hpp"

namespace mixbma::lincode {

// Code basis h(x): maps one covariate to the p design entries.
using BasisFn = std::function<Eigen::RowVectorXd(double)>;

// Covariates, observations and the code design matrix.  Default basis is
// h(x) = (x), i.e. p = 1 and g[i][0] = x_i.  Requires full column rank and
// n - p >= 3 (the noise posterior needs a proper Gamma with finite
// variance).
class LinCodeData {
 public:
  LinCodeData(Eigen::VectorXd x, Eigen::VectorXd y);
  LinCodeData(Eigen::VectorXd x, Eigen::VectorXd y, BasisFn basis, int p);

  const Eigen::VectorXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::MatrixXd& g() const { return g_; }
  long n() const { return x_.size(); }
  int p() const { return static_cast<int>(g_.cols()); }
  Eigen::RowVectorXd basis_row(double xstar) const { return basis_(xstar); }

  // CSV with header "x,y"; values round-trip exactly.
  static LinCodeData read_file(const std::string& path);
  void write_file(const std::string& path) const;

 private:
  void finish_init();

  Eigen::VectorXd x_, y_;
  Eigen::MatrixXd g_;
  BasisFn basis_;
};

struct KernelSpec {
  double gamma = 0.2;   // correlation length
  double jitter = 1e-8; // diagonal ridge

  void validate() const;
};

// Corr[i][j] = exp(-((x_i-x_j)/gamma)^2) + jitter 1{i=j}.  Throws if the
// jittered matrix still fails a Cholesky factorization, advising a larger
// jitter.
Eigen::MatrixXd se_kernel(const Eigen::VectorXd& x, const KernelSpec& spec);

// Code-only model collapsed over (theta, lambda) under pi(theta, lambda)
// proportional to 1/lambda:
//   log m0 = log(1/2) + lgamma((n-p)/2) - ((n-p)/2) log(pi)
//            + (1/2) log|Sigma0| - (n-p) log ||y - g mu0||.
struct CollapsedM0 {
  double log_m0 = 0.0;
  Eigen::VectorXd mu0;
  Eigen::MatrixXd sigma0;           // (g^T g)^{-1}
  Eigen::LLT<Eigen::MatrixXd> sigma0_llt;
  double resid_norm = 0.0;
};

CollapsedM0 collapsed_m0(const LinCodeData& data);

// Discrepancy model at fixed signal-to-noise k, collapsed over (theta,
// lambda, delta); V_k = I + k Corr.  All determinants and the whitened
// residual come from one Cholesky factor of V_k.
struct CollapsedM1 {
  double k = 0.0;
  double log_evidence = 0.0;
  Eigen::VectorXd mu1;
  Eigen::MatrixXd sigma1;           // (g^T V_k^{-1} g)^{-1}
  Eigen::LLT<Eigen::MatrixXd> sigma1_llt;
  Eigen::LLT<Eigen::MatrixXd> vk_llt;
  double whitened_resid_norm = 0.0;
};

CollapsedM1 collapsed_m1_given_k(const LinCodeData& data,
                                 const Eigen::MatrixXd& corr, double k);

// Everything the kappa-marginal chain needs: the kernel, the code-only
// constants, and per-kappa conditionals.  With use_grid (the default) the
// conditionals are memoized on a midpoint grid kappa_i = (i + 1/2)/G and
// every kappa in cell i evaluates at kappa_i, making the chain's target a
// piecewise-constant approximation whose induced bias is second order in
// the cell width; exact mode recomputes per evaluation instead.
class LinCodeCollapsed {
 public:
  LinCodeCollapsed(LinCodeData data, KernelSpec kernel, double p0 = 0.5,
                   double p1 = 0.5, int grid_size = 2048,
                   bool use_grid = true);

  const LinCodeData& data() const { return data_; }
  const KernelSpec& kernel() const { return kernel_; }
  const Eigen::MatrixXd& corr() const { return corr_; }
  const Eigen::LLT<Eigen::MatrixXd>& corr_llt() const { return corr_llt_; }
  const CollapsedM0& m0() const { return m0_; }
  double p0() const { return p0_; }
  double p1() const { return p1_; }
  bool uses_grid() const { return use_grid_; }
  int grid_size() const { return grid_size_; }

  // log [y | k = 1/kappa, M1]; -inf outside (0,1).
  double log_evidence_m1(double kappa) const;
  // Same quantity recomputed from scratch, never snapped; used by the
  // quadrature oracle so it integrates the true curve, not the grid steps.
  double log_evidence_m1_exact(double kappa) const;
  // Conditionals block governing reconstruction at this kappa (snapped in
  // grid mode, consistent with the chain's target).
  CollapsedM1 conditionals_at(double kappa) const;

  // log pi(kappa | y) up to a constant: logsumexp of the two weighted
  // evidence terms; -inf outside (0,1).
  double kappa_log_posterior(double kappa) const;
  // pi(M0 | kappa, y) = p0 m0 / (p0 m0 + p1 [y|k=1/kappa, M1]).
  double conditional_model_prob_m0(double kappa) const;

  // Two-model ensemble over the single coordinate kappa with its uniform
  // prior on (0,1).  The evaluators reference this object: keep it alive
  // for the ensemble's lifetime.
  MixtureEnsemble make_ensemble() const;

 private:
  int snap(double kappa) const;

  LinCodeData data_;
  KernelSpec kernel_;
  double p0_, p1_;
  int grid_size_;
  bool use_grid_;
  Eigen::MatrixXd corr_;
  Eigen::LLT<Eigen::MatrixXd> corr_llt_;
  CollapsedM0 m0_;
  std::vector<CollapsedM1> grid_;  // frozen after construction
};

// IMH over kappa with the uniform proposal; defaults: 10^4 iterations,
// 10^3 burn-in, thinning 5.
ChainConfig default_config(std::uint64_t seed);
Chain run_kappa_imh(const LinCodeCollapsed& collapsed,
                    const ChainConfig& config);

// One draw of the full parameter set reconstructed from one retained kappa.
struct ReconstructionDraw {
  int zeta = 0;             // model indicator, 1 = discrepancy model
  double tau = 0.0;         // 1/lambda^2
  Eigen::VectorXd theta;
  Eigen::VectorXd delta;    // exactly zero when zeta == 0
  double kappa = 0.0;
};

// Conditional simulation per retained draw: zeta ~ Bernoulli(pi(M1|kappa)),
// tau ~ Gamma((n-p)/2, ||resid||^2/2), theta ~ N(mu, lambda^2 Sigma), and
// under the discrepancy model delta ~ N(V(y - g theta), lambda^2 V) with
// V = k Corr (I + k Corr)^{-1}.
std::vector<ReconstructionDraw> reconstruct(const Chain& chain,
                                            const LinCodeCollapsed& collapsed,
                                            Rng& rng);

struct TendencyBand {
  bool present = false;
  Eigen::VectorXd mean, q025, q975;
};

struct TendencyPrediction {
  Eigen::VectorXd x;
  TendencyBand m0, m1, bma;
  std::vector<std::string> warnings;
};

// Central-tendency bands h(x)theta_s + 1{zeta_s=1} delta_s(x) per model
// group and pooled.  Off-sample x uses the GP conditional mean
// Corr(x*, x) Corr^{-1} delta_s; at observed x the reconstructed delta is
// used directly.  A group with no draws is omitted with a warning.
TendencyPrediction predict_tendency(
    const std::vector<ReconstructionDraw>& draws,
    const LinCodeCollapsed& collapsed, const Eigen::VectorXd& x_grid);

struct SimulatedLinCode {
  LinCodeData data;
  Eigen::VectorXd delta_true;
};

// x equispaced on [0,1]; delta ~ N(0, lambda^2 k Corr); y = g theta + delta
// + eps with eps ~ N(0, lambda^2 I).  k_true = 0 yields code-only data with
// delta identically zero.  Suite defaults: n=25, theta=2, lambda=0.1, k=25.
SimulatedLinCode simulate_lincode(long n, double theta_true, double lambda_true,
                                  double k_true, const KernelSpec& spec,
                                  std::uint64_t seed);

}  // namespace mixbma::lincode
