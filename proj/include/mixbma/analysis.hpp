#pragma once

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

#include "mixbma/core.hpp"
#include "mixbma/sampler.hpp"

namespace mixbma {

// Per-draw model responsibilities w_k(theta_s) = p_k f_k / sum_j p_j f_j.
// Rows sum to one; every entry lies in [0, 1].
struct ResponsibilityMatrix {
  Eigen::MatrixXd w;  // retained x n_models

  long rows() const { return w.rows(); }
  int cols() const { return static_cast<int>(w.cols()); }
};

ResponsibilityMatrix responsibilities(const Chain& chain,
                                      const MixtureEnsemble& ensemble);

// Posterior model probabilities: column means of the responsibilities, with
// central-limit 95% intervals (population standard error, clipped to [0,1]).
struct ProbEstimate {
  Eigen::VectorXd prob;
  std::vector<std::pair<double, double>> ci;
};

ProbEstimate posterior_model_probabilities(const ResponsibilityMatrix& resp);

// Bayes factor of model k over model l recovered from the probability
// estimates, with the prior-odds correction and a delta-method 95% interval
// built on the log scale (so it is always positive and respects the ratio's
// skew).  Throws if either probability estimate is zero, naming the model.
struct BayesFactorEstimate {
  double estimate = 0.0;
  std::pair<double, double> ci{0.0, 0.0};
};

BayesFactorEstimate bayes_factor(const ResponsibilityMatrix& resp,
                                 const Eigen::VectorXd& prior_weights, int k,
                                 int l);

// Effective sample size (sum w)^2 / sum w^2 of one weight vector.  Requires
// non-negative weights with at least one positive entry.
double ess(const Eigen::VectorXd& weights);

// Weighted summary of one scalar quantity: weighted mean, weighted empirical
// quantiles (2.5%, 50%, 97.5%), an equal-width weighted histogram, and the
// weight ESS with a low-ESS flag (ess < 100).
struct HistBin {
  double left = 0.0, right = 0.0, mass = 0.0;
};

struct WeightedSummary {
  double mean = 0.0;
  double q025 = 0.0, q50 = 0.0, q975 = 0.0;
  std::vector<HistBin> hist;
  double ess = 0.0;
  bool low_ess = false;
};

WeightedSummary weighted_summary(const Eigen::VectorXd& values,
                                 const Eigen::VectorXd& weights,
                                 int bins = 50);

struct CoordinateSummary {
  std::string name;          // natural-scale quantity
  WeightedSummary bma;       // unweighted: the mixture posterior itself
  std::vector<WeightedSummary> per_model;
};

struct BoundCheck {
  std::string model;
  double ess_value = 0.0;
  double lower_bound = 0.0;  // sample_size * estimated probability
};

// Full analysis pass over one chain.
struct BmaReport {
  std::vector<std::string> model_names;
  Eigen::VectorXd prior_weights;
  long sample_size = 0;

  Eigen::VectorXd prob;
  std::vector<std::pair<double, double>> prob_ci;

  // bf(k, l); diagonal entries are exactly 1 with degenerate intervals.
  std::vector<std::vector<BayesFactorEstimate>> bf;

  Eigen::VectorXd model_ess;
  std::vector<BoundCheck> bounds;

  std::vector<CoordinateSummary> coordinates;
  std::vector<std::string> warnings;
};

// Verifies ESS_k >= sample_size * prob_k for every model (exact algebra, so
// violations indicate a defect); throws on failure, returns the checks.
std::vector<BoundCheck> check_bounds(const Eigen::VectorXd& model_ess,
                                     const Eigen::VectorXd& prob,
                                     long sample_size,
                                     const std::vector<std::string>& names);

// Runs responsibilities, probabilities, Bayes factors, ESS plus bound check,
// and per-coordinate summaries (natural scale: log_scale coordinates are
// exponentiated first).  Also asserts the mixture-mean decomposition
// mean_bma = sum_k prob_k * mean_k to 1e-10 relative.
BmaReport make_report(const Chain& chain, const MixtureEnsemble& ensemble,
                      int hist_bins = 50);

}  // namespace mixbma
