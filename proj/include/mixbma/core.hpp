#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

namespace mixbma {

// How a sampled coordinate maps to the natural-scale quantity it represents.
// log_scale means the chain explores log(name); reports transform back.
enum class CoordTransform { identity, log_scale };

struct CoordSpec {
  std::string name;
  CoordTransform transform = CoordTransform::identity;

  // Column label on the sampled scale ("log_lambda" for a log_scale
  // coordinate named "lambda").
  std::string sampled_label() const {
    return transform == CoordTransform::log_scale ? "log_" + name : name;
  }
};

using LogLikFn = std::function<double(const Eigen::VectorXd&)>;
using LogPriorFn = std::function<double(const Eigen::VectorXd&)>;

// One candidate model: its data-bound log-likelihood over the shared
// parameter and its prior probability.  The evaluator must return -inf
// (never NaN) outside the model's support.
struct CandidateModel {
  std::string name;
  double prior_weight = 0.0;
  LogLikFn log_likelihood;
};

// A model ensemble sharing one parameter vector and one (possibly improper)
// prior.  Evaluation happens on the sampled scale; any reparameterization
// Jacobian belongs to log_prior.
class MixtureEnsemble {
 public:
  MixtureEnsemble(std::vector<CandidateModel> models, LogPriorFn log_prior,
                  std::vector<CoordSpec> coords);

  const std::vector<CandidateModel>& models() const { return models_; }
  const std::vector<CoordSpec>& coords() const { return coords_; }
  int n_models() const { return static_cast<int>(models_.size()); }
  int dim() const { return static_cast<int>(coords_.size()); }

  Eigen::VectorXd prior_weights() const;
  double log_prior(const Eigen::VectorXd& theta) const;

 private:
  std::vector<CandidateModel> models_;
  LogPriorFn log_prior_;
  std::vector<CoordSpec> coords_;
};

// Evaluation record at one parameter value.  total = log_mixture + log_prior
// is the unnormalized log posterior; per_model_loglik are the raw f_k terms
// before prior weighting.
struct MixtureLogDensity {
  double log_mixture = 0.0;
  double log_prior = 0.0;
  double total = 0.0;
  Eigen::VectorXd per_model_loglik;
};

// log(sum_i exp(v_i)) with the max subtracted first.  Returns -inf for an
// all-(-inf) input; exact (no round-off) when all finite entries are equal.
double logsumexp(const Eigen::VectorXd& v);

// Mixture log-likelihood log(sum_k p_k f_k(y|theta)) plus prior bookkeeping.
// Throws std::runtime_error if any evaluator produces NaN, naming the model.
MixtureLogDensity log_mixture_density(const MixtureEnsemble& ensemble,
                                      const Eigen::VectorXd& theta);

// Convenience: just the unnormalized log posterior.
double log_unnormalized_posterior(const MixtureEnsemble& ensemble,
                                  const Eigen::VectorXd& theta);

}  // namespace mixbma
