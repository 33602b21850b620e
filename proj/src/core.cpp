#include "mixbma/core.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace mixbma {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

MixtureEnsemble::MixtureEnsemble(std::vector<CandidateModel> models,
                                 LogPriorFn log_prior,
                                 std::vector<CoordSpec> coords)
    : models_(std::move(models)),
      log_prior_(std::move(log_prior)),
      coords_(std::move(coords)) {
  if (models_.size() < 2)
    throw std::invalid_argument("ensemble needs at least two models");
  if (coords_.empty())
    throw std::invalid_argument("ensemble needs at least one coordinate");
  if (!log_prior_) throw std::invalid_argument("ensemble needs a prior");
  std::unordered_set<std::string> names;
  double wsum = 0.0;
  for (const auto& m : models_) {
    if (!m.log_likelihood)
      throw std::invalid_argument("model '" + m.name +
                                  "' has no log-likelihood");
    if (!(m.prior_weight > 0.0) || !(m.prior_weight <= 1.0))
      throw std::invalid_argument("model '" + m.name +
                                  "' has prior weight outside (0, 1]");
    if (!names.insert(m.name).second)
      throw std::invalid_argument("duplicate model name '" + m.name + "'");
    wsum += m.prior_weight;
  }
  if (std::abs(wsum - 1.0) > 1e-12)
    throw std::invalid_argument("model prior weights must sum to 1");
}

Eigen::VectorXd MixtureEnsemble::prior_weights() const {
  Eigen::VectorXd w(n_models());
  for (int k = 0; k < n_models(); ++k) w[k] = models_[k].prior_weight;
  return w;
}

double MixtureEnsemble::log_prior(const Eigen::VectorXd& theta) const {
  const double lp = log_prior_(theta);
  if (std::isnan(lp))
    throw std::runtime_error("prior returned NaN");
  return lp;
}

double logsumexp(const Eigen::VectorXd& v) {
  if (v.size() == 0) return -kInf;
  if (v.hasNaN()) throw std::invalid_argument("logsumexp: NaN input");
  const double m = v.maxCoeff();
  if (m == -kInf) return -kInf;
  double acc = 0.0;
  bool all_equal = true;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != m) all_equal = false;
    acc += std::exp(v[i] - m);
  }
  // All-equal inputs reduce to m + log(n) exactly.
  if (all_equal) return m + std::log(static_cast<double>(v.size()));
  return m + std::log(acc);
}

MixtureLogDensity log_mixture_density(const MixtureEnsemble& ensemble,
                                      const Eigen::VectorXd& theta) {
  if (theta.size() != ensemble.dim())
    throw std::invalid_argument("theta has wrong dimension");
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    if (!std::isfinite(theta[i]))
      throw std::invalid_argument("theta has a non-finite entry");

  const int n = ensemble.n_models();
  MixtureLogDensity out;
  out.per_model_loglik.resize(n);
  Eigen::VectorXd weighted(n);
  for (int k = 0; k < n; ++k) {
    const auto& m = ensemble.models()[k];
    const double ll = m.log_likelihood(theta);
    if (std::isnan(ll))
      throw std::runtime_error("model '" + m.name +
                               "' returned NaN log-likelihood");
    out.per_model_loglik[k] = ll;
    weighted[k] = std::log(m.prior_weight) + ll;
  }
  out.log_mixture = logsumexp(weighted);
  out.log_prior = ensemble.log_prior(theta);
  out.total = out.log_mixture + out.log_prior;
  // Only a +inf prior colliding with an all--inf mixture can make this NaN;
  // such a point has no posterior mass, so it evaluates as -inf.
  if (std::isnan(out.total)) out.total = -kInf;
  return out;
}

double log_unnormalized_posterior(const MixtureEnsemble& ensemble,
                                  const Eigen::VectorXd& theta) {
  return log_mixture_density(ensemble, theta).total;
}

}  // namespace mixbma
