#include "mixbma/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mixbma {

namespace {
constexpr double kZ95 = 1.959963984540054;  // Phi^{-1}(0.975)
constexpr double kInf = std::numeric_limits<double>::infinity();

// Population column covariance of two responsibility columns.
double col_cov(const Eigen::MatrixXd& w, int a, int b) {
  const double ma = w.col(a).mean();
  const double mb = w.col(b).mean();
  return ((w.col(a).array() - ma) * (w.col(b).array() - mb)).mean();
}
}  // namespace

ResponsibilityMatrix responsibilities(const Chain& chain,
                                      const MixtureEnsemble& ensemble) {
  const long S = chain.size();
  const int n = ensemble.n_models();
  if (chain.per_model_loglik.cols() != n)
    throw std::invalid_argument(
        "chain and ensemble disagree on the number of models");
  Eigen::VectorXd log_w(n);
  ResponsibilityMatrix resp;
  resp.w.resize(S, n);
  for (long s = 0; s < S; ++s) {
    for (int k = 0; k < n; ++k)
      log_w[k] = std::log(ensemble.models()[k].prior_weight) +
                 chain.per_model_loglik(s, k);
    const double norm = logsumexp(log_w);
    if (norm == -kInf)
      throw std::runtime_error(
          "draw " + std::to_string(s) +
          " has zero mixture likelihood under every model");
    for (int k = 0; k < n; ++k) resp.w(s, k) = std::exp(log_w[k] - norm);
  }
  return resp;
}

ProbEstimate posterior_model_probabilities(const ResponsibilityMatrix& resp) {
  const long S = resp.rows();
  if (S == 0) throw std::invalid_argument("empty responsibility matrix");
  ProbEstimate out;
  out.prob = resp.w.colwise().mean();
  out.ci.resize(resp.cols());
  for (int k = 0; k < resp.cols(); ++k) {
    const double var = col_cov(resp.w, k, k);
    const double hw = kZ95 * std::sqrt(var / static_cast<double>(S));
    out.ci[k] = {std::max(0.0, out.prob[k] - hw),
                 std::min(1.0, out.prob[k] + hw)};
  }
  return out;
}

BayesFactorEstimate bayes_factor(const ResponsibilityMatrix& resp,
                                 const Eigen::VectorXd& prior_weights, int k,
                                 int l) {
  const int n = resp.cols();
  if (k < 0 || k >= n || l < 0 || l >= n)
    throw std::invalid_argument("model index out of range");
  if (prior_weights.size() != n)
    throw std::invalid_argument("prior weights have wrong length");
  const long S = resp.rows();
  const double pk = resp.w.col(k).mean();
  const double pl = resp.w.col(l).mean();
  if (pk == 0.0)
    throw std::runtime_error("probability estimate for model " +
                             std::to_string(k) + " is zero");
  if (pl == 0.0)
    throw std::runtime_error("probability estimate for model " +
                             std::to_string(l) + " is zero");

  BayesFactorEstimate out;
  out.estimate = (pk / pl) * (prior_weights[l] / prior_weights[k]);
  // Delta method on log BF: Var = Vk/pk^2 + Vl/pl^2 - 2 Ckl/(pk pl), each
  // term a column moment over S.
  const double vk = col_cov(resp.w, k, k) / static_cast<double>(S);
  const double vl = col_cov(resp.w, l, l) / static_cast<double>(S);
  const double ckl = col_cov(resp.w, k, l) / static_cast<double>(S);
  const double var_log =
      std::max(0.0, vk / (pk * pk) + vl / (pl * pl) - 2.0 * ckl / (pk * pl));
  const double hw = kZ95 * std::sqrt(var_log);
  out.ci = {out.estimate * std::exp(-hw), out.estimate * std::exp(hw)};
  return out;
}

double ess(const Eigen::VectorXd& weights) {
  if (weights.size() == 0) throw std::invalid_argument("empty weight vector");
  double sum = 0.0, sumsq = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    const double w = weights[i];
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument("weights must be finite and non-negative");
    sum += w;
    sumsq += w * w;
  }
  if (sumsq == 0.0)
    throw std::invalid_argument("at least one weight must be positive");
  return sum * sum / sumsq;
}

WeightedSummary weighted_summary(const Eigen::VectorXd& values,
                                 const Eigen::VectorXd& weights, int bins) {
  const long S = values.size();
  if (S == 0) throw std::invalid_argument("empty value vector");
  if (weights.size() != S)
    throw std::invalid_argument("values and weights differ in length");
  if (bins < 1) throw std::invalid_argument("need at least one histogram bin");

  WeightedSummary out;
  out.ess = ess(weights);  // validates the weights
  out.low_ess = out.ess < 100.0;

  const double wsum = weights.sum();
  const Eigen::VectorXd w = weights / wsum;
  out.mean = w.dot(values);

  std::vector<long> order(S);
  std::iota(order.begin(), order.end(), 0L);
  std::sort(order.begin(), order.end(),
            [&](long a, long b) { return values[a] < values[b]; });

  // Left-continuous weighted empirical quantile: smallest value whose
  // cumulative weight reaches q.
  const auto quantile = [&](double q) {
    double cum = 0.0;
    for (long i = 0; i < S; ++i) {
      cum += w[order[i]];
      if (cum >= q) return values[order[i]];
    }
    return values[order[S - 1]];
  };
  out.q025 = quantile(0.025);
  out.q50 = quantile(0.5);
  out.q975 = quantile(0.975);

  const double lo = values[order[0]];
  const double hi = values[order[S - 1]];
  if (lo == hi) {
    out.hist.push_back({lo, hi, 1.0});
    return out;
  }
  out.hist.assign(static_cast<size_t>(bins), HistBin{});
  const double width = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) {
    out.hist[b].left = lo + b * width;
    out.hist[b].right = (b == bins - 1) ? hi : lo + (b + 1) * width;
  }
  for (long i = 0; i < S; ++i) {
    int b = static_cast<int>((values[i] - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    out.hist[static_cast<size_t>(b)].mass += w[i];
  }
  return out;
}

std::vector<BoundCheck> check_bounds(const Eigen::VectorXd& model_ess,
                                     const Eigen::VectorXd& prob,
                                     long sample_size,
                                     const std::vector<std::string>& names) {
  if (model_ess.size() != prob.size() ||
      static_cast<size_t>(prob.size()) != names.size())
    throw std::invalid_argument("bound-check inputs differ in length");
  std::vector<BoundCheck> checks;
  const double S = static_cast<double>(sample_size);
  for (int k = 0; k < prob.size(); ++k) {
    BoundCheck c{names[k], model_ess[k], S * prob[k]};
    // The inequality is algebraic (Cauchy-Schwarz with weights in [0,1]);
    // the slack covers accumulation round-off only.
    if (c.ess_value < c.lower_bound - 1e-9 * S)
      throw std::runtime_error("ESS bound violated for model '" + names[k] +
                               "': " + std::to_string(c.ess_value) + " < " +
                               std::to_string(c.lower_bound));
    checks.push_back(std::move(c));
  }
  return checks;
}

BmaReport make_report(const Chain& chain, const MixtureEnsemble& ensemble,
                      int hist_bins) {
  BmaReport rep;
  const int n = ensemble.n_models();
  for (const auto& m : ensemble.models()) rep.model_names.push_back(m.name);
  rep.prior_weights = ensemble.prior_weights();
  rep.sample_size = chain.size();
  rep.warnings = chain.warnings;

  const ResponsibilityMatrix resp = responsibilities(chain, ensemble);
  const ProbEstimate probs = posterior_model_probabilities(resp);
  rep.prob = probs.prob;
  rep.prob_ci = probs.ci;

  rep.bf.assign(n, std::vector<BayesFactorEstimate>(n));
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      if (k == l) {
        rep.bf[k][l] = {1.0, {1.0, 1.0}};
      } else if (rep.prob[k] > 0.0 && rep.prob[l] > 0.0) {
        rep.bf[k][l] = bayes_factor(resp, rep.prior_weights, k, l);
      } else {
        // Degenerate estimate: leave the ratio undefined rather than fail
        // the whole report; callers needing it hit the throwing path.
        rep.bf[k][l] = {std::numeric_limits<double>::quiet_NaN(),
                        {std::numeric_limits<double>::quiet_NaN(),
                         std::numeric_limits<double>::quiet_NaN()}};
      }
    }
  }

  rep.model_ess.resize(n);
  for (int k = 0; k < n; ++k) rep.model_ess[k] = ess(resp.w.col(k));
  rep.bounds =
      check_bounds(rep.model_ess, rep.prob, rep.sample_size, rep.model_names);

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(chain.size());
  for (int j = 0; j < ensemble.dim(); ++j) {
    const CoordSpec& spec = ensemble.coords()[j];
    Eigen::VectorXd v = chain.draws.col(j);
    if (spec.transform == CoordTransform::log_scale)
      v = v.array().exp().matrix();
    CoordinateSummary cs;
    cs.name = spec.name;
    cs.bma = weighted_summary(v, ones, hist_bins);
    double mix = 0.0;
    for (int k = 0; k < n; ++k) {
      cs.per_model.push_back(weighted_summary(v, resp.w.col(k), hist_bins));
      mix += rep.prob[k] * cs.per_model.back().mean;
      if (cs.per_model.back().low_ess)
        rep.warnings.push_back("low effective sample size (" +
                               std::to_string(cs.per_model.back().ess) +
                               ") for model '" + rep.model_names[k] +
                               "' summary of " + spec.name);
    }
    // Mixture-mean decomposition: exact algebra up to accumulation order.
    const double scale = std::max(1.0, std::abs(cs.bma.mean));
    if (std::abs(mix - cs.bma.mean) > 1e-10 * scale)
      throw std::runtime_error(
          "mixture-mean decomposition failed for coordinate " + spec.name);
    rep.coordinates.push_back(std::move(cs));
  }
  return rep;
}

}  // namespace mixbma
