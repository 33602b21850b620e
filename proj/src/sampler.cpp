#include "mixbma/sampler.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mixbma {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Shared accept rule.  u < exp(delta) is total: delta >= 0 always accepts
// (u < 1), a -inf proposal never does (u < 0).
bool accept(double u, double log_ratio) { return u < std::exp(log_ratio); }
}  // namespace

ProposalSpec ProposalSpec::random_walk(Eigen::VectorXd scales) {
  ProposalSpec p;
  p.kind = Kind::random_walk;
  p.scales = std::move(scales);
  return p;
}

ProposalSpec ProposalSpec::independent(Eigen::VectorXd lower,
                                       Eigen::VectorXd upper) {
  ProposalSpec p;
  p.kind = Kind::independent;
  p.lower = std::move(lower);
  p.upper = std::move(upper);
  return p;
}

void ProposalSpec::validate(int dim) const {
  if (kind == Kind::random_walk) {
    if (scales.size() != dim)
      throw std::invalid_argument("proposal scales have wrong dimension");
    for (Eigen::Index j = 0; j < scales.size(); ++j)
      if (!(scales[j] > 0.0) || !std::isfinite(scales[j]))
        throw std::invalid_argument("proposal scales must be positive");
  } else {
    if (lower.size() != dim || upper.size() != dim)
      throw std::invalid_argument("proposal bounds have wrong dimension");
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (!std::isfinite(lower[j]) || !std::isfinite(upper[j]) ||
          !(lower[j] < upper[j]))
        throw std::invalid_argument(
            "independent-proposal bounds must be finite with lower < upper");
    }
  }
}

void ChainConfig::validate() const {
  if (iterations <= 0) throw std::invalid_argument("iterations must be > 0");
  if (burn_in < 0 || burn_in >= iterations)
    throw std::invalid_argument("burn_in must lie in [0, iterations)");
  if (thin < 1) throw std::invalid_argument("thin must be >= 1");
  if (retained() < 100)
    throw std::invalid_argument(
        "retained sample size (iterations - burn_in) / thin must be >= 100");
  if (!(accept_low > 0.0) || !(accept_high < 1.0) ||
      !(accept_low < accept_high))
    throw std::invalid_argument("acceptance window must satisfy 0 < low < "
                                "high < 1");
}

StepResult rw_mh_step(const MixtureEnsemble& ensemble,
                      const Eigen::VectorXd& state,
                      const MixtureLogDensity& density,
                      const Eigen::VectorXd& scales, Rng& rng) {
  Eigen::VectorXd prop = state;
  for (Eigen::Index j = 0; j < state.size(); ++j)
    prop[j] += scales[j] * rng.normal();
  const double u = rng.uniform();
  MixtureLogDensity pd = log_mixture_density(ensemble, prop);
  if (accept(u, pd.total - density.total))
    return {std::move(prop), std::move(pd), true};
  return {state, density, false};
}

StepResult imh_step(const MixtureEnsemble& ensemble,
                    const Eigen::VectorXd& state,
                    const MixtureLogDensity& density,
                    const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                    Rng& rng) {
  Eigen::VectorXd prop(state.size());
  for (Eigen::Index j = 0; j < state.size(); ++j)
    prop[j] = rng.uniform(lower[j], upper[j]);
  const double u = rng.uniform();
  MixtureLogDensity pd = log_mixture_density(ensemble, prop);
  if (accept(u, pd.total - density.total))
    return {std::move(prop), std::move(pd), true};
  return {state, density, false};
}

double adapt_scale(double scale, double block_acceptance, double accept_low,
                   double accept_high) {
  if (block_acceptance > accept_high) return scale * 2.0;
  if (block_acceptance < accept_low) return scale * 0.5;
  return scale;
}

Chain run_chain(const MixtureEnsemble& ensemble, const Eigen::VectorXd& init,
                const ProposalSpec& proposal, const ChainConfig& config) {
  const int d = ensemble.dim();
  const int n_models = ensemble.n_models();
  proposal.validate(d);
  config.validate();

  MixtureLogDensity cur_den = log_mixture_density(ensemble, init);
  if (!(cur_den.total > -kInf))
    throw std::invalid_argument(
        "initial point has zero posterior density");

  Rng rng(config.seed);
  const bool rw = proposal.kind == ProposalSpec::Kind::random_walk;
  Eigen::VectorXd scales = rw ? proposal.scales : Eigen::VectorXd();

  const long S_keep = config.retained();
  Chain chain;
  chain.seed = config.seed;
  chain.draws.resize(S_keep, d);
  chain.per_model_loglik.resize(S_keep, n_models);
  chain.iteration.resize(S_keep);

  Eigen::VectorXd cur = init;
  Eigen::VectorXd block_acc = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd last_block_rate =
      Eigen::VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN());
  long accepted_post = 0, proposed_post = 0, kept = 0;

  for (long it = 0; it < config.iterations; ++it) {
    const bool in_burn = it < config.burn_in;
    if (rw) {
      // One sweep: single-coordinate proposals, each one normal + one
      // uniform, so the raw stream layout is fixed per iteration.
      for (int j = 0; j < d; ++j) {
        Eigen::VectorXd prop = cur;
        prop[j] += scales[j] * rng.normal();
        const double u = rng.uniform();
        MixtureLogDensity pd = log_mixture_density(ensemble, prop);
        const bool acc = accept(u, pd.total - cur_den.total);
        if (acc) {
          cur.swap(prop);
          cur_den = std::move(pd);
        }
        if (in_burn && config.adapt) block_acc[j] += acc ? 1.0 : 0.0;
        if (!in_burn) {
          ++proposed_post;
          accepted_post += acc ? 1 : 0;
        }
      }
      if (in_burn && config.adapt && (it + 1) % kAdaptBlock == 0) {
        for (int j = 0; j < d; ++j) {
          const double rate = block_acc[j] / static_cast<double>(kAdaptBlock);
          scales[j] =
              adapt_scale(scales[j], rate, config.accept_low,
                          config.accept_high);
          last_block_rate[j] = rate;
        }
        block_acc.setZero();
      }
    } else {
      Eigen::VectorXd prop(d);
      for (int j = 0; j < d; ++j)
        prop[j] = rng.uniform(proposal.lower[j], proposal.upper[j]);
      const double u = rng.uniform();
      MixtureLogDensity pd = log_mixture_density(ensemble, prop);
      const bool acc = accept(u, pd.total - cur_den.total);
      if (acc) {
        cur.swap(prop);
        cur_den = std::move(pd);
      }
      if (!in_burn) {
        ++proposed_post;
        accepted_post += acc ? 1 : 0;
      }
    }

    if (!in_burn) {
      const long i = it - config.burn_in;
      if ((i + 1) % config.thin == 0 && kept < S_keep) {
        chain.draws.row(kept) = cur.transpose();
        chain.per_model_loglik.row(kept) = cur_den.per_model_loglik.transpose();
        chain.iteration[kept] = it;
        ++kept;
      }
    }
  }
  if (kept != S_keep)
    throw std::logic_error("retained-draw bookkeeping mismatch");

  chain.acceptance_rate =
      static_cast<double>(accepted_post) / static_cast<double>(proposed_post);
  chain.final_scales = scales;

  if (rw && config.adapt && config.burn_in >= kAdaptBlock) {
    for (int j = 0; j < d; ++j) {
      if (!(last_block_rate[j] >= config.accept_low &&
            last_block_rate[j] <= config.accept_high)) {
        std::ostringstream os;
        os << "adaptation ended outside the target acceptance window for "
           << "coordinate " << ensemble.coords()[j].sampled_label() << " ("
           << last_block_rate[j] << ")";
        chain.warnings.push_back(os.str());
      }
    }
  }
  if (!(chain.acceptance_rate >= config.accept_low &&
        chain.acceptance_rate <= config.accept_high)) {
    std::ostringstream os;
    os << "post-burn-in acceptance rate " << chain.acceptance_rate
       << " lies outside [" << config.accept_low << ", " << config.accept_high
       << "]";
    chain.warnings.push_back(os.str());
  }
  return chain;
}

std::vector<double> autocorrelation(const Eigen::VectorXd& series,
                                    int max_lag) {
  const long S = series.size();
  if (max_lag < 1) throw std::invalid_argument("max_lag must be >= 1");
  if (S < 10L * max_lag)
    throw std::invalid_argument(
        "series too short: need at least 10 * max_lag points");
  const double mean = series.mean();
  const Eigen::VectorXd c = series.array() - mean;
  const double denom = c.squaredNorm();
  if (denom == 0.0)
    throw std::runtime_error("autocorrelation of a constant series");
  std::vector<double> acf(static_cast<size_t>(max_lag) + 1);
  acf[0] = 1.0;
  for (int t = 1; t <= max_lag; ++t)
    acf[t] = c.head(S - t).dot(c.tail(S - t)) / denom;
  return acf;
}

std::vector<double> autocorrelation(const Chain& chain, int coordinate,
                                    int max_lag) {
  if (coordinate < 0 || coordinate >= chain.draws.cols())
    throw std::invalid_argument("coordinate out of range");
  return autocorrelation(chain.draws.col(coordinate), max_lag);
}

long suggest_thin(const Chain& chain, int coordinate) {
  constexpr long kCap = 200;
  const long S = chain.size();
  const int max_lag = static_cast<int>(std::min(kCap, S / 10));
  const auto acf = autocorrelation(chain, coordinate, max_lag);
  for (int t = 1; t <= max_lag; ++t)
    if (std::abs(acf[t]) < 0.05) return t;
  return kCap;
}

}  // namespace mixbma
