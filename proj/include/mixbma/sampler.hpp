#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mixbma/core.hpp"
#include "mixbma/rng.hpp"

namespace mixbma {

// Proposal mechanism for one Metropolis-Hastings chain.
//   random_walk:  theta' = theta + scale .* z,  z ~ N(0, I)
//   independent:  theta' ~ Uniform(lower, upper), coordinatewise
struct ProposalSpec {
  enum class Kind { random_walk, independent };

  Kind kind = Kind::random_walk;
  Eigen::VectorXd scales;        // random_walk only; all entries > 0
  Eigen::VectorXd lower, upper;  // independent only; finite, lower < upper

  static ProposalSpec random_walk(Eigen::VectorXd scales);
  static ProposalSpec independent(Eigen::VectorXd lower,
                                  Eigen::VectorXd upper);
  void validate(int dim) const;
};

struct ChainConfig {
  long iterations = 100000;  // raw iterations, burn-in included
  long burn_in = 10000;
  long thin = 1;
  std::uint64_t seed = 0;
  bool adapt = true;          // random-walk scale adaptation during burn-in
  double accept_low = 0.2;    // target acceptance window
  double accept_high = 0.8;

  // Retained sample size floor((iterations - burn_in) / thin); must be at
  // least 100.
  long retained() const { return (iterations - burn_in) / thin; }
  void validate() const;
};

// Scale adjustments happen once per completed block of this many burn-in
// iterations: doubled above the window, halved below it.
inline constexpr long kAdaptBlock = 200;

// Retained draws plus the cached per-model log-likelihood at each draw.
// Row s of per_model_loglik reproduces log_mixture_density at draws row s;
// the evaluators are pure, so either side can be recomputed from the other.
struct Chain {
  Eigen::MatrixXd draws;             // retained x dim, sampled scale
  Eigen::MatrixXd per_model_loglik;  // retained x n_models
  std::vector<long> iteration;       // raw iteration index of each draw
  double acceptance_rate = 0.0;      // post burn-in
  Eigen::VectorXd final_scales;      // random_walk only; frozen at burn-in end
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  long size() const { return draws.rows(); }
};

struct StepResult {
  Eigen::VectorXd state;
  MixtureLogDensity density;
  bool accepted = false;
};

// One full-vector random-walk Metropolis step.  Consumes exactly dim normal
// variates then one uniform variate.  A -inf proposal is rejected without
// touching the acceptance uniform's interpretation (the draw still happens,
// keeping the stream position independent of the target).
StepResult rw_mh_step(const MixtureEnsemble& ensemble,
                      const Eigen::VectorXd& state,
                      const MixtureLogDensity& density,
                      const Eigen::VectorXd& scales, Rng& rng);

// One independence Metropolis-Hastings step with a coordinatewise uniform
// proposal; the flat proposal density cancels, leaving the plain posterior
// ratio.  Consumes exactly dim + 1 uniform variates.
StepResult imh_step(const MixtureEnsemble& ensemble,
                    const Eigen::VectorXd& state,
                    const MixtureLogDensity& density,
                    const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                    Rng& rng);

// Deterministic scale update from one block's acceptance fraction.
double adapt_scale(double scale, double block_acceptance, double accept_low,
                   double accept_high);

// Run one chain against the ensemble's unnormalized posterior.  Random-walk
// chains update one coordinate at a time (a full sweep per iteration);
// independence chains propose the whole vector at once.  Adaptation touches
// scales only during burn-in and freezes at its end.
Chain run_chain(const MixtureEnsemble& ensemble, const Eigen::VectorXd& init,
                const ProposalSpec& proposal, const ChainConfig& config);

// Sample autocorrelation of one series at lags 0..max_lag (acf[0] == 1).
// Requires at least 10 * max_lag points and a non-constant series.
std::vector<double> autocorrelation(const Eigen::VectorXd& series,
                                    int max_lag);
std::vector<double> autocorrelation(const Chain& chain, int coordinate,
                                    int max_lag);

// Smallest lag whose |acf| drops below 0.05, capped at 200.
long suggest_thin(const Chain& chain, int coordinate);

}  // namespace mixbma
