#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mixbma/core.hpp"
#include "mixbma/sampler.hpp"

namespace mixbma::poisgeo {

// Count dataset shared by the Poisson and Geometric candidates.  The sum
// S_n and log(prod y_i!) are cached; closed-form marginals additionally
// require S_n >= 1 (Gamma(S_n) must be finite).
class CountData {
 public:
  explicit CountData(std::vector<long> counts);

  const std::vector<long>& counts() const { return counts_; }
  long n() const { return static_cast<long>(counts_.size()); }
  long total() const { return total_; }                 // S_n
  double log_factorial_sum() const { return log_fact_; }  // log prod y_i!

  // One decimal count per line, newline-terminated.
  static CountData read_file(const std::string& path);
  void write_file(const std::string& path) const;

 private:
  std::vector<long> counts_;
  long total_ = 0;
  double log_fact_ = 0.0;
};

// log f_0(y|lambda) = -n lambda + S_n log lambda - log prod y_i!;
// -inf for lambda <= 0.
double pois_loglik(const CountData& data, double lambda);

// log f_1(y|lambda) = S_n log lambda - (S_n + n) log(1 + lambda);
// -inf for lambda <= 0.
double geo_loglik(const CountData& data, double lambda);

// Closed-form marginals under the shared Jeffreys prior 1/lambda, all in
// log-gamma arithmetic.  Throw for S_n = 0 (improper prior mass at
// lambda -> 0).
double log_m0(const CountData& data);
double log_m1(const CountData& data);
double log_bf01(const CountData& data);

// Within-model posterior modes ((S_n-1)/n, (S_n-1)/(n+1)); for S_n < 2 both
// fall back to max(S_n, 1)/n, which has no counterpart in the closed-form
// theory but keeps chain starts finite.
std::pair<double, double> initializers(const CountData& data);

// n Poisson(lambda_true) variates, deterministic per seed.
CountData simulate(long n, double lambda_true, std::uint64_t seed);

// Two-model ensemble over eta = log lambda.  The Jeffreys prior 1/lambda
// times the Jacobian lambda is flat in eta, so log_prior == 0.
MixtureEnsemble make_ensemble(const CountData& data, double p0 = 0.5,
                              double p1 = 0.5);

// Defaults matching the suite's standard run: 10^5 raw iterations, 10^4
// burn-in, thinning 50, random-walk scale 0.5 on eta.
ChainConfig default_config(std::uint64_t seed);
ProposalSpec default_proposal();

}  // namespace mixbma::poisgeo
