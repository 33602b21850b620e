#include "mixbma/poisgeo.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mixbma/rng.hpp"

namespace mixbma::poisgeo {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive_total(const CountData& data) {
  if (data.total() < 1)
    throw std::runtime_error(
        "marginal undefined (improper prior mass at lambda -> 0)");
}

// log(1 + e^eta) without overflow for large |eta|.
double softplus(double eta) {
  return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
}
}  // namespace

CountData::CountData(std::vector<long> counts) : counts_(std::move(counts)) {
  if (counts_.empty()) throw std::invalid_argument("count data needs n >= 1");
  for (long y : counts_) {
    if (y < 0) throw std::invalid_argument("counts must be non-negative");
    total_ += y;
    log_fact_ += std::lgamma(static_cast<double>(y) + 1.0);
  }
}

CountData CountData::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open count file: " + path);
  std::vector<long> counts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    size_t pos = 0;
    long v = 0;
    try {
      v = std::stol(line, &pos);
    } catch (const std::exception&) {
      pos = 0;  // reported below with the offending line attached
    }
    if (pos != line.size())
      throw std::runtime_error("malformed count line: '" + line + "'");
    counts.push_back(v);
  }
  return CountData(std::move(counts));
}

void CountData::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write count file: " + path);
  for (long y : counts_) out << y << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

double pois_loglik(const CountData& data, double lambda) {
  if (!(lambda > 0.0)) return -kInf;
  return -static_cast<double>(data.n()) * lambda +
         static_cast<double>(data.total()) * std::log(lambda) -
         data.log_factorial_sum();
}

double geo_loglik(const CountData& data, double lambda) {
  if (!(lambda > 0.0)) return -kInf;
  const double sn = static_cast<double>(data.total());
  const double n = static_cast<double>(data.n());
  return sn * std::log(lambda) - (sn + n) * std::log1p(lambda);
}

double log_m0(const CountData& data) {
  require_positive_total(data);
  const double sn = static_cast<double>(data.total());
  const double n = static_cast<double>(data.n());
  return std::lgamma(sn) - sn * std::log(n) - data.log_factorial_sum();
}

double log_m1(const CountData& data) {
  require_positive_total(data);
  const double sn = static_cast<double>(data.total());
  const double n = static_cast<double>(data.n());
  return std::lgamma(sn) + std::lgamma(n) - std::lgamma(sn + n);
}

double log_bf01(const CountData& data) {
  // Same log-gamma path as the marginals, so the difference identity holds
  // to round-off by construction.
  return log_m0(data) - log_m1(data);
}

std::pair<double, double> initializers(const CountData& data) {
  const double sn = static_cast<double>(data.total());
  const double n = static_cast<double>(data.n());
  if (data.total() >= 2) return {(sn - 1.0) / n, (sn - 1.0) / (n + 1.0)};
  const double fallback = std::max(sn, 1.0) / n;
  return {fallback, fallback};
}

CountData simulate(long n, double lambda_true, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("simulate needs n >= 1");
  if (!(lambda_true > 0.0))
    throw std::invalid_argument("simulate needs lambda_true > 0");
  Rng rng(seed);
  std::vector<long> counts(static_cast<size_t>(n));
  for (auto& y : counts) y = rng.poisson(lambda_true);
  return CountData(std::move(counts));
}

MixtureEnsemble make_ensemble(const CountData& data, double p0, double p1) {
  // Evaluators bind a copy of the data; lambda = e^eta keeps the walk
  // unconstrained.  Written on the eta scale directly (lambda overflows
  // before eta does): log f_0 = -n e^eta + S_n eta - log prod y!,
  // log f_1 = S_n eta - (S_n + n) log(1 + e^eta).
  const double n = static_cast<double>(data.n());
  const double sn = static_cast<double>(data.total());
  const double log_fact = data.log_factorial_sum();
  std::vector<CandidateModel> models(2);
  models[0].name = "pois";
  models[0].prior_weight = p0;
  models[0].log_likelihood = [n, sn, log_fact](const Eigen::VectorXd& th) {
    const double eta = th[0];
    return -n * std::exp(eta) + sn * eta - log_fact;
  };
  models[1].name = "geo";
  models[1].prior_weight = p1;
  models[1].log_likelihood = [n, sn](const Eigen::VectorXd& th) {
    const double eta = th[0];
    return sn * eta - (sn + n) * softplus(eta);
  };
  // Jeffreys 1/lambda on the natural scale; the change of variables
  // contributes +log lambda, leaving eta unconstrained and flat.
  LogPriorFn prior = [](const Eigen::VectorXd&) { return 0.0; };
  return MixtureEnsemble(std::move(models), std::move(prior),
                         {{"lambda", CoordTransform::log_scale}});
}

ChainConfig default_config(std::uint64_t seed) {
  ChainConfig c;
  c.iterations = 100000;
  c.burn_in = 10000;
  c.thin = 50;
  c.seed = seed;
  return c;
}

ProposalSpec default_proposal() {
  return ProposalSpec::random_walk(Eigen::VectorXd::Constant(1, 0.5));
}

}  // namespace mixbma::poisgeo
