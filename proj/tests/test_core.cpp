#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "mixbma/core.hpp"

using namespace mixbma;

namespace {

const double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

// Two-model ensemble over one coordinate with simple quadratic logliks.
MixtureEnsemble toy_ensemble(double p0 = 0.5, double p1 = 0.5) {
  CandidateModel m0{"a", p0, [](const Eigen::VectorXd& t) {
                      return -0.5 * t[0] * t[0];
                    }};
  CandidateModel m1{"b", p1, [](const Eigen::VectorXd& t) {
                      return -0.5 * (t[0] - 1.0) * (t[0] - 1.0);
                    }};
  return MixtureEnsemble({m0, m1}, [](const Eigen::VectorXd&) { return 0.0; },
                         {{"x", CoordTransform::identity}});
}

}  // namespace

TEST_CASE("logsumexp matches a high-precision reference") {
  CHECK(logsumexp(vec2(-1000.0, -1001.0)) ==
        doctest::Approx(-999.6867383124818).epsilon(1e-14));
  CHECK(logsumexp(vec2(0.0, 0.0)) == doctest::Approx(std::log(2.0)));
  // Equal entries are exact, not merely close.
  CHECK(logsumexp(vec2(-700.0, -700.0)) == -700.0 + std::log(2.0));
}

TEST_CASE("logsumexp handles infinities") {
  CHECK(logsumexp(vec2(kNegInf, kNegInf)) == kNegInf);
  CHECK(logsumexp(vec2(kNegInf, -5.0)) == doctest::Approx(-5.0));
  Eigen::VectorXd empty(0);
  CHECK(logsumexp(empty) == kNegInf);
}

TEST_CASE("logsumexp is invariant to additive constants") {
  Eigen::VectorXd v(3);
  v << -2.0, 0.3, 1.7;
  const double base = logsumexp(v);
  for (const double c : {-500.0, -1.0, 250.0}) {
    Eigen::VectorXd shifted = v.array() + c;
    CHECK(logsumexp(shifted) == doctest::Approx(base + c).epsilon(1e-13));
  }
}

TEST_CASE("logsumexp rejects NaN input") {
  CHECK_THROWS_AS(logsumexp(vec2(0.0, std::nan(""))), std::invalid_argument);
}

TEST_CASE("ensemble validation") {
  auto flat = [](const Eigen::VectorXd&) { return 0.0; };
  auto lik = [](const Eigen::VectorXd&) { return -1.0; };
  std::vector<CoordSpec> coords = {{"x", CoordTransform::identity}};

  // One model is not an ensemble.
  CHECK_THROWS_AS(MixtureEnsemble({{"only", 1.0, lik}}, flat, coords),
                  std::invalid_argument);
  // Weights must sum to one.
  CHECK_THROWS_AS(
      MixtureEnsemble({{"a", 0.5, lik}, {"b", 0.6, lik}}, flat, coords),
      std::invalid_argument);
  // Zero weights are rejected.
  CHECK_THROWS_AS(
      MixtureEnsemble({{"a", 0.0, lik}, {"b", 1.0, lik}}, flat, coords),
      std::invalid_argument);
  // Duplicate names are rejected.
  CHECK_THROWS_AS(
      MixtureEnsemble({{"a", 0.5, lik}, {"a", 0.5, lik}}, flat, coords),
      std::invalid_argument);
  // No coordinates.
  CHECK_THROWS_AS(MixtureEnsemble({{"a", 0.5, lik}, {"b", 0.5, lik}}, flat, {}),
                  std::invalid_argument);
}

TEST_CASE("sampled_label maps log-scale coordinates") {
  CoordSpec id{"mu", CoordTransform::identity};
  CoordSpec lg{"lambda", CoordTransform::log_scale};
  CHECK(id.sampled_label() == "mu");
  CHECK(lg.sampled_label() == "log_lambda");
}

TEST_CASE("mixture density combines weighted likelihoods") {
  const MixtureEnsemble ens = toy_ensemble();
  Eigen::VectorXd t(1);
  t << 0.25;
  const MixtureLogDensity d = log_mixture_density(ens, t);
  const double f0 = -0.5 * 0.25 * 0.25;
  const double f1 = -0.5 * 0.75 * 0.75;
  const double expected =
      std::log(0.5 * std::exp(f0) + 0.5 * std::exp(f1));
  CHECK(d.log_mixture == doctest::Approx(expected).epsilon(1e-14));
  CHECK(d.log_prior == 0.0);
  CHECK(d.total == doctest::Approx(expected).epsilon(1e-14));
  REQUIRE(d.per_model_loglik.size() == 2);
  CHECK(d.per_model_loglik[0] == doctest::Approx(f0));
  CHECK(d.per_model_loglik[1] == doctest::Approx(f1));
  CHECK(log_unnormalized_posterior(ens, t) == doctest::Approx(d.total));
}

TEST_CASE("mixture density stays finite in the underflow range") {
  CandidateModel m0{"a", 0.5,
                    [](const Eigen::VectorXd&) { return -1000.0; }};
  CandidateModel m1{"b", 0.5,
                    [](const Eigen::VectorXd&) { return -1001.0; }};
  const MixtureEnsemble ens({m0, m1},
                            [](const Eigen::VectorXd&) { return 0.0; },
                            {{"x", CoordTransform::identity}});
  Eigen::VectorXd t(1);
  t << 0.0;
  // -1000 + log((1 + e^-1)/2); naive exponentiation would underflow to 0.
  CHECK(log_mixture_density(ens, t).log_mixture ==
        doctest::Approx(-1000.3798854930417).epsilon(1e-14));
}

TEST_CASE("mixture density under unequal prior weights") {
  const MixtureEnsemble ens = toy_ensemble(0.9, 0.1);
  Eigen::VectorXd t(1);
  t << 0.0;
  const MixtureLogDensity d = log_mixture_density(ens, t);
  const double expected =
      std::log(0.9 * std::exp(-0.0) + 0.1 * std::exp(-0.5));
  CHECK(d.log_mixture == doctest::Approx(expected).epsilon(1e-14));
  const Eigen::VectorXd w = ens.prior_weights();
  CHECK(w[0] == 0.9);
  CHECK(w[1] == 0.1);
}

TEST_CASE("a model returning -inf drops out of the mixture") {
  CandidateModel dead{"dead", 0.5,
                      [](const Eigen::VectorXd&) { return kNegInf; }};
  CandidateModel alive{"alive", 0.5,
                       [](const Eigen::VectorXd&) { return -2.0; }};
  const MixtureEnsemble ens({dead, alive},
                            [](const Eigen::VectorXd&) { return 0.0; },
                            {{"x", CoordTransform::identity}});
  Eigen::VectorXd t(1);
  t << 0.0;
  const MixtureLogDensity d = log_mixture_density(ens, t);
  CHECK(d.log_mixture == doctest::Approx(std::log(0.5) - 2.0));
}

TEST_CASE("all models at -inf yields -inf, not NaN") {
  CandidateModel a{"a", 0.5, [](const Eigen::VectorXd&) { return kNegInf; }};
  CandidateModel b{"b", 0.5, [](const Eigen::VectorXd&) { return kNegInf; }};
  const MixtureEnsemble ens({a, b},
                            [](const Eigen::VectorXd&) { return 0.0; },
                            {{"x", CoordTransform::identity}});
  Eigen::VectorXd t(1);
  t << 0.0;
  const MixtureLogDensity d = log_mixture_density(ens, t);
  CHECK(d.log_mixture == kNegInf);
  CHECK(d.total == kNegInf);
}

TEST_CASE("a NaN evaluator is reported with the model's name") {
  CandidateModel bad{"broken_model", 0.5,
                     [](const Eigen::VectorXd&) { return std::nan(""); }};
  CandidateModel ok{"fine", 0.5, [](const Eigen::VectorXd&) { return 0.0; }};
  const MixtureEnsemble ens({bad, ok},
                            [](const Eigen::VectorXd&) { return 0.0; },
                            {{"x", CoordTransform::identity}});
  Eigen::VectorXd t(1);
  t << 0.0;
  bool threw = false;
  try {
    log_mixture_density(ens, t);
  } catch (const std::runtime_error& e) {
    threw = true;
    CHECK(std::string(e.what()).find("broken_model") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("dimension mismatches and non-finite parameters are rejected") {
  const MixtureEnsemble ens = toy_ensemble();
  Eigen::VectorXd wrong(2);
  wrong << 0.0, 1.0;
  CHECK_THROWS_AS(log_mixture_density(ens, wrong), std::invalid_argument);
  Eigen::VectorXd inf(1);
  inf << std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(log_mixture_density(ens, inf), std::invalid_argument);
}

TEST_CASE("prior contributes additively to the total") {
  CandidateModel m0{"a", 0.5,
                    [](const Eigen::VectorXd& t) { return -t[0] * t[0]; }};
  CandidateModel m1{"b", 0.5,
                    [](const Eigen::VectorXd& t) { return -2.0 * t[0] * t[0]; }};
  const MixtureEnsemble ens({m0, m1},
                            [](const Eigen::VectorXd& t) { return -3.0 * t[0]; },
                            {{"x", CoordTransform::identity}});
  Eigen::VectorXd t(1);
  t << 2.0;
  const MixtureLogDensity d = log_mixture_density(ens, t);
  CHECK(d.log_prior == doctest::Approx(-6.0));
  CHECK(d.total == doctest::Approx(d.log_mixture - 6.0).epsilon(1e-14));
}
