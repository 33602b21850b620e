#pragma once

#include <cstdint>

namespace mixbma {

// Deterministic pseudo-random generator: xoshiro256++ seeded through
// splitmix64.  All variate transforms are implemented locally rather than
// through std:: distributions so that streams are bit-identical across
// standard library implementations and platforms.
//
// Raw-draw accounting (one "raw draw" = one 64-bit output):
//   uniform()        1 raw draw
//   normal()         2 raw draws (Box-Muller, cosine branch)
//   gamma(), beta(), poisson()  variable, but deterministic given the stream
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Next raw 64-bit output.
  std::uint64_t next_u64();

  // Number of raw draws consumed so far.
  std::uint64_t raw_count() const { return count_; }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos();
  // Uniform on [a, b).
  double uniform(double a, double b);

  // Standard normal via Box-Muller (cosine branch only); consumes exactly
  // two raw draws.
  double normal();

  // Gamma(shape, rate) via Marsaglia-Tsang squeeze; shape < 1 handled by
  // the boosting identity Ga(a) = Ga(a+1) * U^{1/a}.
  double gamma(double shape, double rate);

  // Beta(a, b) as X/(X+Y) with X ~ Ga(a,1), Y ~ Ga(b,1).
  double beta(double a, double b);

  // Poisson(mean) by Knuth's product method; means above 30 are split into
  // chunks so the uniform product never underflows.
  long poisson(double mean);

  bool bernoulli(double p);

  // Independent child stream derived from the original seed and an index;
  // unaffected by how much this stream has consumed.
  Rng child(std::uint64_t index) const;

 private:
  std::uint64_t s_[4];
  std::uint64_t seed_;
  std::uint64_t count_ = 0;
};

}  // namespace mixbma
