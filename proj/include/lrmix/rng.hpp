#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "lrmix/types.hpp"

namespace lrmix {

// Counter-based generator (Philox-4x32-10). A draw sequence is a pure
// function of (seed, stream), so parallel workers on distinct streams are
// reproducible regardless of scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  // independent stream derived from this one; stable under call order
  Rng substream(std::uint64_t id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64();
  double uniform();      // (0, 1)
  double normal();       // standard normal
  double exponential();  // rate 1

  // Marsaglia-Tsang; rate parameterization
  double gamma(double shape, double rate);
  double inverse_gamma(double shape, double rate);
  Eigen::VectorXd dirichlet(const Eigen::VectorXd& alpha);
  long long poisson(double mean);
  long long negbin(double r, double p); // number-of-failures form

 private:
  void refill();

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
  std::uint32_t buffer_[4] = {0, 0, 0, 0};
  int buffer_pos_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_normal_ = false;
};

// One draw from PG(b, z).  b = 1 uses the exact alternating-series
// rejection sampler; integer b <= 50 sums b exact draws; otherwise a
// moment-matched normal truncated to be positive.
double sample_pg(double b, double z, Rng& rng);

// Latent table count: L = sum_{l=1}^{y} Bernoulli(r / (r + l - 1)).
long long sample_crt(long long y, double r, Rng& rng);

// Symmetric factorization of an SPD matrix with a one-shot jitter retry
// (1e-8 tr(Q)/dim added to the diagonal); throws NumericalError on the
// second failure.
Eigen::LLT<Eigen::MatrixXd> spd_factorize(const Eigen::MatrixXd& Q);

// Draw from N(Q^{-1} b, Q^{-1}) given precision Q and linear term b.
Eigen::VectorXd mvn_precision(const Eigen::MatrixXd& Q,
                              const Eigen::VectorXd& b, Rng& rng);

// Draw from N(mean, cov)
Eigen::VectorXd mvn_covariance(const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& cov, Rng& rng);

} // namespace lrmix
