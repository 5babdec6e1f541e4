#include "lrmix/rng.hpp"

#include <cmath>

namespace lrmix {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::uint32_t ctr[4], std::uint32_t key[2]) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  const std::uint32_t c1 = ctr[1], c3 = ctr[3];
  ctr[0] = hi1 ^ c1 ^ key[0];
  ctr[1] = lo1;
  ctr[2] = hi0 ^ c3 ^ key[1];
  ctr[3] = lo0;
  key[0] += kPhiloxW0;
  key[1] += kPhiloxW1;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr double kPi = 3.14159265358979323846;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double log_normal_cdf(double x) {
  if (x > -8.0) return std::log(normal_cdf(x));
  // asymptotic tail: phi(x)/|x| * (1 - 1/x^2 + 3/x^4)
  const double x2 = x * x;
  return -0.5 * x2 - 0.5 * std::log(2.0 * kPi) - std::log(-x) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

} // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {}

Rng Rng::substream(std::uint64_t id) const {
  return Rng(seed_, splitmix64(stream_ ^ splitmix64(id)));
}

void Rng::refill() {
  std::uint32_t ctr[4] = {
      static_cast<std::uint32_t>(counter_),
      static_cast<std::uint32_t>(counter_ >> 32),
      static_cast<std::uint32_t>(stream_),
      static_cast<std::uint32_t>(stream_ >> 32),
  };
  std::uint32_t key[2] = {static_cast<std::uint32_t>(seed_),
                          static_cast<std::uint32_t>(seed_ >> 32)};
  for (int round = 0; round < 10; ++round) philox_round(ctr, key);
  for (int i = 0; i < 4; ++i) buffer_[i] = ctr[i];
  buffer_pos_ = 0;
  ++counter_;
}

std::uint64_t Rng::next_u64() {
  if (buffer_pos_ > 2) refill();
  const std::uint64_t lo = buffer_[buffer_pos_];
  const std::uint64_t hi = buffer_[buffer_pos_ + 1];
  buffer_pos_ += 2;
  return lo | (hi << 32);
}

double Rng::uniform() {
  // (0,1): never returns an endpoint
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  spare_normal_ = mag * std::sin(2.0 * kPi * u2);
  has_spare_normal_ = true;
  return mag * std::cos(2.0 * kPi * u2);
}

double Rng::exponential() { return -std::log(uniform()); }

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw NumericalError("gamma requires shape > 0 and rate > 0");
  if (shape < 1.0) {
    const double u = uniform();
    return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return d * v / rate;
  }
}

double Rng::inverse_gamma(double shape, double rate) {
  return 1.0 / gamma(shape, rate);
}

Eigen::VectorXd Rng::dirichlet(const Eigen::VectorXd& alpha) {
  Eigen::VectorXd g(alpha.size());
  for (Eigen::Index k = 0; k < alpha.size(); ++k)
    g[k] = gamma(alpha[k], 1.0);
  const double total = g.sum();
  if (!(total > 0.0)) throw NumericalError("degenerate Dirichlet draw");
  return g / total;
}

long long Rng::poisson(double mean) {
  if (!(mean >= 0.0)) throw NumericalError("poisson requires mean >= 0");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    // Knuth product-of-uniforms
    const double limit = std::exp(-mean);
    long long k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }
  // Hormann PTRS transformed rejection
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  for (;;) {
    double u = uniform() - 0.5;
    double v = uniform();
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<long long>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        kf * log_mean - mean - std::lgamma(kf + 1.0))
      return static_cast<long long>(kf);
  }
}

long long Rng::negbin(double r, double p) {
  if (!(r > 0.0) || !(p >= 0.0) || !(p < 1.0))
    throw NumericalError("negbin requires r > 0 and p in [0,1)");
  if (p == 0.0) return 0;
  // gamma-Poisson mixture: lambda ~ Ga(r, (1-p)/p), y ~ Pois(lambda)
  const double lambda = gamma(r, (1.0 - p) / p);
  return poisson(lambda);
}

namespace {

// ---- exact PG(1, z) sampler (alternating-series rejection) ----

constexpr double kPgTrunc = 0.64; // series switch point t

double pg_series_coef(int n, double x) {
  const double np = n + 0.5;
  if (x <= kPgTrunc)
    return kPi * np * std::pow(2.0 / (kPi * x), 1.5) *
           std::exp(-2.0 * np * np / x);
  return kPi * np * std::exp(-0.5 * np * np * kPi * kPi * x);
}

// CDF of IG(mu = 1/z, lambda = 1) at t, z >= 0 (Levy limit at z = 0)
double pigauss_cdf(double t, double z) {
  const double rt = std::sqrt(t);
  const double a = (t * z - 1.0) / rt;
  const double b = (t * z + 1.0) / rt;
  return normal_cdf(a) + std::exp(2.0 * z + log_normal_cdf(-b));
}

// IG(1/z, 1) truncated to (0, t]
double pg_trunc_inv_gauss(double z, double t, Rng& rng) {
  if (z < 1.0 / t) {
    // mu > t: sample 1/X from the tail via paired exponentials
    for (;;) {
      double e1, e2;
      do {
        e1 = rng.exponential();
        e2 = rng.exponential();
      } while (e1 * e1 > 2.0 * e2 / t);
      const double x = t / ((1.0 + t * e1) * (1.0 + t * e1));
      if (std::log(rng.uniform()) <= -0.5 * z * z * x) return x;
    }
  }
  const double mu = 1.0 / z;
  for (;;) {
    const double y = rng.normal() * rng.normal();
    const double muy = mu * y;
    double x = mu + 0.5 * mu * muy -
               0.5 * mu * std::sqrt(muy * (4.0 + muy));
    if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    if (x <= t) return x;
  }
}

double sample_pg1(double z, Rng& rng) {
  z = 0.5 * std::fabs(z);
  const double big_k = kPi * kPi / 8.0 + 0.5 * z * z;
  const double p = kPi / (2.0 * big_k) * std::exp(-big_k * kPgTrunc);
  const double q = 2.0 * std::exp(-z) * pigauss_cdf(kPgTrunc, z);
  const double ratio = p / (p + q);
  for (;;) {
    double x;
    if (rng.uniform() < ratio)
      x = kPgTrunc + rng.exponential() / big_k;
    else
      x = pg_trunc_inv_gauss(z, kPgTrunc, rng);
    // alternating-series accept/reject
    double s = pg_series_coef(0, x);
    const double y = rng.uniform() * s;
    int n = 0;
    for (;;) {
      ++n;
      if (n % 2 == 1) {
        s -= pg_series_coef(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += pg_series_coef(n, x);
        if (y > s) break;
      }
    }
  }
}

} // namespace

double sample_pg(double b, double z, Rng& rng) {
  if (!(b > 0.0)) throw NumericalError("sample_pg requires b > 0");
  const bool integral = std::floor(b) == b;
  if (integral && b <= 50.0) {
    double total = 0.0;
    const int m = static_cast<int>(b);
    for (int i = 0; i < m; ++i) total += sample_pg1(z, rng);
    return total;
  }
  const double mean = pg_mean(b, z);
  const double sd = std::sqrt(pg_variance(b, z));
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double draw = mean + sd * rng.normal();
    if (draw > 0.0) return draw;
  }
  return 1e-12;
}

long long sample_crt(long long y, double r, Rng& rng) {
  if (y < 0 || !(r > 0.0))
    throw NumericalError("sample_crt requires y >= 0 and r > 0");
  long long total = 0;
  for (long long l = 1; l <= y; ++l)
    if (rng.uniform() < r / (r + static_cast<double>(l) - 1.0)) ++total;
  return total;
}

Eigen::LLT<Eigen::MatrixXd> spd_factorize(const Eigen::MatrixXd& Q) {
  Eigen::LLT<Eigen::MatrixXd> llt(Q);
  if (llt.info() == Eigen::Success) return llt;
  const double jitter =
      1e-8 * Q.trace() / static_cast<double>(Q.rows());
  Eigen::MatrixXd Qj = Q;
  Qj.diagonal().array() += jitter;
  llt.compute(Qj);
  if (llt.info() == Eigen::Success) return llt;
  throw NumericalError("precision matrix not SPD after jitter retry");
}

Eigen::VectorXd mvn_precision(const Eigen::MatrixXd& Q,
                              const Eigen::VectorXd& b, Rng& rng) {
  const auto llt = spd_factorize(Q);
  Eigen::VectorXd mean = llt.solve(b);
  Eigen::VectorXd zvec(b.size());
  for (Eigen::Index i = 0; i < zvec.size(); ++i) zvec[i] = rng.normal();
  // x = mean + U^{-1} z with Q = U' U
  Eigen::VectorXd noise =
      llt.matrixU().solve(zvec);
  return mean + noise;
}

Eigen::VectorXd mvn_covariance(const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& cov, Rng& rng) {
  const auto llt = spd_factorize(cov);
  Eigen::VectorXd zvec(mean.size());
  for (Eigen::Index i = 0; i < zvec.size(); ++i) zvec[i] = rng.normal();
  return mean + llt.matrixL() * zvec;
}

} // namespace lrmix
