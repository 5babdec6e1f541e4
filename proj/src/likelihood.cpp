#include "lrmix/likelihood.hpp"

#include <cmath>

namespace lrmix {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;
}

double log1pexp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double nb_log_const(double y, double r) {
  return std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1.0);
}

double loglik_coord(const ResponseFamily& family, double y, double eta) {
  switch (family.tag) {
    case Family::Gaussian: {
      const double resid = y - eta;
      return -0.5 * (kLogTwoPi + std::log(family.sigma2)) -
             0.5 * resid * resid / family.sigma2;
    }
    case Family::Bernoulli: {
      if (y != 0.0 && y != 1.0)
        throw DataError("Bernoulli response must be 0 or 1");
      return y * eta - log1pexp(eta);
    }
    case Family::NegBin: {
      if (y < 0.0 || std::floor(y) != y)
        throw DataError("NegBin response must be a nonnegative integer");
      return nb_log_const(y, family.r) + y * eta -
             (y + family.r) * log1pexp(eta);
    }
  }
  throw DataError("unknown family");
}

AugmentTriple augment_triple(const ResponseFamily& family, double y) {
  AugmentTriple t;
  switch (family.tag) {
    case Family::Gaussian:
      t.is_gaussian = true;
      t.b = 0.0;
      t.kappa = y / family.sigma2;
      return t;
    case Family::Bernoulli:
      if (y != 0.0 && y != 1.0)
        throw DataError("Bernoulli response must be 0 or 1");
      t.b = 1.0;
      t.kappa = y - 0.5;
      return t;
    case Family::NegBin:
      if (y < 0.0 || std::floor(y) != y)
        throw DataError("NegBin response must be a nonnegative integer");
      t.b = y + family.r;
      t.kappa = 0.5 * (y - family.r);
      return t;
  }
  throw DataError("unknown family");
}

double pg_mean(double b, double eta) {
  const double a = std::fabs(eta);
  // series keeps relative error below ~1e-12 on both sides of the cutover
  if (a < 1e-4) return 0.25 * b * (1.0 - eta * eta / 12.0);
  return b * std::tanh(0.5 * eta) / (2.0 * eta);
}

double pg_variance(double b, double z) {
  const double a = std::fabs(z);
  if (a < 1e-3) return b / 24.0 * (1.0 - z * z / 5.0);
  if (a > 30.0) {
    // (sinh z - z)/(1 + cosh z) -> 1 - 2 z e^{-z} for large z
    return b / (2.0 * a * a * a) * (1.0 - 2.0 * a * std::exp(-a));
  }
  // (b / 4z^3) (sinh z - z) / cosh^2(z/2), with cosh^2(z/2) = (1 + cosh z)/2
  return b / (2.0 * a * a * a) * (std::sinh(a) - a) / (1.0 + std::cosh(a));
}

double pseudo_response(const AugmentTriple& triple, double y, double omega) {
  if (triple.is_gaussian) return y;
  if (!(omega > 0.0))
    throw NumericalError("pseudo_response requires omega > 0");
  return triple.kappa / omega;
}

double nb_mean(double r, double eta) { return r * std::exp(eta); }

Eigen::MatrixXd loglik_matrix(const std::vector<ClusterParams>& clusters,
                              const std::vector<ResponseFamily>& families,
                              const Dataset& data) {
  const int n = data.n();
  const int q = data.q();
  const int K = static_cast<int>(clusters.size());
  Eigen::MatrixXd ell = Eigen::MatrixXd::Zero(n, K);

  // per-column constants that do not involve eta
  Eigen::MatrixXd const_part = Eigen::MatrixXd::Zero(n, q);
  for (int j = 0; j < q; ++j) {
    const auto& f = families[static_cast<size_t>(j)];
    if (f.tag == Family::Gaussian) {
      const_part.col(j).setConstant(-0.5 * (kLogTwoPi + std::log(f.sigma2)));
    } else if (f.tag == Family::NegBin) {
      for (int i = 0; i < n; ++i)
        const_part(i, j) = nb_log_const(data.Y(i, j), f.r);
    }
  }

  for (int k = 0; k < K; ++k) {
    const auto& c = clusters[static_cast<size_t>(k)];
    // eta = 1 mu' + X L R' + O
    Eigen::MatrixXd eta = (data.X * c.L) * c.R.transpose() + data.O;
    eta.rowwise() += c.mu.transpose();
    for (int j = 0; j < q; ++j) {
      const auto& f = families[static_cast<size_t>(j)];
      double acc;
      for (int i = 0; i < n; ++i) {
        const double y = data.Y(i, j);
        const double e = eta(i, j);
        switch (f.tag) {
          case Family::Gaussian:
            acc = const_part(i, j) - 0.5 * (y - e) * (y - e) / f.sigma2;
            break;
          case Family::Bernoulli:
            acc = y * e - log1pexp(e);
            break;
          case Family::NegBin:
          default:
            acc = const_part(i, j) + y * e - (y + f.r) * log1pexp(e);
            break;
        }
        ell(i, k) += acc;
      }
    }
  }
  return ell;
}

} // namespace lrmix
