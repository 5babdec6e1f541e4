#pragma once

#include "lrmix/types.hpp"

namespace lrmix {

// Quadratic-augmentation bookkeeping for one response cell.
// Bernoulli: b = 1, kappa = y - 1/2.  NegBin: b = y + r, kappa = (y - r)/2.
// Gaussian cells are flagged; their weight is fixed at 1/sigma2 and
// kappa = y/sigma2.
struct AugmentTriple {
  double b = 0.0;
  double kappa = 0.0;
  bool is_gaussian = false;
};

// log(1 + e^x) without overflow
double log1pexp(double x);

// log binomial normalizing constant log C(y+r-1, y), real-valued r
double nb_log_const(double y, double r);

// Full log-density of one response coordinate, constants included.
double loglik_coord(const ResponseFamily& family, double y, double eta);

AugmentTriple augment_triple(const ResponseFamily& family, double y);

// E[omega | eta] for omega ~ PG(b, eta): b tanh(eta/2) / (2 eta),
// with the removable singularity at eta = 0 equal to b/4.
double pg_mean(double b, double eta);

// Var[omega] for omega ~ PG(b, z)
double pg_variance(double b, double z);

// z = kappa/omega for augmented cells, y for Gaussian cells.
double pseudo_response(const AugmentTriple& triple, double y, double omega);

// NegBin conditional mean r e^eta (offset already inside eta)
double nb_mean(double r, double eta);

// n x K matrix of per-unit, per-cluster log-likelihood sums
// ell_ik = sum_j loglik_coord(family_j, y_ij, eta_ijk), offsets included.
Eigen::MatrixXd loglik_matrix(const std::vector<ClusterParams>& clusters,
                              const std::vector<ResponseFamily>& families,
                              const Dataset& data);

} // namespace lrmix
