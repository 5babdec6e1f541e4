#pragma once

#include "lrmix/types.hpp"

namespace lrmix {

// Posterior similarity matrix, either materialized (n x n) or kept in the
// rank-K factorized form Gamma Gamma'.
struct Psm {
  bool factorized = false;
  Eigen::MatrixXd dense; // n x n when !factorized
  Eigen::MatrixXd gamma; // n x K when factorized
  int n() const {
    return factorized ? static_cast<int>(gamma.rows())
                      : static_cast<int>(dense.rows());
  }
};

struct Embedding {
  Eigen::MatrixXd U;           // n x m, m <= requested K
  Eigen::VectorXd eigenvalues; // m, descending
  bool row_normalized = false;
  bool truncated = false; // requested K exceeded the numerical rank
};

struct MeanShiftResult {
  std::vector<int> labels;
  Eigen::MatrixXd modes; // found modes x d
  double bandwidth = 0.0;
  bool converged = true; // false if any trajectory hit max_iter
};

struct MeanShiftOptions {
  double tol = 1e-7;
  int max_iter = 500;
  double merge_radius = -1.0; // < 0 means h/10
};

struct PartitionReport {
  Embedding embedding;
  std::vector<int> labels;
  Eigen::MatrixXd modes;
  double bandwidth = 0.0;
  int n_clusters = 0;
  bool row_normalized = false;
  bool converged = true;
};

struct ClusterOptions {
  bool row_normalize = false;
  double bandwidth = -1.0; // < 0 means the median-distance default
  MeanShiftOptions mean_shift;
};

// co-clustering frequencies over retained draws (T x n labels)
Psm psm_from_draws(const Eigen::MatrixXi& z_draws);

// factorized PSM Gamma Gamma'; rows must lie on the simplex (1e-8)
Psm psm_from_gamma(const Eigen::MatrixXd& gamma);

// n x n matrix with the diagonal forced to 1
Eigen::MatrixXd materialize(const Psm& psm);

// top-K eigenpairs: dense symmetric solve, or the K x K factorized route
// that never forms the n x n matrix
Embedding psm_eigen(const Psm& psm, int K);
Embedding eigen_dense_topk(const Eigen::MatrixXd& S, int K);

MeanShiftResult mean_shift(const Eigen::MatrixXd& points, double h,
                           const MeanShiftOptions& options = {});

// 0.5 x median pairwise distance over a deterministic subsample (<= 1000
// points), floored at 1e-6
double default_bandwidth(const Eigen::MatrixXd& points);

PartitionReport cluster_psm(const FitResult& fit, int K,
                            const ClusterOptions& options = {});

} // namespace lrmix
