#pragma once

#include "lrmix/rng.hpp"
#include "lrmix/types.hpp"

namespace lrmix {

// Mixed-response feature map: Gaussian columns centered and scaled,
// Bernoulli columns kept as 0/1, count columns log(1+y) then standardized.
// Zero-variance columns are centered with a unit divisor and flagged.
Eigen::MatrixXd feature_transform(const Eigen::MatrixXd& Y,
                                  const std::vector<Family>& families,
                                  std::vector<int>* flagged = nullptr);

// column-wise center/scale with unit divisor for constant columns
Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& M,
                                    std::vector<int>* flagged = nullptr);

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centers; // K x d
  double inertia = 0.0;
};

// Lloyd's algorithm with k-means++ seeding; best of `restarts` runs
KMeansResult kmeans(const Eigen::MatrixXd& points, int K, Rng& rng,
                    int restarts = 1, int max_iter = 100);

std::vector<int> baseline_kmeans(const Eigen::MatrixXd& features, int K,
                                 Rng& rng);

// project onto leading principal components capturing >= var_target
// (capped), then k-means
std::vector<int> baseline_pca_kmeans(const Eigen::MatrixXd& features, int K,
                                     Rng& rng, double var_target = 0.9,
                                     int max_components = 10);

// diagonal-covariance Gaussian mixture EM, k-means initialized
std::vector<int> baseline_gmm_diag(const Eigen::MatrixXd& features, int K,
                                   Rng& rng, double tol = 1e-6,
                                   int max_iter = 500);

} // namespace lrmix
