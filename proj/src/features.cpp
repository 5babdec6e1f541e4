#include "lrmix/features.hpp"

#include <cmath>
#include <limits>

namespace lrmix {

Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& M,
                                    std::vector<int>* flagged) {
  const int n = static_cast<int>(M.rows());
  Eigen::MatrixXd out = M;
  for (int j = 0; j < M.cols(); ++j) {
    const double mean = M.col(j).mean();
    const double var =
        (M.col(j).array() - mean).square().sum() / std::max(1, n - 1);
    double sd = std::sqrt(var);
    if (!(sd > 0.0)) {
      sd = 1.0;
      if (flagged) flagged->push_back(j);
    }
    out.col(j) = (M.col(j).array() - mean) / sd;
  }
  return out;
}

Eigen::MatrixXd feature_transform(const Eigen::MatrixXd& Y,
                                  const std::vector<Family>& families,
                                  std::vector<int>* flagged) {
  if (static_cast<int>(families.size()) != Y.cols())
    throw ConfigError("feature_transform: family list does not match Y");
  Eigen::MatrixXd out = Y;
  for (int j = 0; j < Y.cols(); ++j) {
    switch (families[static_cast<size_t>(j)]) {
      case Family::Bernoulli:
        break; // keep as 0/1 indicators
      case Family::NegBin:
        out.col(j) = Y.col(j).array().log1p();
        [[fallthrough]];
      case Family::Gaussian: {
        std::vector<int> f;
        out.col(j) = standardize_columns(out.col(j), &f);
        if (!f.empty() && flagged) flagged->push_back(j);
        break;
      }
    }
  }
  return out;
}

namespace {

int nearest_center(const Eigen::MatrixXd& centers,
                   const Eigen::RowVectorXd& x, double* dist2_out = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < centers.rows(); ++k) {
    const double d = (centers.row(k) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  if (dist2_out) *dist2_out = best_d;
  return best;
}

Eigen::MatrixXd kmeanspp_seed(const Eigen::MatrixXd& points, int K, Rng& rng) {
  const int n = static_cast<int>(points.rows());
  Eigen::MatrixXd centers(K, points.cols());
  centers.row(0) = points.row(static_cast<int>(rng.uniform() * n) % n);
  Eigen::VectorXd d2(n);
  for (int k = 1; k < K; ++k) {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int m = 0; m < k; ++m)
        best = std::min(best, (centers.row(m) - points.row(i)).squaredNorm());
      d2[i] = best;
    }
    const double total = d2.sum();
    if (total <= 0.0) {
      centers.row(k) = points.row(static_cast<int>(rng.uniform() * n) % n);
      continue;
    }
    const double u = rng.uniform() * total;
    double cum = 0.0;
    int pick = n - 1;
    for (int i = 0; i < n; ++i) {
      cum += d2[i];
      if (u <= cum) {
        pick = i;
        break;
      }
    }
    centers.row(k) = points.row(pick);
  }
  return centers;
}

KMeansResult lloyd(const Eigen::MatrixXd& points, int K, Rng& rng,
                   int max_iter) {
  const int n = static_cast<int>(points.rows());
  KMeansResult res;
  res.centers = kmeanspp_seed(points, K, rng);
  res.labels.assign(n, 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      const int k = nearest_center(res.centers, points.row(i));
      if (k != res.labels[static_cast<size_t>(i)]) {
        res.labels[static_cast<size_t>(i)] = k;
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, points.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
    for (int i = 0; i < n; ++i) {
      sums.row(res.labels[static_cast<size_t>(i)]) += points.row(i);
      counts[res.labels[static_cast<size_t>(i)]] += 1.0;
    }
    for (int k = 0; k < K; ++k) {
      if (counts[k] > 0.0) {
        res.centers.row(k) = sums.row(k) / counts[k];
      } else {
        // re-seed an empty cluster at the point farthest from its center
        int far_i = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d =
              (points.row(i) -
               res.centers.row(res.labels[static_cast<size_t>(i)]))
                  .squaredNorm();
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        res.centers.row(k) = points.row(far_i);
        res.labels[static_cast<size_t>(far_i)] = k;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
  }
  res.inertia = 0.0;
  for (int i = 0; i < n; ++i)
    res.inertia +=
        (points.row(i) - res.centers.row(res.labels[static_cast<size_t>(i)]))
            .squaredNorm();
  return res;
}

} // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int K, Rng& rng,
                    int restarts, int max_iter) {
  if (K < 1) throw ConfigError("kmeans requires K >= 1");
  if (K > points.rows()) throw ConfigError("kmeans requires K <= n");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int s = 0; s < restarts; ++s) {
    Rng local = rng.substream(static_cast<std::uint64_t>(s) + 1);
    KMeansResult cand = lloyd(points, K, local, max_iter);
    if (cand.inertia < best.inertia) best = std::move(cand);
  }
  return best;
}

std::vector<int> baseline_kmeans(const Eigen::MatrixXd& features, int K,
                                 Rng& rng) {
  return kmeans(features, K, rng, 20).labels;
}

std::vector<int> baseline_pca_kmeans(const Eigen::MatrixXd& features, int K,
                                     Rng& rng, double var_target,
                                     int max_components) {
  const int n = static_cast<int>(features.rows());
  const int d = static_cast<int>(features.cols());
  Eigen::RowVectorXd mean = features.colwise().mean();
  Eigen::MatrixXd centered = features.rowwise() - mean;
  Eigen::MatrixXd cov =
      centered.transpose() * centered / std::max(1, n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  // eigenvalues ascending; walk from the top
  const double total = std::max(es.eigenvalues().sum(), 1e-300);
  int m = 0;
  double captured = 0.0;
  while (m < d && captured / total < var_target) {
    captured += std::max(0.0, es.eigenvalues()[d - 1 - m]);
    ++m;
  }
  m = std::max(1, std::min(m, std::min(max_components, d)));
  Eigen::MatrixXd proj(d, m);
  for (int c = 0; c < m; ++c) proj.col(c) = es.eigenvectors().col(d - 1 - c);
  return kmeans(centered * proj, K, rng, 20).labels;
}

std::vector<int> baseline_gmm_diag(const Eigen::MatrixXd& features, int K,
                                   Rng& rng, double tol, int max_iter) {
  const int n = static_cast<int>(features.rows());
  const int d = static_cast<int>(features.cols());
  if (K > n) throw ConfigError("gmm requires K <= n");

  KMeansResult init = kmeans(features, K, rng, 20);
  Eigen::MatrixXd means = init.centers;
  Eigen::MatrixXd vars(K, d);
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(K);
  const double global_var =
      (features.rowwise() - features.colwise().mean())
          .squaredNorm() /
      std::max(1, n * d - 1);
  const double var_floor = std::max(1e-6 * global_var, 1e-12);
  for (int k = 0; k < K; ++k) {
    Eigen::RowVectorXd ss = Eigen::RowVectorXd::Zero(d);
    int count = 0;
    for (int i = 0; i < n; ++i)
      if (init.labels[static_cast<size_t>(i)] == k) {
        ss += (features.row(i) - means.row(k)).array().square().matrix();
        ++count;
      }
    weights[k] = std::max(1, count);
    vars.row(k) =
        (ss / std::max(1, count)).array().max(var_floor).matrix();
  }
  weights /= weights.sum();

  Eigen::MatrixXd resp(n, K);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    // E-step
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd logp(K);
      for (int k = 0; k < K; ++k) {
        double lp = std::log(weights[k]);
        for (int c = 0; c < d; ++c) {
          const double diff = features(i, c) - means(k, c);
          lp += -0.5 * std::log(2.0 * M_PI * vars(k, c)) -
                0.5 * diff * diff / vars(k, c);
        }
        logp[k] = lp;
      }
      const double m = logp.maxCoeff();
      Eigen::VectorXd w = (logp.array() - m).exp();
      const double s = w.sum();
      resp.row(i) = (w / s).transpose();
      ll += m + std::log(s);
    }
    // M-step
    Eigen::VectorXd nk = resp.colwise().sum();
    for (int k = 0; k < K; ++k) {
      const double denom = std::max(nk[k], 1e-12);
      means.row(k) = (resp.col(k).transpose() * features) / denom;
      Eigen::RowVectorXd ss = Eigen::RowVectorXd::Zero(d);
      for (int i = 0; i < n; ++i)
        ss += resp(i, k) *
              (features.row(i) - means.row(k)).array().square().matrix();
      vars.row(k) = (ss / denom).array().max(var_floor).matrix();
      weights[k] = denom / n;
    }
    if (iter > 0 && std::fabs(ll - prev_ll) <=
                        tol * (std::fabs(prev_ll) + 1.0))
      break;
    prev_ll = ll;
  }
  std::vector<int> labels(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int arg = 0;
    resp.row(i).maxCoeff(&arg);
    labels[static_cast<size_t>(i)] = arg;
  }
  return labels;
}

} // namespace lrmix
