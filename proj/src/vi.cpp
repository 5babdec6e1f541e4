#include "lrmix/vi.hpp"

#include <cmath>
#include <limits>

#include "lrmix/features.hpp"
#include "lrmix/likelihood.hpp"

namespace lrmix {

namespace {

// eta without the intercept: X B_k + O
Eigen::MatrixXd regression_part(const ClusterParams& c, const Dataset& data) {
  return (data.X * c.L) * c.R.transpose() + data.O;
}

// kappa_ij for column j (Gaussian: y/sigma2, Bernoulli: y - 1/2,
// NegBin: (y - r)/2)
Eigen::VectorXd kappa_column(const ResponseFamily& fam,
                             const Eigen::VectorXd& y) {
  switch (fam.tag) {
    case Family::Gaussian: return y / fam.sigma2;
    case Family::Bernoulli: return y.array() - 0.5;
    case Family::NegBin: return 0.5 * (y.array() - fam.r);
  }
  throw DataError("unknown family");
}

double logit_clamped(double p) {
  const double c = std::min(std::max(p, 1e-6), 1.0 - 1e-6);
  return std::log(c / (1.0 - c));
}

} // namespace

double gamma_map_mode(double shape, double rate, double floor_value) {
  if (shape > 1.0) return (shape - 1.0) / rate;
  return floor_value;
}

double vi_sigma2_mode(double weighted_ssr, int n, double a_sigma,
                      double b_sigma) {
  // IG(a + n/2, b + ssr/2) mode = rate / (shape + 1)
  return (b_sigma + 0.5 * weighted_ssr) / (a_sigma + 0.5 * n + 1.0);
}

void vi_expect_omega(VIState& state, const Dataset& data) {
  const int K = static_cast<int>(state.clusters.size());
  const int n = data.n();
  const int q = data.q();
  state.omega_bar.resize(static_cast<size_t>(K));
  for (int k = 0; k < K; ++k) {
    auto& ob = state.omega_bar[static_cast<size_t>(k)];
    ob.resize(n, q);
    Eigen::MatrixXd eta = regression_part(state.clusters[static_cast<size_t>(k)], data);
    eta.rowwise() += state.clusters[static_cast<size_t>(k)].mu.transpose();
    for (int j = 0; j < q; ++j) {
      const auto& fam = state.families[static_cast<size_t>(j)];
      switch (fam.tag) {
        case Family::Gaussian:
          ob.col(j).setConstant(1.0 / fam.sigma2);
          break;
        case Family::Bernoulli:
          for (int i = 0; i < n; ++i) ob(i, j) = pg_mean(1.0, eta(i, j));
          break;
        case Family::NegBin:
          for (int i = 0; i < n; ++i)
            ob(i, j) = pg_mean(data.Y(i, j) + fam.r, eta(i, j));
          break;
      }
    }
  }
}

void vi_update_mu(VIState& state, const Dataset& data, const ModelSpec& spec) {
  const int K = static_cast<int>(state.clusters.size());
  const double prior_prec = 1.0 / spec.hyper.sigma_mu2;
  for (int k = 0; k < K; ++k) {
    auto& c = state.clusters[static_cast<size_t>(k)];
    const Eigen::MatrixXd A = regression_part(c, data); // X B + O
    const auto& ob = state.omega_bar[static_cast<size_t>(k)];
    const Eigen::VectorXd g = state.gamma.col(k);
    for (int j = 0; j < data.q(); ++j) {
      const auto& fam = state.families[static_cast<size_t>(j)];
      const Eigen::VectorXd kap = kappa_column(fam, data.Y.col(j));
      // w z - w a = gamma (kappa - omega a)
      const double num =
          (g.array() * (kap.array() - ob.col(j).array() * A.col(j).array()))
              .sum();
      const double den = (g.array() * ob.col(j).array()).sum() + prior_prec;
      c.mu[j] = num / den;
    }
  }
}

void vi_update_R(VIState& state, const Dataset& data, const ModelSpec& spec) {
  (void)spec;
  const int K = static_cast<int>(state.clusters.size());
  for (int k = 0; k < K; ++k) {
    auto& c = state.clusters[static_cast<size_t>(k)];
    const Eigen::MatrixXd U = data.X * c.L; // n x r
    const auto& ob = state.omega_bar[static_cast<size_t>(k)];
    const Eigen::VectorXd g = state.gamma.col(k);
    const Eigen::VectorXd lam = c.phi * c.lambda();
    for (int j = 0; j < data.q(); ++j) {
      const auto& fam = state.families[static_cast<size_t>(j)];
      const Eigen::VectorXd kap = kappa_column(fam, data.Y.col(j));
      const Eigen::VectorXd w = g.array() * ob.col(j).array();
      const Eigen::VectorXd ktil =
          g.array() *
          (kap.array() - ob.col(j).array() * (c.mu[j] + data.O.col(j).array()));
      Eigen::MatrixXd Q = U.transpose() * w.asDiagonal() * U;
      Q += Eigen::MatrixXd(lam.asDiagonal());
      const Eigen::VectorXd rhs = U.transpose() * ktil;
      c.R.row(j) = spd_factorize(Q).solve(rhs).transpose();
    }
  }
}

void vi_update_L(VIState& state, const Dataset& data, const ModelSpec& spec) {
  (void)spec;
  const int K = static_cast<int>(state.clusters.size());
  const int p = data.p();
  for (int k = 0; k < K; ++k) {
    auto& c = state.clusters[static_cast<size_t>(k)];
    const int r = static_cast<int>(c.L.cols());
    const auto& ob = state.omega_bar[static_cast<size_t>(k)];
    const Eigen::VectorXd g = state.gamma.col(k);
    const Eigen::VectorXd lam = c.phi * c.lambda();

    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(p * r, p * r);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p * r);
    for (int h = 0; h < r; ++h)
      Q.block(h * p, h * p, p, p).diagonal().setConstant(lam[h]);

    for (int j = 0; j < data.q(); ++j) {
      const auto& fam = state.families[static_cast<size_t>(j)];
      const Eigen::VectorXd kap = kappa_column(fam, data.Y.col(j));
      const Eigen::VectorXd w = g.array() * ob.col(j).array();
      const Eigen::VectorXd ktil =
          g.array() *
          (kap.array() - ob.col(j).array() * (c.mu[j] + data.O.col(j).array()));
      const Eigen::MatrixXd M = data.X.transpose() * w.asDiagonal() * data.X;
      const Eigen::VectorXd xk = data.X.transpose() * ktil;
      const Eigen::VectorXd rj = c.R.row(j);
      for (int h = 0; h < r; ++h) {
        rhs.segment(h * p, p) += rj[h] * xk;
        for (int h2 = 0; h2 < r; ++h2)
          Q.block(h * p, h2 * p, p, p) += rj[h] * rj[h2] * M;
      }
    }
    const Eigen::VectorXd vecL = spd_factorize(Q).solve(rhs);
    for (int h = 0; h < r; ++h) c.L.col(h) = vecL.segment(h * p, p);
  }
}

void vi_update_mgp(VIState& state, const ModelSpec& spec, double floor_value) {
  const int K = static_cast<int>(state.clusters.size());
  for (int k = 0; k < K; ++k) {
    auto& c = state.clusters[static_cast<size_t>(k)];
    const int p = static_cast<int>(c.L.rows());
    const int q = static_cast<int>(c.R.rows());
    const int r = static_cast<int>(c.L.cols());
    Eigen::VectorXd S(r);
    for (int h = 0; h < r; ++h)
      S[h] = c.L.col(h).squaredNorm() + c.R.col(h).squaredNorm();

    const Eigen::VectorXd lam = c.lambda();
    double phi_rate = spec.hyper.b_phi;
    for (int h = 0; h < r; ++h) phi_rate += 0.5 * lam[h] * S[h];
    c.phi = gamma_map_mode(spec.hyper.a_phi + 0.5 * (p + q) * r, phi_rate,
                           floor_value);

    for (int h = 0; h < r; ++h) {
      const double a_h = (h == 0) ? spec.hyper.a1 : spec.hyper.a2;
      double rate = 1.0;
      for (int t = h; t < r; ++t) {
        double lam_minus = 1.0;
        for (int m = 0; m <= t; ++m)
          if (m != h) lam_minus *= c.delta[m];
        rate += 0.5 * c.phi * lam_minus * S[t];
      }
      c.delta[h] = gamma_map_mode(a_h + 0.5 * (p + q) * (r - h), rate,
                                  floor_value);
    }
  }
}

void vi_update_sigma2(VIState& state, const Dataset& data,
                      const ModelSpec& spec) {
  const int K = static_cast<int>(state.clusters.size());
  std::vector<Eigen::MatrixXd> eta(static_cast<size_t>(K));
  for (int k = 0; k < K; ++k) {
    eta[static_cast<size_t>(k)] =
        regression_part(state.clusters[static_cast<size_t>(k)], data);
    eta[static_cast<size_t>(k)].rowwise() +=
        state.clusters[static_cast<size_t>(k)].mu.transpose();
  }
  for (int j = 0; j < data.q(); ++j) {
    auto& fam = state.families[static_cast<size_t>(j)];
    if (fam.tag != Family::Gaussian) continue;
    double ssr = 0.0;
    for (int k = 0; k < K; ++k)
      ssr += (state.gamma.col(k).array() *
              (data.Y.col(j) - eta[static_cast<size_t>(k)].col(j))
                  .array()
                  .square())
                 .sum();
    fam.sigma2 =
        vi_sigma2_mode(ssr, data.n(), spec.hyper.a_sigma, spec.hyper.b_sigma);
  }
}

double vi_update_gamma_pi(VIState& state, const Dataset& data,
                          const ModelSpec& spec) {
  const int K = static_cast<int>(state.clusters.size());
  const int n = data.n();
  const Eigen::MatrixXd ell =
      loglik_matrix(state.clusters, state.families, data);
  const Eigen::VectorXd logpi = state.pi.array().log();
  double lppd = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd logw = ell.row(i).transpose() + logpi;
    const double m = logw.maxCoeff();
    if (!std::isfinite(m))
      throw NumericalError("responsibility update: non-finite log-likelihood");
    Eigen::VectorXd w = (logw.array() - m).exp();
    const double s = w.sum();
    state.gamma.row(i) = (w / s).transpose();
    lppd += m + std::log(s);
  }
  const Eigen::VectorXd alpha = spec.alpha();
  const Eigen::VectorXd colsum = state.gamma.colwise().sum();
  state.pi = (alpha + colsum) / (alpha.sum() + n);

  // the reported objective uses the refreshed mixture weights
  const Eigen::VectorXd logpi_new = state.pi.array().log();
  lppd = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd logw = ell.row(i).transpose() + logpi_new;
    const double m = logw.maxCoeff();
    lppd += m + std::log((logw.array() - m).exp().sum());
  }
  return lppd;
}

VIState vi_init(const ModelSpec& spec, const Dataset& data, Rng& rng,
                const VIOptions& options) {
  const int n = data.n();
  const int p = data.p();
  const int q = data.q();
  const int K = spec.K;

  std::vector<Family> tags;
  for (const auto& f : spec.families) tags.push_back(f.tag);
  const Eigen::MatrixXd F = feature_transform(data.Y, tags);

  VIState state;
  state.families = spec.families;
  for (int j = 0; j < q; ++j) {
    auto& fam = state.families[static_cast<size_t>(j)];
    if (fam.tag == Family::Gaussian) {
      const double mean = data.Y.col(j).mean();
      const double var = (data.Y.col(j).array() - mean).square().sum() /
                         std::max(1, n - 1);
      fam.sigma2 = std::max(var, 1e-4);
    }
  }

  std::vector<int> labels(static_cast<size_t>(n), 0);
  if (K > 1) labels = kmeans(F, K, rng, 1).labels;
  state.gamma = Eigen::MatrixXd::Zero(n, K);
  for (int i = 0; i < n; ++i)
    state.gamma(i, labels[static_cast<size_t>(i)]) = 1.0;
  const Eigen::VectorXd alpha = spec.alpha();
  state.pi = (alpha + state.gamma.colwise().sum().transpose()) /
             (alpha.sum() + n);

  // pooled ridge estimate, truncated SVD for the shared factor start
  Eigen::MatrixXd A = data.X.transpose() * data.X;
  A.diagonal().array() += options.init_ridge;
  const Eigen::MatrixXd Bhat =
      A.llt().solve(data.X.transpose() * F); // p x q
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      Bhat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::MatrixXd L0 = Eigen::MatrixXd::Zero(p, spec.r_max);
  Eigen::MatrixXd R0 = Eigen::MatrixXd::Zero(q, spec.r_max);
  const int keep =
      std::min<int>(spec.r_max, static_cast<int>(svd.singularValues().size()));
  for (int h = 0; h < keep; ++h) {
    const double s = std::sqrt(svd.singularValues()[h]);
    L0.col(h) = svd.matrixU().col(h) * s;
    R0.col(h) = svd.matrixV().col(h) * s;
  }

  for (int k = 0; k < K; ++k) {
    ClusterParams c = ClusterParams::zeros(p, q, spec.r_max);
    c.L = L0;
    c.R = R0;
    const Eigen::MatrixXd Ak = regression_part(c, data);
    const Eigen::VectorXd g = state.gamma.col(k);
    const double nk = std::max(g.sum(), 1.0);
    for (int j = 0; j < q; ++j) {
      const double ybar = g.dot(data.Y.col(j)) / nk;
      const double abar = g.dot(Ak.col(j)) / nk;
      switch (spec.families[static_cast<size_t>(j)].tag) {
        case Family::Gaussian:
          c.mu[j] = ybar - abar;
          break;
        case Family::Bernoulli:
          c.mu[j] = logit_clamped((g.dot(data.Y.col(j)) + 0.5) / (nk + 1.0)) -
                    abar;
          break;
        case Family::NegBin:
          c.mu[j] =
              std::log(std::max(ybar, 1.0 / (nk + 1.0)) /
                       state.families[static_cast<size_t>(j)].r) -
              abar;
          break;
      }
    }
    state.clusters.push_back(std::move(c));
  }
  vi_expect_omega(state, data);
  return state;
}

namespace {

FitResult state_to_fit(const ModelSpec& spec, VIState&& state,
                       std::uint64_t seed) {
  FitResult fit;
  fit.mode = FitResult::Mode::VI;
  fit.spec = spec;
  fit.globals.pi = state.pi;
  fit.globals.families = state.families;
  fit.clusters = std::move(state.clusters);
  fit.gamma = std::move(state.gamma);
  fit.objective_trace = std::move(state.objective);
  fit.seed = seed;
  return fit;
}

} // namespace

FitResult vi_fit(const ModelSpec& spec, const Dataset& data,
                 const VIOptions& options, Rng& rng) {
  spec.validate();
  if (options.max_iter < 1) throw ConfigError("max_iter must be >= 1");
  const auto violations = validate_dataset(data, spec);
  if (!violations.empty())
    throw DataError("invalid dataset: " + violations.front().message);

  const int restarts = (spec.K == 1) ? 1 : std::max(1, options.n_restarts);
  FitResult best;
  double best_obj = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < restarts; ++s) {
    Rng local = rng.substream(static_cast<std::uint64_t>(s) + 101);
    VIState state = vi_init(spec, data, local, options);
    double prev = -std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= options.max_iter; ++iter) {
      vi_expect_omega(state, data);
      vi_update_mu(state, data, spec);
      vi_update_R(state, data, spec);
      vi_update_L(state, data, spec);
      vi_update_mgp(state, spec, options.mgp_floor);
      vi_update_sigma2(state, data, spec);
      double obj;
      try {
        obj = vi_update_gamma_pi(state, data, spec);
      } catch (const NumericalError& e) {
        throw NumericalError("iteration " + std::to_string(iter) + ": " +
                             e.what());
      }
      if (!std::isfinite(obj))
        throw NumericalError("objective non-finite at iteration " +
                             std::to_string(iter));
      state.objective.push_back(obj);
      if (iter > 1 &&
          std::fabs(obj - prev) <= options.tol * (std::fabs(prev) + 1.0))
        break;
      prev = obj;
    }
    const double final_obj = state.objective.back();
    if (final_obj > best_obj) {
      best_obj = final_obj;
      best = state_to_fit(spec, std::move(state), rng.seed());
    }
  }
  return best;
}

} // namespace lrmix
