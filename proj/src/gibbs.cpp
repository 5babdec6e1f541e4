#include "lrmix/gibbs.hpp"

#include <cmath>
#include <limits>

#include "lrmix/likelihood.hpp"

namespace lrmix {

namespace {

std::vector<int> members_of(const GibbsState& state, int k) {
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < state.z.size(); ++i)
    if (state.z[i] == k) idx.push_back(static_cast<int>(i));
  return idx;
}

// eta column j for the listed units under cluster k
Eigen::VectorXd eta_column(const GibbsState& state, const Dataset& data,
                           const std::vector<int>& idx, int k, int j) {
  const auto& c = state.clusters[static_cast<size_t>(k)];
  const Eigen::VectorXd bj = c.L * c.R.row(j).transpose(); // B_{.j}, length p
  Eigen::VectorXd eta(idx.size());
  for (size_t t = 0; t < idx.size(); ++t) {
    const int i = idx[t];
    eta[static_cast<Eigen::Index>(t)] =
        c.mu[j] + data.X.row(i).dot(bj) + data.O(i, j);
  }
  return eta;
}

Eigen::VectorXd cluster_lambda_prec(const ClusterParams& c) {
  return c.phi * c.lambda(); // diagonal of Lambda_k
}

} // namespace

Eigen::VectorXd label_logweights(const GibbsState& state, const Dataset& data,
                                 int i) {
  const int K = static_cast<int>(state.clusters.size());
  Eigen::VectorXd logw(K);
  for (int k = 0; k < K; ++k) {
    const auto& c = state.clusters[static_cast<size_t>(k)];
    const Eigen::VectorXd eta = linear_predictor(
        c, data.X.row(i).transpose(), data.O.row(i).transpose());
    double ll = 0.0;
    for (int j = 0; j < data.q(); ++j)
      ll += loglik_coord(state.families[static_cast<size_t>(j)], data.Y(i, j),
                         eta[j]);
    logw[k] = std::log(state.pi[k]) + ll;
  }
  return logw;
}

Eigen::VectorXd pi_conditional(const GibbsState& state,
                               const ModelSpec& spec) {
  Eigen::VectorXd a = spec.alpha();
  for (Eigen::Index i = 0; i < state.z.size(); ++i) a[state.z[i]] += 1.0;
  return a;
}

GammaCond sigma2_conditional(const GibbsState& state, const Dataset& data,
                             const ModelSpec& spec, int j) {
  double ssr = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    const int k = state.z[i];
    const auto& c = state.clusters[static_cast<size_t>(k)];
    const double eta =
        c.mu[j] + data.X.row(i).dot(c.L * c.R.row(j).transpose()) +
        data.O(i, j);
    const double resid = data.Y(i, j) - eta;
    ssr += resid * resid;
  }
  return {spec.hyper.a_sigma + 0.5 * data.n(), spec.hyper.b_sigma + 0.5 * ssr};
}

GammaCond r_conditional(const GibbsState& state, const Dataset& data,
                        const ModelSpec& spec, int j, double crt_sum) {
  double rate = spec.hyper.b_r;
  for (int i = 0; i < data.n(); ++i) {
    const int k = state.z[i];
    const auto& c = state.clusters[static_cast<size_t>(k)];
    const double eta =
        c.mu[j] + data.X.row(i).dot(c.L * c.R.row(j).transpose()) +
        data.O(i, j);
    rate += log1pexp(eta);
  }
  return {spec.hyper.a_r + crt_sum, rate};
}

NormalCond mu_conditional(const GibbsState& state, const Dataset& data,
                          const ModelSpec& spec, int k, int j) {
  const auto& c = state.clusters[static_cast<size_t>(k)];
  const auto& fam = state.families[static_cast<size_t>(j)];
  const Eigen::VectorXd bj = c.L * c.R.row(j).transpose();
  double wsum = 0.0, rhs = 0.0;
  for (Eigen::Index i = 0; i < state.z.size(); ++i) {
    if (state.z[i] != k) continue;
    const double omega = state.omega(i, j);
    const double a_ij = data.X.row(i).dot(bj) + data.O(i, j);
    const double kappa = augment_triple(fam, data.Y(i, j)).kappa;
    wsum += omega;
    rhs += kappa - omega * a_ij;
  }
  const double v = 1.0 / (wsum + 1.0 / spec.hyper.sigma_mu2);
  return {v * rhs, v};
}

MvnCond R_row_conditional(const GibbsState& state, const Dataset& data,
                          const ModelSpec& spec, int k, int j) {
  (void)spec;
  const auto& c = state.clusters[static_cast<size_t>(k)];
  const auto& fam = state.families[static_cast<size_t>(j)];
  const int r = static_cast<int>(c.L.cols());
  const auto idx = members_of(state, k);

  MvnCond cond;
  cond.Q = Eigen::MatrixXd(cluster_lambda_prec(c).asDiagonal());
  cond.b = Eigen::VectorXd::Zero(r);
  if (idx.empty()) return cond;

  Eigen::MatrixXd U(idx.size(), r);
  Eigen::VectorXd w(idx.size()), ktil(idx.size());
  for (size_t t = 0; t < idx.size(); ++t) {
    const int i = idx[t];
    U.row(static_cast<Eigen::Index>(t)) = data.X.row(i) * c.L;
    const double omega = state.omega(i, j);
    const double kappa = augment_triple(fam, data.Y(i, j)).kappa;
    w[static_cast<Eigen::Index>(t)] = omega;
    ktil[static_cast<Eigen::Index>(t)] =
        kappa - omega * (c.mu[j] + data.O(i, j));
  }
  cond.Q += U.transpose() * w.asDiagonal() * U;
  cond.b = U.transpose() * ktil;
  return cond;
}

MvnCond L_conditional(const GibbsState& state, const Dataset& data,
                      const ModelSpec& spec, int k) {
  (void)spec;
  const auto& c = state.clusters[static_cast<size_t>(k)];
  const int p = static_cast<int>(c.L.rows());
  const int r = static_cast<int>(c.L.cols());
  const int q = data.q();
  const auto idx = members_of(state, k);
  const Eigen::VectorXd lam = cluster_lambda_prec(c);

  MvnCond cond;
  cond.Q = Eigen::MatrixXd::Zero(p * r, p * r);
  cond.b = Eigen::VectorXd::Zero(p * r);
  for (int h = 0; h < r; ++h)
    cond.Q.block(h * p, h * p, p, p).diagonal().setConstant(lam[h]);
  if (idx.empty()) return cond;

  Eigen::MatrixXd Xk(idx.size(), p);
  for (size_t t = 0; t < idx.size(); ++t)
    Xk.row(static_cast<Eigen::Index>(t)) = data.X.row(idx[t]);

  for (int j = 0; j < q; ++j) {
    const auto& fam = state.families[static_cast<size_t>(j)];
    Eigen::VectorXd w(idx.size()), ktil(idx.size());
    for (size_t t = 0; t < idx.size(); ++t) {
      const int i = idx[t];
      const double omega = state.omega(i, j);
      const double kappa = augment_triple(fam, data.Y(i, j)).kappa;
      w[static_cast<Eigen::Index>(t)] = omega;
      ktil[static_cast<Eigen::Index>(t)] =
          kappa - omega * (c.mu[j] + data.O(i, j));
    }
    const Eigen::MatrixXd M = Xk.transpose() * w.asDiagonal() * Xk;
    const Eigen::VectorXd xk = Xk.transpose() * ktil;
    const Eigen::VectorXd rj = c.R.row(j);
    for (int h = 0; h < r; ++h) {
      cond.b.segment(h * p, p) += rj[h] * xk;
      for (int h2 = 0; h2 < r; ++h2)
        cond.Q.block(h * p, h2 * p, p, p) += rj[h] * rj[h2] * M;
    }
  }
  return cond;
}

GammaCond phi_conditional(const GibbsState& state, const ModelSpec& spec,
                          int k) {
  const auto& c = state.clusters[static_cast<size_t>(k)];
  const int p = static_cast<int>(c.L.rows());
  const int q = static_cast<int>(c.R.rows());
  const int r = static_cast<int>(c.L.cols());
  const Eigen::VectorXd lam = c.lambda();
  double rate = spec.hyper.b_phi;
  for (int h = 0; h < r; ++h) {
    const double s_h = c.L.col(h).squaredNorm() + c.R.col(h).squaredNorm();
    rate += 0.5 * lam[h] * s_h;
  }
  return {spec.hyper.a_phi + 0.5 * (p + q) * r, rate};
}

GammaCond delta_conditional(const GibbsState& state, const ModelSpec& spec,
                            int k, int h) {
  const auto& c = state.clusters[static_cast<size_t>(k)];
  const int p = static_cast<int>(c.L.rows());
  const int q = static_cast<int>(c.R.rows());
  const int r = static_cast<int>(c.L.cols());
  const double a_h = (h == 0) ? spec.hyper.a1 : spec.hyper.a2;
  double rate = 1.0;
  for (int t = h; t < r; ++t) {
    // cumulative product over m <= t omitting position h
    double lam = 1.0;
    for (int m = 0; m <= t; ++m)
      if (m != h) lam *= c.delta[m];
    const double s_t = c.L.col(t).squaredNorm() + c.R.col(t).squaredNorm();
    rate += 0.5 * c.phi * lam * s_t;
  }
  return {a_h + 0.5 * (p + q) * (r - h), rate};
}

void step_labels(GibbsState& state, const Dataset& data, Rng& rng) {
  const int K = static_cast<int>(state.clusters.size());
  const Eigen::MatrixXd ell =
      loglik_matrix(state.clusters, state.families, data);
  Eigen::VectorXd logpi = state.pi.array().log();
  for (int i = 0; i < data.n(); ++i) {
    Eigen::VectorXd logw = ell.row(i).transpose() + logpi;
    const double m = logw.maxCoeff();
    if (!std::isfinite(m))
      throw NumericalError("label step: all weights -inf at unit " +
                           std::to_string(i));
    Eigen::VectorXd w = (logw.array() - m).exp();
    const double total = w.sum();
    const double u = rng.uniform() * total;
    double cum = 0.0;
    int zi = K - 1;
    for (int k = 0; k < K; ++k) {
      cum += w[k];
      if (u <= cum) {
        zi = k;
        break;
      }
    }
    state.z[i] = zi;
  }
}

void step_pi(GibbsState& state, const ModelSpec& spec, Rng& rng) {
  state.pi = rng.dirichlet(pi_conditional(state, spec));
}

void step_omega(GibbsState& state, const Dataset& data, Rng& rng) {
  for (int i = 0; i < data.n(); ++i) {
    const int k = state.z[i];
    const auto& c = state.clusters[static_cast<size_t>(k)];
    const Eigen::VectorXd eta = linear_predictor(
        c, data.X.row(i).transpose(), data.O.row(i).transpose());
    for (int j = 0; j < data.q(); ++j) {
      const auto& fam = state.families[static_cast<size_t>(j)];
      switch (fam.tag) {
        case Family::Gaussian:
          state.omega(i, j) = 1.0 / fam.sigma2;
          break;
        case Family::Bernoulli:
          state.omega(i, j) = sample_pg(1.0, eta[j], rng);
          break;
        case Family::NegBin:
          state.omega(i, j) = sample_pg(data.Y(i, j) + fam.r, eta[j], rng);
          break;
      }
    }
  }
}

void step_sigma2(GibbsState& state, const Dataset& data, const ModelSpec& spec,
                 Rng& rng) {
  for (int j = 0; j < data.q(); ++j) {
    auto& fam = state.families[static_cast<size_t>(j)];
    if (fam.tag != Family::Gaussian) continue;
    const GammaCond cond = sigma2_conditional(state, data, spec, j);
    fam.sigma2 = rng.inverse_gamma(cond.shape, cond.rate);
    state.omega.col(j).setConstant(1.0 / fam.sigma2);
  }
}

void step_r(GibbsState& state, const Dataset& data, const ModelSpec& spec,
            Rng& rng) {
  for (int j = 0; j < data.q(); ++j) {
    auto& fam = state.families[static_cast<size_t>(j)];
    if (fam.tag != Family::NegBin) continue;
    double crt_sum = 0.0;
    for (int i = 0; i < data.n(); ++i)
      crt_sum += static_cast<double>(sample_crt(
          static_cast<long long>(data.Y(i, j)), fam.r, rng));
    const GammaCond cond = r_conditional(state, data, spec, j, crt_sum);
    fam.r = rng.gamma(cond.shape, cond.rate);
  }
}

void step_mu(GibbsState& state, const Dataset& data, const ModelSpec& spec,
             Rng& rng) {
  const int K = static_cast<int>(state.clusters.size());
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < data.q(); ++j) {
      const NormalCond cond = mu_conditional(state, data, spec, k, j);
      state.clusters[static_cast<size_t>(k)].mu[j] =
          cond.mean + std::sqrt(cond.var) * rng.normal();
    }
}

void step_R(GibbsState& state, const Dataset& data, const ModelSpec& spec,
            Rng& rng) {
  const int K = static_cast<int>(state.clusters.size());
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < data.q(); ++j) { // response columns in index order
      const MvnCond cond = R_row_conditional(state, data, spec, k, j);
      state.clusters[static_cast<size_t>(k)].R.row(j) =
          mvn_precision(cond.Q, cond.b, rng).transpose();
    }
}

void step_L(GibbsState& state, const Dataset& data, const ModelSpec& spec,
            Rng& rng) {
  const int K = static_cast<int>(state.clusters.size());
  for (int k = 0; k < K; ++k) {
    auto& c = state.clusters[static_cast<size_t>(k)];
    const int p = static_cast<int>(c.L.rows());
    const int r = static_cast<int>(c.L.cols());
    const MvnCond cond = L_conditional(state, data, spec, k);
    const Eigen::VectorXd vecL = mvn_precision(cond.Q, cond.b, rng);
    for (int h = 0; h < r; ++h) c.L.col(h) = vecL.segment(h * p, p);
  }
}

void step_mgp(GibbsState& state, const ModelSpec& spec, Rng& rng) {
  const int K = static_cast<int>(state.clusters.size());
  for (int k = 0; k < K; ++k) {
    auto& c = state.clusters[static_cast<size_t>(k)];
    const GammaCond phi_cond = phi_conditional(state, spec, k);
    c.phi = rng.gamma(phi_cond.shape, phi_cond.rate);
    for (int h = 0; h < c.delta.size(); ++h) {
      const GammaCond d_cond = delta_conditional(state, spec, k, h);
      c.delta[h] = rng.gamma(d_cond.shape, d_cond.rate);
    }
  }
}

GibbsState init_gibbs_state(const ModelSpec& spec, const Dataset& data,
                            Rng& rng) {
  const int n = data.n();
  const int p = data.p();
  const int q = data.q();
  GibbsState state;
  state.z.resize(n);
  for (int i = 0; i < n; ++i)
    state.z[i] = static_cast<int>(rng.uniform() * spec.K) % spec.K;
  state.pi = spec.alpha() / spec.alpha().sum();
  state.families = spec.families;
  for (int j = 0; j < q; ++j) {
    auto& fam = state.families[static_cast<size_t>(j)];
    if (fam.tag == Family::Gaussian) {
      const Eigen::VectorXd col = data.Y.col(j);
      const double mean = col.mean();
      const double var =
          (col.array() - mean).square().sum() / std::max(1, n - 1);
      fam.sigma2 = std::max(var, 1e-4);
    }
  }
  for (int k = 0; k < spec.K; ++k) {
    ClusterParams c = ClusterParams::zeros(p, q, spec.r_max);
    for (int a = 0; a < p; ++a)
      for (int h = 0; h < spec.r_max; ++h) c.L(a, h) = 0.1 * rng.normal();
    for (int j = 0; j < q; ++j)
      for (int h = 0; h < spec.r_max; ++h) c.R(j, h) = 0.1 * rng.normal();
    state.clusters.push_back(std::move(c));
  }
  state.omega = Eigen::MatrixXd::Ones(n, q);
  for (int j = 0; j < q; ++j) {
    const auto& fam = state.families[static_cast<size_t>(j)];
    if (fam.tag == Family::Gaussian)
      state.omega.col(j).setConstant(1.0 / fam.sigma2);
  }
  return state;
}

double observed_loglik(const GibbsState& state, const Dataset& data) {
  const Eigen::MatrixXd ell =
      loglik_matrix(state.clusters, state.families, data);
  const Eigen::VectorXd logpi = state.pi.array().log();
  double total = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    Eigen::VectorXd logw = ell.row(i).transpose() + logpi;
    const double m = logw.maxCoeff();
    total += m + std::log((logw.array() - m).exp().sum());
  }
  return total;
}

DrawArchive run_gibbs(const ModelSpec& spec, const Dataset& data,
                      const GibbsConfig& config, Rng& rng) {
  spec.validate();
  const int iters = config.iterations;
  const int burnin = config.burnin < 0 ? iters / 2 : config.burnin;
  const int thin = config.thin;
  if (burnin >= iters) throw ConfigError("burn-in must be < iterations");
  if (thin < 1) throw ConfigError("thinning must be >= 1");

  const int n = data.n();
  const int p = data.p();
  const int q = data.q();
  const int K = spec.K;
  const int r = spec.r_max;
  const int T = (iters - burnin) / thin;

  DrawArchive arch;
  arch.spec = spec;
  for (int j = 0; j < q; ++j) {
    if (spec.families[static_cast<size_t>(j)].tag == Family::Gaussian)
      arch.gauss_cols.push_back(j);
    if (spec.families[static_cast<size_t>(j)].tag == Family::NegBin)
      arch.nb_cols.push_back(j);
  }
  arch.z.resize(T, n);
  arch.pi.resize(T, K);
  arch.mu.resize(T, K * q);
  arch.L.resize(T, K * p * r);
  arch.R.resize(T, K * q * r);
  arch.sigma2.resize(T, static_cast<int>(arch.gauss_cols.size()));
  arch.r.resize(T, static_cast<int>(arch.nb_cols.size()));
  arch.loglik.reserve(iters);

  GibbsState state = init_gibbs_state(spec, data, rng);

  int row = 0;
  for (int t = 1; t <= iters; ++t) {
    try {
      if (config.update_labels) step_labels(state, data, rng);
      step_pi(state, spec, rng);
      step_omega(state, data, rng);
      step_sigma2(state, data, spec, rng);
      step_r(state, data, spec, rng);
      step_mu(state, data, spec, rng);
      if (config.update_B) {
        step_R(state, data, spec, rng);
        step_L(state, data, spec, rng);
        step_mgp(state, spec, rng);
      }
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(t) + ": " + e.what());
    }
    arch.loglik.push_back(observed_loglik(state, data));

    if (t > burnin && (t - burnin) % thin == 0) {
      arch.z.row(row) = state.z.transpose();
      arch.pi.row(row) = state.pi.transpose();
      for (int k = 0; k < K; ++k) {
        const auto& c = state.clusters[static_cast<size_t>(k)];
        for (int j = 0; j < q; ++j) arch.mu(row, k * q + j) = c.mu[j];
        for (int h = 0; h < r; ++h) {
          for (int a = 0; a < p; ++a)
            arch.L(row, k * p * r + h * p + a) = c.L(a, h);
          for (int j = 0; j < q; ++j)
            arch.R(row, k * q * r + h * q + j) = c.R(j, h);
        }
      }
      for (size_t jj = 0; jj < arch.gauss_cols.size(); ++jj)
        arch.sigma2(row, static_cast<int>(jj)) =
            state.families[static_cast<size_t>(arch.gauss_cols[jj])].sigma2;
      for (size_t jj = 0; jj < arch.nb_cols.size(); ++jj)
        arch.r(row, static_cast<int>(jj)) =
            state.families[static_cast<size_t>(arch.nb_cols[jj])].r;
      ++row;
    }
  }
  return arch;
}

FitResult fit_from_archive(const DrawArchive& arch) {
  const int T = arch.T();
  if (T == 0) throw DataError("empty draw archive");
  const ModelSpec& spec = arch.spec;
  const int K = spec.K;
  const int q = spec.q();
  const int p = static_cast<int>(arch.L.cols()) / (K * spec.r_max);
  const int r = spec.r_max;

  FitResult fit;
  fit.mode = FitResult::Mode::Gibbs;
  fit.spec = spec;
  fit.z_draws = arch.z;
  fit.globals.pi = arch.pi.colwise().mean();
  fit.globals.families = spec.families;
  for (size_t jj = 0; jj < arch.gauss_cols.size(); ++jj)
    fit.globals.families[static_cast<size_t>(arch.gauss_cols[jj])].sigma2 =
        arch.sigma2.col(static_cast<int>(jj)).mean();
  for (size_t jj = 0; jj < arch.nb_cols.size(); ++jj)
    fit.globals.families[static_cast<size_t>(arch.nb_cols[jj])].r =
        arch.r.col(static_cast<int>(jj)).mean();

  // point estimate of B_k: average the per-draw products, then refactor
  for (int k = 0; k < K; ++k) {
    ClusterParams c = ClusterParams::zeros(p, q, r);
    Eigen::MatrixXd Bbar = Eigen::MatrixXd::Zero(p, q);
    for (int t = 0; t < T; ++t) {
      Eigen::MatrixXd L(p, r), R(q, r);
      for (int h = 0; h < r; ++h) {
        for (int a = 0; a < p; ++a) L(a, h) = arch.L(t, k * p * r + h * p + a);
        for (int j = 0; j < q; ++j) R(j, h) = arch.R(t, k * q * r + h * q + j);
      }
      Bbar += L * R.transpose();
      for (int j = 0; j < q; ++j) c.mu[j] += arch.mu(t, k * q + j);
    }
    Bbar /= T;
    c.mu /= T;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        Bbar, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const int keep = std::min<int>(r, static_cast<int>(svd.singularValues().size()));
    for (int h = 0; h < keep; ++h) {
      const double s = std::sqrt(svd.singularValues()[h]);
      c.L.col(h) = svd.matrixU().col(h) * s;
      c.R.col(h) = svd.matrixV().col(h) * s;
    }
    fit.clusters.push_back(std::move(c));
  }
  fit.objective_trace = arch.loglik;
  return fit;
}

} // namespace lrmix
