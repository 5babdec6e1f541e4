#pragma once

#include "lrmix/rng.hpp"
#include "lrmix/types.hpp"

namespace lrmix {

struct GibbsState {
  Eigen::VectorXi z;                    // n, labels in 0..K-1
  Eigen::VectorXd pi;                   // K
  std::vector<ClusterParams> clusters;  // K
  std::vector<ResponseFamily> families; // current sigma2 / r
  Eigen::MatrixXd omega;                // n x q; Gaussian slots hold 1/sigma2
};

struct GibbsConfig {
  int iterations = 2000;
  int burnin = -1; // < 0 means iterations/2
  int thin = 1;
  bool update_labels = true;
  bool update_B = true; // R/L/shrinkage updates; pins B at its init when false
  std::uint64_t seed = 0;
};

struct DrawArchive {
  Eigen::MatrixXi z;      // T x n
  Eigen::MatrixXd pi;     // T x K
  Eigen::MatrixXd mu;     // T x (K q), column k*q + j
  Eigen::MatrixXd L;      // T x (K p r_max), column k*p*r + h*p + a
  Eigen::MatrixXd R;      // T x (K q r_max), column k*q*r + h*q + j
  Eigen::MatrixXd sigma2; // T x |gauss_cols|
  Eigen::MatrixXd r;      // T x |nb_cols|
  std::vector<double> loglik; // observed-data log-likelihood, per iteration
  std::vector<int> gauss_cols, nb_cols;
  ModelSpec spec;
  int T() const { return static_cast<int>(z.rows()); }
};

struct GammaCond {
  double shape = 0.0, rate = 0.0;
};
struct NormalCond {
  double mean = 0.0, var = 0.0;
};
struct MvnCond {
  Eigen::MatrixXd Q;
  Eigen::VectorXd b;
};

// Conditional parameters of each update, exposed as pure functions of the
// current state so the algebra can be checked directly.
Eigen::VectorXd label_logweights(const GibbsState& state, const Dataset& data,
                                 int i);
Eigen::VectorXd pi_conditional(const GibbsState& state, const ModelSpec& spec);
GammaCond sigma2_conditional(const GibbsState& state, const Dataset& data,
                             const ModelSpec& spec, int j);
GammaCond r_conditional(const GibbsState& state, const Dataset& data,
                        const ModelSpec& spec, int j, double crt_sum);
NormalCond mu_conditional(const GibbsState& state, const Dataset& data,
                          const ModelSpec& spec, int k, int j);
MvnCond R_row_conditional(const GibbsState& state, const Dataset& data,
                          const ModelSpec& spec, int k, int j);
MvnCond L_conditional(const GibbsState& state, const Dataset& data,
                      const ModelSpec& spec, int k);
GammaCond phi_conditional(const GibbsState& state, const ModelSpec& spec,
                          int k);
GammaCond delta_conditional(const GibbsState& state, const ModelSpec& spec,
                            int k, int h);

void step_labels(GibbsState& state, const Dataset& data, Rng& rng);
void step_pi(GibbsState& state, const ModelSpec& spec, Rng& rng);
void step_omega(GibbsState& state, const Dataset& data, Rng& rng);
void step_sigma2(GibbsState& state, const Dataset& data, const ModelSpec& spec,
                 Rng& rng);
void step_r(GibbsState& state, const Dataset& data, const ModelSpec& spec,
            Rng& rng);
void step_mu(GibbsState& state, const Dataset& data, const ModelSpec& spec,
             Rng& rng);
void step_R(GibbsState& state, const Dataset& data, const ModelSpec& spec,
            Rng& rng);
void step_L(GibbsState& state, const Dataset& data, const ModelSpec& spec,
            Rng& rng);
void step_mgp(GibbsState& state, const ModelSpec& spec, Rng& rng);

GibbsState init_gibbs_state(const ModelSpec& spec, const Dataset& data,
                            Rng& rng);

// log sum_k pi_k exp(ell_ik), summed over units
double observed_loglik(const GibbsState& state, const Dataset& data);

DrawArchive run_gibbs(const ModelSpec& spec, const Dataset& data,
                      const GibbsConfig& config, Rng& rng);

FitResult fit_from_archive(const DrawArchive& archive);

} // namespace lrmix
