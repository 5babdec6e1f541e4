#pragma once

#include "lrmix/rng.hpp"
#include "lrmix/types.hpp"

namespace lrmix {

struct VIOptions {
  int max_iter = 500;
  double tol = 1e-7;    // relative change of the plug-in objective
  int n_restarts = 3;
  double mgp_floor = 1e-3;
  double init_ridge = 1.0;
};

struct VIState {
  Eigen::MatrixXd gamma; // n x K responsibilities
  Eigen::VectorXd pi;
  std::vector<ClusterParams> clusters;
  std::vector<ResponseFamily> families; // current sigma2 / r
  std::vector<Eigen::MatrixXd> omega_bar; // per cluster, n x q
  std::vector<double> objective;
};

// gamma mode (shape-1)/rate when shape > 1, else the floor
double gamma_map_mode(double shape, double rate, double floor_value);

// inverse-gamma mode of the responsibility-weighted conditional
double vi_sigma2_mode(double weighted_ssr, int n, double a_sigma,
                      double b_sigma);

// expected augmentation weights at the current linear predictors
void vi_expect_omega(VIState& state, const Dataset& data);

void vi_update_mu(VIState& state, const Dataset& data, const ModelSpec& spec);
void vi_update_R(VIState& state, const Dataset& data, const ModelSpec& spec);
void vi_update_L(VIState& state, const Dataset& data, const ModelSpec& spec);
void vi_update_mgp(VIState& state, const ModelSpec& spec,
                   double floor_value = 1e-3);
void vi_update_sigma2(VIState& state, const Dataset& data,
                      const ModelSpec& spec);

// responsibilities from the true likelihood plus the pi update;
// returns the plug-in objective (log pointwise predictive density)
double vi_update_gamma_pi(VIState& state, const Dataset& data,
                          const ModelSpec& spec);

VIState vi_init(const ModelSpec& spec, const Dataset& data, Rng& rng,
                const VIOptions& options = {});

FitResult vi_fit(const ModelSpec& spec, const Dataset& data,
                 const VIOptions& options, Rng& rng);

} // namespace lrmix
