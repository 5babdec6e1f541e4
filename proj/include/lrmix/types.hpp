#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lrmix {

// Error classes map onto CLI exit codes: config 2, data 3, numerical 4.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Family { Gaussian, Bernoulli, NegBin };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// One response coordinate: the tag plus its nuisance parameter
// (sigma2 for Gaussian, dispersion r for NegBin; both ignored otherwise).
struct ResponseFamily {
  Family tag = Family::Gaussian;
  double sigma2 = 1.0;
  double r = 1.0;

  static ResponseFamily gaussian(double sigma2 = 1.0);
  static ResponseFamily bernoulli();
  static ResponseFamily negbin(double r);
  void validate() const;
};

struct HyperParams {
  Eigen::VectorXd alpha;   // Dirichlet concentrations; empty = all ones
  double sigma_mu2 = 10.0; // mean-shift prior variance (standardized scales)
  double a_sigma = 1.0, b_sigma = 1.0;
  double a_r = 2.0, b_r = 0.1;
  double a_phi = 1.0, b_phi = 1.0;
  double a1 = 2.0, a2 = 3.0; // column-shrinkage shapes, a2 > a1 > 1

  void validate(int K) const;
};

struct ModelSpec {
  int K = 1;
  int r_max = 1;
  std::vector<ResponseFamily> families;
  HyperParams hyper;
  bool offsets_declared = false;

  int q() const { return static_cast<int>(families.size()); }
  Eigen::VectorXd alpha() const; // materialized, length K
  void validate() const;
};

struct Dataset {
  Eigen::MatrixXd X; // n x p predictors
  Eigen::MatrixXd Y; // n x q mixed responses
  Eigen::MatrixXd O; // n x q offsets, zeros when absent

  int n() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(X.cols()); }
  int q() const { return static_cast<int>(Y.cols()); }

  static Dataset make(Eigen::MatrixXd X, Eigen::MatrixXd Y);
  static Dataset make(Eigen::MatrixXd X, Eigen::MatrixXd Y, Eigen::MatrixXd O);
};

// Per-cluster parameters. lambda (cumulative delta products) is always
// derived on access, never cached.
struct ClusterParams {
  Eigen::VectorXd mu;    // q
  Eigen::MatrixXd L;     // p x r_max
  Eigen::MatrixXd R;     // q x r_max
  double phi = 1.0;
  Eigen::VectorXd delta; // r_max, all > 0

  Eigen::VectorXd lambda() const;
  static ClusterParams zeros(int p, int q, int r_max);
};

struct GlobalParams {
  Eigen::VectorXd pi;                   // K, simplex
  std::vector<ResponseFamily> families; // current sigma2 / r values
};

struct FitResult {
  enum class Mode { VI, Gibbs };
  Mode mode = Mode::VI;
  ModelSpec spec;
  GlobalParams globals;
  std::vector<ClusterParams> clusters;
  Eigen::MatrixXd gamma;    // VI: n x K responsibilities
  Eigen::MatrixXi z_draws;  // Gibbs: T x n retained label draws (0-based)
  std::vector<double> objective_trace;
  std::uint64_t seed = 0;
};

// eta_j = mu_j + x' (L R')_{.j} + offset_j
Eigen::VectorXd linear_predictor(const ClusterParams& cluster,
                                 const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& offset_row);

// B = L R'
Eigen::MatrixXd coefficient_matrix(const Eigen::MatrixXd& L,
                                   const Eigen::MatrixXd& R);

struct Violation {
  int row = -1; // -1 when not row-specific
  int col = -1;
  std::string message;
};

// Report-only: empty result iff the dataset is usable under the spec.
std::vector<Violation> validate_dataset(const Dataset& data,
                                        const ModelSpec& spec);

} // namespace lrmix
