#include "lrmix/types.hpp"

#include <cmath>

namespace lrmix {

std::string family_name(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::Bernoulli: return "bernoulli";
    case Family::NegBin: return "negbin";
  }
  return "unknown";
}

Family family_from_name(const std::string& name) {
  if (name == "gaussian" || name == "g") return Family::Gaussian;
  if (name == "bernoulli" || name == "b") return Family::Bernoulli;
  if (name == "negbin" || name == "nb") return Family::NegBin;
  throw ConfigError("unknown response family '" + name + "'");
}

ResponseFamily ResponseFamily::gaussian(double sigma2) {
  ResponseFamily f;
  f.tag = Family::Gaussian;
  f.sigma2 = sigma2;
  return f;
}

ResponseFamily ResponseFamily::bernoulli() {
  ResponseFamily f;
  f.tag = Family::Bernoulli;
  return f;
}

ResponseFamily ResponseFamily::negbin(double r) {
  ResponseFamily f;
  f.tag = Family::NegBin;
  f.r = r;
  return f;
}

void ResponseFamily::validate() const {
  if (tag == Family::Gaussian && !(sigma2 > 0.0))
    throw ConfigError("Gaussian response requires sigma2 > 0");
  if (tag == Family::NegBin && !(r > 0.0))
    throw ConfigError("NegBin response requires dispersion r > 0");
}

void HyperParams::validate(int K) const {
  if (alpha.size() != 0 && alpha.size() != K)
    throw ConfigError("alpha length must equal K");
  for (Eigen::Index k = 0; k < alpha.size(); ++k)
    if (!(alpha[k] > 0.0)) throw ConfigError("alpha entries must be > 0");
  if (!(sigma_mu2 > 0.0)) throw ConfigError("sigma_mu2 must be > 0");
  if (!(a_sigma > 0.0 && b_sigma > 0.0))
    throw ConfigError("(a_sigma, b_sigma) must be > 0");
  if (!(a_r > 0.0 && b_r > 0.0)) throw ConfigError("(a_r, b_r) must be > 0");
  if (!(a_phi > 0.0 && b_phi > 0.0))
    throw ConfigError("(a_phi, b_phi) must be > 0");
  if (!(a2 > a1 && a1 > 1.0))
    throw ConfigError("shrinkage shapes must satisfy a2 > a1 > 1");
}

Eigen::VectorXd ModelSpec::alpha() const {
  if (hyper.alpha.size() == K) return hyper.alpha;
  return Eigen::VectorXd::Ones(K);
}

void ModelSpec::validate() const {
  if (K < 1) throw ConfigError("K must be >= 1");
  if (r_max < 1) throw ConfigError("r_max must be >= 1");
  if (families.empty()) throw ConfigError("at least one response family");
  for (const auto& f : families) f.validate();
  hyper.validate(K);
}

Dataset Dataset::make(Eigen::MatrixXd X, Eigen::MatrixXd Y) {
  Eigen::MatrixXd O = Eigen::MatrixXd::Zero(Y.rows(), Y.cols());
  return make(std::move(X), std::move(Y), std::move(O));
}

Dataset Dataset::make(Eigen::MatrixXd X, Eigen::MatrixXd Y, Eigen::MatrixXd O) {
  if (X.rows() != Y.rows())
    throw ConfigError("X and Y must have the same number of rows");
  if (O.rows() != Y.rows() || O.cols() != Y.cols())
    throw ConfigError("offset matrix must match Y's shape");
  Dataset d;
  d.X = std::move(X);
  d.Y = std::move(Y);
  d.O = std::move(O);
  return d;
}

Eigen::VectorXd ClusterParams::lambda() const {
  Eigen::VectorXd lam(delta.size());
  double prod = 1.0;
  for (Eigen::Index h = 0; h < delta.size(); ++h) {
    prod *= delta[h];
    lam[h] = prod;
  }
  return lam;
}

ClusterParams ClusterParams::zeros(int p, int q, int r_max) {
  ClusterParams c;
  c.mu = Eigen::VectorXd::Zero(q);
  c.L = Eigen::MatrixXd::Zero(p, r_max);
  c.R = Eigen::MatrixXd::Zero(q, r_max);
  c.phi = 1.0;
  c.delta = Eigen::VectorXd::Ones(r_max);
  return c;
}

Eigen::VectorXd linear_predictor(const ClusterParams& cluster,
                                 const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& offset_row) {
  if (x.size() != cluster.L.rows())
    throw ConfigError("linear_predictor: x length does not match L rows");
  if (offset_row.size() != cluster.mu.size() ||
      cluster.R.rows() != cluster.mu.size() ||
      cluster.L.cols() != cluster.R.cols())
    throw ConfigError("linear_predictor: dimension mismatch");
  // eta = mu + R (L' x) + offset; avoids forming B
  return cluster.mu + cluster.R * (cluster.L.transpose() * x) + offset_row;
}

Eigen::MatrixXd coefficient_matrix(const Eigen::MatrixXd& L,
                                   const Eigen::MatrixXd& R) {
  if (L.cols() != R.cols())
    throw ConfigError("coefficient_matrix: L and R must share inner dimension");
  return L * R.transpose();
}

namespace {

bool is_integer_value(double v) { return std::floor(v) == v; }

} // namespace

std::vector<Violation> validate_dataset(const Dataset& data,
                                        const ModelSpec& spec) {
  std::vector<Violation> out;
  if (spec.q() != data.q()) {
    out.push_back({-1, -1,
                   "family spec length " + std::to_string(spec.q()) +
                       " does not match Y columns " + std::to_string(data.q())});
    return out;
  }
  if (data.X.rows() != data.Y.rows())
    out.push_back({-1, -1, "X and Y row counts differ"});
  if (data.O.rows() != data.Y.rows() || data.O.cols() != data.Y.cols())
    out.push_back({-1, -1, "offset matrix shape does not match Y"});

  for (int i = 0; i < data.n(); ++i)
    for (int a = 0; a < data.p(); ++a)
      if (!std::isfinite(data.X(i, a)))
        out.push_back({i, a, "non-finite predictor value"});

  for (int j = 0; j < data.q(); ++j) {
    const Family tag = spec.families[static_cast<size_t>(j)].tag;
    for (int i = 0; i < data.n(); ++i) {
      const double y = data.Y(i, j);
      if (!std::isfinite(y)) {
        out.push_back({i, j, "non-finite response value"});
        continue;
      }
      if (tag == Family::Bernoulli && y != 0.0 && y != 1.0)
        out.push_back({i, j, "Bernoulli column " + std::to_string(j) +
                                 " has non-binary value at row " +
                                 std::to_string(i)});
      if (tag == Family::NegBin) {
        if (y < 0.0)
          out.push_back({i, j, "negative count"});
        else if (!is_integer_value(y))
          out.push_back({i, j, "non-integer count"});
      }
    }
  }
  return out;
}

} // namespace lrmix
