#include "fmse/path.hpp"

namespace fmse {

void PathConfig::validate() const {
  if (!(sigma_max >= 0.0)) throw InvalidInput("sigma_max must be non-negative");
  if (!(t_eps > 0.0 && t_eps < 1.0)) throw InvalidInput("t_eps must be in (0, 1)");
}

std::vector<double> sample_t(int count, const PathConfig& config, Rng& rng) {
  if (count <= 0) throw InvalidInput("sample_t: count must be positive");
  config.validate();
  std::vector<double> ts(count);
  for (double& t : ts) t = rng.uniform(config.t_eps, 1.0);
  return ts;
}

CMatrix standard_complex_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  CMatrix eps(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) eps(i, j) = rng.complex_normal();
  }
  return eps;
}

PathSample make_path_sample(const CMatrix& x1, const CMatrix& y, const CMatrix& eps, double t,
                            const PathConfig& config) {
  if (x1.rows() != y.rows() || x1.cols() != y.cols() || eps.rows() != y.rows() ||
      eps.cols() != y.cols()) {
    throw InvalidInput("path sample: x1, y and eps must share one shape");
  }
  PathSample s;
  s.t = t;
  s.x1 = x1;
  s.y = y;
  s.eps = eps;
  const double sigma_t = (1.0 - t) * config.sigma_max;
  s.x_t = t * x1 + (1.0 - t) * y + sigma_t * eps;
  // (x1 - x_t) / (1 - t), written without the division so t -> 1 stays exact.
  s.v_target = x1 - y - config.sigma_max * eps;
  return s;
}

PathSample sample_path(const CMatrix& x1, const CMatrix& y, double t, const PathConfig& config,
                       Rng& rng) {
  if (x1.rows() != y.rows() || x1.cols() != y.cols()) {
    throw InvalidInput("sample_path: x1 and y shapes differ");
  }
  return make_path_sample(x1, y, standard_complex_normal(y.rows(), y.cols(), rng), t, config);
}

CMatrix sample_prior(const CMatrix& y, const PathConfig& config, Rng& rng) {
  if (!all_finite(y)) throw InvalidInput("sample_prior: non-finite condition");
  CMatrix eps = standard_complex_normal(y.rows(), y.cols(), rng);
  return y + config.sigma_max * eps;
}

}  // namespace fmse
