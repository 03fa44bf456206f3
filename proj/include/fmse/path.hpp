#pragma once

#include <vector>

#include "fmse/types.hpp"

namespace fmse {

/// Conditional OT path between noisy y (t = 0) and clean x1 (t = 1):
/// mean t*x1 + (1-t)*y, standard deviation (1-t)*sigma_max.
struct PathConfig {
  double sigma_max = 0.5;
  double t_eps = 0.03;

  void validate() const;
};

struct PathSample {
  double t = 0.0;
  CMatrix x_t;
  CMatrix x1;
  CMatrix y;
  CMatrix eps;
  CMatrix v_target;
};

using PathBatch = std::vector<PathSample>;

/// i.i.d. draws on [t_eps, 1).
std::vector<double> sample_t(int count, const PathConfig& config, Rng& rng);

CMatrix standard_complex_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Draws eps and builds the path sample at time t.
PathSample sample_path(const CMatrix& x1, const CMatrix& y, double t, const PathConfig& config,
                       Rng& rng);
/// Same, with an explicit noise draw.
PathSample make_path_sample(const CMatrix& x1, const CMatrix& y, const CMatrix& eps, double t,
                            const PathConfig& config);

/// y + sigma_max * eps: a draw from the prior at t = 0.
CMatrix sample_prior(const CMatrix& y, const PathConfig& config, Rng& rng);

}  // namespace fmse
