#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>

#include "gpcon/kernel.hpp"

// Unconstrained GP regression: the training-data Cholesky factor, exact
// predictive mean/covariance, the marginal likelihood, and multi-start MLE
// over the kernel hyperparameters.

namespace gpcon {

struct TrainingSet {
  Eigen::MatrixXd X;   // N x n_x inputs
  Eigen::VectorXd y;   // N observations
  double noise_var = 0.0;  // observation noise sigma^2 of the data source

  int size() const { return static_cast<int>(y.size()); }
  void validate() const;
};

struct HyperParams {
  KernelConfig kernel;
  double noise_var = 1e-6;
  double mean_const = 0.0;
};

/// Lower Cholesky factor of K_{X,X} + sigma^2 I.
struct DataFactor {
  Eigen::MatrixXd L;
};

/// Thrown when a covariance matrix is numerically indefinite; carries the
/// pivot index where the factorization broke down.
struct IndefiniteMatrixError : std::runtime_error {
  IndefiniteMatrixError(const std::string& what, int pivot)
      : std::runtime_error(what), pivot_index(pivot) {}
  int pivot_index;
};

/// Noise floor applied inside factor(): effective sigma^2 = max(sigma^2, floor).
inline constexpr double kDefaultNuggetFloor = 1e-6;

DataFactor factor(const TrainingSet& train, const HyperParams& hyper,
                  double nugget_floor = kDefaultNuggetFloor);

/// Exact posterior mean and covariance at Xstar.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> predict(
    const TrainingSet& train, const HyperParams& hyper,
    const DataFactor& factor, const Eigen::MatrixXd& Xstar);

double log_marginal_likelihood(const TrainingSet& train,
                               const HyperParams& hyper,
                               double nugget_floor = kDefaultNuggetFloor);

struct MleOptions {
  // bounds in natural scale; lengthscale bounds are multiplied by the
  // per-axis input range and noise bounds by var(y) so they transfer
  // across output scales. The noise floor keeps the optimizer away from
  // the spurious interpolation optimum on small noisy data sets.
  double var_lo_rel = 1e-4, var_hi_rel = 1e2;     // relative to var(y)
  double len_lo_rel = 1e-2, len_hi_rel = 1e1;     // relative to axis range
  double noise_lo_rel = 1e-3, noise_hi_rel = 1e1;  // relative to var(y)
  bool estimate_noise = true;
  int restarts = 8;
  int max_iter = 400;
  std::uint64_t seed = 0;
};

/// Multi-start Nelder-Mead over log-parameters; returns the best fit.
/// Deterministic for a fixed options seed.
HyperParams mle_fit(const TrainingSet& train, const HyperParams& init,
                    const MleOptions& opts);

}  // namespace gpcon
