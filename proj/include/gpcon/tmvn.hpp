#pragma once

#include <Eigen/Core>

#include "gpcon/rng.hpp"

// Truncated-normal machinery: exact univariate sampling and moments, the
// multivariate rejection and Gibbs samplers, a sequential importance
// sampling estimator for Gaussian box probabilities, and sample-moment
// reduction.

namespace gpcon {

/// A multivariate normal restricted to an axis-aligned box; +-inf bounds
/// leave a side open.
struct TmvnProblem {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;
};

/// Exact draw from N(mu, sigma^2) restricted to (a, b). Uses a
/// tail-exponential proposal (Robert 1995) when the interval is far out.
double sample_truncnorm_1d(double mu, double sigma, double a, double b,
                           Rng& rng);

struct Moments1d {
  double mean;
  double var;
};

/// Closed-form mean/variance of the univariate truncated normal.
Moments1d truncnorm_moments_1d(double mu, double sigma, double a, double b);

struct RejectionResult {
  Eigen::MatrixXd samples;  // n x d, one draw per row
  double acceptance_rate;
};

/// i.i.d. draws by rejection from the untruncated Gaussian. Throws when
/// max_tries proposals are exhausted before n draws are accepted.
RejectionResult sample_rejection(const TmvnProblem& problem, int n, Rng& rng,
                                 long max_tries);

/// Fraction of `tries` untruncated proposals that land inside the box.
double rejection_pilot(const TmvnProblem& problem, int tries, Rng& rng);

/// Systematic-scan Gibbs over the univariate full conditionals. thin is
/// the number of scans between records; thin == 0 selects it adaptively
/// from the chain's probed lag-1 autocorrelation (10..400).
Eigen::MatrixXd sample_gibbs(const TmvnProblem& problem, int n, Rng& rng,
                             int burn_in, int thin);

struct LogProb {
  double log_p;
  double std_err;  // in the log domain
};

/// Sequential importance-sampling estimate of log P(lower <= X <= upper)
/// via Cholesky-triangularized conditional truncations; usable down to
/// probabilities around 1e-40 and far beyond. Returns exactly {0, 0} for a
/// fully unbounded box.
LogProb log_prob_box(const TmvnProblem& problem, int n, Rng& rng);

struct MomentsNd {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Empirical mean and (n-1)-normalized covariance; rows are draws.
MomentsNd sample_moments(const Eigen::MatrixXd& samples);

}  // namespace gpcon
