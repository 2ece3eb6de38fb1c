#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <utility>

#include "gpcon/gp.hpp"
#include "gpcon/linop.hpp"
#include "gpcon/tmvn.hpp"

// GP regression conditioned on interval bounds of a stacked linear operator
// at virtual observation locations. The posterior at new inputs is Gaussian
// with a truncated-Gaussian random mean; everything is computed through two
// Cholesky factors (training data L, operator block L1) and triangular
// solves, never explicit inverses.
//
// Factor layout, with L = chol(K_XX + sigma^2 I):
//   v1 = L \ K_{X,Xv} Lop^T         A1 = (L^T \ v1)^T
//   B1 = Lop K_{Xv,Xv} Lop^T + sigma_v^2 I - v1^T v1      L1 = chol(B1)
// and per prediction batch X*:
//   v2 = L \ K_{X,X*}               A2 = (L^T \ v2)^T
//   B2 = K_{X*,X*} - v2^T v2        B3 = K_{X*,Xv} Lop^T - v2^T v1
//   v3 = L1 \ B3^T                  A  = (L1^T \ v3)^T
//   B  = A2 - A A1                  Sigma = B2 - v3^T v3
// The truncated variable C has law TN(Lop mu_v + A1 (y - mu), B1, a, b).

namespace gpcon {

/// Where the moments (nu, Gamma) of the truncated variable come from:
/// empirical moments of the cached draws, or the correlation-free
/// closed-form approximation (diagonal Gamma).
enum class MomentSource { Samples, CorrelationFree };

/// Gaussian-with-random-mean law at a prediction batch:
/// f(X*) | y, C = base_mean + coef (C - Lop mu_v) + N(0, Sigma).
struct PredictiveLaw {
  Eigen::VectorXd base_mean;  // mu* + B (y - mu)
  Eigen::MatrixXd coef;       // A, M x N_v
  Eigen::MatrixXd Sigma;      // M x M
};

/// Same shape for the transformed process Lop f(X*) | y, C; rows are
/// entry-major over the batch.
struct ConstraintLaw {
  Eigen::VectorXd base_mean;  // Lop mu* + Bt (y - mu)
  Eigen::MatrixXd coef;       // At, (k M) x N_v
  Eigen::MatrixXd Sigma;      // (k M) x (k M)
};

/// Diagonal-only variant used in candidate scans.
struct ConstraintScanLaw {
  Eigen::VectorXd base_mean;  // (k M)
  Eigen::MatrixXd coef;       // (k M) x N_v
  Eigen::VectorXd sd;         // sqrt(diag Sigma), clamped at 0
  int entries = 0;
  int points = 0;
};

/// The full factor set for one prediction batch; kept separate from
/// PredictiveLaw so equivalence tests can inspect every intermediate.
struct PredictiveFactors {
  Eigen::MatrixXd v2, A2, B2, B3, v3, A, B, Sigma;
};
struct ConstraintFactors {
  Eigen::MatrixXd v2, A2, B2, B3, v3, A, B, Sigma;
};

struct AssembleOptions {
  double nugget_floor = 1e-6;   // floor on the data noise variance
  double sigma_v_floor = 1e-6;  // floor on the virtual noise variance
};

class ConstrainedGP {
 public:
  static ConstrainedGP assemble(TrainingSet train, HyperParams hyper,
                                OperatorSet opset, double sigma_v2,
                                const AssembleOptions& opts = {});

  /// Same data and hyperparameters, new operator set; reuses the training
  /// factor L and recomputes only the operator blocks. Drops the sample
  /// cache.
  ConstrainedGP with_opset(OperatorSet opset) const;

  const TrainingSet& train() const { return train_; }
  const HyperParams& hyper() const { return hyper_; }
  const OperatorSet& opset() const { return opset_; }
  double sigma_v2() const { return sigma_v2_; }
  const DataFactor& factor() const { return factor_; }
  const Eigen::MatrixXd& v1() const { return v1_; }
  const Eigen::MatrixXd& a1() const { return a1_; }
  const Eigen::MatrixXd& b1() const { return b1_; }
  const Eigen::MatrixXd& l1() const { return l1_; }
  int n_virtual() const { return opset_.total_sites(); }

  /// Law of the noisy operator observations given the data only:
  /// TN(Lop mu_v + A1 (y - mu), B1, a(Xv), b(Xv)).
  TmvnProblem constraint_prior_law() const;

  /// Draws k samples of the truncated variable and caches them. Rejection
  /// sampling when a 100-proposal pilot accepts at >= 0.1, otherwise Gibbs
  /// (burn-in 1000, autocorrelation-adaptive thinning). Bit-reproducible
  /// for a fixed seed.
  void refresh_c_samples(int k, std::uint64_t seed);

  bool has_c_samples() const { return c_samples_.has_value(); }
  const Eigen::MatrixXd& c_samples() const;  // draws x N_v

  PredictiveLaw predictive_law(const Eigen::MatrixXd& Xstar) const;
  PredictiveFactors predictive_factors(const Eigen::MatrixXd& Xstar) const;

  ConstraintLaw constraint_posterior(const Eigen::MatrixXd& Xstar) const;
  ConstraintFactors constraint_factors(const Eigen::MatrixXd& Xstar) const;
  ConstraintScanLaw constraint_scan_law(const Eigen::MatrixXd& Xstar) const;

  /// Posterior draws at Xstar (one column per draw), combining cached
  /// truncated draws with fresh Gaussian noise. Refreshes the cache when it
  /// holds fewer than k draws. Sigma is factorized by Cholesky with jitter
  /// escalation 1e-12..1e-6, then by spectral decomposition with negative
  /// eigenvalues clipped to zero.
  Eigen::MatrixXd sample_posterior(const Eigen::MatrixXd& Xstar, int k,
                                   Rng& rng);

  /// log p(C | y): probability that the unconstrained operator observations
  /// fall inside their bounds.
  LogProb prob_constraint_given_data(int n, Rng& rng) const;

  /// Per-entry probability that each transformed value at x lies inside its
  /// widened bounds [a - margin, b + margin]. Exact Gaussian when there are
  /// no virtual sites; otherwise an average of univariate conditional
  /// probabilities over the cached draws.
  Eigen::VectorXd constraint_prob_pointwise(const Eigen::VectorXd& x,
                                            double margin) const;

  /// Moments (nu, Gamma) of the truncated variable from the chosen source.
  MomentsNd c_moments(MomentSource source) const;

  /// Exact posterior mean and covariance given (nu, Gamma):
  /// E = mu* + A (nu - Lop mu_v) + B (y - mu), cov = Sigma + A Gamma A^T.
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> posterior_moments(
      const Eigen::MatrixXd& Xstar, MomentSource source) const;

  /// Same for the transformed process at a single point; returns the
  /// per-entry means and variances.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> constraint_moments(
      const Eigen::VectorXd& xstar, MomentSource source) const;

  const Eigen::VectorXd& op_mean() const { return op_mean_; }  // Lop mu_v

 private:
  ConstrainedGP() = default;
  void build_operator_blocks();

  TrainingSet train_;
  HyperParams hyper_;
  OperatorSet opset_;
  double sigma_v2_ = 1e-6;
  DataFactor factor_;
  Eigen::VectorXd alpha_;    // L \ (y - mu)
  Eigen::MatrixXd v1_, a1_, b1_, l1_;
  Eigen::VectorXd op_mean_;  // Lop mu_v
  Eigen::VectorXd a1_resid_; // A1 (y - mu)
  std::optional<Eigen::MatrixXd> c_samples_;
};

/// Mode of a 1-d sample set: argmax of a Gaussian KDE with Silverman
/// bandwidth, evaluated on a histogram grid.
double posterior_mode_1d(const Eigen::VectorXd& samples);

/// ln p(y | theta) + ln p(C | y, theta); the second term from the box
/// probability estimator. Evaluation only.
double constrained_log_likelihood(const ConstrainedGP& cgp, int n, Rng& rng);

}  // namespace gpcon
