#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "gpcon/cgp.hpp"
#include "gpcon/placement.hpp"

// Experiment harness: the three benchmark functions, Latin hypercube
// designs, the Q2 / PVA / AWoCI metrics, and a replication runner that
// produces per-replication records plus aggregate means.

namespace gpcon {

/// 1/3 (atan(20x - 10) - atan(-10)): bounded, increasing on all of R.
double example1_f(double x);
/// Upper envelope 1/3 ln(30x + 1) + 0.1 used as the boundedness bound.
double example1_upper_bound(double x);
/// The seven fixed design points x_i = 0.1 + 1/(i+1), i = 1..7.
Eigen::MatrixXd example1_design();

/// y-coordinate of a two-segment planar arm; x = [L1, L2, tau1, tau2]
/// in [0,1]^2 x [0,2pi]^2.
double robot_arm_f(const Eigen::VectorXd& x);

/// Burst capacity (MPa) of a pipe with a rectangular defect, on the unit
/// cube via the transforms su = 450 + 100 x1, D = t (10 + 40 x2),
/// t = 5 + 25 x3, d = t x4, l = 1000 x5.
double pipeline_pcap(const Eigen::VectorXd& x);

/// Stratified design: one point per axis stratum in every dimension.
Eigen::MatrixXd lhs_sample(int n, int dims, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi, Rng& rng);

/// Predictivity coefficient 1 - sum (yhat - y)^2 / sum (ybar - y)^2.
double q2(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred);

/// |log( mean( (yhat - y)^2 / var ) )|; smaller is better.
double pva(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred,
           const Eigen::VectorXd& var_pred);

/// Mean width of the [p025, p975] intervals.
double awoci(const Eigen::VectorXd& p975, const Eigen::VectorXd& p025);

/// Empirical quantile with linear interpolation between order statistics.
double empirical_quantile(Eigen::VectorXd samples, double q);

enum class Experiment { Example1Noiseless, Example1Noisy, RobotArm, Pipeline };
enum class Variant {
  Unconstrained,
  Constrained,
  MomentApprox1,     // moment-based search, sampling inference
  MomentApprox2,     // moment-based search and inference
  CorrelationFree,   // correlation-free search, sampling inference
};

std::string variant_name(Variant v);
/// Parses the names accepted by the CLI; throws on unknown input.
Variant parse_variant(const std::string& name);

struct ExperimentConfig {
  Experiment which = Experiment::RobotArm;
  Variant variant = Variant::Constrained;
  int n_x = 4;
  int n_c = 2;
  int n_train = 40;
  int n_v_max = 80;
  int k_samples = 10000;   // posterior draws per prediction
  int m = 1000;            // draws behind placement probabilities
  double p_target = 0.7;
  int n_test = 1000;
  int n_candidates = 1000;
  int prob_draws = 4000;   // importance draws for log p(C|Y)
  int replications = 1;
  std::uint64_t base_seed = 0;
  int mle_restarts = 8;
};

/// One row of the results table. Timing fields hold wall-clock seconds and
/// are excluded from emitted files unless explicitly requested.
struct ExperimentRecord {
  int replication = 0;
  double log10_p_c_given_y = std::numeric_limits<double>::quiet_NaN();
  int n_v = 0;
  double t_v = 0.0;  // mean seconds per accepted site
  double t_s = 0.0;  // seconds to draw the prediction samples
  double pva_value = std::numeric_limits<double>::quiet_NaN();
  double q2_value = std::numeric_limits<double>::quiet_NaN();
  double awoci_value = std::numeric_limits<double>::quiet_NaN();
  double p_c_min = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string error;
};

ExperimentConfig robot_config(int replications, Variant variant,
                              std::uint64_t seed, int n_train = 40);
ExperimentConfig pipeline_config(int n_x, int n_c, int n_train,
                                 int replications, Variant variant,
                                 std::uint64_t seed);

/// Runs all replications (concurrently when threads are available; the
/// records only depend on base_seed). Failures are recorded per
/// replication and do not stop the run.
std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config);

ExperimentRecord aggregate_mean(const std::vector<ExperimentRecord>& records);

void write_records_csv(std::ostream& os,
                       const std::vector<ExperimentRecord>& records,
                       bool include_timings);
void write_records_json(std::ostream& os, const ExperimentConfig& config,
                        const std::vector<ExperimentRecord>& records,
                        bool include_timings);

/// Full 1-d illustration: unconstrained vs constrained fit with
/// boundedness + monotonicity, prediction grid with percentile bands and
/// KDE mode, the accepted sites, and summary metrics for both variants.
struct Example1Output {
  Eigen::VectorXd grid;                      // prediction locations
  Eigen::VectorXd f_true;
  Eigen::VectorXd unc_mean, unc_lo, unc_hi;  // exact Gaussian bands
  Eigen::VectorXd con_mean, con_lo, con_hi;  // sample percentiles
  Eigen::VectorXd con_mode;                  // KDE mode per grid point
  std::vector<std::pair<int, Eigen::VectorXd>> sites;  // (entry, location)
  int n_sites_bound = 0, n_sites_mono = 0;
  double log10_p_c_given_y = 0.0;
  double q2_unc = 0.0, q2_con = 0.0;
  double pva_unc = 0.0, pva_con = 0.0;
  double awoci_unc = 0.0, awoci_con = 0.0;
  HyperParams hyper;
  PlacementTrace trace;
  Eigen::MatrixXd train_X;
  Eigen::VectorXd train_y;
};

Example1Output run_example1(bool noisy, double p_target, std::uint64_t seed,
                            int max_sites = 40, int k_samples = 10000);

}  // namespace gpcon
