#include "gpcon/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "gpcon/csv.hpp"
#include "gpcon/mathfn.hpp"

namespace gpcon {

namespace {
constexpr double kTwoPi = 6.283185307179586;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}
}  // namespace

double example1_f(double x) {
  return (std::atan(20.0 * x - 10.0) - std::atan(-10.0)) / 3.0;
}

double example1_upper_bound(double x) {
  return std::log(30.0 * x + 1.0) / 3.0 + 0.1;
}

Eigen::MatrixXd example1_design() {
  Eigen::MatrixXd x(7, 1);
  for (int i = 1; i <= 7; ++i) x(i - 1, 0) = 0.1 + 1.0 / (i + 1.0);
  return x;
}

double robot_arm_f(const Eigen::VectorXd& x) {
  if (x.size() != 4) throw std::invalid_argument("robot_arm_f: need 4 inputs");
  return x[0] * std::cos(x[2]) + x[1] * std::cos(x[2] + x[3]);
}

double pipeline_pcap(const Eigen::VectorXd& x) {
  if (x.size() != 5) throw std::invalid_argument("pipeline_pcap: need 5 inputs");
  for (int i = 0; i < 5; ++i)
    if (x[i] < -1e-12 || x[i] > 1.0 + 1e-12)
      throw std::invalid_argument("pipeline_pcap: input outside unit cube");
  const double su = 450.0 + 100.0 * x[0];
  const double t = 5.0 + 25.0 * x[2];
  const double D = t * (10.0 + 40.0 * x[1]);
  const double dt = x[3];  // defect depth ratio d/t
  const double l = 1000.0 * x[4];
  const double q = std::sqrt(1.0 + 0.31 * l * l / (D * t));
  return 1.05 * (2.0 * t * su / (D - t)) * (1.0 - dt) / (1.0 - dt / q);
}

Eigen::MatrixXd lhs_sample(int n, int dims, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi, Rng& rng) {
  if (n < 1) throw std::invalid_argument("lhs_sample: n must be >= 1");
  if (lo.size() != dims || hi.size() != dims)
    throw std::invalid_argument("lhs_sample: box dimension mismatch");
  Eigen::MatrixXd out(n, dims);
  std::vector<int> perm(n);
  for (int d = 0; d < dims; ++d) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
    for (int i = 0; i < n; ++i) {
      const double u = (perm[i] + rng.uniform()) / n;
      out(i, d) = lo[d] + u * (hi[d] - lo[d]);
    }
  }
  return out;
}

double q2(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
  if (y_true.size() != y_pred.size() || y_true.size() < 2)
    throw std::invalid_argument("q2: need two equal-length vectors");
  const double denom =
      (y_true.array() - y_true.mean()).square().sum();
  if (!(denom > 0.0)) throw std::invalid_argument("q2: constant y_true");
  return 1.0 - (y_pred - y_true).squaredNorm() / denom;
}

double pva(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred,
           const Eigen::VectorXd& var_pred) {
  if (y_true.size() != y_pred.size() || y_true.size() != var_pred.size())
    throw std::invalid_argument("pva: length mismatch");
  if ((var_pred.array() <= 0.0).any())
    throw std::invalid_argument("pva: nonpositive predictive variance");
  const double inner =
      ((y_pred - y_true).array().square() / var_pred.array()).mean();
  return std::abs(std::log(inner));
}

double awoci(const Eigen::VectorXd& p975, const Eigen::VectorXd& p025) {
  if (p975.size() != p025.size())
    throw std::invalid_argument("awoci: length mismatch");
  if (((p975 - p025).array() < 0.0).any())
    throw std::invalid_argument("awoci: upper percentile below lower");
  return (p975 - p025).mean();
}

double empirical_quantile(Eigen::VectorXd samples, double q) {
  const Eigen::Index n = samples.size();
  if (n == 0) throw std::invalid_argument("empirical_quantile: empty");
  std::sort(samples.data(), samples.data() + n);
  const double h = q * (n - 1);
  const Eigen::Index i = static_cast<Eigen::Index>(std::floor(h));
  if (i >= n - 1) return samples[n - 1];
  const double frac = h - i;
  return samples[i] + frac * (samples[i + 1] - samples[i]);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Unconstrained: return "unconstrained";
    case Variant::Constrained: return "constrained";
    case Variant::MomentApprox1: return "moment1";
    case Variant::MomentApprox2: return "moment2";
    case Variant::CorrelationFree: return "corrfree";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::Unconstrained, Variant::Constrained,
                    Variant::MomentApprox1, Variant::MomentApprox2,
                    Variant::CorrelationFree})
    if (variant_name(v) == name) return v;
  throw std::invalid_argument("unknown variant '" + name + "'");
}

ExperimentConfig robot_config(int replications, Variant variant,
                              std::uint64_t seed, int n_train) {
  ExperimentConfig c;
  c.which = Experiment::RobotArm;
  c.variant = variant;
  c.n_x = 4;
  c.n_c = 2;
  c.n_train = n_train;
  c.n_v_max = 80;
  // effectively site-count limited: the target is unreachable in practice
  c.p_target = 0.9999;
  c.n_candidates = 1000;
  c.replications = replications;
  c.base_seed = seed;
  return c;
}

ExperimentConfig pipeline_config(int n_x, int n_c, int n_train,
                                 int replications, Variant variant,
                                 std::uint64_t seed) {
  if (n_x < 1 || n_x > 5 || n_c < 1 || n_c > n_x)
    throw std::invalid_argument("pipeline_config: need 1 <= n_c <= n_x <= 5");
  ExperimentConfig c;
  c.which = Experiment::Pipeline;
  c.variant = variant;
  c.n_x = n_x;
  c.n_c = n_c;
  c.n_train = n_train;
  c.n_v_max = 40;
  c.p_target = 0.7;
  c.n_candidates = 2500;
  c.replications = replications;
  c.base_seed = seed;
  return c;
}

namespace {

Eigen::MatrixXd uniform_matrix(int n, const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi, Rng& rng) {
  Eigen::MatrixXd out(n, lo.size());
  for (int r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < lo.size(); ++c)
      out(r, c) = rng.uniform(lo[c], hi[c]);
  return out;
}

// sign-switching bound pair for a monotone-in-context derivative: the
// derivative is >= 0 where sign(x) >= 0 and <= 0 elsewhere
BoundPair signed_derivative_bounds(
    std::function<double(const Eigen::VectorXd&)> sign) {
  return BoundPair{
      [sign](const Eigen::VectorXd& x) {
        return sign(x) >= 0.0 ? 0.0 : -kInf;
      },
      [sign](const Eigen::VectorXd& x) {
        return sign(x) >= 0.0 ? kInf : 0.0;
      }};
}

struct Problem {
  Eigen::VectorXd lo, hi;
  std::function<double(const Eigen::VectorXd&)> truth;
  double noise_var = 0.0;         // noise added to training observations
  bool estimate_noise = false;
  KernelFamily family = KernelFamily::Matern52;
  OperatorSet opset;              // entries with empty site matrices
};

Problem make_problem(const ExperimentConfig& config) {
  Problem p;
  if (config.which == Experiment::RobotArm) {
    p.lo = Eigen::VectorXd::Zero(4);
    p.hi.resize(4);
    p.hi << 1.0, 1.0, kTwoPi, kTwoPi;
    p.truth = robot_arm_f;
    p.noise_var = 0.0;
    p.estimate_noise = false;
    p.family = KernelFamily::Matern52;
    // the direction of movement in the arm lengths is known for every
    // angle pair: d f / d L1 has the sign of cos(tau1), d f / d L2 the
    // sign of cos(tau1 + tau2)
    std::vector<OperatorEntry> entries;
    entries.push_back({SubOperator::partial(0),
                       signed_derivative_bounds([](const Eigen::VectorXd& x) {
                         return std::cos(x[2]);
                       }),
                       Eigen::MatrixXd(0, 4)});
    entries.push_back({SubOperator::partial(1),
                       signed_derivative_bounds([](const Eigen::VectorXd& x) {
                         return std::cos(x[2] + x[3]);
                       }),
                       Eigen::MatrixXd(0, 4)});
    p.opset = OperatorSet(std::move(entries), 4);
    return p;
  }
  if (config.which == Experiment::Pipeline) {
    const int nx = config.n_x;
    p.lo = Eigen::VectorXd::Zero(nx);
    p.hi = Eigen::VectorXd::Ones(nx);
    p.truth = [nx](const Eigen::VectorXd& x) {
      Eigen::VectorXd full = Eigen::VectorXd::Constant(5, 0.5);
      full.head(nx) = x;
      return pipeline_pcap(full);
    };
    p.noise_var = 4.0;
    p.estimate_noise = true;
    p.family = KernelFamily::Matern52;
    // capacity rises with material strength and wall thickness, falls
    // with diameter ratio and defect size
    static constexpr double kSigns[5] = {+1.0, -1.0, +1.0, -1.0, -1.0};
    std::vector<OperatorEntry> entries;
    for (int i = 0; i < config.n_c; ++i) {
      const BoundPair b = kSigns[i] > 0.0
                              ? BoundPair{[](const Eigen::VectorXd&) {
                                            return 0.0;
                                          },
                                          [](const Eigen::VectorXd&) {
                                            return kInf;
                                          }}
                              : BoundPair{[](const Eigen::VectorXd&) {
                                            return -kInf;
                                          },
                                          [](const Eigen::VectorXd&) {
                                            return 0.0;
                                          }};
      entries.push_back({SubOperator::partial(i), b, Eigen::MatrixXd(0, nx)});
    }
    p.opset = OperatorSet(std::move(entries), nx);
    return p;
  }
  throw std::invalid_argument("run_experiment: unsupported experiment");
}

ProbEvaluator evaluator_for(Variant v) {
  switch (v) {
    case Variant::Constrained: return ProbEvaluator::SampleAverage;
    case Variant::MomentApprox1:
    case Variant::MomentApprox2: return ProbEvaluator::MomentSamples;
    case Variant::CorrelationFree: return ProbEvaluator::MomentCorrelationFree;
    default: throw std::invalid_argument("no evaluator for this variant");
  }
}

ExperimentRecord run_one(const ExperimentConfig& config, const Problem& prob,
                         int rep) {
  const std::uint64_t seed = mix_seed(config.base_seed, rep);
  ExperimentRecord rec;
  rec.replication = rep;

  Rng design_rng(mix_seed(seed, 1));
  TrainingSet train;
  train.X = lhs_sample(config.n_train, config.n_x, prob.lo, prob.hi,
                       design_rng);
  train.y.resize(config.n_train);
  for (int i = 0; i < config.n_train; ++i)
    train.y[i] = prob.truth(train.X.row(i).transpose());
  train.noise_var = prob.noise_var;
  if (prob.noise_var > 0.0) {
    Rng noise_rng(mix_seed(seed, 2));
    const double sd = std::sqrt(prob.noise_var);
    for (int i = 0; i < config.n_train; ++i)
      train.y[i] += sd * noise_rng.normal();
  }

  Rng test_rng(mix_seed(seed, 3));
  const Eigen::MatrixXd x_test =
      uniform_matrix(config.n_test, prob.lo, prob.hi, test_rng);
  Eigen::VectorXd y_test(config.n_test);
  for (int i = 0; i < config.n_test; ++i)
    y_test[i] = prob.truth(x_test.row(i).transpose());

  HyperParams init;
  init.kernel.family = prob.family;
  init.kernel.variance =
      std::max((train.y.array() - train.y.mean()).square().mean(), 1e-8);
  init.kernel.lengthscales = 0.3 * (prob.hi - prob.lo);
  init.noise_var = prob.estimate_noise
                       ? std::max(0.1 * init.kernel.variance, 1e-4)
                       : 1e-6;
  init.mean_const = 0.0;
  MleOptions mle;
  mle.estimate_noise = prob.estimate_noise;
  mle.restarts = config.mle_restarts;
  mle.seed = mix_seed(seed, 5);
  const HyperParams hyper = mle_fit(train, init, mle);

  Eigen::VectorXd mean, var, lo_band, hi_band;
  const double z975 = norm_quantile(0.975);

  if (config.variant == Variant::Unconstrained) {
    const DataFactor f = factor(train, hyper);
    auto [m, cov] = predict(train, hyper, f, x_test);
    mean = std::move(m);
    var = cov.diagonal().cwiseMax(0.0);
    lo_band = mean - z975 * var.cwiseSqrt();
    hi_band = mean + z975 * var.cwiseSqrt();
    rec.n_v = 0;
  } else {
    ConstrainedGP cgp =
        ConstrainedGP::assemble(train, hyper, prob.opset, 1e-6);

    Rng cand_rng(mix_seed(seed, 4));
    PlacementConfig pc;
    pc.p_target = config.p_target;
    pc.m = config.m;
    pc.candidates =
        uniform_matrix(config.n_candidates, prob.lo, prob.hi, cand_rng);
    pc.max_sites = config.n_v_max;
    pc.domain_lo = prob.lo;
    pc.domain_hi = prob.hi;
    pc.evaluator = evaluator_for(config.variant);
    pc.base_seed = mix_seed(seed, 6);

    PlacementResult placed = place_per_suboperator(cgp, pc);
    if (!placed.trace.error.empty())
      throw std::runtime_error("placement: " + placed.trace.error);
    cgp = std::move(placed.model);
    rec.n_v = cgp.n_virtual();
    rec.t_v = placed.trace.mean_site_seconds();

    Rng prob_rng(mix_seed(seed, 7));
    rec.log10_p_c_given_y =
        cgp.prob_constraint_given_data(config.prob_draws, prob_rng).log_p /
        std::log(10.0);
    rec.p_c_min = audit_min_probability(cgp, pc, mix_seed(seed, 8));

    if (config.variant == Variant::MomentApprox2) {
      const auto t0 = Clock::now();
      cgp.refresh_c_samples(config.k_samples, mix_seed(seed, 9));
      auto [m, cov] = cgp.posterior_moments(x_test, MomentSource::Samples);
      rec.t_s = seconds_since(t0);
      mean = std::move(m);
      var = cov.diagonal().cwiseMax(0.0);
      lo_band = mean - z975 * var.cwiseSqrt();
      hi_band = mean + z975 * var.cwiseSqrt();
    } else {
      const auto t0 = Clock::now();
      cgp.refresh_c_samples(config.k_samples, mix_seed(seed, 9));
      Rng sample_rng(mix_seed(seed, 10));
      const Eigen::MatrixXd draws =
          cgp.sample_posterior(x_test, config.k_samples, sample_rng);
      rec.t_s = seconds_since(t0);
      mean = draws.rowwise().mean();
      var.resize(config.n_test);
      lo_band.resize(config.n_test);
      hi_band.resize(config.n_test);
      for (int i = 0; i < config.n_test; ++i) {
        const Eigen::VectorXd row = draws.row(i).transpose();
        var[i] = (row.array() - mean[i]).square().sum() / (row.size() - 1);
        lo_band[i] = empirical_quantile(row, 0.025);
        hi_band[i] = empirical_quantile(row, 0.975);
      }
    }
  }

  rec.q2_value = q2(y_test, mean);
  rec.pva_value = pva(y_test, mean, var.cwiseMax(1e-12));
  rec.awoci_value = awoci(hi_band, lo_band);
  return rec;
}

}  // namespace

std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config) {
  if (config.replications < 1)
    throw std::invalid_argument("run_experiment: replications must be >= 1");
  const Problem prob = make_problem(config);
  std::vector<ExperimentRecord> records(config.replications);
#pragma omp parallel for schedule(dynamic) if (config.replications > 1)
  for (int rep = 0; rep < config.replications; ++rep) {
    try {
      records[rep] = run_one(config, prob, rep);
    } catch (const std::exception& e) {
      records[rep].replication = rep;
      records[rep].failed = true;
      records[rep].error = e.what();
    }
  }
  return records;
}

ExperimentRecord aggregate_mean(const std::vector<ExperimentRecord>& records) {
  ExperimentRecord agg;
  agg.replication = -1;
  auto mean_of = [&](auto field) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : records) {
      if (r.failed) continue;
      const double v = field(r);
      if (std::isnan(v)) continue;
      sum += v;
      ++n;
    }
    return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
  };
  agg.log10_p_c_given_y =
      mean_of([](const ExperimentRecord& r) { return r.log10_p_c_given_y; });
  agg.n_v = static_cast<int>(std::lround(
      mean_of([](const ExperimentRecord& r) { return double(r.n_v); })));
  agg.t_v = mean_of([](const ExperimentRecord& r) { return r.t_v; });
  agg.t_s = mean_of([](const ExperimentRecord& r) { return r.t_s; });
  agg.pva_value = mean_of([](const ExperimentRecord& r) { return r.pva_value; });
  agg.q2_value = mean_of([](const ExperimentRecord& r) { return r.q2_value; });
  agg.awoci_value =
      mean_of([](const ExperimentRecord& r) { return r.awoci_value; });
  agg.p_c_min = mean_of([](const ExperimentRecord& r) { return r.p_c_min; });
  return agg;
}

namespace {

std::string field_or_empty(double v) {
  return std::isnan(v) ? std::string() : format_double(v);
}

std::vector<std::string> record_row(const ExperimentRecord& r,
                                    bool include_timings) {
  return {r.replication < 0 ? "mean" : std::to_string(r.replication),
          field_or_empty(r.log10_p_c_given_y),
          std::to_string(r.n_v),
          include_timings ? field_or_empty(r.t_v) : std::string(),
          include_timings ? field_or_empty(r.t_s) : std::string(),
          field_or_empty(r.pva_value),
          field_or_empty(r.q2_value),
          field_or_empty(r.awoci_value),
          field_or_empty(r.p_c_min),
          r.failed ? "1" : "0",
          r.error};
}

}  // namespace

void write_records_csv(std::ostream& os,
                       const std::vector<ExperimentRecord>& records,
                       bool include_timings) {
  write_csv_row(os, {"replication", "log10_p_c_given_y", "n_v", "t_v", "t_s",
                     "pva", "q2", "awoci", "p_c_min", "failed", "error"});
  for (const auto& r : records) write_csv_row(os, record_row(r, include_timings));
  write_csv_row(os, record_row(aggregate_mean(records), include_timings));
}

void write_records_json(std::ostream& os, const ExperimentConfig& config,
                        const std::vector<ExperimentRecord>& records,
                        bool include_timings) {
  using json = nlohmann::ordered_json;
  auto to_json = [&](const ExperimentRecord& r) {
    json j;
    j["replication"] = r.replication;
    if (!std::isnan(r.log10_p_c_given_y))
      j["log10_p_c_given_y"] = r.log10_p_c_given_y;
    j["n_v"] = r.n_v;
    if (include_timings) {
      j["t_v"] = r.t_v;
      j["t_s"] = r.t_s;
    }
    if (!std::isnan(r.pva_value)) j["pva"] = r.pva_value;
    if (!std::isnan(r.q2_value)) j["q2"] = r.q2_value;
    if (!std::isnan(r.awoci_value)) j["awoci"] = r.awoci_value;
    if (!std::isnan(r.p_c_min)) j["p_c_min"] = r.p_c_min;
    j["failed"] = r.failed;
    if (!r.error.empty()) j["error"] = r.error;
    return j;
  };
  json out;
  out["experiment"] =
      config.which == Experiment::RobotArm ? "robot" : "pipeline";
  out["variant"] = variant_name(config.variant);
  out["n_x"] = config.n_x;
  out["n_c"] = config.n_c;
  out["n_train"] = config.n_train;
  out["replications"] = config.replications;
  out["seed"] = config.base_seed;
  out["records"] = json::array();
  for (const auto& r : records) out["records"].push_back(to_json(r));
  out["aggregate"] = to_json(aggregate_mean(records));
  os << out.dump(2) << '\n';
}

Example1Output run_example1(bool noisy, double p_target, std::uint64_t seed,
                            int max_sites, int k_samples) {
  Example1Output out;

  TrainingSet train;
  HyperParams hyper;
  hyper.kernel.family = KernelFamily::RBF;
  hyper.kernel.lengthscales = Eigen::VectorXd::Constant(1, 0.1);
  hyper.kernel.variance = 0.25;  // sigma_K = 0.5
  hyper.noise_var = 1e-6;
  hyper.mean_const = 0.0;

  if (!noisy) {
    train.X = example1_design();
    train.y.resize(7);
    for (int i = 0; i < 7; ++i) train.y[i] = example1_f(train.X(i, 0));
    train.noise_var = 1e-6;
  } else {
    const int n = 50;
    Rng design_rng(mix_seed(seed, 1));
    Rng noise_rng(mix_seed(seed, 2));
    train.X.resize(n, 1);
    train.y.resize(n);
    for (int i = 0; i < n; ++i) {
      train.X(i, 0) = design_rng.uniform(0.1, 0.8);
      train.y[i] = example1_f(train.X(i, 0)) + 0.2 * noise_rng.normal();
    }
    train.noise_var = 0.04;
    MleOptions mle;
    mle.estimate_noise = true;
    mle.seed = mix_seed(seed, 3);
    HyperParams init = hyper;
    init.kernel.lengthscales[0] = 0.2;
    init.noise_var = 0.04;
    hyper = mle_fit(train, init, mle);
  }
  out.hyper = hyper;
  out.train_X = train.X;
  out.train_y = train.y;

  std::vector<OperatorEntry> entries;
  entries.push_back({SubOperator::identity(),
                     BoundPair{[](const Eigen::VectorXd&) { return 0.0; },
                               [](const Eigen::VectorXd& x) {
                                 return example1_upper_bound(x[0]);
                               }},
                     Eigen::MatrixXd(0, 1)});
  entries.push_back({SubOperator::partial(0),
                     BoundPair::constants(0.0, kInf),
                     Eigen::MatrixXd(0, 1)});
  OperatorSet opset(std::move(entries), 1);

  ConstrainedGP cgp = ConstrainedGP::assemble(train, hyper, opset, 1e-6);

  PlacementConfig pc;
  pc.p_target = p_target;
  pc.m = 1000;
  pc.candidates = Eigen::VectorXd::LinSpaced(1001, 0.0, 1.0);
  pc.max_sites = max_sites;
  pc.domain_lo = Eigen::VectorXd::Zero(1);
  pc.domain_hi = Eigen::VectorXd::Ones(1);
  pc.base_seed = mix_seed(seed, 4);

  PlacementResult placed = place_per_suboperator(cgp, pc);
  if (!placed.trace.error.empty())
    throw std::runtime_error("placement: " + placed.trace.error);
  cgp = std::move(placed.model);
  out.trace = std::move(placed.trace);
  out.n_sites_bound = static_cast<int>(cgp.opset().entry(0).sites.rows());
  out.n_sites_mono = static_cast<int>(cgp.opset().entry(1).sites.rows());
  for (int e = 0; e < cgp.opset().size(); ++e)
    for (Eigen::Index r = 0; r < cgp.opset().entry(e).sites.rows(); ++r)
      out.sites.emplace_back(e, cgp.opset().entry(e).sites.row(r).transpose());

  out.grid = Eigen::VectorXd::LinSpaced(201, 0.0, 1.0);
  out.f_true.resize(out.grid.size());
  for (Eigen::Index i = 0; i < out.grid.size(); ++i)
    out.f_true[i] = example1_f(out.grid[i]);

  // unconstrained reference bands
  const DataFactor f = factor(train, hyper);
  auto [unc_mean, unc_cov] = predict(train, hyper, f, out.grid);
  out.unc_mean = std::move(unc_mean);
  const Eigen::VectorXd unc_sd = unc_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  const double z975 = norm_quantile(0.975);
  out.unc_lo = out.unc_mean - z975 * unc_sd;
  out.unc_hi = out.unc_mean + z975 * unc_sd;

  // constrained bands and mode from posterior draws
  cgp.refresh_c_samples(k_samples, mix_seed(seed, 5));
  Rng sample_rng(mix_seed(seed, 6));
  const Eigen::MatrixXd draws =
      cgp.sample_posterior(out.grid, k_samples, sample_rng);
  out.con_mean = draws.rowwise().mean();
  out.con_lo.resize(out.grid.size());
  out.con_hi.resize(out.grid.size());
  out.con_mode.resize(out.grid.size());
  Eigen::VectorXd con_var(out.grid.size());
  for (Eigen::Index i = 0; i < out.grid.size(); ++i) {
    const Eigen::VectorXd row = draws.row(i).transpose();
    out.con_lo[i] = empirical_quantile(row, 0.025);
    out.con_hi[i] = empirical_quantile(row, 0.975);
    out.con_mode[i] = posterior_mode_1d(row);
    con_var[i] = (row.array() - out.con_mean[i]).square().sum() /
                 (row.size() - 1);
  }

  Rng prob_rng(mix_seed(seed, 7));
  out.log10_p_c_given_y =
      cgp.prob_constraint_given_data(4000, prob_rng).log_p / std::log(10.0);

  out.q2_unc = q2(out.f_true, out.unc_mean);
  out.q2_con = q2(out.f_true, out.con_mean);
  out.pva_unc = pva(out.f_true, out.unc_mean,
                    unc_cov.diagonal().cwiseMax(1e-12));
  out.pva_con = pva(out.f_true, out.con_mean, con_var.cwiseMax(1e-12));
  out.awoci_unc = awoci(out.unc_hi, out.unc_lo);
  out.awoci_con = awoci(out.con_hi, out.con_lo);
  return out;
}

}  // namespace gpcon
