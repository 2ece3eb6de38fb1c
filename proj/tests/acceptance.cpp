// End-to-end acceptance suite. Each criterion prints one [PASS]/[FAIL]
// line; the process exits nonzero if any criterion fails.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gpcon/bench.hpp"
#include "gpcon/cgp.hpp"
#include "gpcon/mathfn.hpp"
#include "gpcon/placement.hpp"
#include "oracles.hpp"

using namespace gpcon;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct Criterion {
  std::string name;
  std::vector<std::string> notes;
  bool ok = true;

  void expect(bool cond, const std::string& what) {
    notes.push_back(std::string(cond ? "  ok   " : "  BAD  ") + what);
    if (!cond) ok = false;
  }
};

void run_criterion(const std::string& name,
                   const std::function<void(Criterion&)>& body) {
  Criterion c;
  c.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.notes.push_back(std::string("  BAD  exception: ") + e.what());
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::printf("[%s] %s (%.1f s)\n", c.ok ? "PASS" : "FAIL", name.c_str(),
              secs);
  for (const auto& n : c.notes) std::printf("%s\n", n.c_str());
  std::fflush(stdout);
  if (!c.ok) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Eigen::MatrixXd random_points(int n, int d, Rng& rng) {
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  return x;
}

Eigen::MatrixXd separated_points(int n, int d, Rng& rng, double min_dist) {
  Eigen::MatrixXd x(n, d);
  for (int r = 0; r < n;) {
    Eigen::VectorXd cand(d);
    for (int i = 0; i < d; ++i) cand[i] = rng.uniform();
    bool ok = true;
    for (int p = 0; p < r; ++p)
      if ((x.row(p).transpose() - cand).norm() < min_dist) ok = false;
    if (ok) x.row(r++) = cand.transpose();
  }
  return x;
}

// ---------------------------------------------------------------------
// 1. Cholesky pipeline vs direct inversion on 50 random instances
// ---------------------------------------------------------------------
void criterion_oracle_equivalence(Criterion& c) {
  Rng rng(91);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + rng.uniform_int(3);
    const int n = 2 + rng.uniform_int(7);
    TrainingSet t;
    t.X = separated_points(n, d, rng, 0.1);
    t.y.resize(n);
    for (int i = 0; i < n; ++i) t.y[i] = std::sin(4.0 * t.X(i, 0));
    t.noise_var = 1e-3;

    HyperParams h;
    h.kernel.family =
        trial % 2 ? KernelFamily::RBF : KernelFamily::Matern52;
    h.kernel.variance = 0.8 + rng.uniform();
    h.kernel.lengthscales = Eigen::VectorXd::Constant(d, 0.4);
    h.noise_var = 1e-3;

    std::vector<OperatorEntry> entries;
    std::vector<Eigen::VectorXd> used;
    const int k = 1 + rng.uniform_int(2);
    int total = 0;
    for (int e = 0; e < k; ++e) {
      const int s = 1 + rng.uniform_int(3 - e);
      Eigen::MatrixXd sites(s, d);
      for (int r = 0; r < s;) {
        Eigen::VectorXd cand(d);
        for (int i = 0; i < d; ++i) cand[i] = rng.uniform();
        bool ok = true;
        for (const auto& u : used)
          if ((u - cand).norm() < 0.15) ok = false;
        if (!ok) continue;
        sites.row(r++) = cand.transpose();
        used.push_back(cand);
      }
      total += s;
      entries.push_back({e % 2 ? SubOperator::identity()
                               : SubOperator::partial(rng.uniform_int(d)),
                         BoundPair::constants(-1.0, 1.0), sites});
    }
    if (total > 6) continue;
    const Eigen::MatrixXd xs = random_points(3, d, rng);

    const ConstrainedGP cgp = ConstrainedGP::assemble(
        t, h, OperatorSet(std::move(entries), d), 1e-6);
    const PredictiveFactors got = cgp.predictive_factors(xs);
    const auto want = oracle::direct_factors(t, h, cgp.opset(), 1e-6, xs);
    for (double err :
         {oracle::rel_err(cgp.a1(), want.A1), oracle::rel_err(cgp.b1(), want.B1),
          oracle::rel_err(got.A2, want.A2), oracle::rel_err(got.B2, want.B2),
          oracle::rel_err(got.B3, want.B3), oracle::rel_err(got.A, want.A),
          oracle::rel_err(got.B, want.B),
          oracle::rel_err(got.Sigma, want.Sigma)})
      worst = std::max(worst, err);
  }
  c.expect(worst < 1e-8, "worst factor deviation " + fmt(worst) + " < 1e-8");
}

// ---------------------------------------------------------------------
// 2. analytic kernel derivatives vs central finite differences
// ---------------------------------------------------------------------
void criterion_kernel_derivatives(Criterion& c) {
  Rng rng(92);
  double worst1 = 0.0, worst2 = 0.0;
  for (auto family : {KernelFamily::RBF, KernelFamily::Matern52}) {
    KernelConfig cfg;
    cfg.family = family;
    cfg.variance = 1.4;
    cfg.lengthscales = Eigen::VectorXd(3);
    cfg.lengthscales << 0.6, 1.1, 0.9;
    for (int t = 0; t < 100; ++t) {
      Eigen::VectorXd x(3), y(3);
      for (int i = 0; i < 3; ++i) {
        x[i] = rng.uniform();
        y[i] = rng.uniform();
      }
      const int i = rng.uniform_int(3), j = rng.uniform_int(3);
      const double d1 = eval_d10(cfg, i, x, y);
      worst1 = std::max(worst1, std::abs(d1 - oracle::fd_d10(cfg, i, x, y)) /
                                    (std::abs(d1) + 1e-12));
      const double d2 = eval_d11(cfg, i, j, x, y);
      worst2 = std::max(worst2, std::abs(d2 - oracle::fd_d11(cfg, i, j, x, y)) /
                                    (std::abs(d2) + 1e-12));
    }
  }
  c.expect(worst1 < 1e-5, "first derivatives: worst " + fmt(worst1) + " < 1e-5");
  c.expect(worst2 < 1e-4, "second derivatives: worst " + fmt(worst2) + " < 1e-4");
}

// ---------------------------------------------------------------------
// 3. truncated-normal machinery
// ---------------------------------------------------------------------
void criterion_tmvn(Criterion& c) {
  {  // (a) correlated quadrant probability
    TmvnProblem p;
    p.mean = Eigen::VectorXd::Zero(2);
    p.cov.resize(2, 2);
    p.cov << 1.0, 0.5, 0.5, 1.0;
    p.lower = Eigen::VectorXd::Zero(2);
    p.upper = Eigen::VectorXd::Constant(2, kInf);
    Rng rng(93);
    const auto lp = log_prob_box(p, 40000, rng);
    const double got = std::exp(lp.log_p);
    c.expect(std::abs(got - 1.0 / 3.0) < 0.02,
             "quadrant probability " + fmt(got) + " within 0.02 of 1/3");
  }
  {  // (b) Gibbs vs rejection moments, d = 1..3
    bool all_ok = true;
    for (int d = 1; d <= 3; ++d) {
      TmvnProblem p;
      p.mean = Eigen::VectorXd::Zero(d);
      p.cov = Eigen::MatrixXd::Identity(d, d);
      for (int i = 0; i + 1 < d; ++i) p.cov(i, i + 1) = p.cov(i + 1, i) = 0.4;
      p.lower = Eigen::VectorXd::Constant(d, -0.3);
      p.upper = Eigen::VectorXd::Constant(d, 1.5);
      const int n = 100000;
      Rng r1(94 + d), r2(194 + d);
      const auto rej = sample_rejection(p, n, r1, 100000000L);
      const auto gib = sample_gibbs(p, n, r2, 500, 2);
      const auto mr = sample_moments(rej.samples);
      const auto mg = sample_moments(gib);
      for (int i = 0; i < d; ++i) {
        const double se =
            std::sqrt(mr.cov(i, i) / n + mg.cov(i, i) / n);
        if (std::abs(mr.mean[i] - mg.mean[i]) >= 3 * se + 0.004)
          all_ok = false;
      }
    }
    c.expect(all_ok, "Gibbs and rejection moments agree within 3 SE (d <= 3)");
  }
  {  // (c) univariate truncated moments vs quadrature
    double worst = 0.0;
    struct Case {
      double mu, sigma, a, b;
    };
    for (const Case& k : std::vector<Case>{{0, 1, 0, kInf},
                                           {0, 1, -1.2, 0.4},
                                           {1.5, 0.5, 2.0, 3.0},
                                           {0, 1, 6.0, 8.0},
                                           {-2, 2.5, -kInf, 1.0}}) {
      const auto got = truncnorm_moments_1d(k.mu, k.sigma, k.a, k.b);
      const auto want = oracle::truncnorm_quadrature(k.mu, k.sigma, k.a, k.b);
      worst = std::max(worst, std::abs(got.mean - want.mean) /
                                  (std::abs(want.mean) + 1e-12));
      worst = std::max(worst,
                       std::abs(got.var - want.var) / (want.var + 1e-12));
    }
    c.expect(worst < 1e-6,
             "truncated moments vs quadrature: worst " + fmt(worst) + " < 1e-6");
  }
}

// ---------------------------------------------------------------------
// 4. 1-d boundedness + monotonicity reproduction
// ---------------------------------------------------------------------
void criterion_example1(Criterion& c) {
  const Example1Output out = run_example1(false, 0.99, 41, 40, 10000);
  c.expect(out.trace.converged, "placement reached p* >= 0.99");
  const int total = out.n_sites_bound + out.n_sites_mono;
  c.expect(total >= 10 && total <= 30,
           "total sites " + std::to_string(total) + " in [10, 30]");
  c.expect(out.n_sites_mono > out.n_sites_bound,
           "monotonicity sites (" + std::to_string(out.n_sites_mono) +
               ") > boundedness sites (" + std::to_string(out.n_sites_bound) +
               ")");

  // rebuild the fitted model to probe the transformed process at the sites
  TrainingSet train;
  train.X = example1_design();
  train.y.resize(7);
  for (int i = 0; i < 7; ++i) train.y[i] = example1_f(train.X(i, 0));
  train.noise_var = 1e-6;
  std::vector<OperatorEntry> entries;
  entries.push_back({SubOperator::identity(),
                     BoundPair{[](const Eigen::VectorXd&) { return 0.0; },
                               [](const Eigen::VectorXd& x) {
                                 return example1_upper_bound(x[0]);
                               }},
                     Eigen::MatrixXd(0, 1)});
  entries.push_back({SubOperator::partial(0), BoundPair::constants(0.0, kInf),
                     Eigen::MatrixXd(0, 1)});
  OperatorSet ops(entries, 1);
  for (const auto& [entry, x] : out.sites) ops = ops.with_site(entry, x);
  ConstrainedGP cgp = ConstrainedGP::assemble(train, out.hyper, ops, 1e-6);
  cgp.refresh_c_samples(10000, 4141);

  // draws of [f, df/dx] at every virtual site
  const Eigen::MatrixXd site_mat = ops.concatenated_sites();
  const ConstraintLaw law = cgp.constraint_posterior(site_mat);
  Eigen::MatrixXd cond =
      (law.coef * (cgp.c_samples().transpose().colwise() - cgp.op_mean()))
          .colwise() +
      law.base_mean;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(law.Sigma);
  const Eigen::MatrixXd q =
      es.eigenvectors() *
      es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Rng noise_rng(4242);
  Eigen::MatrixXd u(law.Sigma.rows(), cond.cols());
  for (Eigen::Index j = 0; j < u.cols(); ++j)
    for (Eigen::Index i = 0; i < u.rows(); ++i) u(i, j) = noise_rng.normal();
  cond += q * u;

  // rows are entry-major over site_mat: entry 0 rows = f values at all
  // sites, entry 1 rows = derivative values at all sites; the lower bound
  // is 0 for both constraints wherever they apply
  const double sv = std::sqrt(cgp.sigma_v2());
  const Eigen::Index m = site_mat.rows();
  double worst_f = kInf, worst_d = kInf;
  for (Eigen::Index s = 0; s < m; ++s) {
    const bool is_bound_site = s < out.n_sites_bound;
    // f >= 0 applies at the boundedness sites, slope >= 0 at the rest
    if (is_bound_site)
      worst_f = std::min(worst_f, cond.row(s).minCoeff());
    else
      worst_d = std::min(worst_d, cond.row(m + s).minCoeff());
  }
  c.expect(worst_f >= -3.0 * sv,
           "all f draws at boundedness sites >= -3 sigma_v (worst " +
               fmt(worst_f) + ")");
  c.expect(worst_d >= -3.0 * sv,
           "all slope draws at monotonicity sites >= -3 sigma_v (worst " +
               fmt(worst_d) + ")");

  const auto [mean, cov] =
      cgp.posterior_moments(train.X, MomentSource::Samples);
  const double interp = (mean - train.y).cwiseAbs().maxCoeff();
  c.expect(interp < 1e-3,
           "posterior mean interpolates the 7 observations (err " +
               fmt(interp) + " < 1e-3)");
}

// ---------------------------------------------------------------------
// 5. 4-d arm benchmark, 10 replications
// ---------------------------------------------------------------------
void criterion_robot(Criterion& c) {
  const std::uint64_t seed = 2026;
  const auto con =
      run_experiment(robot_config(10, Variant::Constrained, seed));
  const auto unc =
      run_experiment(robot_config(10, Variant::Unconstrained, seed));
  const auto mc = aggregate_mean(con);
  const auto mu = aggregate_mean(unc);
  for (const auto& r : con)
    if (r.failed) c.expect(false, "replication failed: " + r.error);

  c.expect(mc.q2_value > mu.q2_value,
           "mean Q2 constrained " + fmt(mc.q2_value) + " > unconstrained " +
               fmt(mu.q2_value));
  const double ratio = mu.awoci_value / mc.awoci_value;
  c.expect(ratio >= 1.3 && ratio <= 2.5,
           "AWoCI ratio " + fmt(ratio) + " in [1.3, 2.5]");
  c.expect(mc.log10_p_c_given_y >= -45.0 && mc.log10_p_c_given_y <= -20.0,
           "mean log10 p(C|Y) " + fmt(mc.log10_p_c_given_y) +
               " in [-45, -20]");
}

// ---------------------------------------------------------------------
// 6. pressure-capacity benchmark, 5 replications
// ---------------------------------------------------------------------
void criterion_pipeline(Criterion& c) {
  const std::uint64_t seed = 2027;
  const auto con = run_experiment(
      pipeline_config(3, 2, 15, 5, Variant::Constrained, seed));
  const auto unc = run_experiment(
      pipeline_config(3, 2, 15, 5, Variant::Unconstrained, seed));
  for (const auto& r : con)
    if (r.failed) c.expect(false, "replication failed: " + r.error);

  const auto mc = aggregate_mean(con);
  const auto mu = aggregate_mean(unc);
  c.expect(mc.q2_value >= 0.85,
           "mean constrained Q2 " + fmt(mc.q2_value) + " >= 0.85");
  c.expect(mu.q2_value >= 0.85,
           "mean unconstrained Q2 " + fmt(mu.q2_value) + " >= 0.85");
  int narrower = 0, max_nv = 0;
  for (int i = 0; i < 5; ++i) {
    if (con[i].awoci_value < unc[i].awoci_value) ++narrower;
    max_nv = std::max(max_nv, con[i].n_v);
  }
  c.expect(narrower >= 4, "constrained intervals narrower in " +
                              std::to_string(narrower) + "/5 replications");
  c.expect(max_nv <= 15,
           "placement used at most " + std::to_string(max_nv) + " <= 15 sites");
}

// ---------------------------------------------------------------------
// 7. reduction to plain GP regression
// ---------------------------------------------------------------------
void criterion_reduction(Criterion& c) {
  Rng rng(97);
  TrainingSet t;
  t.X = separated_points(6, 1, rng, 0.05);
  t.y.resize(6);
  for (int i = 0; i < 6; ++i) t.y[i] = std::cos(3.0 * t.X(i, 0));
  t.noise_var = 1e-4;
  HyperParams h;
  h.kernel.family = KernelFamily::RBF;
  h.kernel.variance = 0.9;
  h.kernel.lengthscales = Eigen::VectorXd::Constant(1, 0.3);
  h.noise_var = 1e-4;
  const Eigen::MatrixXd xs = random_points(4, 1, rng);
  const DataFactor f = factor(t, h);
  const auto [want_mean, want_cov] = predict(t, h, f, xs);

  // empty operator set: identical matrices
  ConstrainedGP empty_cgp =
      ConstrainedGP::assemble(t, h, OperatorSet({}, 1), 1e-6);
  const PredictiveLaw elaw = empty_cgp.predictive_law(xs);
  c.expect(oracle::rel_err(elaw.base_mean, want_mean) < 1e-12 &&
               oracle::rel_err(elaw.Sigma, want_cov) < 1e-12,
           "empty operator set reproduces the plain posterior exactly");

  // unbounded constraints: same distribution up to Monte Carlo error
  std::vector<OperatorEntry> entries;
  entries.push_back({SubOperator::partial(0), BoundPair::unbounded(),
                     separated_points(3, 1, rng, 0.1)});
  ConstrainedGP free_cgp =
      ConstrainedGP::assemble(t, h, OperatorSet(std::move(entries), 1), 1e-6);
  const int k = 100000;
  free_cgp.refresh_c_samples(k, 555);
  Rng draw_rng(98);
  const Eigen::MatrixXd draws = free_cgp.sample_posterior(xs, k, draw_rng);
  bool mean_ok = true, var_ok = true;
  for (int i = 0; i < 4; ++i) {
    const double m = draws.row(i).mean();
    const double v =
        (draws.row(i).array() - m).square().sum() / (k - 1);
    const double se_m = std::sqrt(want_cov(i, i) / k);
    const double se_v = want_cov(i, i) * std::sqrt(2.0 / (k - 1));
    if (std::abs(m - want_mean[i]) >= 3 * se_m + 1e-10) mean_ok = false;
    if (std::abs(v - want_cov(i, i)) >= 3 * se_v + 1e-10) var_ok = false;
  }
  c.expect(mean_ok, "unbounded-constraint sample means match within 3 SE");
  c.expect(var_ok, "unbounded-constraint sample variances match within 3 SE");
}

// ---------------------------------------------------------------------
// 8. CLI determinism: same seed, byte-identical outputs
// ---------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_determinism(Criterion& c) {
  const fs::path base = fs::temp_directory_path() / "gpcon_acceptance";
  fs::remove_all(base);
  fs::create_directories(base);
  const std::string cli = GPCON_CLI_PATH;

  // a small data set for the fit command
  {
    std::ofstream data(base / "data.csv");
    data << "x,y\n";
    for (int i = 0; i <= 15; ++i)
      data << i / 15.0 << "," << i / 15.0 * i / 15.0 << "\n";
    std::ofstream query(base / "query.csv");
    query << "x\n0.1\n0.4\n0.8\n";
    std::ofstream cons(base / "cons.json");
    cons << R"({"constraints":[{"kind":"derivative","axis":1,"lower":0}]})";
  }

  struct Cmd {
    std::string name, args;
    std::vector<std::string> files;
  };
  const std::vector<Cmd> commands = {
      {"example1",
       "example1 --noiseless --p-target 0.9 --samples 3000 --seed 7",
       {"grid.csv", "sites.csv", "metrics.csv", "trace.csv"}},
      {"robot",
       "robot --replications 1 --n-train 25 --max-sites 12 --variant "
       "constrained --seed 7",
       {"records.csv", "records.json"}},
      {"pipeline",
       "pipeline --replications 1 --nx 3 --nc 2 --n-train 15 --variant "
       "constrained --seed 7",
       {"records.csv", "records.json"}},
      {"fit",
       "fit --data " + (base / "data.csv").string() + " --constraints " +
           (base / "cons.json").string() + " --predict " +
           (base / "query.csv").string() +
           " --noiseless --samples 2000 --p-target 0.8 --seed 7",
       {"predictions.csv", "trace.csv"}},
  };
  for (const auto& cmd : commands) {
    const fs::path out1 = base / (cmd.name + "_1");
    const fs::path out2 = base / (cmd.name + "_2");
    const std::string run1 =
        cli + " " + cmd.args + " --out " + out1.string() + " >/dev/null 2>&1";
    const std::string run2 =
        cli + " " + cmd.args + " --out " + out2.string() + " >/dev/null 2>&1";
    const int rc1 = WEXITSTATUS(std::system(run1.c_str()));
    const int rc2 = WEXITSTATUS(std::system(run2.c_str()));
    if (rc1 != 0 || rc2 != 0) {
      c.expect(false, cmd.name + " exited nonzero");
      continue;
    }
    bool identical = true;
    for (const auto& f : cmd.files)
      if (slurp(out1 / f) != slurp(out2 / f)) identical = false;
    c.expect(identical, cmd.name + ": output files byte-identical");
  }
  fs::remove_all(base);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n================\n");
  run_criterion("1. posterior factors match direct inversion (50 instances)",
                criterion_oracle_equivalence);
  run_criterion("2. kernel derivatives match finite differences",
                criterion_kernel_derivatives);
  run_criterion("3. truncated-normal machinery", criterion_tmvn);
  run_criterion("4. 1-d boundedness/monotonicity reproduction",
                criterion_example1);
  run_criterion("5. 4-d arm benchmark (10 replications)", criterion_robot);
  run_criterion("6. pressure-capacity benchmark (5 replications)",
                criterion_pipeline);
  run_criterion("7. reduction to the unconstrained posterior",
                criterion_reduction);
  run_criterion("8. CLI determinism", criterion_determinism);
  if (g_failures)
    std::printf("\n%d criterion(s) FAILED\n", g_failures);
  else
    std::printf("\nall criteria passed\n");
  return g_failures ? 1 : 0;
}
