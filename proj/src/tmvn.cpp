#include "gpcon/tmvn.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "gpcon/mathfn.hpp"

namespace gpcon {

void TmvnProblem::validate() const {
  const int d = dim();
  if (cov.rows() != d || cov.cols() != d || lower.size() != d ||
      upper.size() != d)
    throw std::invalid_argument("TmvnProblem: inconsistent dimensions");
  for (int i = 0; i < d; ++i)
    if (!(lower[i] < upper[i]))
      throw std::invalid_argument("TmvnProblem: lower >= upper");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::invalid_argument("TmvnProblem: covariance not symmetric");
}

namespace {

// One-sided standard truncation to [a, inf) with a > 0: shifted-exponential
// proposal with the optimal rate (Robert 1995).
double robert_tail(double a, Rng& rng) {
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double u = 1.0 - rng.uniform();  // (0, 1]
    const double x = a - std::log(u) / lambda;
    const double diff = x - lambda;
    if (std::log(1.0 - rng.uniform()) <= -0.5 * diff * diff) return x;
  }
}

// Standard normal truncated to (a, b); dispatches between plain rejection,
// the tail-exponential proposal and uniform rejection.
double trunc_std_normal(double a, double b, Rng& rng) {
  if (a == -kInf && b == kInf) return rng.normal();
  if (a == -kInf) return -trunc_std_normal(-b, kInf, rng);
  if (b == kInf) {
    if (a <= 0.45) {
      for (;;) {
        const double x = rng.normal();
        if (x >= a) return x;
      }
    }
    return robert_tail(a, rng);
  }

  // two-sided
  const double mass = norm_mass(a, b);
  if (mass >= 0.10) {
    for (;;) {
      const double x = rng.normal();
      if (x >= a && x <= b) return x;
    }
  }
  if (a >= 0.0) {
    const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
    if (lambda * (b - a) >= 1.0) {
      // wide far-tail interval: tail proposal, reject beyond b
      for (;;) {
        const double x = robert_tail(a, rng);
        if (x <= b) return x;
      }
    }
    // narrow far-tail interval: uniform proposal, bound density at a
    for (;;) {
      const double x = rng.uniform(a, b);
      if (std::log(1.0 - rng.uniform()) <= 0.5 * (a * a - x * x)) return x;
    }
  }
  if (b <= 0.0) return -trunc_std_normal(-b, -a, rng);
  // narrow interval straddling zero: uniform proposal, density bounded by phi(0)
  for (;;) {
    const double x = rng.uniform(a, b);
    if (std::log(1.0 - rng.uniform()) <= -0.5 * x * x) return x;
  }
}

}  // namespace

double sample_truncnorm_1d(double mu, double sigma, double a, double b,
                           Rng& rng) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("sample_truncnorm_1d: sigma must be > 0");
  if (!(a < b)) throw std::invalid_argument("sample_truncnorm_1d: a >= b");
  const double lo = (a - mu) / sigma;
  const double hi = (b - mu) / sigma;
  double z = trunc_std_normal(lo, hi, rng);
  // round-off at extreme standardization can land on a bound; nudge inside
  z = std::clamp(z, lo, hi);
  return mu + sigma * z;
}

Moments1d truncnorm_moments_1d(double mu, double sigma, double a, double b) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("truncnorm_moments_1d: sigma must be > 0");
  if (!(a < b)) throw std::invalid_argument("truncnorm_moments_1d: a >= b");
  double alpha = (a - mu) / sigma;
  double beta = (b - mu) / sigma;

  // reflect right-tail intervals so the bulk of the mass sits at alpha <= 0
  double sign = 1.0;
  if (alpha > 0.0 && beta > 0.0) {
    std::swap(alpha, beta);
    alpha = -alpha;
    beta = -beta;
    sign = -1.0;
  }

  const double log_z = log_norm_mass(alpha, beta);
  if (log_z == -kInf)
    throw std::runtime_error("truncnorm_moments_1d: interval mass underflow");
  const double log_pa =
      alpha == -kInf ? -kInf : -0.5 * alpha * alpha - 0.9189385332046727;
  const double log_pb =
      beta == kInf ? -kInf : -0.5 * beta * beta - 0.9189385332046727;
  const double ra = log_pa == -kInf ? 0.0 : std::exp(log_pa - log_z);
  const double rb = log_pb == -kInf ? 0.0 : std::exp(log_pb - log_z);

  const double r1 = ra - rb;
  const double r2 = (alpha == -kInf ? 0.0 : alpha * ra) -
                    (beta == kInf ? 0.0 : beta * rb);
  Moments1d m;
  m.mean = mu + sign * sigma * r1;
  m.var = sigma * sigma * std::max(1.0 + r2 - r1 * r1, 0.0);
  return m;
}

RejectionResult sample_rejection(const TmvnProblem& problem, int n, Rng& rng,
                                 long max_tries) {
  problem.validate();
  const int d = problem.dim();
  Eigen::LLT<Eigen::MatrixXd> llt(problem.cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("sample_rejection: covariance not SPD");
  const Eigen::MatrixXd l = llt.matrixL();

  RejectionResult out;
  out.samples.resize(n, d);
  long tries = 0;
  int accepted = 0;
  Eigen::VectorXd u(d), x(d);
  while (accepted < n) {
    if (tries >= max_tries)
      throw std::runtime_error(
          "sample_rejection: max_tries exhausted (acceptance too low; "
          "use Gibbs)");
    ++tries;
    for (int i = 0; i < d; ++i) u[i] = rng.normal();
    x = problem.mean + l * u;
    bool inside = true;
    for (int i = 0; i < d; ++i)
      if (!(x[i] > problem.lower[i] && x[i] < problem.upper[i])) {
        inside = false;
        break;
      }
    if (inside) out.samples.row(accepted++) = x.transpose();
  }
  out.acceptance_rate = static_cast<double>(accepted) /
                        static_cast<double>(tries);
  return out;
}

double rejection_pilot(const TmvnProblem& problem, int tries, Rng& rng) {
  problem.validate();
  const int d = problem.dim();
  Eigen::LLT<Eigen::MatrixXd> llt(problem.cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("rejection_pilot: covariance not SPD");
  const Eigen::MatrixXd l = llt.matrixL();
  Eigen::VectorXd u(d), x(d);
  int inside = 0;
  for (int t = 0; t < tries; ++t) {
    for (int i = 0; i < d; ++i) u[i] = rng.normal();
    x = problem.mean + l * u;
    bool ok = true;
    for (int i = 0; i < d; ++i)
      if (!(x[i] > problem.lower[i] && x[i] < problem.upper[i])) {
        ok = false;
        break;
      }
    if (ok) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(tries);
}

Eigen::MatrixXd sample_gibbs(const TmvnProblem& problem, int n, Rng& rng,
                             int burn_in, int thin) {
  problem.validate();
  if (burn_in < 0 || thin < 0)
    throw std::invalid_argument("sample_gibbs: negative burn_in/thin");
  const int d = problem.dim();

  Eigen::LLT<Eigen::MatrixXd> llt(problem.cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("sample_gibbs: covariance not SPD");
  // row-major so each scan walks the precision matrix contiguously
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                      Eigen::RowMajor>
      prec = llt.solve(Eigen::MatrixXd::Identity(d, d));

  // full conditional: var_i = 1/P_ii, mean_i = mu_i - sum_{j!=i} P_ij dx_j / P_ii
  Eigen::VectorXd cond_sd(d);
  for (int i = 0; i < d; ++i) {
    const double v = 1.0 / prec(i, i);
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::runtime_error("sample_gibbs: conditional variance underflow");
    cond_sd[i] = std::sqrt(v);
  }

  // start from the marginal truncated means: strictly inside the box
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i)
    x[i] = truncnorm_moments_1d(problem.mean[i],
                                std::sqrt(problem.cov(i, i)),
                                problem.lower[i], problem.upper[i])
               .mean;

  Eigen::VectorXd dx = x - problem.mean;
  auto one_scan = [&]() {
    for (int i = 0; i < d; ++i) {
      const double s = prec.row(i).dot(dx) - prec(i, i) * dx[i];
      const double mu_i = problem.mean[i] - s * cond_sd[i] * cond_sd[i];
      const double xi = sample_truncnorm_1d(mu_i, cond_sd[i],
                                            problem.lower[i],
                                            problem.upper[i], rng);
      dx[i] = xi - problem.mean[i];
    }
  };
  for (int scan = 0; scan < burn_in; ++scan) one_scan();

  int stride = thin;
  if (thin == 0 && d > 1) {
    // thin == 0 requests adaptive thinning: probe the chain's slowest
    // per-coordinate lag-1 autocorrelation and keep roughly one
    // integrated-autocorrelation-time between records. Strongly coupled
    // coordinates (near-duplicate sites) otherwise leave the records so
    // correlated that downstream probability estimates become unusable.
    constexpr int kProbe = 400;
    Eigen::MatrixXd probe(d, kProbe);
    for (int t = 0; t < kProbe; ++t) {
      one_scan();
      probe.col(t) = dx;
    }
    double rho_max = 0.0;
    for (int i = 0; i < d; ++i) {
      const auto row = probe.row(i);
      const double m = row.mean();
      double c0 = 0.0, c1 = 0.0;
      for (int t = 0; t < kProbe; ++t) {
        const double a = row[t] - m;
        c0 += a * a;
        if (t + 1 < kProbe) c1 += a * (row[t + 1] - m);
      }
      if (c0 > 0.0) rho_max = std::max(rho_max, c1 / c0);
    }
    rho_max = std::min(rho_max, 0.995);
    stride = std::clamp(
        static_cast<int>(std::ceil((1.0 + rho_max) / (1.0 - rho_max))), 10,
        400);
  }
  stride = std::max(1, stride);

  Eigen::MatrixXd out(n, d);
  for (int kept = 0; kept < n; ++kept) {
    for (int s = 0; s < stride; ++s) one_scan();
    out.row(kept) = (problem.mean + dx).transpose();
  }
  return out;
}

LogProb log_prob_box(const TmvnProblem& problem, int n, Rng& rng) {
  problem.validate();
  const int d = problem.dim();
  if (d == 0) return {0.0, 0.0};

  bool all_unbounded = true;
  for (int i = 0; i < d; ++i)
    if (problem.lower[i] != -kInf || problem.upper[i] != kInf) {
      all_unbounded = false;
      break;
    }
  if (all_unbounded) return {0.0, 0.0};

  // order dimensions by ascending prior marginal mass (variance reduction)
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd marginal(d);
  for (int i = 0; i < d; ++i) {
    const double s = std::sqrt(problem.cov(i, i));
    marginal[i] = norm_mass((problem.lower[i] - problem.mean[i]) / s,
                            (problem.upper[i] - problem.mean[i]) / s);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return marginal[a] < marginal[b]; });

  Eigen::MatrixXd cov_p(d, d);
  Eigen::VectorXd lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    lo[i] = problem.lower[order[i]] - problem.mean[order[i]];
    hi[i] = problem.upper[order[i]] - problem.mean[order[i]];
    for (int j = 0; j < d; ++j) cov_p(i, j) = problem.cov(order[i], order[j]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov_p);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("log_prob_box: covariance not SPD");
  const Eigen::MatrixXd l = llt.matrixL();

  Eigen::VectorXd eta(d);
  Eigen::VectorXd logw(n);
  for (int t = 0; t < n; ++t) {
    double lw = 0.0;
    for (int j = 0; j < d; ++j) {
      double m = 0.0;
      for (int k = 0; k < j; ++k) m += l(j, k) * eta[k];
      const double a = (lo[j] - m) / l(j, j);
      const double b = (hi[j] - m) / l(j, j);
      lw += log_norm_mass(a, b);
      if (lw == -kInf) break;
      eta[j] = trunc_std_normal(std::clamp(a, -38.0, 38.0),
                                std::clamp(b, -38.0, 38.0), rng);
    }
    logw[t] = lw;
  }

  const double lmax = logw.maxCoeff();
  if (lmax == -kInf)
    throw std::runtime_error("log_prob_box: all importance weights underflow");
  const Eigen::ArrayXd w = (logw.array() - lmax).exp();
  const double wmean = w.mean();
  const double wsd = n > 1 ? std::sqrt((w - wmean).square().sum() / (n - 1))
                           : 0.0;
  LogProb out;
  out.log_p = lmax + std::log(wmean);
  out.std_err = wsd / (wmean * std::sqrt(static_cast<double>(n)));
  return out;
}

MomentsNd sample_moments(const Eigen::MatrixXd& samples) {
  const Eigen::Index n = samples.rows();
  if (n < 2)
    throw std::invalid_argument("sample_moments: need at least two draws");
  MomentsNd m;
  m.mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - m.mean.transpose();
  m.cov = centered.transpose() * centered / static_cast<double>(n - 1);
  return m;
}

}  // namespace gpcon
