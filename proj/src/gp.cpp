#include "gpcon/gp.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpcon/optim.hpp"
#include "gpcon/rng.hpp"

namespace gpcon {

namespace {
constexpr double kLog2Pi = 1.8378770664093455;

// Unblocked Cholesky used only to locate the failing pivot for diagnostics.
int first_bad_pivot(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0)) return static_cast<int>(j);
    a(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / a(j, j);
    }
  }
  return -1;
}
}  // namespace

void TrainingSet::validate() const {
  if (y.size() < 1) throw std::invalid_argument("TrainingSet: empty");
  if (X.rows() != y.size())
    throw std::invalid_argument("TrainingSet: X rows != y length");
  if (!X.allFinite() || !y.allFinite())
    throw std::invalid_argument("TrainingSet: non-finite entries");
  if (noise_var < 0.0)
    throw std::invalid_argument("TrainingSet: negative noise variance");
}

DataFactor factor(const TrainingSet& train, const HyperParams& hyper,
                  double nugget_floor) {
  train.validate();
  hyper.kernel.validate();
  const double noise = std::max(hyper.noise_var, nugget_floor);
  Eigen::MatrixXd k = gram(hyper.kernel, train.X, train.X);
  k.diagonal().array() += noise;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    const int pivot = first_bad_pivot(k);
    throw IndefiniteMatrixError(
        "factor: K + sigma^2 I indefinite at pivot " + std::to_string(pivot),
        pivot);
  }
  return DataFactor{llt.matrixL()};
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> predict(
    const TrainingSet& train, const HyperParams& hyper,
    const DataFactor& factor, const Eigen::MatrixXd& Xstar) {
  if (Xstar.cols() != train.X.cols())
    throw std::invalid_argument("predict: Xstar dimension mismatch");
  const auto lower = factor.L.triangularView<Eigen::Lower>();
  const Eigen::VectorXd resid =
      train.y.array() - hyper.mean_const;
  const Eigen::VectorXd alpha = lower.solve(resid);
  const Eigen::MatrixXd v2 = lower.solve(gram(hyper.kernel, train.X, Xstar));
  Eigen::VectorXd mean =
      (v2.transpose() * alpha).array() + hyper.mean_const;
  Eigen::MatrixXd cov =
      gram(hyper.kernel, Xstar, Xstar) - v2.transpose() * v2;
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {std::move(mean), std::move(cov)};
}

double log_marginal_likelihood(const TrainingSet& train,
                               const HyperParams& hyper, double nugget_floor) {
  const DataFactor f = factor(train, hyper, nugget_floor);
  const auto lower = f.L.triangularView<Eigen::Lower>();
  const Eigen::VectorXd resid = train.y.array() - hyper.mean_const;
  const Eigen::VectorXd alpha = lower.solve(resid);
  const double n = static_cast<double>(train.size());
  return -0.5 * alpha.squaredNorm() -
         f.L.diagonal().array().log().sum() - 0.5 * n * kLog2Pi;
}

namespace {

struct MleSpace {
  // theta = [log variance, log l_1 .. log l_d, (log noise)]
  Eigen::VectorXd lo, hi;
  bool with_noise;
  int dim() const { return static_cast<int>(lo.size()); }
};

HyperParams unpack(const Eigen::VectorXd& theta, const HyperParams& base,
                   const MleSpace& space) {
  HyperParams h = base;
  const int d = h.kernel.dim();
  h.kernel.variance = std::exp(theta[0]);
  for (int i = 0; i < d; ++i) h.kernel.lengthscales[i] = std::exp(theta[1 + i]);
  if (space.with_noise) h.noise_var = std::exp(theta[1 + d]);
  return h;
}

}  // namespace

HyperParams mle_fit(const TrainingSet& train, const HyperParams& init,
                    const MleOptions& opts) {
  train.validate();
  init.kernel.validate();
  if (opts.restarts < 1)
    throw std::invalid_argument("mle_fit: restarts must be >= 1");
  const int d = init.kernel.dim();

  const double yvar =
      std::max((train.y.array() - train.y.mean()).square().mean(), 1e-12);
  MleSpace space;
  space.with_noise = opts.estimate_noise;
  const int p = 1 + d + (space.with_noise ? 1 : 0);
  space.lo.resize(p);
  space.hi.resize(p);
  space.lo[0] = std::log(opts.var_lo_rel * yvar);
  space.hi[0] = std::log(opts.var_hi_rel * yvar);
  for (int i = 0; i < d; ++i) {
    const double range = std::max(
        train.X.col(i).maxCoeff() - train.X.col(i).minCoeff(), 1e-8);
    space.lo[1 + i] = std::log(opts.len_lo_rel * range);
    space.hi[1 + i] = std::log(opts.len_hi_rel * range);
  }
  if (space.with_noise) {
    space.lo[1 + d] = std::log(opts.noise_lo_rel * yvar);
    space.hi[1 + d] = std::log(opts.noise_hi_rel * yvar);
  }

  auto objective = [&](const Eigen::VectorXd& theta) -> double {
    for (int i = 0; i < space.dim(); ++i)
      if (theta[i] < space.lo[i] || theta[i] > space.hi[i])
        return std::numeric_limits<double>::infinity();
    try {
      return -log_marginal_likelihood(train, unpack(theta, init, space));
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  // start points: the supplied init plus a Latin hypercube over the box
  std::vector<Eigen::VectorXd> starts;
  Eigen::VectorXd t0(p);
  t0[0] = std::log(init.kernel.variance);
  for (int i = 0; i < d; ++i) t0[1 + i] = std::log(init.kernel.lengthscales[i]);
  if (space.with_noise)
    t0[1 + d] =
        std::log(std::max(init.noise_var, opts.noise_lo_rel * yvar));
  for (int i = 0; i < p; ++i)
    t0[i] = std::clamp(t0[i], space.lo[i], space.hi[i]);
  starts.push_back(t0);

  Rng rng(mix_seed(opts.seed, 0x4d4c45));
  const int extra = opts.restarts - 1;
  if (extra > 0) {
    std::vector<std::vector<int>> perms(p, std::vector<int>(extra));
    for (int j = 0; j < p; ++j) {
      for (int s = 0; s < extra; ++s) perms[j][s] = s;
      for (int s = extra - 1; s > 0; --s)
        std::swap(perms[j][s], perms[j][rng.uniform_int(s + 1)]);
    }
    for (int s = 0; s < extra; ++s) {
      Eigen::VectorXd t(p);
      for (int j = 0; j < p; ++j) {
        const double u = (perms[j][s] + rng.uniform()) / extra;
        t[j] = space.lo[j] + u * (space.hi[j] - space.lo[j]);
      }
      starts.push_back(t);
    }
  }

  Eigen::VectorXd best;
  double best_val = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    const auto r = nelder_mead(objective, s, 0.5, opts.max_iter);
    if (r.value < best_val) {
      best_val = r.value;
      best = r.x;
    }
  }
  if (!std::isfinite(best_val))
    throw std::runtime_error(
        "mle_fit: no start produced a finite likelihood");
  return unpack(best, init, space);
}

}  // namespace gpcon
