#include "gpcon/cgp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpcon/mathfn.hpp"

namespace gpcon {

ConstrainedGP ConstrainedGP::assemble(TrainingSet train, HyperParams hyper,
                                      OperatorSet opset, double sigma_v2,
                                      const AssembleOptions& opts) {
  ConstrainedGP g;
  g.train_ = std::move(train);
  g.hyper_ = std::move(hyper);
  g.opset_ = std::move(opset);
  g.sigma_v2_ = std::max(sigma_v2, opts.sigma_v_floor);
  g.factor_ = gpcon::factor(g.train_, g.hyper_, opts.nugget_floor);
  const Eigen::VectorXd resid = g.train_.y.array() - g.hyper_.mean_const;
  g.alpha_ = g.factor_.L.triangularView<Eigen::Lower>().solve(resid);
  g.build_operator_blocks();
  return g;
}

ConstrainedGP ConstrainedGP::with_opset(OperatorSet opset) const {
  ConstrainedGP g = *this;
  g.opset_ = std::move(opset);
  g.c_samples_.reset();
  g.build_operator_blocks();
  return g;
}

void ConstrainedGP::build_operator_blocks() {
  const int nv = opset_.total_sites();
  op_mean_ = apply_mean(opset_, MeanFunction::constant(hyper_.mean_const));
  if (nv == 0) {
    v1_.resize(train_.size(), 0);
    a1_.resize(0, train_.size());
    b1_.resize(0, 0);
    l1_.resize(0, 0);
    a1_resid_.resize(0);
    return;
  }
  const auto lower = factor_.L.triangularView<Eigen::Lower>();
  v1_ = lower.solve(cross_cov(opset_, hyper_.kernel, train_.X));
  a1_ = factor_.L.transpose()
            .triangularView<Eigen::Upper>()
            .solve(v1_)
            .transpose();
  b1_ = operator_cov(opset_, hyper_.kernel, sigma_v2_) -
        v1_.transpose() * v1_;
  b1_ = 0.5 * (b1_ + b1_.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(b1_);
  if (llt.info() != Eigen::Success) {
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b1_)
            .eigenvalues()
            .minCoeff();
    throw IndefiniteMatrixError(
        "assemble: B1 not positive definite (min eigenvalue " +
            std::to_string(min_eig) +
            "); sites too close or sigma_v too small",
        -1);
  }
  l1_ = llt.matrixL();
  a1_resid_ = v1_.transpose() * alpha_;
}

TmvnProblem ConstrainedGP::constraint_prior_law() const {
  TmvnProblem p;
  p.mean = op_mean_ + a1_resid_;
  p.cov = b1_;
  auto [lo, hi] = opset_.bounds_at_sites();
  p.lower = std::move(lo);
  p.upper = std::move(hi);
  return p;
}

void ConstrainedGP::refresh_c_samples(int k, std::uint64_t seed) {
  const int nv = n_virtual();
  if (nv == 0) {
    c_samples_ = Eigen::MatrixXd(k, 0);
    return;
  }
  const TmvnProblem law = constraint_prior_law();
  Rng pilot_rng(mix_seed(seed, 1));
  const double acc = rejection_pilot(law, 100, pilot_rng);
  if (acc >= 0.1) {
    Rng rng(mix_seed(seed, 2));
    const long budget = static_cast<long>(40.0 * k / std::max(acc, 0.01)) + 1000;
    c_samples_ = sample_rejection(law, k, rng, budget).samples;
  } else {
    Rng rng(mix_seed(seed, 3));
    // adaptive thinning: near-duplicate sites correlate the chain so
    // strongly that a fixed short stride leaves the draws unusable
    c_samples_ = sample_gibbs(law, k, rng, /*burn_in=*/1000, /*thin=*/0);
  }
}

const Eigen::MatrixXd& ConstrainedGP::c_samples() const {
  if (!c_samples_)
    throw std::runtime_error("c_samples: cache empty; call refresh_c_samples");
  return *c_samples_;
}

PredictiveFactors ConstrainedGP::predictive_factors(
    const Eigen::MatrixXd& Xstar) const {
  if (Xstar.cols() != train_.X.cols())
    throw std::invalid_argument("predictive_factors: dimension mismatch");
  PredictiveFactors f;
  const auto lower = factor_.L.triangularView<Eigen::Lower>();
  const auto upper = factor_.L.transpose().triangularView<Eigen::Upper>();
  f.v2 = lower.solve(gram(hyper_.kernel, train_.X, Xstar));
  f.A2 = upper.solve(f.v2).transpose();
  f.B2 = gram(hyper_.kernel, Xstar, Xstar) - f.v2.transpose() * f.v2;
  if (n_virtual() == 0) {
    f.B3.resize(Xstar.rows(), 0);
    f.v3.resize(0, Xstar.rows());
    f.A.resize(Xstar.rows(), 0);
    f.B = f.A2;
    f.Sigma = f.B2;
    return f;
  }
  f.B3 = cross_cov(opset_, hyper_.kernel, Xstar) - f.v2.transpose() * v1_;
  f.v3 = l1_.triangularView<Eigen::Lower>().solve(f.B3.transpose());
  f.A = l1_.transpose()
            .triangularView<Eigen::Upper>()
            .solve(f.v3)
            .transpose();
  f.B = f.A2 - f.A * a1_;
  f.Sigma = f.B2 - f.v3.transpose() * f.v3;
  return f;
}

PredictiveLaw ConstrainedGP::predictive_law(
    const Eigen::MatrixXd& Xstar) const {
  PredictiveFactors f = predictive_factors(Xstar);
  PredictiveLaw law;
  law.base_mean =
      (f.v2.transpose() * alpha_).array() + hyper_.mean_const;
  if (n_virtual() > 0) law.base_mean -= f.A * a1_resid_;
  law.coef = std::move(f.A);
  law.Sigma = std::move(f.Sigma);
  law.Sigma = 0.5 * (law.Sigma + law.Sigma.transpose()).eval();
  return law;
}

ConstraintFactors ConstrainedGP::constraint_factors(
    const Eigen::MatrixXd& Xstar) const {
  if (opset_.empty())
    throw std::invalid_argument("constraint_factors: empty operator set");
  ConstraintFactors f;
  const auto lower = factor_.L.triangularView<Eigen::Lower>();
  const auto upper = factor_.L.transpose().triangularView<Eigen::Upper>();
  const PointOperatorBlocks blocks =
      point_operator_blocks(opset_, hyper_.kernel, Xstar, train_.X);
  f.v2 = lower.solve(blocks.cross_data.transpose());
  f.A2 = upper.solve(f.v2).transpose();
  f.B2 = blocks.cov - f.v2.transpose() * f.v2;
  if (n_virtual() == 0) {
    const Eigen::Index rows = blocks.cov.rows();
    f.B3.resize(rows, 0);
    f.v3.resize(0, rows);
    f.A.resize(rows, 0);
    f.B = f.A2;
    f.Sigma = f.B2;
    return f;
  }
  f.B3 = blocks.cross_virtual - f.v2.transpose() * v1_;
  f.v3 = l1_.triangularView<Eigen::Lower>().solve(f.B3.transpose());
  f.A = l1_.transpose()
            .triangularView<Eigen::Upper>()
            .solve(f.v3)
            .transpose();
  f.B = f.A2 - f.A * a1_;
  f.Sigma = f.B2 - f.v3.transpose() * f.v3;
  return f;
}

ConstraintLaw ConstrainedGP::constraint_posterior(
    const Eigen::MatrixXd& Xstar) const {
  ConstraintFactors f = constraint_factors(Xstar);
  ConstraintLaw law;
  law.base_mean =
      apply_mean_at(opset_, MeanFunction::constant(hyper_.mean_const), Xstar) +
      f.v2.transpose() * alpha_;
  if (n_virtual() > 0) law.base_mean -= f.A * a1_resid_;
  law.coef = std::move(f.A);
  law.Sigma = std::move(f.Sigma);
  law.Sigma = 0.5 * (law.Sigma + law.Sigma.transpose()).eval();
  return law;
}

ConstraintScanLaw ConstrainedGP::constraint_scan_law(
    const Eigen::MatrixXd& Xstar) const {
  if (opset_.empty())
    throw std::invalid_argument("constraint_scan_law: empty operator set");
  ConstraintScanLaw law;
  law.entries = opset_.size();
  law.points = static_cast<int>(Xstar.rows());

  // Only the diagonal of the predictive covariance is formed:
  // diag(Sigma) = diag(Lop K** Lop^T) - colsum(v2^2) - colsum(v3^2).
  const auto lower = factor_.L.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd v2 = lower.solve(
      operator_cross_data(opset_, hyper_.kernel, Xstar, train_.X)
          .transpose());
  law.base_mean =
      apply_mean_at(opset_, MeanFunction::constant(hyper_.mean_const), Xstar) +
      v2.transpose() * alpha_;
  Eigen::VectorXd cov_diag =
      operator_cov_diag(opset_, hyper_.kernel, Xstar) -
      v2.colwise().squaredNorm().transpose();
  if (n_virtual() > 0) {
    const Eigen::MatrixXd b3 =
        operator_cross_virtual(opset_, hyper_.kernel, Xstar) -
        v2.transpose() * v1_;
    const Eigen::MatrixXd v3 =
        l1_.triangularView<Eigen::Lower>().solve(b3.transpose());
    law.coef = l1_.transpose()
                   .triangularView<Eigen::Upper>()
                   .solve(v3)
                   .transpose();
    law.base_mean -= law.coef * a1_resid_;
    cov_diag -= v3.colwise().squaredNorm().transpose();
  } else {
    law.coef.resize(law.base_mean.size(), 0);
  }
  law.sd = cov_diag.cwiseMax(0.0).cwiseSqrt();
  return law;
}

LogProb ConstrainedGP::prob_constraint_given_data(int n, Rng& rng) const {
  if (n_virtual() == 0) return {0.0, 0.0};
  return log_prob_box(constraint_prior_law(), n, rng);
}

Eigen::MatrixXd ConstrainedGP::sample_posterior(const Eigen::MatrixXd& Xstar,
                                                int k, Rng& rng) {
  if (n_virtual() > 0 &&
      (!c_samples_ || c_samples_->rows() < k))
    refresh_c_samples(k, rng.raw());

  const PredictiveLaw law = predictive_law(Xstar);
  const Eigen::Index m = Xstar.rows();

  // factor Sigma = Q Q^T
  Eigen::MatrixXd q;
  {
    bool done = false;
    for (double jitter : {0.0, 1e-12, 1e-10, 1e-8, 1e-6}) {
      Eigen::MatrixXd s = law.Sigma;
      s.diagonal().array() += jitter;
      Eigen::LLT<Eigen::MatrixXd> llt(s);
      if (llt.info() == Eigen::Success) {
        q = llt.matrixL();
        done = true;
        break;
      }
    }
    if (!done) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(law.Sigma);
      if (es.info() != Eigen::Success)
        throw std::runtime_error("sample_posterior: Sigma factorization failed");
      q = es.eigenvectors() *
          es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
  }

  Eigen::MatrixXd u(m, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < m; ++i) u(i, j) = rng.normal();

  Eigen::MatrixXd out = q * u;
  if (n_virtual() > 0) {
    const Eigen::MatrixXd deviations =
        c_samples_->topRows(k).transpose().colwise() - op_mean_;
    out.noalias() += law.coef * deviations;
  }
  out.colwise() += law.base_mean;
  return out;
}

Eigen::VectorXd ConstrainedGP::constraint_prob_pointwise(
    const Eigen::VectorXd& x, double margin) const {
  const Eigen::MatrixXd xq = x.transpose();
  const ConstraintScanLaw law = constraint_scan_law(xq);
  auto [lo, hi] = opset_.bounds_at(xq);
  const int k = opset_.size();
  Eigen::VectorXd p(k);
  if (n_virtual() == 0) {
    for (int i = 0; i < k; ++i) {
      const double sd = std::max(law.sd[i], 1e-300);
      p[i] = norm_mass((lo[i] - margin - law.base_mean[i]) / sd,
                       (hi[i] + margin - law.base_mean[i]) / sd);
    }
    return p;
  }
  const Eigen::MatrixXd& cs = c_samples();
  const Eigen::MatrixXd deviations = cs.transpose().colwise() - op_mean_;
  const Eigen::MatrixXd shift = law.coef * deviations;  // k x n
  const Eigen::Index n = cs.rows();
  for (int i = 0; i < k; ++i) {
    const double sd = std::max(law.sd[i], 1e-300);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double mu = law.base_mean[i] + shift(i, j);
      acc += norm_mass((lo[i] - margin - mu) / sd,
                       (hi[i] + margin - mu) / sd);
    }
    p[i] = acc / static_cast<double>(n);
  }
  return p;
}

MomentsNd ConstrainedGP::c_moments(MomentSource source) const {
  const int nv = n_virtual();
  if (nv == 0) return {Eigen::VectorXd(0), Eigen::MatrixXd(0, 0)};
  if (source == MomentSource::Samples) return sample_moments(c_samples());

  // correlation-free closed forms on the marginals of the untruncated law
  const TmvnProblem law = constraint_prior_law();
  MomentsNd m;
  m.mean.resize(nv);
  m.cov = Eigen::MatrixXd::Zero(nv, nv);
  for (int i = 0; i < nv; ++i) {
    const auto mm = truncnorm_moments_1d(law.mean[i],
                                         std::sqrt(law.cov(i, i)),
                                         law.lower[i], law.upper[i]);
    m.mean[i] = mm.mean;
    m.cov(i, i) = mm.var;
  }
  return m;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> ConstrainedGP::posterior_moments(
    const Eigen::MatrixXd& Xstar, MomentSource source) const {
  const PredictiveLaw law = predictive_law(Xstar);
  if (n_virtual() == 0) return {law.base_mean, law.Sigma};
  const MomentsNd cm = c_moments(source);
  Eigen::VectorXd mean = law.base_mean + law.coef * (cm.mean - op_mean_);
  Eigen::MatrixXd cov =
      law.Sigma + law.coef * cm.cov * law.coef.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {std::move(mean), std::move(cov)};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> ConstrainedGP::constraint_moments(
    const Eigen::VectorXd& xstar, MomentSource source) const {
  const ConstraintLaw law = constraint_posterior(xstar.transpose());
  Eigen::VectorXd mean = law.base_mean;
  Eigen::VectorXd var = law.Sigma.diagonal();
  if (n_virtual() > 0) {
    const MomentsNd cm = c_moments(source);
    mean += law.coef * (cm.mean - op_mean_);
    var += (law.coef * cm.cov).cwiseProduct(law.coef).rowwise().sum();
  }
  return {std::move(mean), var.cwiseMax(0.0)};
}

double posterior_mode_1d(const Eigen::VectorXd& samples) {
  const Eigen::Index n = samples.size();
  if (n < 100)
    throw std::invalid_argument("posterior_mode_1d: need >= 100 samples");
  const double mean = samples.mean();
  const double sd =
      std::sqrt((samples.array() - mean).square().sum() / (n - 1));

  std::vector<double> sorted(samples.data(), samples.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double q25 = sorted[static_cast<size_t>(0.25 * (n - 1))];
  const double q75 = sorted[static_cast<size_t>(0.75 * (n - 1))];
  const double spread = std::min(sd, (q75 - q25) / 1.34);
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  if (!(h > 0.0)) return sorted[n / 2];  // point mass

  // histogram the samples, then convolve the bin counts with the kernel
  constexpr int kBins = 512;
  const double lo = sorted.front(), hi = sorted.back();
  const double width = std::max(hi - lo, 1e-300);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(kBins);
  for (double s : sorted) {
    int b = static_cast<int>((s - lo) / width * (kBins - 1));
    counts[std::clamp(b, 0, kBins - 1)] += 1.0;
  }
  const double step = width / (kBins - 1);
  const int reach = std::min(kBins, static_cast<int>(5.0 * h / step) + 1);
  double best = 0.0;
  int best_bin = 0;
  for (int b = 0; b < kBins; ++b) {
    double dens = 0.0;
    for (int o = std::max(0, b - reach);
         o < std::min(kBins, b + reach + 1); ++o) {
      const double z = (b - o) * step / h;
      dens += counts[o] * std::exp(-0.5 * z * z);
    }
    if (dens > best) {
      best = dens;
      best_bin = b;
    }
  }
  return lo + best_bin * step;
}

double constrained_log_likelihood(const ConstrainedGP& cgp, int n, Rng& rng) {
  const double lml =
      log_marginal_likelihood(cgp.train(), cgp.hyper());
  return lml + cgp.prob_constraint_given_data(n, rng).log_p;
}

}  // namespace gpcon
