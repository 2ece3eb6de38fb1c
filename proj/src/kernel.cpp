#include "gpcon/kernel.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gpcon {

namespace {

constexpr double kSqrt5 = 2.2360679774997896;

void check_axis(const KernelConfig& cfg, int axis) {
  if (axis < 0 || axis >= cfg.dim())
    throw std::invalid_argument("kernel: derivative axis " +
                                std::to_string(axis) + " out of range");
}

void check_dims(const KernelConfig& cfg, Eigen::Index nx, Eigen::Index nx2) {
  if (nx != cfg.dim() || nx2 != cfg.dim())
    throw std::invalid_argument("kernel: point dimension does not match "
                                "lengthscales");
}

// Scaled squared distance r^2 = sum ((x_i - y_i) / l_i)^2.
double scaled_r2(const KernelConfig& cfg, Eigen::Ref<const Eigen::VectorXd> x,
                 Eigen::Ref<const Eigen::VectorXd> y) {
  double r2 = 0.0;
  for (int i = 0; i < cfg.dim(); ++i) {
    const double d = (x[i] - y[i]) / cfg.lengthscales[i];
    r2 += d * d;
  }
  return r2;
}

}  // namespace

void KernelConfig::validate() const {
  if (!(variance > 0.0))
    throw std::invalid_argument("kernel: variance must be positive");
  if (lengthscales.size() == 0)
    throw std::invalid_argument("kernel: lengthscales are empty");
  for (Eigen::Index i = 0; i < lengthscales.size(); ++i)
    if (!(lengthscales[i] > 0.0))
      throw std::invalid_argument("kernel: lengthscale " + std::to_string(i) +
                                  " must be positive");
}

double eval(const KernelConfig& cfg, Eigen::Ref<const Eigen::VectorXd> x,
            Eigen::Ref<const Eigen::VectorXd> x2) {
  cfg.validate();
  check_dims(cfg, x.size(), x2.size());
  const double r2 = scaled_r2(cfg, x, x2);
  switch (cfg.family) {
    case KernelFamily::RBF:
      return cfg.variance * std::exp(-0.5 * r2);
    case KernelFamily::Matern52: {
      const double r = std::sqrt(r2);
      return cfg.variance * (1.0 + kSqrt5 * r + (5.0 / 3.0) * r2) *
             std::exp(-kSqrt5 * r);
    }
  }
  return 0.0;
}

double eval_d10(const KernelConfig& cfg, int axis,
                Eigen::Ref<const Eigen::VectorXd> x,
                Eigen::Ref<const Eigen::VectorXd> x2) {
  cfg.validate();
  check_axis(cfg, axis);
  check_dims(cfg, x.size(), x2.size());
  const double li2 = cfg.lengthscales[axis] * cfg.lengthscales[axis];
  const double di = x[axis] - x2[axis];
  const double r2 = scaled_r2(cfg, x, x2);
  switch (cfg.family) {
    case KernelFamily::RBF:
      return -cfg.variance * std::exp(-0.5 * r2) * di / li2;
    case KernelFamily::Matern52: {
      // dK/dx_i = sigma^2 * g1(r) * d_i / l_i^2 with
      // g1(r) = k'(r)/r = -(5/3)(1 + sqrt(5) r) exp(-sqrt(5) r),
      // finite at r = 0.
      const double r = std::sqrt(r2);
      const double g1 = -(5.0 / 3.0) * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
      return cfg.variance * g1 * di / li2;
    }
  }
  return 0.0;
}

double eval_d11(const KernelConfig& cfg, int axis_i, int axis_j,
                Eigen::Ref<const Eigen::VectorXd> x,
                Eigen::Ref<const Eigen::VectorXd> x2) {
  cfg.validate();
  check_axis(cfg, axis_i);
  check_axis(cfg, axis_j);
  check_dims(cfg, x.size(), x2.size());
  const double li2 = cfg.lengthscales[axis_i] * cfg.lengthscales[axis_i];
  const double lj2 = cfg.lengthscales[axis_j] * cfg.lengthscales[axis_j];
  const double di = x[axis_i] - x2[axis_i];
  const double dj = x[axis_j] - x2[axis_j];
  const double delta = axis_i == axis_j ? 1.0 : 0.0;
  const double r2 = scaled_r2(cfg, x, x2);
  switch (cfg.family) {
    case KernelFamily::RBF: {
      const double k = cfg.variance * std::exp(-0.5 * r2);
      return k * (delta / li2 - di * dj / (li2 * lj2));
    }
    case KernelFamily::Matern52: {
      // d^2K/dx_i dx'_j = sigma^2 e^{-sqrt(5) r} *
      //   [ (5/3)(1 + sqrt(5) r) delta_ij / l_i^2 - (25/3) d_i d_j/(l_i^2 l_j^2) ]
      // The r -> 0 limit is taken analytically (both factors are smooth).
      const double r = std::sqrt(r2);
      const double e = std::exp(-kSqrt5 * r);
      return cfg.variance * e *
             ((5.0 / 3.0) * (1.0 + kSqrt5 * r) * delta / li2 -
              (25.0 / 3.0) * di * dj / (li2 * lj2));
    }
  }
  return 0.0;
}

namespace {

double gram_element(const KernelConfig& cfg, SubOperator dl, SubOperator dr,
                    Eigen::Ref<const Eigen::VectorXd> x,
                    Eigen::Ref<const Eigen::VectorXd> y) {
  if (dl.is_identity() && dr.is_identity()) return eval(cfg, x, y);
  if (!dl.is_identity() && dr.is_identity())
    return eval_d10(cfg, dl.axis(), x, y);
  if (dl.is_identity() && !dr.is_identity())
    // derivative in the second argument via kernel symmetry K(x,y) = K(y,x)
    return eval_d10(cfg, dr.axis(), y, x);
  return eval_d11(cfg, dl.axis(), dr.axis(), x, y);
}

template <bool Parallel>
Eigen::MatrixXd gram_impl(const KernelConfig& cfg, const Eigen::MatrixXd& X,
                          const Eigen::MatrixXd& X2, SubOperator dl,
                          SubOperator dr) {
  cfg.validate();
  if (X.cols() != cfg.dim() || X2.cols() != cfg.dim())
    throw std::invalid_argument("gram: input dimension mismatch");
  const Eigen::Index n = X.rows(), m = X2.rows();
  // Transposed copies give contiguous per-point columns for the inner loop.
  const Eigen::MatrixXd Xt = X.transpose();
  const Eigen::MatrixXd X2t = X2.transpose();
  Eigen::MatrixXd out(n, m);
#pragma omp parallel for schedule(static) if (Parallel && n * m >= 4096)
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < m; ++b)
      out(a, b) = gram_element(cfg, dl, dr, Xt.col(a), X2t.col(b));
  return out;
}

}  // namespace

Eigen::MatrixXd gram(const KernelConfig& cfg, const Eigen::MatrixXd& X,
                     const Eigen::MatrixXd& X2, SubOperator deriv_left,
                     SubOperator deriv_right) {
  return gram_impl<true>(cfg, X, X2, deriv_left, deriv_right);
}

Eigen::MatrixXd gram_serial(const KernelConfig& cfg, const Eigen::MatrixXd& X,
                            const Eigen::MatrixXd& X2, SubOperator deriv_left,
                            SubOperator deriv_right) {
  return gram_impl<false>(cfg, X, X2, deriv_left, deriv_right);
}

}  // namespace gpcon
