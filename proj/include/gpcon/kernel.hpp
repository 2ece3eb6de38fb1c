#pragma once

#include <Eigen/Core>

// Stationary covariance functions (RBF, Matern 5/2) with analytic first and
// mixed second derivatives in the input coordinates, and Gram-matrix
// assembly for blocks of the form K, dK/dx_i and d^2K/dx_i dx'_j.

namespace gpcon {

enum class KernelFamily { RBF, Matern52 };

struct KernelConfig {
  KernelFamily family = KernelFamily::Matern52;
  double variance = 1.0;           // signal variance sigma_K^2
  Eigen::VectorXd lengthscales;    // one per input axis, all > 0

  int dim() const { return static_cast<int>(lengthscales.size()); }
  void validate() const;  // throws std::invalid_argument on bad parameters
};

/// Which transform a Gram block applies to a kernel argument: the identity
/// or the partial derivative along one input axis.
class SubOperator {
 public:
  static SubOperator identity() { return SubOperator(-1); }
  static SubOperator partial(int axis) { return SubOperator(axis); }

  bool is_identity() const { return axis_ < 0; }
  int axis() const { return axis_; }  // 0-based; -1 for the identity

  bool operator==(const SubOperator& o) const { return axis_ == o.axis_; }

 private:
  explicit SubOperator(int axis) : axis_(axis) {}
  int axis_ = -1;
};

/// K(x, x2).
double eval(const KernelConfig& cfg, Eigen::Ref<const Eigen::VectorXd> x,
            Eigen::Ref<const Eigen::VectorXd> x2);

/// dK(x, x2)/dx_i (derivative in the first argument).
double eval_d10(const KernelConfig& cfg, int axis,
                Eigen::Ref<const Eigen::VectorXd> x,
                Eigen::Ref<const Eigen::VectorXd> x2);

/// d^2 K(x, x2) / dx_i dx2_j.
double eval_d11(const KernelConfig& cfg, int axis_i, int axis_j,
                Eigen::Ref<const Eigen::VectorXd> x,
                Eigen::Ref<const Eigen::VectorXd> x2);

/// Gram matrix with per-argument derivative selectors. Rows follow X,
/// columns follow X2; deriv_left acts on the X argument, deriv_right on X2.
Eigen::MatrixXd gram(const KernelConfig& cfg, const Eigen::MatrixXd& X,
                     const Eigen::MatrixXd& X2,
                     SubOperator deriv_left = SubOperator::identity(),
                     SubOperator deriv_right = SubOperator::identity());

/// Reference single-threaded implementation of gram(); the parallel path
/// must agree with it bit for bit.
Eigen::MatrixXd gram_serial(const KernelConfig& cfg, const Eigen::MatrixXd& X,
                            const Eigen::MatrixXd& X2,
                            SubOperator deriv_left = SubOperator::identity(),
                            SubOperator deriv_right = SubOperator::identity());

}  // namespace gpcon
