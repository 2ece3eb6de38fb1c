#pragma once

#include <Eigen/Core>
#include <functional>

namespace gpcon {

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Derivative-free simplex minimizer (standard reflection/expansion/
/// contraction coefficients). Objective failures may be signaled by
/// returning +inf.
NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, double initial_step, int max_iter,
    double ftol = 1e-9);

}  // namespace gpcon
