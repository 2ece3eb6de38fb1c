#pragma once

#include <Eigen/Core>
#include <functional>
#include <utility>
#include <vector>

#include "gpcon/kernel.hpp"

// A stacked linear operator on a GP: an ordered list of sub-operators
// (identity or a single partial derivative), each with its own interval
// bounds and its own matrix of virtual observation locations. The entry
// order fixes the row ordering of every assembled block.

namespace gpcon {

/// Interval bounds [lower(x), upper(x)] on one transformed process;
/// either side may be infinite.
struct BoundPair {
  std::function<double(const Eigen::VectorXd&)> lower;
  std::function<double(const Eigen::VectorXd&)> upper;

  static BoundPair constants(double lo, double hi);
  static BoundPair unbounded();
};

/// Constant mean functions are the common case; a derivative callback is
/// only required when derivative sub-operators are applied to a
/// non-constant mean.
struct MeanFunction {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<double(const Eigen::VectorXd&, int axis)> partial;  // optional

  static MeanFunction constant(double c);
};

struct OperatorEntry {
  SubOperator op = SubOperator::identity();
  BoundPair bounds = BoundPair::unbounded();
  Eigen::MatrixXd sites;  // S_i x n_x virtual locations, may have zero rows
};

class OperatorSet {
 public:
  OperatorSet() = default;
  OperatorSet(std::vector<OperatorEntry> entries, int input_dim);

  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }
  const OperatorEntry& entry(int i) const { return entries_.at(i); }
  int input_dim() const { return input_dim_; }

  /// Total number of virtual observations N_v = sum_i S_i.
  int total_sites() const;

  OperatorSet with_site(int entry_index, const Eigen::VectorXd& x) const;
  /// Appends the same location to every entry.
  OperatorSet with_site_all(const Eigen::VectorXd& x) const;

  /// True if entry_index already holds a site within Euclidean tol of x.
  bool has_near_duplicate(int entry_index, const Eigen::VectorXd& x,
                          double tol) const;

  /// Stacked site matrix in entry order (N_v x n_x).
  Eigen::MatrixXd concatenated_sites() const;

  /// Bounds materialized at the virtual sites, entry order (length N_v).
  std::pair<Eigen::VectorXd, Eigen::VectorXd> bounds_at_sites() const;

  /// Bounds of every entry evaluated at every row of X, entry-major
  /// (length size() * X.rows()).
  std::pair<Eigen::VectorXd, Eigen::VectorXd> bounds_at(
      const Eigen::MatrixXd& X) const;

 private:
  std::vector<OperatorEntry> entries_;
  int input_dim_ = 0;
};

/// L mu at the virtual sites, entry order (length N_v).
Eigen::VectorXd apply_mean(const OperatorSet& ops, const MeanFunction& mean);

/// L mu at every row of X for every entry, entry-major (size() * X.rows()).
Eigen::VectorXd apply_mean_at(const OperatorSet& ops, const MeanFunction& mean,
                              const Eigen::MatrixXd& X);

/// K_{X, X^v} L^T: N x N_v, one horizontal block per entry.
Eigen::MatrixXd cross_cov(const OperatorSet& ops, const KernelConfig& kernel,
                          const Eigen::MatrixXd& X);

/// L K_{X^v, X^v} L^T + sigma_v^2 I: N_v x N_v, symmetric.
Eigen::MatrixXd operator_cov(const OperatorSet& ops,
                             const KernelConfig& kernel, double sigma_v2);

/// The blocks needed to treat L f(X*) as an observation vector: rows are
/// entry-major over the prediction points.
struct PointOperatorBlocks {
  Eigen::MatrixXd cross_data;     // L K_{X*, X}          : (k M) x N
  Eigen::MatrixXd cov;            // L K_{X*, X*} L^T     : (k M) x (k M)
  Eigen::MatrixXd cross_virtual;  // L K_{X*, X^v} L^T    : (k M) x N_v
};

PointOperatorBlocks point_operator_blocks(const OperatorSet& ops,
                                          const KernelConfig& kernel,
                                          const Eigen::MatrixXd& Xstar,
                                          const Eigen::MatrixXd& X);

/// L K_{X*, X} alone: (k M) x N.
Eigen::MatrixXd operator_cross_data(const OperatorSet& ops,
                                    const KernelConfig& kernel,
                                    const Eigen::MatrixXd& Xstar,
                                    const Eigen::MatrixXd& X);

/// L K_{X*, X^v} L^T alone: (k M) x N_v.
Eigen::MatrixXd operator_cross_virtual(const OperatorSet& ops,
                                       const KernelConfig& kernel,
                                       const Eigen::MatrixXd& Xstar);

/// diag(L K_{X*, X*} L^T) without forming the full matrix.
Eigen::VectorXd operator_cov_diag(const OperatorSet& ops,
                                  const KernelConfig& kernel,
                                  const Eigen::MatrixXd& Xstar);

}  // namespace gpcon
