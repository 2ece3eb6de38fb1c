#include "gpcon/linop.hpp"

#include <stdexcept>
#include <string>

#include "gpcon/mathfn.hpp"

namespace gpcon {

BoundPair BoundPair::constants(double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("BoundPair: lower >= upper");
  return {[lo](const Eigen::VectorXd&) { return lo; },
          [hi](const Eigen::VectorXd&) { return hi; }};
}

BoundPair BoundPair::unbounded() { return constants(-kInf, kInf); }

MeanFunction MeanFunction::constant(double c) {
  return {[c](const Eigen::VectorXd&) { return c; },
          [](const Eigen::VectorXd&, int) { return 0.0; }};
}

OperatorSet::OperatorSet(std::vector<OperatorEntry> entries, int input_dim)
    : entries_(std::move(entries)), input_dim_(input_dim) {
  for (const auto& e : entries_) {
    if (!e.op.is_identity() &&
        (e.op.axis() < 0 || e.op.axis() >= input_dim_))
      throw std::invalid_argument("OperatorSet: derivative axis out of range");
    if (e.sites.rows() > 0 && e.sites.cols() != input_dim_)
      throw std::invalid_argument("OperatorSet: site dimension mismatch");
    if (!e.bounds.lower || !e.bounds.upper)
      throw std::invalid_argument("OperatorSet: bounds not callable");
  }
}

int OperatorSet::total_sites() const {
  int n = 0;
  for (const auto& e : entries_) n += static_cast<int>(e.sites.rows());
  return n;
}

OperatorSet OperatorSet::with_site(int entry_index,
                                   const Eigen::VectorXd& x) const {
  auto entries = entries_;
  auto& sites = entries.at(entry_index).sites;
  Eigen::MatrixXd grown(sites.rows() + 1, input_dim_);
  if (sites.rows() > 0) grown.topRows(sites.rows()) = sites;
  grown.row(grown.rows() - 1) = x.transpose();
  sites = std::move(grown);
  return OperatorSet(std::move(entries), input_dim_);
}

OperatorSet OperatorSet::with_site_all(const Eigen::VectorXd& x) const {
  OperatorSet out = *this;
  for (int i = 0; i < size(); ++i) out = out.with_site(i, x);
  return out;
}

bool OperatorSet::has_near_duplicate(int entry_index, const Eigen::VectorXd& x,
                                     double tol) const {
  const auto& sites = entries_.at(entry_index).sites;
  for (Eigen::Index r = 0; r < sites.rows(); ++r)
    if ((sites.row(r).transpose() - x).norm() <= tol) return true;
  return false;
}

Eigen::MatrixXd OperatorSet::concatenated_sites() const {
  Eigen::MatrixXd all(total_sites(), input_dim_);
  Eigen::Index row = 0;
  for (const auto& e : entries_) {
    if (e.sites.rows() > 0) all.middleRows(row, e.sites.rows()) = e.sites;
    row += e.sites.rows();
  }
  return all;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> OperatorSet::bounds_at_sites()
    const {
  Eigen::VectorXd lo(total_sites()), hi(total_sites());
  Eigen::Index row = 0;
  for (const auto& e : entries_) {
    for (Eigen::Index r = 0; r < e.sites.rows(); ++r, ++row) {
      const Eigen::VectorXd x = e.sites.row(r).transpose();
      lo[row] = e.bounds.lower(x);
      hi[row] = e.bounds.upper(x);
      if (!(lo[row] < hi[row]))
        throw std::invalid_argument("OperatorSet: lower >= upper at a site");
    }
  }
  return {lo, hi};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> OperatorSet::bounds_at(
    const Eigen::MatrixXd& X) const {
  const Eigen::Index m = X.rows();
  Eigen::VectorXd lo(size() * m), hi(size() * m);
  for (int i = 0; i < size(); ++i) {
    const auto& e = entries_[i];
    for (Eigen::Index r = 0; r < m; ++r) {
      const Eigen::VectorXd x = X.row(r).transpose();
      lo[i * m + r] = e.bounds.lower(x);
      hi[i * m + r] = e.bounds.upper(x);
    }
  }
  return {lo, hi};
}

namespace {

double apply_mean_point(const OperatorEntry& e, const MeanFunction& mean,
                        const Eigen::VectorXd& x) {
  if (e.op.is_identity()) return mean.value(x);
  if (!mean.partial)
    throw std::invalid_argument(
        "apply_mean: derivative sub-operator needs a mean derivative; "
        "use MeanFunction::constant for constant means");
  return mean.partial(x, e.op.axis());
}

}  // namespace

Eigen::VectorXd apply_mean(const OperatorSet& ops, const MeanFunction& mean) {
  Eigen::VectorXd out(ops.total_sites());
  Eigen::Index row = 0;
  for (int i = 0; i < ops.size(); ++i) {
    const auto& e = ops.entry(i);
    for (Eigen::Index r = 0; r < e.sites.rows(); ++r, ++row)
      out[row] = apply_mean_point(e, mean, e.sites.row(r).transpose());
  }
  return out;
}

Eigen::VectorXd apply_mean_at(const OperatorSet& ops, const MeanFunction& mean,
                              const Eigen::MatrixXd& X) {
  const Eigen::Index m = X.rows();
  Eigen::VectorXd out(ops.size() * m);
  for (int i = 0; i < ops.size(); ++i)
    for (Eigen::Index r = 0; r < m; ++r)
      out[i * m + r] = apply_mean_point(ops.entry(i), mean,
                                        X.row(r).transpose());
  return out;
}

Eigen::MatrixXd cross_cov(const OperatorSet& ops, const KernelConfig& kernel,
                          const Eigen::MatrixXd& X) {
  Eigen::MatrixXd out(X.rows(), ops.total_sites());
  Eigen::Index col = 0;
  for (int i = 0; i < ops.size(); ++i) {
    const auto& e = ops.entry(i);
    if (e.sites.rows() == 0) continue;
    out.middleCols(col, e.sites.rows()) =
        gram(kernel, X, e.sites, SubOperator::identity(), e.op);
    col += e.sites.rows();
  }
  return out;
}

Eigen::MatrixXd operator_cov(const OperatorSet& ops,
                             const KernelConfig& kernel, double sigma_v2) {
  if (sigma_v2 < 0.0)
    throw std::invalid_argument("operator_cov: sigma_v2 must be >= 0");
  const int nv = ops.total_sites();
  Eigen::MatrixXd out(nv, nv);
  Eigen::Index row = 0;
  for (int i = 0; i < ops.size(); ++i) {
    const auto& ei = ops.entry(i);
    if (ei.sites.rows() == 0) continue;
    Eigen::Index col = 0;
    for (int j = 0; j < ops.size(); ++j) {
      const auto& ej = ops.entry(j);
      if (ej.sites.rows() == 0) continue;
      out.block(row, col, ei.sites.rows(), ej.sites.rows()) =
          gram(kernel, ei.sites, ej.sites, ei.op, ej.op);
      col += ej.sites.rows();
    }
    row += ei.sites.rows();
  }
  out.diagonal().array() += sigma_v2;
  // symmetrize away the last round-off bits
  out = 0.5 * (out + out.transpose()).eval();
  return out;
}

Eigen::MatrixXd operator_cross_data(const OperatorSet& ops,
                                    const KernelConfig& kernel,
                                    const Eigen::MatrixXd& Xstar,
                                    const Eigen::MatrixXd& X) {
  const Eigen::Index m = Xstar.rows();
  Eigen::MatrixXd out(ops.size() * m, X.rows());
  for (int i = 0; i < ops.size(); ++i)
    out.middleRows(i * m, m) =
        gram(kernel, Xstar, X, ops.entry(i).op, SubOperator::identity());
  return out;
}

Eigen::MatrixXd operator_cross_virtual(const OperatorSet& ops,
                                       const KernelConfig& kernel,
                                       const Eigen::MatrixXd& Xstar) {
  const Eigen::Index m = Xstar.rows();
  Eigen::MatrixXd out(ops.size() * m, ops.total_sites());
  for (int i = 0; i < ops.size(); ++i) {
    Eigen::Index col = 0;
    for (int j = 0; j < ops.size(); ++j) {
      const auto& ej = ops.entry(j);
      if (ej.sites.rows() == 0) continue;
      out.block(i * m, col, m, ej.sites.rows()) =
          gram(kernel, Xstar, ej.sites, ops.entry(i).op, ej.op);
      col += ej.sites.rows();
    }
  }
  return out;
}

PointOperatorBlocks point_operator_blocks(const OperatorSet& ops,
                                          const KernelConfig& kernel,
                                          const Eigen::MatrixXd& Xstar,
                                          const Eigen::MatrixXd& X) {
  const Eigen::Index m = Xstar.rows();
  const int k = ops.size();
  PointOperatorBlocks out;
  out.cross_data = operator_cross_data(ops, kernel, Xstar, X);
  out.cross_virtual = operator_cross_virtual(ops, kernel, Xstar);
  out.cov.resize(k * m, k * m);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      out.cov.block(i * m, j * m, m, m) =
          gram(kernel, Xstar, Xstar, ops.entry(i).op, ops.entry(j).op);
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

Eigen::VectorXd operator_cov_diag(const OperatorSet& ops,
                                  const KernelConfig& kernel,
                                  const Eigen::MatrixXd& Xstar) {
  const Eigen::Index m = Xstar.rows();
  const Eigen::MatrixXd Xt = Xstar.transpose();
  Eigen::VectorXd out(ops.size() * m);
  for (int i = 0; i < ops.size(); ++i) {
    const auto& e = ops.entry(i);
    for (Eigen::Index r = 0; r < m; ++r) {
      out[i * m + r] =
          e.op.is_identity()
              ? eval(kernel, Xt.col(r), Xt.col(r))
              : eval_d11(kernel, e.op.axis(), e.op.axis(), Xt.col(r),
                         Xt.col(r));
    }
  }
  return out;
}

}  // namespace gpcon
