#include "gpcon/placement.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gpcon/csv.hpp"
#include "gpcon/mathfn.hpp"

namespace gpcon {

double PlacementConfig::margin(double sigma_v) const {
  return std::max(sigma_v * norm_quantile(p_target), 0.0);
}

void PlacementConfig::validate(int input_dim) const {
  if (!(p_target >= 0.0 && p_target < 1.0))
    throw std::invalid_argument("placement: p_target must be in [0, 1)");
  if (m < 1) throw std::invalid_argument("placement: m must be >= 1");
  if (candidates.rows() == 0)
    throw std::invalid_argument("placement: empty candidate set");
  if (candidates.cols() != input_dim)
    throw std::invalid_argument("placement: candidate dimension mismatch");
  if (domain_lo.size() != input_dim || domain_hi.size() != input_dim)
    throw std::invalid_argument("placement: domain box dimension mismatch");
  for (int i = 0; i < input_dim; ++i)
    for (Eigen::Index r = 0; r < candidates.rows(); ++r)
      if (candidates(r, i) < domain_lo[i] - 1e-12 ||
          candidates(r, i) > domain_hi[i] + 1e-12)
        throw std::invalid_argument("placement: candidate outside domain");
}

int PlacementTrace::sites_added() const {
  int n = 0;
  for (const auto& s : steps) n += s.site_added ? 1 : 0;
  return n;
}

double PlacementTrace::mean_site_seconds() const {
  double t = 0.0;
  int n = 0;
  for (const auto& s : steps)
    if (s.site_added) {
      t += s.seconds;
      ++n;
    }
  return n ? t / n : 0.0;
}

namespace {

// Probabilities for one entry-major block of rows, given the per-row law.
// SampleAverage: mean over draws of the exact univariate conditional mass.
// Moment*: single Gaussian evaluation with moment-matched mean/variance.
template <bool Parallel>
Eigen::VectorXd scan_impl(const ConstrainedGP& cgp, const Eigen::MatrixXd& Xc,
                          double margin, ProbEvaluator evaluator, int m) {
  const ConstraintScanLaw law = cgp.constraint_scan_law(Xc);
  auto [lo, hi] = cgp.opset().bounds_at(Xc);
  const Eigen::Index rows = law.base_mean.size();
  const Eigen::Index points = Xc.rows();
  Eigen::VectorXd probs(rows);

  if (cgp.n_virtual() == 0) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double sd = std::max(law.sd[r], 1e-300);
      probs[r] = norm_mass((lo[r] - margin - law.base_mean[r]) / sd,
                           (hi[r] + margin - law.base_mean[r]) / sd);
    }
    return probs;
  }

  if (evaluator == ProbEvaluator::SampleAverage) {
    const Eigen::MatrixXd& cs = cgp.c_samples();
    const int m_use = std::min<int>(m, static_cast<int>(cs.rows()));
    const Eigen::MatrixXd deviations =
        cs.topRows(m_use).transpose().colwise() - cgp.op_mean();
    // per-entry GEMM keeps the shift buffer at (points x m)
    for (int e = 0; e < law.entries; ++e) {
      const Eigen::MatrixXd shift =
          law.coef.middleRows(e * points, points) * deviations;
#pragma omp parallel for schedule(static) if (Parallel)
      for (Eigen::Index c = 0; c < points; ++c) {
        const Eigen::Index r = e * points + c;
        if (lo[r] == -kInf && hi[r] == kInf) {
          probs[r] = 1.0;
          continue;
        }
        const double sd = std::max(law.sd[r], 1e-300);
        const double a = lo[r] - margin, b = hi[r] + margin;
        double acc = 0.0;
        for (int j = 0; j < m_use; ++j) {
          const double mu = law.base_mean[r] + shift(c, j);
          acc += norm_mass((a - mu) / sd, (b - mu) / sd);
        }
        probs[r] = acc / m_use;
      }
    }
    return probs;
  }

  const MomentsNd cm =
      cgp.c_moments(evaluator == ProbEvaluator::MomentSamples
                        ? MomentSource::Samples
                        : MomentSource::CorrelationFree);
  const Eigen::VectorXd mean_shift = law.coef * (cm.mean - cgp.op_mean());
  const Eigen::MatrixXd cg = law.coef * cm.cov;
  const Eigen::VectorXd extra_var =
      cg.cwiseProduct(law.coef).rowwise().sum();
#pragma omp parallel for schedule(static) if (Parallel)
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (lo[r] == -kInf && hi[r] == kInf) {
      probs[r] = 1.0;
      continue;
    }
    const double mu = law.base_mean[r] + mean_shift[r];
    const double sd = std::sqrt(
        std::max(law.sd[r] * law.sd[r] + extra_var[r], 1e-300));
    probs[r] = norm_mass((lo[r] - margin - mu) / sd,
                         (hi[r] + margin - mu) / sd);
  }
  return probs;
}

double point_probability(const ConstrainedGP& cgp, const Eigen::VectorXd& x,
                         int entry, double margin, ProbEvaluator evaluator,
                         int m) {
  const Eigen::MatrixXd xrow = x.transpose();
  const Eigen::VectorXd p = scan_constraint_probabilities_serial(
      cgp, xrow, margin, evaluator, m);
  return p[entry];
}

struct RowMin {
  Eigen::Index row = -1;
  double p = 1.0;
};

RowMin best_non_duplicate(const ConstrainedGP& cgp,
                          const PlacementConfig& config,
                          const Eigen::MatrixXd& Xc,
                          const Eigen::VectorXd& probs) {
  const Eigen::Index points = Xc.rows();
  RowMin best;
  for (Eigen::Index r = 0; r < probs.size(); ++r) {
    if (best.row >= 0 && probs[r] >= best.p) continue;
    const int entry = static_cast<int>(r / points);
    const Eigen::VectorXd x = Xc.row(r % points).transpose();
    if (cgp.opset().has_near_duplicate(entry, x, config.duplicate_tol))
      continue;
    best.row = r;
    best.p = probs[r];
  }
  return best;
}

// golden-section line minimization of the probability along one axis
double line_min(const ConstrainedGP& cgp, const PlacementConfig& config,
                double margin, Eigen::VectorXd& x, int entry, int axis) {
  constexpr double kGolden = 0.6180339887498949;
  double a = config.domain_lo[axis], b = config.domain_hi[axis];
  auto eval_at = [&](double t) {
    Eigen::VectorXd xt = x;
    xt[axis] = t;
    return point_probability(cgp, xt, entry, margin, config.evaluator,
                             config.m);
  };
  double c = b - kGolden * (b - a), d = a + kGolden * (b - a);
  double fc = eval_at(c), fd = eval_at(d);
  for (int it = 0; it < config.refine_evals - 2; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kGolden * (b - a);
      fc = eval_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kGolden * (b - a);
      fd = eval_at(d);
    }
  }
  const double t = fc < fd ? c : d;
  const double f = std::min(fc, fd);
  x[axis] = t;
  return f;
}

}  // namespace

Eigen::VectorXd scan_constraint_probabilities(const ConstrainedGP& cgp,
                                              const Eigen::MatrixXd& Xc,
                                              double margin,
                                              ProbEvaluator evaluator,
                                              int m) {
  return scan_impl<true>(cgp, Xc, margin, evaluator, m);
}

Eigen::VectorXd scan_constraint_probabilities_serial(const ConstrainedGP& cgp,
                                                     const Eigen::MatrixXd& Xc,
                                                     double margin,
                                                     ProbEvaluator evaluator,
                                                     int m) {
  return scan_impl<false>(cgp, Xc, margin, evaluator, m);
}

ScanMin min_constraint_prob(const ConstrainedGP& cgp,
                            const PlacementConfig& config) {
  config.validate(cgp.opset().input_dim());
  const double margin = config.margin(std::sqrt(cgp.sigma_v2()));
  const Eigen::MatrixXd& Xc = config.candidates;
  const Eigen::Index points = Xc.rows();

  Eigen::VectorXd probs;
  if (config.early_stop && cgp.n_virtual() > 0) {
    // chunked scan that bails out at the first sufficiently bad candidate
    const Eigen::Index chunk = 64;
    probs.setConstant(cgp.opset().size() * points, 1.0);
    for (Eigen::Index start = 0; start < points; start += chunk) {
      const Eigen::Index len = std::min(chunk, points - start);
      const Eigen::VectorXd part = scan_constraint_probabilities(
          cgp, Xc.middleRows(start, len), margin, config.evaluator, config.m);
      for (int e = 0; e < cgp.opset().size(); ++e)
        probs.segment(e * points + start, len) = part.segment(e * len, len);
      if (part.minCoeff() < config.early_stop_threshold) break;
    }
  } else {
    probs = scan_constraint_probabilities(cgp, Xc, margin, config.evaluator,
                                          config.m);
  }

  RowMin best = best_non_duplicate(cgp, config, Xc, probs);
  ScanMin out;
  if (best.row < 0) {
    out.sub_op = -1;  // every candidate duplicated an existing site
    return out;
  }
  out.x = Xc.row(best.row % points).transpose();
  out.sub_op = static_cast<int>(best.row / points);
  out.p = best.p;

  if (config.strategy == SearchStrategy::MultiStartLocal) {
    // refine the worst candidates by coordinate descent inside the domain
    std::vector<Eigen::Index> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a,
                                                     Eigen::Index b) {
      return probs[a] < probs[b];
    });
    const int starts =
        std::min<int>(config.refine_starts, static_cast<int>(order.size()));
    for (int s = 0; s < starts; ++s) {
      const Eigen::Index row = order[s];
      const int entry = static_cast<int>(row / points);
      Eigen::VectorXd x = Xc.row(row % points).transpose();
      double p = probs[row];
      for (int sweep = 0; sweep < config.refine_sweeps; ++sweep)
        for (int axis = 0; axis < cgp.opset().input_dim(); ++axis)
          p = line_min(cgp, config, margin, x, entry, axis);
      if (p < out.p &&
          !cgp.opset().has_near_duplicate(entry, x, config.duplicate_tol)) {
        out.x = x;
        out.sub_op = entry;
        out.p = p;
      }
    }
  }
  return out;
}

namespace {

PlacementResult place_loop(const ConstrainedGP& cgp0,
                           const PlacementConfig& config, bool joint) {
  config.validate(cgp0.opset().input_dim());
  const bool needs_samples =
      config.evaluator != ProbEvaluator::MomentCorrelationFree;

  PlacementResult res{cgp0, {}};
  for (int iteration = 0;; ++iteration) {
    const auto t0 = std::chrono::steady_clock::now();
    PlacementStep step;
    step.iteration = iteration;
    step.n_v = res.model.n_virtual();
    step.site_added = false;
    try {
      if (res.model.n_virtual() > 0 && needs_samples)
        res.model.refresh_c_samples(
            config.m, mix_seed(config.base_seed, 1000 + iteration));
      const ScanMin s = min_constraint_prob(res.model, config);
      step.seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
      if (s.sub_op < 0) {
        res.trace.error = "all candidates duplicate existing sites";
        res.trace.steps.push_back(std::move(step));
        break;
      }
      step.x = s.x;
      step.sub_op = s.sub_op;
      step.p_star = s.p;
      if (s.p >= config.p_target) {
        res.trace.converged = true;
        res.trace.steps.push_back(std::move(step));
        break;
      }
      if (res.model.n_virtual() >= config.max_sites) {
        res.trace.steps.push_back(std::move(step));
        break;
      }
      res.model = res.model.with_opset(
          joint ? res.model.opset().with_site_all(s.x)
                : res.model.opset().with_site(s.sub_op, s.x));
      step.site_added = true;
      res.trace.steps.push_back(std::move(step));
    } catch (const std::exception& e) {
      step.seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
      res.trace.error = e.what();
      res.trace.steps.push_back(std::move(step));
      break;
    }
  }
  return res;
}

}  // namespace

PlacementResult place_joint(const ConstrainedGP& cgp,
                            const PlacementConfig& config) {
  return place_loop(cgp, config, /*joint=*/true);
}

PlacementResult place_per_suboperator(const ConstrainedGP& cgp,
                                      const PlacementConfig& config) {
  return place_loop(cgp, config, /*joint=*/false);
}

double audit_min_probability(const ConstrainedGP& cgp,
                             const PlacementConfig& config,
                             std::uint64_t seed) {
  ConstrainedGP fresh = cgp;
  if (fresh.n_virtual() > 0 &&
      config.evaluator != ProbEvaluator::MomentCorrelationFree)
    fresh.refresh_c_samples(config.m, mix_seed(seed, 0xa0d17));
  PlacementConfig audit = config;
  audit.early_stop = false;
  audit.duplicate_tol = -1.0;  // consider every candidate
  const ScanMin s = min_constraint_prob(fresh, audit);
  return s.p;
}

void write_trace_csv(std::ostream& os, const PlacementTrace& trace,
                     bool include_seconds) {
  write_csv_row(os, {"iter", "sub_op", "x", "p_star", "n_v", "seconds"});
  for (const auto& s : trace.steps) {
    std::string xjoin;
    for (Eigen::Index i = 0; i < s.x.size(); ++i) {
      if (i) xjoin += ';';
      xjoin += format_double(s.x[i]);
    }
    write_csv_row(os, {std::to_string(s.iteration), std::to_string(s.sub_op),
                       xjoin, format_double(s.p_star), std::to_string(s.n_v),
                       include_seconds ? format_double(s.seconds) : ""});
  }
}

}  // namespace gpcon
