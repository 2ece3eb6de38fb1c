// Compares the OpenMP kernels against their serial reference
// implementations: Gram assembly with derivative blocks and the placement
// probability scan. Verifies bitwise agreement and reports timings.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "gpcon/bench.hpp"
#include "gpcon/cgp.hpp"
#include "gpcon/kernel.hpp"
#include "gpcon/mathfn.hpp"
#include "gpcon/placement.hpp"

using namespace gpcon;

namespace {

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
             .count() /
         reps;
}

void report(const char* name, double serial, double parallel, bool match) {
  std::printf("%-28s %10.4f ms %10.4f ms %8.2fx   %s\n", name,
              serial * 1e3, parallel * 1e3, serial / parallel,
              match ? "bitwise match" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP disabled (serial build)\n");
#endif
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel",
              "speedup");

  Rng rng(7);
  KernelConfig cfg;
  cfg.family = KernelFamily::Matern52;
  cfg.variance = 1.3;
  cfg.lengthscales = Eigen::VectorXd::Constant(4, 0.6);

  {
    Eigen::MatrixXd a(600, 4), b(400, 4);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform();
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform();
    Eigen::MatrixXd out_s, out_p;
    const double ts = time_of(
        [&] { out_s = gram_serial(cfg, a, b, SubOperator::partial(1),
                                  SubOperator::partial(2)); },
        3);
    const double tp = time_of(
        [&] { out_p = gram(cfg, a, b, SubOperator::partial(1),
                           SubOperator::partial(2)); },
        3);
    report("gram 600x400 d11", ts, tp, out_s == out_p);
  }

  {
    // a small constrained model with enough sites to make the scan real
    const Eigen::VectorXd lo = Eigen::VectorXd::Zero(4);
    Eigen::VectorXd hi(4);
    hi << 1.0, 1.0, 6.2832, 6.2832;
    Rng design_rng(11);
    TrainingSet train;
    train.X = lhs_sample(40, 4, lo, hi, design_rng);
    train.y.resize(40);
    for (int i = 0; i < 40; ++i)
      train.y[i] = robot_arm_f(train.X.row(i).transpose());
    HyperParams hyper;
    hyper.kernel = cfg;
    hyper.noise_var = 1e-6;

    std::vector<OperatorEntry> entries;
    for (int axis : {0, 1})
      entries.push_back({SubOperator::partial(axis),
                         BoundPair::constants(0.0, kInf),
                         lhs_sample(12, 4, lo, hi, design_rng)});
    ConstrainedGP cgp = ConstrainedGP::assemble(
        train, hyper, OperatorSet(std::move(entries), 4), 1e-6);
    cgp.refresh_c_samples(500, 99);

    Rng cand_rng(13);
    const Eigen::MatrixXd candidates = lhs_sample(800, 4, lo, hi, cand_rng);
    Eigen::VectorXd p_s, p_p;
    const double ts = time_of(
        [&] {
          p_s = scan_constraint_probabilities_serial(
              cgp, candidates, 1e-3, ProbEvaluator::SampleAverage, 500);
        },
        3);
    const double tp = time_of(
        [&] {
          p_p = scan_constraint_probabilities(
              cgp, candidates, 1e-3, ProbEvaluator::SampleAverage, 500);
        },
        3);
    report("scan 800 cand x 500 draws", ts, tp, p_s == p_p);
  }
  return 0;
}
