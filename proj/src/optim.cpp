#include "gpcon/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace gpcon {

NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, double initial_step, int max_iter,
    double ftol) {
  const int n = static_cast<int>(x0.size());
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

  std::vector<Eigen::VectorXd> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  for (int i = 0; i < n; ++i) pts[i + 1][i] += initial_step;
  for (int i = 0; i <= n; ++i) vals[i] = f(pts[i]);

  std::vector<int> order(n + 1);
  NelderMeadResult res;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return vals[a] < vals[b]; });
    const int best = order[0], worst = order[n], second = order[n - 1];

    if (std::isfinite(vals[best]) &&
        std::abs(vals[worst] - vals[best]) <
            ftol * (std::abs(vals[best]) + ftol)) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i)
      if (i != worst) centroid += pts[i];
    centroid /= n;

    const Eigen::VectorXd xr = centroid + alpha * (centroid - pts[worst]);
    const double fr = f(xr);
    if (fr < vals[best]) {
      const Eigen::VectorXd xe = centroid + gamma * (xr - centroid);
      const double fe = f(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
    } else if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
    } else {
      const Eigen::VectorXd xc =
          centroid + rho * ((fr < vals[worst] ? xr : pts[worst]) - centroid);
      const double fc = f(xc);
      if (fc < std::min(fr, vals[worst])) {
        pts[worst] = xc;
        vals[worst] = fc;
      } else {
        for (int i = 0; i <= n; ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + sigma * (pts[i] - pts[best]);
          vals[i] = f(pts[i]);
        }
      }
    }
  }

  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (vals[i] < vals[best]) best = i;
  res.x = pts[best];
  res.value = vals[best];
  res.iterations = iter;
  return res;
}

}  // namespace gpcon
