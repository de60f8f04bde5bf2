#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <vector>

namespace chiralctl::detail {

// Plain Nelder-Mead simplex minimizer; derivative-free polish for the
// certificate residual. Deterministic for a fixed start.
template <typename F>
inline Eigen::VectorXd nelder_mead(F&& f, const Eigen::VectorXd& x0, double step,
                                   int max_iters, double ftol) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  for (int i = 0; i < n; ++i) pts[i + 1](i) += step;
  for (int i = 0; i <= n; ++i) vals[i] = f(pts[i]);

  std::vector<int> order(n + 1);
  for (int it = 0; it < max_iters; ++it) {
    for (int i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return vals[a] < vals[b]; });
    const int best = order[0], worst = order[n], second = order[n - 1];
    if (vals[worst] - vals[best] < ftol) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i)
      if (i != worst) centroid += pts[i];
    centroid /= n;

    const Eigen::VectorXd refl = centroid + (centroid - pts[worst]);
    const double frefl = f(refl);
    if (frefl < vals[best]) {
      const Eigen::VectorXd expand = centroid + 2.0 * (centroid - pts[worst]);
      const double fexp = f(expand);
      if (fexp < frefl) {
        pts[worst] = expand;
        vals[worst] = fexp;
      } else {
        pts[worst] = refl;
        vals[worst] = frefl;
      }
    } else if (frefl < vals[second]) {
      pts[worst] = refl;
      vals[worst] = frefl;
    } else {
      const Eigen::VectorXd contract =
          centroid + 0.5 * ((frefl < vals[worst] ? refl : pts[worst]) - centroid);
      const double fcon = f(contract);
      if (fcon < std::min(frefl, vals[worst])) {
        pts[worst] = contract;
        vals[worst] = fcon;
      } else {
        for (int i = 0; i <= n; ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
          vals[i] = f(pts[i]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (vals[i] < vals[best]) best = i;
  return pts[best];
}

}  // namespace chiralctl::detail
