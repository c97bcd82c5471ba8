#ifndef MEMBRELAX_SRC_LBFGS_HPP
#define MEMBRELAX_SRC_LBFGS_HPP

#include <Eigen/Dense>
#include <deque>
#include <functional>

namespace membrelax::detail {

struct LbfgsResult {
  double f = 0.0;
  int iterations = 0;
};

// Limited-memory BFGS with Armijo backtracking. Deterministic: no
// randomness, fixed reduction order. `fg` evaluates f and fills grad.
template <class FG>
LbfgsResult lbfgs_minimize(Eigen::VectorXd& x, FG&& fg, int max_iters, double grad_tol,
                           int memory = 6) {
  using Vec = Eigen::VectorXd;
  const int n = static_cast<int>(x.size());
  Vec g(n), x_new(n), g_new(n);
  double f = fg(x, g);

  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;

  LbfgsResult res;
  res.f = f;
  for (int iter = 0; iter < max_iters; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() <= grad_tol) break;

    // Two-loop recursion.
    Vec q = g;
    const int m = static_cast<int>(s_hist.size());
    std::vector<double> alpha(m);
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (m > 0) {
      const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      q *= gamma;
    } else {
      q *= 1.0 / std::max(1.0, g.lpNorm<Eigen::Infinity>());
    }
    Vec d = -q;

    double gtd = g.dot(d);
    if (gtd > -1e-16 * (1.0 + std::abs(f))) {
      // Not a descent direction; drop curvature memory and restart.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g / std::max(1.0, g.lpNorm<Eigen::Infinity>());
      gtd = g.dot(d);
      if (gtd >= 0.0) break;
    }

    double step = 1.0;
    bool accepted = false;
    double f_new = f;
    for (int bt = 0; bt < 40; ++bt) {
      x_new = x + step * d;
      f_new = fg(x_new, g_new);
      if (f_new <= f + 1e-4 * step * gtd) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++res.iterations;
    if (!accepted) break;

    const Vec s = x_new - x;
    const Vec y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = x_new;
    g = g_new;
    const double df = f - f_new;
    f = f_new;
    if (df <= 1e-14 * (1.0 + std::abs(f))) break;
  }
  res.f = f;
  return res;
}

}  // namespace membrelax::detail

#endif
