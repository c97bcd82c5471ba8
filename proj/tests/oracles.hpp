#ifndef MEMBRELAX_TESTS_ORACLES_HPP
#define MEMBRELAX_TESTS_ORACLES_HPP

// Test-side oracles, independent of the library implementations: direct
// enumerations and dense 1D convexifications at desk scale.

#include <algorithm>
#include <cmath>
#include <vector>

#include "membrelax/base.hpp"

namespace oracles {

inline double laminate_g(const membrelax::Vec3& b) {
  const membrelax::Vec3 e3(0, 0, 1);
  return std::min((b - e3).norm(), (b + e3).norm()) + 0.5 * b.norm();
}

// Two-point laminate enumeration of the convex envelope of g along the b3
// axis: minimize theta g(b+) + (1-theta) g(b-) subject to the mean.
inline double two_point_envelope_axis(double b3) {
  double best = laminate_g(membrelax::Vec3(0, 0, b3));
  const int ns = 600, nt = 64;
  for (int i = 1; i <= ns; ++i) {
    const double s = 3.0 * i / ns;
    for (int j = 1; j < nt; ++j) {
      const double theta = static_cast<double>(j) / nt;
      const double bm = b3 - 2.0 * s * theta;
      const double bp = bm + 2.0 * s;
      best = std::min(best, theta * laminate_g(membrelax::Vec3(0, 0, bp)) +
                                (1 - theta) * laminate_g(membrelax::Vec3(0, 0, bm)));
    }
  }
  return best;
}

// Dense 1D convexification: lower convex hull of (t, f(t)) samples,
// evaluated back at query points.
template <class F>
std::vector<double> convexify_1d(F&& f, double lo, double hi, int n,
                                 const std::vector<double>& queries) {
  std::vector<double> ts(n), fs(n);
  for (int i = 0; i < n; ++i) {
    ts[i] = lo + (hi - lo) * i / (n - 1);
    fs[i] = f(ts[i]);
  }
  // Andrew-monotone lower hull over the graph points.
  std::vector<int> hull;
  for (int i = 0; i < n; ++i) {
    while (hull.size() >= 2) {
      const int a = hull[hull.size() - 2], b = hull.back();
      const double cross = (ts[b] - ts[a]) * (fs[i] - fs[a]) - (fs[b] - fs[a]) * (ts[i] - ts[a]);
      if (cross <= 0.0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(i);
  }
  std::vector<double> out;
  for (double q : queries) {
    double v = fs[hull.back()];
    for (size_t h = 0; h + 1 < hull.size(); ++h) {
      const int a = hull[h], b = hull[h + 1];
      if (q >= ts[a] && q <= ts[b]) {
        const double w = (q - ts[a]) / (ts[b] - ts[a]);
        v = (1 - w) * fs[a] + w * fs[b];
        break;
      }
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace oracles

#endif
