#include "membrelax/density.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace membrelax {

namespace {

bool finite(const Mat33& m) { return m.allFinite(); }

double huber(const Vec3& v, double delta) { return std::sqrt(v.squaredNorm() + delta * delta); }

double huber(const Mat32& m, double delta) { return std::sqrt(m.squaredNorm() + delta * delta); }

}  // namespace

Mat33 EnergyModel::grad_smoothed(const Mat33& xi, double delta) const {
  const double h = 1e-6 * (1.0 + xi.norm());
  Mat33 g;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Mat33 xp = xi, xm = xi;
      xp(i, j) += h;
      xm(i, j) -= h;
      g(i, j) = (eval_smoothed(xp, delta) - eval_smoothed(xm, delta)) / (2.0 * h);
    }
  return g;
}

double EnergyModel::recession_closed_form(const Mat33&) const {
  throw domain_error("model '" + describe() + "' has no closed-form recession");
}

double EnergyModel::planar_infimum_smoothed(const Mat32& xi_bar, double delta, Mat32* grad) const {
  if (auto cf = planar_infimum_closed_form(xi_bar); cf && grad == nullptr) return cf->value;
  PlanarInfimum inf = w_zero(*this, xi_bar);
  const Mat33 at = join(xi_bar, inf.argmin);
  if (grad) *grad = planar_part(grad_smoothed(at, delta));
  return eval_smoothed(at, delta);
}

// --- convex-norm: W(xi) = sqrt(1 + |xi|^2) ------------------------------

class ConvexNormModel final : public EnergyModel {
 public:
  ConvexNormModel() {
    // beta_prime carries the l2 -> l1 norm-equivalence factor so the
    // (|xi_bar| + |b|) growth bound holds as stated.
    constants_ = {1.0 / std::sqrt(2.0), 1.0, 1.0, 0.5, 1.0};
    convex_ = true;
    closed_recession_ = true;
  }
  double eval(const Mat33& xi) const override {
    if (!finite(xi)) throw domain_error("non-finite matrix");
    return std::sqrt(1.0 + xi.squaredNorm());
  }
  Mat33 grad_smoothed(const Mat33& xi, double) const override { return xi / eval(xi); }
  double recession_closed_form(const Mat33& xi) const override { return xi.norm(); }
  std::optional<PlanarInfimum> planar_infimum_closed_form(const Mat32& xi_bar) const override {
    return PlanarInfimum{std::sqrt(1.0 + xi_bar.squaredNorm()), Vec3::Zero()};
  }
  double planar_infimum_smoothed(const Mat32& xi_bar, double, Mat32* grad) const override {
    const double v = std::sqrt(1.0 + xi_bar.squaredNorm());
    if (grad) *grad = xi_bar / v;
    return v;
  }
  std::shared_ptr<const EnergyModel> recession_model() const override;
  std::string describe() const override { return "convex-norm"; }
};

// Frobenius norm density |xi|; the recession of the convex-norm model.
class NormModel final : public EnergyModel {
 public:
  NormModel() {
    constants_ = {1.0 / std::sqrt(2.0), 1.0, 0.0, 0.5, 1.0};
    convex_ = true;
    closed_recession_ = true;
  }
  double eval(const Mat33& xi) const override {
    if (!finite(xi)) throw domain_error("non-finite matrix");
    return xi.norm();
  }
  double eval_smoothed(const Mat33& xi, double delta) const override {
    return std::sqrt(xi.squaredNorm() + delta * delta);
  }
  Mat33 grad_smoothed(const Mat33& xi, double delta) const override {
    return xi / eval_smoothed(xi, delta);
  }
  double recession_closed_form(const Mat33& xi) const override { return xi.norm(); }
  std::optional<PlanarInfimum> planar_infimum_closed_form(const Mat32& xi_bar) const override {
    return PlanarInfimum{xi_bar.norm(), Vec3::Zero()};
  }
  double planar_infimum_smoothed(const Mat32& xi_bar, double delta, Mat32* grad) const override {
    const double v = huber(xi_bar, delta);
    if (grad) *grad = xi_bar / v;
    return v;
  }
  std::shared_ptr<const EnergyModel> recession_model() const override {
    return std::make_shared<NormModel>();
  }
  std::string describe() const override { return "norm"; }
};

std::shared_ptr<const EnergyModel> ConvexNormModel::recession_model() const {
  return std::make_shared<NormModel>();
}

// --- separable-laminate: W(xi) = |xi_bar| + g(xi_3) ---------------------
// g(b) = min(|b - e3|, |b + e3|) + |b|/2, a double well at b = +-e3.

namespace {

const Vec3 kE3(0.0, 0.0, 1.0);

double laminate_g(const Vec3& b) {
  return std::min((b - kE3).norm(), (b + kE3).norm()) + 0.5 * b.norm();
}

double laminate_g_smoothed(const Vec3& b, double delta, Vec3* grad) {
  const Vec3 dp = b - kE3, dm = b + kE3;
  const double hp = huber(dp, delta), hm = huber(dm, delta), hb = huber(b, delta);
  const double v = std::min(hp, hm) + 0.5 * hb;
  if (grad) *grad = (hp <= hm ? dp / hp : dm / hm) + 0.5 * b / hb;
  return v;
}

}  // namespace

// Recession |xi_bar| + 1.5 |b|, shared by the laminate model and its envelope.
class LaminateRecessionModel final : public EnergyModel {
 public:
  LaminateRecessionModel() {
    constants_ = {0.5, 2.2, 0.0, 0.5, 2.2};
    convex_ = true;
    closed_recession_ = true;
  }
  double eval(const Mat33& xi) const override {
    if (!finite(xi)) throw domain_error("non-finite matrix");
    return planar_part(xi).norm() + 1.5 * third_column(xi).norm();
  }
  double eval_smoothed(const Mat33& xi, double delta) const override {
    return huber(planar_part(xi), delta) + 1.5 * huber(third_column(xi), delta);
  }
  Mat33 grad_smoothed(const Mat33& xi, double delta) const override {
    const Mat32 p = planar_part(xi);
    const Vec3 b = third_column(xi);
    return join(p / huber(p, delta), 1.5 * b / huber(b, delta));
  }
  double recession_closed_form(const Mat33& xi) const override { return eval(xi); }
  std::optional<PlanarInfimum> planar_infimum_closed_form(const Mat32& xi_bar) const override {
    return PlanarInfimum{xi_bar.norm(), Vec3::Zero()};
  }
  double planar_infimum_smoothed(const Mat32& xi_bar, double delta, Mat32* grad) const override {
    const double v = huber(xi_bar, delta);
    if (grad) *grad = xi_bar / v;
    return v;
  }
  std::shared_ptr<const EnergyModel> recession_model() const override {
    return std::make_shared<LaminateRecessionModel>();
  }
  std::string describe() const override { return "laminate-recession"; }
};

class SeparableLaminateModel final : public EnergyModel {
 public:
  SeparableLaminateModel() {
    constants_ = {0.5, 2.2, 1.0, 0.5, 2.2};
    convex_ = false;
    closed_recession_ = true;
  }
  double eval(const Mat33& xi) const override {
    if (!finite(xi)) throw domain_error("non-finite matrix");
    return planar_part(xi).norm() + laminate_g(third_column(xi));
  }
  double eval_smoothed(const Mat33& xi, double delta) const override {
    return huber(planar_part(xi), delta) + laminate_g_smoothed(third_column(xi), delta, nullptr);
  }
  Mat33 grad_smoothed(const Mat33& xi, double delta) const override {
    const Mat32 p = planar_part(xi);
    Vec3 gb;
    laminate_g_smoothed(third_column(xi), delta, &gb);
    return join(p / huber(p, delta), gb);
  }
  double recession_closed_form(const Mat33& xi) const override {
    return planar_part(xi).norm() + 1.5 * third_column(xi).norm();
  }
  std::optional<PlanarInfimum> planar_infimum_closed_form(const Mat32& xi_bar) const override {
    // min_b g(b) = 1/2 at b = +-e3; smallest-norm/lexicographic tie-break.
    return PlanarInfimum{xi_bar.norm() + 0.5, -kE3};
  }
  double planar_infimum_smoothed(const Mat32& xi_bar, double delta, Mat32* grad) const override {
    const double v = huber(xi_bar, delta);
    if (grad) *grad = xi_bar / v;
    return v + 0.5;
  }
  std::shared_ptr<const EnergyModel> recession_model() const override {
    return std::make_shared<LaminateRecessionModel>();
  }
  std::string describe() const override { return "separable-laminate"; }
};

// --- tabulated isotropic-split model ------------------------------------

namespace {

// 1D table lookup with linear extension beyond the last interval.
struct Axis {
  std::vector<double> nodes;
  // Returns interval index and barycentric coordinate; extends linearly.
  std::pair<int, double> locate(double x) const {
    const int n = static_cast<int>(nodes.size());
    if (x <= nodes.front()) return {0, (x - nodes[0]) / (nodes[1] - nodes[0])};
    if (x >= nodes[n - 2]) return {n - 2, (x - nodes[n - 2]) / (nodes[n - 1] - nodes[n - 2])};
    int lo = 0, hi = n - 1;
    while (hi - lo > 1) {
      int mid = (lo + hi) / 2;
      (nodes[mid] <= x ? lo : hi) = mid;
    }
    return {lo, (x - nodes[lo]) / (nodes[lo + 1] - nodes[lo])};
  }
};

std::uint64_t fnv_hash(const std::vector<double>& v) {
  std::uint64_t h = 1469598103934665603ull;
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace

class TableModel final : public EnergyModel {
 public:
  TableModel(std::vector<double> s_nodes, std::vector<double> t_nodes, std::vector<double> values,
             GrowthConstants constants, bool convex)
      : s_axis_{std::move(s_nodes)}, t_axis_{std::move(t_nodes)}, values_(std::move(values)) {
    if (s_axis_.nodes.size() < 2 || t_axis_.nodes.size() < 2)
      throw domain_error("user-table needs at least 2 nodes per axis");
    if (values_.size() != s_axis_.nodes.size() * t_axis_.nodes.size())
      throw domain_error("user-table value count does not match the grid");
    constants_ = constants;
    convex_ = convex;
    closed_recession_ = false;
    id_ = "user-table:" + std::to_string(fnv_hash(values_));
  }

  double interp(double s, double t, double* ds = nullptr, double* dt = nullptr) const {
    auto [i, u] = s_axis_.locate(s);
    auto [j, v] = t_axis_.locate(t);
    const int nt = static_cast<int>(t_axis_.nodes.size());
    const double v00 = values_[i * nt + j], v01 = values_[i * nt + j + 1];
    const double v10 = values_[(i + 1) * nt + j], v11 = values_[(i + 1) * nt + j + 1];
    const double a = v00 * (1 - u) * (1 - v) + v10 * u * (1 - v) + v01 * (1 - u) * v + v11 * u * v;
    if (ds)
      *ds = ((v10 - v00) * (1 - v) + (v11 - v01) * v) / (s_axis_.nodes[i + 1] - s_axis_.nodes[i]);
    if (dt)
      *dt = ((v01 - v00) * (1 - u) + (v11 - v10) * u) / (t_axis_.nodes[j + 1] - t_axis_.nodes[j]);
    return a;
  }

  double eval(const Mat33& xi) const override {
    if (!finite(xi)) throw domain_error("non-finite matrix");
    return std::max(0.0, interp(planar_part(xi).norm(), third_column(xi).norm()));
  }
  Mat33 grad_smoothed(const Mat33& xi, double delta) const override {
    const Mat32 p = planar_part(xi);
    const Vec3 b = third_column(xi);
    double ds, dt;
    interp(p.norm(), b.norm(), &ds, &dt);
    return join(ds * p / huber(p, delta), dt * b / huber(b, delta));
  }
  std::string describe() const override { return id_; }

 private:
  Axis s_axis_, t_axis_;
  std::vector<double> values_;
  std::string id_;
};

ModelPtr make_table_model(std::vector<double> s_nodes, std::vector<double> t_nodes,
                          std::vector<double> values, GrowthConstants constants, bool convex) {
  return std::make_shared<TableModel>(std::move(s_nodes), std::move(t_nodes), std::move(values),
                                      constants, convex);
}

// --- laminate envelope: |xi_bar| + Cg(b) --------------------------------
// Cg is the convex envelope of g, tabulated once by a double discrete
// Legendre transform in the rotation-reduced (rho, s) plane (g depends on
// b through |b_perp| and b3 only, and is nondecreasing in |b_perp|).

namespace {

struct EnvelopeTable {
  int n = 0;
  double R = 0.0, h = 0.0;
  std::vector<double> cg;  // (rho, s) grid, rho along rows

  double at(int i, int j) const { return cg[i * n + j]; }

  static const EnvelopeTable& instance() {
    static EnvelopeTable table = build();
    return table;
  }

  static EnvelopeTable build() {
    EnvelopeTable t;
    t.n = 241;
    t.R = 12.0;
    t.h = 2.0 * t.R / (t.n - 1);
    const int n = t.n;
    auto coord = [&](int i) { return -t.R + i * t.h; };

    std::vector<double> F(n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        F[i * n + j] = laminate_g(Vec3(coord(i), 0.0, coord(j)));

    // Dual grid: dom g* is the ball of radius 3/2 (the recession slope).
    const int m = 121;
    const double Y = 1.5, hy = 2.0 * Y / (m - 1);
    auto ycoord = [&](int a) { return -Y + a * hy; };

    // g*(y) = max_s (s y2 - F) then max_rho (rho y1 + .).
    std::vector<double> inner(n * m), gstar(m * m);
    for (int i = 0; i < n; ++i)
      for (int a2 = 0; a2 < m; ++a2) {
        double best = -1e300;
        for (int j = 0; j < n; ++j) best = std::max(best, coord(j) * ycoord(a2) - F[i * n + j]);
        inner[i * m + a2] = best;
      }
    for (int a1 = 0; a1 < m; ++a1)
      for (int a2 = 0; a2 < m; ++a2) {
        if (ycoord(a1) * ycoord(a1) + ycoord(a2) * ycoord(a2) > Y * Y + 1e-12) {
          gstar[a1 * m + a2] = 1e300;  // outside dom g*
          continue;
        }
        double best = -1e300;
        for (int i = 0; i < n; ++i) best = std::max(best, coord(i) * ycoord(a1) + inner[i * m + a2]);
        gstar[a1 * m + a2] = best;
      }

    // Cg = (g*)* on the primal grid.
    std::vector<double> inner2(m * n);
    for (int a1 = 0; a1 < m; ++a1)
      for (int j = 0; j < n; ++j) {
        double best = -1e300;
        for (int a2 = 0; a2 < m; ++a2) {
          if (gstar[a1 * m + a2] >= 1e299) continue;
          best = std::max(best, coord(j) * ycoord(a2) - gstar[a1 * m + a2]);
        }
        inner2[a1 * n + j] = best;
      }
    t.cg.resize(n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double best = -1e300;
        for (int a1 = 0; a1 < m; ++a1)
          best = std::max(best, coord(i) * ycoord(a1) + inner2[a1 * n + j]);
        t.cg[i * n + j] = best;
      }
    return t;
  }

  double eval(double rho, double s, double* drho = nullptr, double* ds = nullptr) const {
    const double fi = std::clamp((rho + R) / h, 0.0, n - 2 + 0.999999);
    const double fj = std::clamp((s + R) / h, 0.0, n - 2 + 0.999999);
    const int i = static_cast<int>(fi), j = static_cast<int>(fj);
    const double u = fi - i, v = fj - j;
    const double v00 = at(i, j), v01 = at(i, j + 1), v10 = at(i + 1, j), v11 = at(i + 1, j + 1);
    if (drho) *drho = ((v10 - v00) * (1 - v) + (v11 - v01) * v) / h;
    if (ds) *ds = ((v01 - v00) * (1 - u) + (v11 - v10) * u) / h;
    return v00 * (1 - u) * (1 - v) + v10 * u * (1 - v) + v01 * (1 - u) * v + v11 * u * v;
  }
};

// Envelope value with exact convex minorants patched in; they dominate the
// table only where dual-grid truncation bites (large |b| and near b = 0).
double cg_value(const Vec3& b, double delta, Vec3* grad) {
  const Vec2 bp(b.x(), b.y());
  const double rho = bp.norm(), s = b.z();
  double drho, ds;
  const double table = EnvelopeTable::instance().eval(rho, s, &drho, &ds);
  const double far = 1.5 * b.norm() - 1.0;  // g >= (|b|-1) + |b|/2, convex
  const double cone = 0.5 * b.norm();
  double best = table;
  int which = 0;
  if (far > best) best = far, which = 1;
  if (cone > best) best = cone, which = 2;
  if (0.5 > best) best = 0.5, which = 3;
  if (grad) {
    const double hr = std::sqrt(rho * rho + delta * delta);
    switch (which) {
      case 0:
        *grad << drho * bp.x() / hr, drho * bp.y() / hr, ds;
        break;
      case 1:
        *grad = 1.5 * b / huber(b, delta);
        break;
      case 2:
        *grad = 0.5 * b / huber(b, delta);
        break;
      default:
        grad->setZero();
    }
  }
  return best;
}

}  // namespace

class LaminateEnvelopeModel final : public EnergyModel {
 public:
  LaminateEnvelopeModel() {
    constants_ = {0.5, 2.2, 2.0, 0.5, 2.2};
    convex_ = true;
    closed_recession_ = true;
  }
  double eval(const Mat33& xi) const override {
    if (!finite(xi)) throw domain_error("non-finite matrix");
    return planar_part(xi).norm() + cg_value(third_column(xi), 0.0, nullptr);
  }
  double eval_smoothed(const Mat33& xi, double delta) const override {
    return huber(planar_part(xi), delta) + cg_value(third_column(xi), delta, nullptr);
  }
  Mat33 grad_smoothed(const Mat33& xi, double delta) const override {
    const Mat32 p = planar_part(xi);
    Vec3 gb;
    cg_value(third_column(xi), delta, &gb);
    return join(p / huber(p, delta), gb);
  }
  double recession_closed_form(const Mat33& xi) const override {
    return planar_part(xi).norm() + 1.5 * third_column(xi).norm();
  }
  std::optional<PlanarInfimum> planar_infimum_closed_form(const Mat32& xi_bar) const override {
    return PlanarInfimum{xi_bar.norm() + 0.5, -kE3};
  }
  double planar_infimum_smoothed(const Mat32& xi_bar, double delta, Mat32* grad) const override {
    const double v = huber(xi_bar, delta);
    if (grad) *grad = xi_bar / v;
    return v + 0.5;
  }
  std::shared_ptr<const EnergyModel> recession_model() const override {
    return std::make_shared<LaminateRecessionModel>();
  }
  std::string describe() const override { return "laminate-envelope"; }
};

ModelPtr make_convex_norm_model() { return std::make_shared<ConvexNormModel>(); }
ModelPtr make_separable_laminate_model() { return std::make_shared<SeparableLaminateModel>(); }
ModelPtr make_laminate_envelope_model() { return std::make_shared<LaminateEnvelopeModel>(); }

// --- operations ---------------------------------------------------------

double eval_density(const EnergyModel& model, const Mat33& xi) {
  if (!finite(xi)) throw domain_error("non-finite matrix");
  return model.eval(xi);
}

double recession_density(const EnergyModel& model, const Mat33& xi, std::span<const double> ladder,
                         bool force_ladder, double* residual, double residual_tol) {
  if (!finite(xi)) throw domain_error("non-finite matrix");
  const double norm = xi.norm();
  if (norm == 0.0) {
    if (residual) *residual = 0.0;
    return 0.0;
  }
  if (model.has_closed_form_recession() && !force_ladder) {
    if (residual) *residual = 0.0;
    return model.recession_closed_form(xi);
  }
  if (ladder.size() < 3) throw domain_error("t_ladder needs at least 3 entries");
  for (size_t i = 1; i < ladder.size(); ++i)
    if (ladder[i] <= ladder[i - 1]) throw domain_error("t_ladder must be strictly increasing");
  if (ladder.back() < 1024.0) throw domain_error("t_ladder must reach 2^10");

  const Mat33 unit = xi / norm;
  const double r = model.constants().r;
  // Fit f(t) = a + c t^{-r} through the three largest ladder points.
  std::array<double, 3> t{}, f{};
  for (int k = 0; k < 3; ++k) {
    t[k] = ladder[ladder.size() - 3 + k];
    f[k] = model.eval(t[k] * unit) / t[k];
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = 0; k < 3; ++k) {
    const double x = std::pow(t[k], -r);
    sx += x;
    sy += f[k];
    sxx += x * x;
    sxy += x * f[k];
  }
  const double det = 3.0 * sxx - sx * sx;
  const double c = (3.0 * sxy - sx * sy) / det;
  const double a = (sy - c * sx) / 3.0;
  double res = 0.0;
  for (int k = 0; k < 3; ++k) res = std::max(res, std::abs(f[k] - (a + c * std::pow(t[k], -r))));
  if (residual) *residual = res;
  if (res > residual_tol * (1.0 + std::abs(a))) {
    std::ostringstream os;
    os << "recession extrapolation did not settle: residual " << res << " at f("
       << t[0] << ".." << t[2] << ") = " << f[0] << ", " << f[1] << ", " << f[2];
    throw convergence_error(os.str());
  }
  return std::max(a, 0.0) * norm;
}

namespace {

bool lex_less(const Vec3& a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) {
    if (a[i] < b[i] - 1e-15) return true;
    if (a[i] > b[i] + 1e-15) return false;
  }
  return false;
}

bool better_candidate(double val, const Vec3& b, double best_val, const Vec3& best_b) {
  if (val < best_val - 1e-12) return true;
  if (val > best_val + 1e-12) return false;
  const double n = b.norm(), bn = best_b.norm();
  if (n < bn - 1e-12) return true;
  if (n > bn + 1e-12) return false;
  return lex_less(b, best_b);
}

}  // namespace

PlanarInfimum w_zero(const EnergyModel& model, const Mat32& xi_bar) {
  if (!xi_bar.allFinite()) throw domain_error("non-finite matrix");
  if (auto cf = model.planar_infimum_closed_form(xi_bar)) return *cf;

  const auto& k = model.constants();
  // Coercivity beta'|b| <= W confines the infimum to this ball.
  const double radius = (k.beta / k.beta_prime) * (1.0 + xi_bar.norm());
  auto value = [&](const Vec3& b) { return model.eval(join(xi_bar, b)); };

  const int grid = 9;
  Vec3 best_b = Vec3::Zero();
  double best = value(best_b);
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j)
      for (int l = 0; l < grid; ++l) {
        Vec3 b(-radius + 2.0 * radius * i / (grid - 1), -radius + 2.0 * radius * j / (grid - 1),
               -radius + 2.0 * radius * l / (grid - 1));
        const double v = value(b);
        if (better_candidate(v, b, best, best_b)) {
          best = v;
          best_b = b;
        }
      }

  // Compass descent from the best grid point.
  double step = 2.0 * radius / (grid - 1);
  while (step > 1e-9) {
    bool moved = false;
    for (int axis = 0; axis < 3 && !moved; ++axis)
      for (int sgn = -1; sgn <= 1 && !moved; sgn += 2) {
        Vec3 b = best_b;
        b[axis] += sgn * step;
        const double v = value(b);
        if (v < best - 1e-14) {
          best = v;
          best_b = b;
          moved = true;
        }
      }
    if (!moved) step *= 0.5;
  }
  return {best, best_b};
}

// --- certification ------------------------------------------------------

CertificationReport certify(const EnergyModel& model, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> logmag(-2.0, 3.0);
  const auto& k = model.constants();
  const auto ladder = default_t_ladder();

  CertificationReport rep;
  rep.growth_slack = rep.recession_slack = rep.lipschitz_slack = 1e300;
  auto random_matrix = [&]() {
    Mat33 m;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = gauss(rng);
    const double n = m.norm();
    return n > 0 ? Mat33(m * (std::pow(10.0, logmag(rng)) / n)) : m;
  };

  for (int s = 0; s < samples; ++s) {
    const Mat33 xi = random_matrix();
    const double w = model.eval(xi), n = xi.norm();
    const double lower = w - k.beta_prime * n;
    const double upper = k.beta * (1.0 + n) - w;
    rep.growth_slack = std::min(rep.growth_slack, std::min(lower, upper));
    if (lower < 0 || upper < 0) rep.growth_ok = false;

    const double winf = recession_density(model, xi, ladder);
    const double rslack = k.C * (1.0 + std::pow(n, 1.0 - k.r)) - std::abs(winf - w);
    rep.recession_slack = std::min(rep.recession_slack, rslack);
    if (rslack < -1e-9) rep.recession_ok = false;

    const Mat33 xi2 = random_matrix();
    const double lslack = k.L * (xi - xi2).norm() - std::abs(w - model.eval(xi2));
    rep.lipschitz_slack = std::min(rep.lipschitz_slack, lslack);
    if (lslack < -1e-9) rep.lipschitz_ok = false;
  }
  return rep;
}

// --- JSON loading -------------------------------------------------------

namespace {

GrowthConstants constants_from_json(const nlohmann::json& j, GrowthConstants fallback) {
  GrowthConstants k = fallback;
  if (j.contains("constants")) {
    const auto& c = j.at("constants");
    k.beta_prime = c.value("beta_prime", k.beta_prime);
    k.beta = c.value("beta", k.beta);
    k.C = c.value("C", k.C);
    k.r = c.value("r", k.r);
    k.L = c.value("L", k.L);
  }
  return k;
}

}  // namespace

ModelPtr load_model_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw domain_error(std::string("model file is not valid JSON: ") + e.what());
  }
  const std::string kind = j.value("kind", "");
  ModelPtr model;
  if (kind == "convex-norm") {
    model = make_convex_norm_model();
  } else if (kind == "separable-laminate") {
    model = make_separable_laminate_model();
  } else if (kind == "laminate-envelope") {
    model = make_laminate_envelope_model();
  } else if (kind == "user-table") {
    if (!j.contains("params")) throw domain_error("user-table model needs params");
    const auto& p = j.at("params");
    auto s = p.at("s_nodes").get<std::vector<double>>();
    auto t = p.at("t_nodes").get<std::vector<double>>();
    auto v = p.at("values").get<std::vector<double>>();
    GrowthConstants k = constants_from_json(j, GrowthConstants{0.5, 3.0, 2.0, 0.5, 3.0});
    model = make_table_model(std::move(s), std::move(t), std::move(v), k,
                             p.value("convex", false));
  } else {
    throw domain_error("unknown model kind '" + kind + "'");
  }
  const int samples = j.contains("certify") ? j.at("certify").value("samples", 256) : 256;
  const auto rep = certify(*model, samples, 0);
  if (!rep.ok()) {
    std::ostringstream os;
    os << "model failed certification (growth " << rep.growth_slack << ", recession "
       << rep.recession_slack << ", lipschitz " << rep.lipschitz_slack << ")";
    throw domain_error(os.str());
  }
  return model;
}

ModelPtr load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw domain_error("model file not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model_json(ss.str());
}

}  // namespace membrelax
