#include "membrelax/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace membrelax {

namespace {

SolverBudget cheap_budget(std::uint64_t seed) {
  SolverBudget b;
  b.multi_start = 3;
  b.max_iters = 40;
  b.lambda_coarse = 3;
  b.lambda_golden = 4;
  b.smoothing = {1e-1};
  b.seed = seed;
  return b;
}

SolverBudget medium_budget(std::uint64_t seed) {
  SolverBudget b;
  b.multi_start = 7;
  b.max_iters = 80;
  b.lambda_coarse = 5;
  b.lambda_golden = 8;
  b.seed = seed;
  return b;
}

std::vector<std::pair<Mat32, Vec3>> sample_pairs(int count, std::uint64_t seed, double max_norm) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> mag(0.0, max_norm);
  std::vector<std::pair<Mat32, Vec3>> out;
  for (int s = 0; s < count; ++s) {
    Eigen::Matrix<double, 9, 1> dir;
    for (int i = 0; i < 9; ++i) dir[i] = gauss(rng);
    dir.normalize();
    dir *= mag(rng);
    Mat32 xi;
    xi << dir[0], dir[1], dir[2], dir[3], dir[4], dir[5];
    out.push_back({xi, Vec3(dir[6], dir[7], dir[8])});
  }
  return out;
}

Mat32 unit_xi() {
  Mat32 xi = Mat32::Zero();
  xi(0, 0) = 1.0;
  return xi;
}

Mat32 mixed_xi() {
  Mat32 xi;
  xi << 0.4, -0.2, 0.1, 0.5, -0.3, 0.2;
  return xi;
}

double laminate_g(const Vec3& b) {
  const Vec3 e3(0, 0, 1);
  return std::min((b - e3).norm(), (b + e3).norm()) + 0.5 * b.norm();
}

// Two-point laminate enumeration for Cg on the b3 axis: minimize
// theta g(b+) + (1-theta) g(b-) over symmetric pairs with the prescribed
// mean, densely in the offset.
double laminate_axis_envelope(double b3) {
  double best = laminate_g(Vec3(0, 0, b3));
  const int n = 400;
  for (int i = 1; i <= n; ++i) {
    const double s = 3.0 * i / n;  // half-spread of the pair
    for (int j = 1; j < 64; ++j) {
      const double theta = static_cast<double>(j) / 64.0;
      // mean theta*bp + (1-theta)*bm = b3 with bp - bm = 2s.
      const double bm = b3 - 2.0 * s * theta;
      const double bp = bm + 2.0 * s;
      best = std::min(best,
                      theta * laminate_g(Vec3(0, 0, bp)) + (1 - theta) * laminate_g(Vec3(0, 0, bm)));
    }
  }
  return best;
}

struct CheckContext {
  ModelPtr convex;
  ModelPtr laminate;
  ModelPtr envelope;
  CellGrid grid;
  std::uint64_t seed = 0;
};

CheckResult check_convex_collapse(const CheckContext& ctx) {
  CheckResult res{"convex-collapse", true, 1.0, ""};
  const auto samples = sample_pairs(10, ctx.seed, 2.0);
  const auto rows = qstar_sweep(*ctx.convex, samples, ctx.grid, cheap_budget(ctx.seed));
  double worst = 0.0;
  for (const auto& row : rows) {
    if (!row.solution) {
      res.pass = false;
      res.detail = "solver error: " + row.error;
      return res;
    }
    const double expected =
        std::sqrt(1.0 + row.xi_bar.squaredNorm() + row.b.squaredNorm());
    worst = std::max(worst, std::abs(row.solution->value - expected) / expected);
  }
  res.slack = 0.02 - worst;
  res.pass = worst <= 0.02;
  std::ostringstream os;
  os << "max relative gap " << worst << " over 10 samples (limit 0.02)";
  res.detail = os.str();
  return res;
}

CheckResult check_growth(const CheckContext& ctx) {
  CheckResult res{"growth", true, 1e300, ""};
  const double q_tol = quadrature_tolerance(ctx.grid);
  int violations = 0;
  for (const auto& model : {ctx.convex, ctx.laminate}) {
    const auto& gc = model->constants();
    const auto samples = sample_pairs(10, ctx.seed, 2.0);
    const auto rows = qstar_sweep(*model, samples, ctx.grid, cheap_budget(ctx.seed));
    for (const auto& row : rows) {
      if (!row.solution) {
        res.pass = false;
        res.detail = "solver error: " + row.error;
        return res;
      }
      const double v = row.solution->value;
      const double norm1 = row.xi_bar.norm() + row.b.norm();
      const double lower = gc.beta_prime * norm1 - q_tol;
      const double upper = gc.beta * (1.0 + norm1) + q_tol;
      const double feasible =
          eval_density(*model, join(row.xi_bar, row.b)) + q_tol;
      res.slack = std::min({res.slack, v - lower, upper - v, feasible - v});
      if (v < lower || v > upper || v > feasible) ++violations;
    }
  }
  res.pass = violations == 0;
  std::ostringstream os;
  os << violations << " violations over 20 samples, min margin " << res.slack;
  res.detail = os.str();
  return res;
}

CheckResult check_laminate_oracle(const CheckContext& ctx) {
  CheckResult res{"laminate-oracle", true, 0.0, ""};
  const double oracle = laminate_axis_envelope(0.0);
  const double v =
      qstar(*ctx.laminate, Mat32::Zero(), Vec3::Zero(), ctx.grid, medium_budget(ctx.seed)).value;
  const double rel = std::abs(v - oracle) / oracle;
  res.slack = 0.03 - rel;
  res.pass = rel <= 0.03;
  std::ostringstream os;
  os << "qstar(0|0) = " << v << " vs two-point enumeration " << oracle << " (limit 3%)";
  res.detail = os.str();
  return res;
}

CheckResult check_infb(const CheckContext& ctx) {
  CheckResult res{"infb-identity", true, 1e300, ""};
  const std::vector<Mat32> xis = {Mat32::Zero(), unit_xi(), mixed_xi()};
  const auto budget = cheap_budget(ctx.seed);
  double worst = 0.0;
  for (const auto& model : {ctx.convex, ctx.laminate}) {
    for (const auto& xi : xis) {
      std::vector<std::pair<Mat32, Vec3>> samples;
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
          for (int k = 0; k < 5; ++k)
            samples.push_back(
                {xi, Vec3(-1.5 + 0.75 * i, -1.5 + 0.75 * j, -1.5 + 0.75 * k)});
      samples.push_back({xi, w_zero(*model, xi).argmin});
      const auto rows = qstar_sweep(*model, samples, ctx.grid, budget);
      double grid_min = 1e300;
      for (const auto& row : rows) {
        if (!row.solution) {
          res.pass = false;
          res.detail = "solver error: " + row.error;
          return res;
        }
        grid_min = std::min(grid_min, row.solution->value);
      }
      const double qw0 = qw_zero(*model, xi, ctx.grid, budget);
      const double rel = std::abs(grid_min - qw0) / std::max(std::abs(qw0), 1e-9);
      worst = std::max(worst, rel);
    }
  }
  res.slack = 0.03 - worst;
  res.pass = worst <= 0.03;
  std::ostringstream os;
  os << "max relative gap " << worst << " between the b-grid minimum and qw_zero (limit 3%)";
  res.detail = os.str();
  return res;
}

CheckResult check_idempotence(const CheckContext& ctx) {
  CheckResult res{"idempotence", true, 0.0, ""};
  const std::vector<std::pair<Mat32, Vec3>> samples = {
      {Mat32::Zero(), Vec3::Zero()},       {Mat32::Zero(), Vec3(0, 0, 0.5)},
      {Mat32::Zero(), Vec3(0, 0, -0.5)},   {unit_xi(), Vec3(0, 0, 1)},
      {0.7 * mixed_xi(), Vec3(0, 0, -1)},
  };
  const auto budget = medium_budget(ctx.seed);
  double worst = 0.0;
  for (const auto& [xi, b] : samples) {
    const double from_w = qstar(*ctx.laminate, xi, b, ctx.grid, budget).value;
    const double from_env = qstar(*ctx.envelope, xi, b, ctx.grid, budget).value;
    worst = std::max(worst, std::abs(from_w - from_env) / std::max(std::abs(from_env), 1e-9));
  }
  res.slack = 0.03 - worst;
  res.pass = worst <= 0.03;
  std::ostringstream os;
  os << "max relative gap " << worst << " between qstar(W) and qstar(envelope) (limit 3%)";
  res.detail = os.str();
  return res;
}

CheckResult check_surface(const CheckContext& ctx) {
  CheckResult res{"surface-density", true, 0.0, ""};
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const std::vector<JumpSpec> specs = {
      {Vec3(1, 0, 0), Vec2(0, 1), Vec3::Zero()},
      {Vec3(0, 0, 1), Vec2(inv_sqrt2, inv_sqrt2), Vec3::Zero()},
      {Vec3::Zero(), Vec2(0, 1), Vec3(0, 0, 1)},
      {Vec3(0, 1, 0), Vec2(1, 0), Vec3(0, 0, 0.5)},
  };
  const auto budget = medium_budget(ctx.seed);
  const auto ladder = default_t_ladder();
  double worst = 0.0;
  for (const auto& model : {ctx.convex, ctx.laminate}) {
    for (const auto& spec : specs) {
      const double surf = gamma_surface(*model, spec, ctx.grid, budget);
      const double rec =
          qstar_recession(*model, outer32(spec.z, spec.nu), spec.b, ctx.grid, budget, ladder);
      worst = std::max(worst, std::abs(surf - rec) / std::max(std::abs(rec), 0.25));
    }
  }
  res.slack = 0.04 - worst;
  res.pass = worst <= 0.04;
  std::ostringstream os;
  os << "max relative gap " << worst
     << " between gamma_surface and qstar_recession over 8 specs (limit 4%)";
  res.detail = os.str();
  return res;
}

CheckResult check_rotated(const CheckContext& ctx) {
  CheckResult res{"rotated-cell", true, 1e300, ""};
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const std::vector<std::pair<Mat32, Vec3>> samples = {
      {Mat32::Zero(), Vec3(0, 0, 1)},
      {unit_xi(), Vec3::Zero()},
      {mixed_xi(), Vec3(0, 0, -1)},
      {0.5 * unit_xi(), Vec3(0.5, 0, 0.5)},
  };
  const auto budget = medium_budget(ctx.seed);
  double worst = 0.0;
  for (const auto& model : {ctx.convex, ctx.laminate}) {
    for (const auto& [xi, b] : samples) {
      const double plain = qstar(*model, xi, b, ctx.grid, budget).value;
      const double identity =
          qstar_rotated(*model, xi, b, Vec2(0, 1), ctx.grid, budget).value;
      if (identity != plain) {
        res.pass = false;
        res.detail = "nu = e2 did not reproduce qstar exactly";
        return res;
      }
      const double rotated =
          qstar_rotated(*model, xi, b, Vec2(inv_sqrt2, inv_sqrt2), ctx.grid, budget).value;
      worst = std::max(worst, std::abs(rotated - plain) / std::max(std::abs(plain), 0.25));
    }
  }
  res.slack = 0.04 - worst;
  res.pass = worst <= 0.04;
  std::ostringstream os;
  os << "max relative gap " << worst << " at nu = 45 degrees over 8 samples (limit 4%)";
  res.detail = os.str();
  return res;
}

CheckResult check_directional_convexity(const CheckContext& ctx) {
  CheckResult res{"directional-convexity", true, 0.0, ""};
  const double q_tol = quadrature_tolerance(ctx.grid);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const Vec2 nu45(inv_sqrt2, inv_sqrt2);
  using Pair = std::pair<Mat32, Vec3>;
  const std::vector<std::pair<Pair, Pair>> lines = {
      {{Mat32::Zero(), Vec3::Zero()}, {outer32(Vec3(1, 0, 0), Vec2(0, 1)), Vec3::Zero()}},
      {{Mat32::Zero(), Vec3::Zero()}, {Mat32::Zero(), Vec3(0, 0, 1)}},
      {{mixed_xi(), Vec3::Zero()}, {outer32(Vec3(1, 0, 0), Vec2(0, 1)), Vec3(0, 0, 1)}},
      {{Mat32::Zero(), Vec3(1, 0, 0)}, {outer32(Vec3(0, 0, 1), Vec2(1, 0)), Vec3::Zero()}},
      {{0.3 * mixed_xi(), Vec3(0, 0.2, 0)}, {outer32(Vec3(0, 1, 0), nu45), Vec3(0.5, 0, 0.5)}},
  };
  const std::vector<double> t_samples = {-2.0, -1.0, 0.0, 1.0, 2.0};
  SolverBudget budget = medium_budget(ctx.seed);
  budget.max_iters = 60;
  double worst = 0.0;
  for (const auto& model : {ctx.convex, ctx.laminate}) {
    for (const auto& [base, dir] : lines) {
      const auto rep = check_directional_convexity(*model, base, dir, t_samples, ctx.grid, budget);
      worst = std::max(worst, rep.worst_violation);
    }
  }
  res.slack = q_tol - worst;
  res.pass = worst <= q_tol;
  std::ostringstream os;
  os << "worst midpoint violation " << worst << " over 10 lines (limit q_tol = " << q_tol << ")";
  res.detail = os.str();
  return res;
}

}  // namespace

std::vector<std::string> verification_check_names() {
  return {"growth",      "convex-collapse", "laminate-oracle",        "infb-identity",
          "idempotence", "surface-density", "rotated-cell",           "directional-convexity"};
}

std::vector<CheckResult> run_verification(const std::vector<std::string>& only,
                                          std::uint64_t seed, const CellGrid& grid) {
  CheckContext ctx;
  ctx.convex = make_convex_norm_model();
  ctx.laminate = make_separable_laminate_model();
  ctx.envelope = make_laminate_envelope_model();
  ctx.grid = grid;
  ctx.seed = seed;

  const auto known = verification_check_names();
  for (const auto& name : only)
    if (std::find(known.begin(), known.end(), name) == known.end())
      throw domain_error("unknown check: " + name);

  auto wanted = [&](const std::string& name) {
    if (only.empty()) return true;
    return std::find(only.begin(), only.end(), name) != only.end();
  };

  std::vector<CheckResult> results;
  if (wanted("growth")) results.push_back(check_growth(ctx));
  if (wanted("convex-collapse")) results.push_back(check_convex_collapse(ctx));
  if (wanted("laminate-oracle")) results.push_back(check_laminate_oracle(ctx));
  if (wanted("infb-identity")) results.push_back(check_infb(ctx));
  if (wanted("idempotence")) results.push_back(check_idempotence(ctx));
  if (wanted("surface-density")) results.push_back(check_surface(ctx));
  if (wanted("rotated-cell")) results.push_back(check_rotated(ctx));
  if (wanted("directional-convexity")) results.push_back(check_directional_convexity(ctx));
  return results;
}

}  // namespace membrelax
