#include "membrelax/cell.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <future>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lbfgs.hpp"

namespace membrelax {

namespace {

using Eigen::VectorXd;

int env_thread_cap() {
  if (const char* v = std::getenv("MEMBRELAX_THREADS")) {
    const int n = std::atoi(v);
    if (n >= 1) return n;
  }
  return 1;
}

// --- 3D cell objective --------------------------------------------------
// DOF: nodal values of phi, flat [((k*na + j)*na + i)*3 + c]. The mean-
// grad3 constraint is folded into the objective by composing with the
// affine shift phi -> phi + x3 (b/lambda - mean grad3 phi), so the outer
// minimization is unconstrained and the shifted field is always feasible.
class CellObjective {
 public:
  CellObjective(const EnergyModel& model, const Mat32& xi_bar, const Vec3& b, const CellGrid& grid)
      : model_(model), xi_bar_(xi_bar), b_(b), na_(grid.n_alpha), n3_(grid.n_three) {}

  int dof() const { return 3 * na_ * na_ * (n3_ + 1); }

  void set_lambda(double lambda) { lambda_ = lambda; }
  double lambda() const { return lambda_; }

  double x3_of(int k) const { return -0.5 + static_cast<double>(k) / n3_; }

  Vec3 mean_grad3(const VectorXd& x) const {
    Vec3 m = Vec3::Zero();
    const int top = n3_ * na_ * na_;
    for (int p = 0; p < na_ * na_; ++p)
      m += x.segment<3>(3 * (top + p)) - x.segment<3>(3 * p);
    return m / (na_ * na_);
  }

  VectorXd shifted(const VectorXd& x) const {
    const Vec3 corr = b_ / lambda_ - mean_grad3(x);
    VectorXd out = x;
    for (int k = 0; k <= n3_; ++k) {
      const double x3 = x3_of(k);
      for (int p = 0; p < na_ * na_; ++p)
        out.segment<3>(3 * (k * na_ * na_ + p)) += x3 * corr;
    }
    return out;
  }

  // Energy of the *shifted* field; grad composed with the shift's adjoint.
  double eval(const VectorXd& x, VectorXd* grad, double delta) const {
    const VectorXd phi = shifted(x);
    if (grad) grad->setZero();
    const double w = 1.0 / (na_ * na_ * n3_);
    double energy = 0.0;
    Mat33 G, dW;
    for (int k = 0; k < n3_; ++k)
      for (int j = 0; j < na_; ++j)
        for (int i = 0; i < na_; ++i) {
          const int i1 = (i + 1) % na_, j1 = (j + 1) % na_;
          const int p00 = idx(i, j, k), pi = idx(i1, j, k), pj = idx(i, j1, k),
                    pk = idx(i, j, k + 1);
          G.col(0) = xi_bar_.col(0) + na_ * (phi.segment<3>(pi) - phi.segment<3>(p00));
          G.col(1) = xi_bar_.col(1) + na_ * (phi.segment<3>(pj) - phi.segment<3>(p00));
          G.col(2) = lambda_ * n3_ * (phi.segment<3>(pk) - phi.segment<3>(p00));
          if (delta > 0.0) {
            energy += w * model_.eval_smoothed(G, delta);
          } else {
            energy += w * model_.eval(G);
          }
          if (grad) {
            dW = model_.grad_smoothed(G, delta > 0.0 ? delta : 1e-9);
            const Vec3 c0 = (w * na_) * dW.col(0);
            const Vec3 c1 = (w * na_) * dW.col(1);
            const Vec3 c2 = (w * lambda_ * n3_) * dW.col(2);
            grad->segment<3>(pi) += c0;
            grad->segment<3>(pj) += c1;
            grad->segment<3>(pk) += c2;
            grad->segment<3>(p00) -= c0 + c1 + c2;
          }
        }
    if (grad) {
      // Adjoint of the shift: g -> g - l^T (X^T g).
      Vec3 xg = Vec3::Zero();
      for (int k = 0; k <= n3_; ++k) {
        const double x3 = x3_of(k);
        for (int p = 0; p < na_ * na_; ++p)
          xg += x3 * grad->segment<3>(3 * (k * na_ * na_ + p));
      }
      const Vec3 v = xg / (na_ * na_);
      const int top = n3_ * na_ * na_;
      for (int p = 0; p < na_ * na_; ++p) {
        grad->segment<3>(3 * (top + p)) -= v;
        grad->segment<3>(3 * p) += v;
      }
    }
    return energy;
  }

  int idx(int i, int j, int k) const { return 3 * ((k * na_ + j) * na_ + i); }

 private:
  const EnergyModel& model_;
  Mat32 xi_bar_;
  Vec3 b_;
  int na_, n3_;
  double lambda_ = 1.0;
};

struct InnerResult {
  double exact_value = 0.0;
  VectorXd x;
  int iterations = 0;
};

// Smoothing continuation: descend on the Huber surrogate through the
// schedule, then evaluate the exact density at the final field.
InnerResult solve_inner(CellObjective& obj, VectorXd x, std::span<const double> schedule,
                        int max_iters, double grad_tol) {
  // Track the best *exact* iterate across the continuation (including the
  // start), so smoothing drift can never push the reported value above a
  // feasible competitor's energy.
  InnerResult res;
  res.exact_value = obj.eval(x, nullptr, 0.0);
  res.x = x;
  for (double delta : schedule) {
    auto fg = [&](const VectorXd& v, VectorXd& g) { return obj.eval(v, &g, delta); };
    auto r = detail::lbfgs_minimize(x, fg, max_iters, grad_tol);
    res.iterations += r.iterations;
    const double exact = obj.eval(x, nullptr, 0.0);
    if (exact < res.exact_value) {
      res.exact_value = exact;
      res.x = x;
    }
  }
  return res;
}

std::vector<VectorXd> make_starts(const EnergyModel& model, const Mat32& xi_bar, const Vec3& b,
                                  const CellGrid& grid, int count, std::uint64_t seed,
                                  double lambda) {
  const int na = grid.n_alpha, n3 = grid.n_three;
  const int dof = 3 * na * na * (n3 + 1);
  const double scale = 1.0 + xi_bar.norm() + b.norm();
  std::vector<VectorXd> starts;
  starts.push_back(VectorXd::Zero(dof));

  // Single-mode laminates in x3 aligned with the w_zero minimizer: the
  // scaled transverse gradient alternates between +-b_w, with the
  // interface at a few fixed fractions of the thickness so fractional
  // lamination weights are reachable from a start.
  const Vec3 bw = w_zero(model, xi_bar).argmin;
  if (bw.norm() > 1e-12) {
    const int cuts[] = {n3 / 2, n3 / 4, (3 * n3) / 4};
    for (int cut : cuts) {
      if (cut <= 0 || cut >= n3) continue;
      for (int sgn = 1; sgn >= -1; sgn -= 2) {
        VectorXd x = VectorXd::Zero(dof);
        double cum = 0.0;
        for (int k = 0; k <= n3; ++k) {
          const Vec3 level = (sgn * cum / n3) * (bw / lambda);
          for (int p = 0; p < na * na; ++p) x.segment<3>(3 * (k * na * na + p)) = level;
          cum += (k < cut) ? 1.0 : -1.0;
        }
        starts.push_back(std::move(x));
        if (static_cast<int>(starts.size()) >= count) return starts;
      }
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  while (static_cast<int>(starts.size()) < count) {
    VectorXd x(dof);
    for (int p = 0; p < dof; ++p) x[p] = 0.4 * scale / na * gauss(rng);
    starts.push_back(std::move(x));
  }
  return starts;
}

struct LambdaPick {
  double log10_lambda = 0.0;
  bool at_bound = false;
};

}  // namespace

Vec3 CellField::sample(const Vec2& y_alpha, double x3) const {
  const int na = grid.n_alpha, n3 = grid.n_three;
  double fs = (y_alpha.x() + 0.5) * na;
  double ft = (y_alpha.y() + 0.5) * na;
  double fk = std::clamp((x3 + 0.5) * n3, 0.0, static_cast<double>(n3));
  fs -= na * std::floor(fs / na);
  ft -= na * std::floor(ft / na);
  const int i = std::min(static_cast<int>(fs), na - 1);
  const int j = std::min(static_cast<int>(ft), na - 1);
  const int k = std::min(static_cast<int>(fk), n3 - 1);
  const double u = fs - i, v = ft - j, w = fk - k;
  const int i1 = (i + 1) % na, j1 = (j + 1) % na;
  Vec3 out = Vec3::Zero();
  for (int dk = 0; dk < 2; ++dk) {
    const double wk = dk ? w : 1.0 - w;
    out += wk * ((1 - u) * (1 - v) * at(i, j, k + dk) + u * (1 - v) * at(i1, j, k + dk) +
                 (1 - u) * v * at(i, j1, k + dk) + u * v * at(i1, j1, k + dk));
  }
  return out;
}

std::string CellField::to_json() const {
  nlohmann::json j;
  j["grid"] = {{"n_alpha", grid.n_alpha}, {"n_three", grid.n_three}};
  std::vector<double> flat;
  flat.reserve(values.size() * 3);
  for (const auto& v : values) {
    flat.push_back(v.x());
    flat.push_back(v.y());
    flat.push_back(v.z());
  }
  j["values"] = flat;
  return j.dump();
}

CellField CellField::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  CellGrid g{j.at("grid").at("n_alpha").get<int>(), j.at("grid").at("n_three").get<int>()};
  g.validate();
  CellField f(g);
  const auto flat = j.at("values").get<std::vector<double>>();
  if (flat.size() != f.values.size() * 3) throw domain_error("cell field size mismatch");
  for (size_t p = 0; p < f.values.size(); ++p)
    f.values[p] = Vec3(flat[3 * p], flat[3 * p + 1], flat[3 * p + 2]);
  return f;
}

std::string CellSolution::to_json() const {
  nlohmann::json j;
  j["value"] = value;
  j["lambda"] = lambda;
  j["diagnostics"] = {{"iterations", diag.iterations},
                      {"restarts", diag.restarts},
                      {"lambda_at_bound", diag.lambda_at_bound},
                      {"constraint_residual", diag.constraint_residual}};
  j["field"] = nlohmann::json::parse(field.to_json());
  return j.dump();
}

CellSolution qstar(const EnergyModel& model, const Mat32& xi_bar, const Vec3& b,
                   const CellGrid& grid, const SolverBudget& budget, const CellField* warm_start) {
  grid.validate();
  if (!xi_bar.allFinite() || !b.allFinite()) throw domain_error("non-finite cell data");

  const double scale = 1.0 + xi_bar.norm() + b.norm();
  const double grad_tol = budget.grad_tol * scale;
  CellObjective obj(model, xi_bar, b, grid);
  int total_iters = 0;

  auto starts_at = [&](double lambda) {
    auto starts = make_starts(model, xi_bar, b, grid, budget.multi_start, budget.seed, lambda);
    if (warm_start) {
      if (warm_start->grid.n_alpha == grid.n_alpha && warm_start->grid.n_three == grid.n_three) {
        VectorXd x(obj.dof());
        for (size_t p = 0; p < warm_start->values.size(); ++p)
          x.segment<3>(3 * p) = warm_start->values[p];
        starts.insert(starts.begin(), std::move(x));
      } else {
        // Prolongate by sampling the interpolant at the new node positions.
        CellField fine(grid);
        VectorXd x(obj.dof());
        for (int k = 0; k <= grid.n_three; ++k)
          for (int j = 0; j < grid.n_alpha; ++j)
            for (int i = 0; i < grid.n_alpha; ++i) {
              const Vec2 ya(-0.5 + static_cast<double>(i) / grid.n_alpha,
                            -0.5 + static_cast<double>(j) / grid.n_alpha);
              x.segment<3>(obj.idx(i, j, k)) =
                  warm_start->sample(ya, -0.5 + static_cast<double>(k) / grid.n_three);
            }
        starts.insert(starts.begin(), std::move(x));
      }
    }
    return starts;
  };

  // Phase A: rank starts at lambda = 1 on a light budget.
  obj.set_lambda(1.0);
  std::vector<VectorXd> starts = starts_at(1.0);
  const double first_delta[] = {budget.smoothing.front()};
  double best_val = 1e300;
  VectorXd champion;
  for (const auto& s : starts) {
    auto r = solve_inner(obj, s, first_delta, std::max(10, budget.max_iters / 4), grad_tol);
    total_iters += r.iterations;
    if (r.exact_value < best_val) {
      best_val = r.exact_value;
      champion = std::move(r.x);
    }
  }

  // Phase B: coarse scan on log lambda, warm-chained.
  const std::vector<double> mid_schedule(budget.smoothing.begin(),
                                         budget.smoothing.begin() +
                                             std::min<size_t>(2, budget.smoothing.size()));
  const int nc = std::max(3, budget.lambda_coarse);
  std::vector<double> logl(nc), vals(nc);
  VectorXd chain = champion;
  int best_i = 0;
  for (int i = 0; i < nc; ++i) {
    logl[i] = budget.log10_lambda_min +
              (budget.log10_lambda_max - budget.log10_lambda_min) * i / (nc - 1);
  }
  // Visit lambda = 1 region first so the chain starts from the champion.
  std::vector<int> order(nc);
  for (int i = 0; i < nc; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int c) { return std::abs(logl[a]) < std::abs(logl[c]); });
  std::vector<VectorXd> fields(nc);
  for (int oi : order) {
    obj.set_lambda(std::pow(10.0, logl[oi]));
    auto r = solve_inner(obj, chain, mid_schedule, std::max(10, budget.max_iters / 2), grad_tol);
    total_iters += r.iterations;
    vals[oi] = r.exact_value;
    fields[oi] = r.x;
    chain = fields[oi];
  }
  double best_scan = 1e300;
  for (int i = 0; i < nc; ++i) {
    const bool better = vals[i] < best_scan - 1e-12 ||
                        (vals[i] < best_scan + 1e-12 && std::abs(logl[i]) < std::abs(logl[best_i]));
    if (better) {
      best_scan = vals[i];
      best_i = i;
    }
  }

  // Phase C: golden-section refinement of log lambda in the best bracket.
  double lo = logl[std::max(0, best_i - 1)], hi = logl[std::min(nc - 1, best_i + 1)];
  VectorXd warm_field = fields[best_i];
  double warm_val = vals[best_i];
  double warm_logl = logl[best_i];
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  auto probe = [&](double ll) {
    obj.set_lambda(std::pow(10.0, ll));
    auto r = solve_inner(obj, warm_field, mid_schedule, std::max(10, budget.max_iters / 2),
                         grad_tol);
    total_iters += r.iterations;
    if (r.exact_value < warm_val) {
      warm_val = r.exact_value;
      warm_field = r.x;
      warm_logl = ll;
    }
    return r.exact_value;
  };
  double a = lo, c = hi;
  double x1 = c - gr * (c - a), x2 = a + gr * (c - a);
  double f1 = probe(x1), f2 = probe(x2);
  for (int it = 0; it < budget.lambda_golden; ++it) {
    if (f1 <= f2) {
      c = x2;
      x2 = x1;
      f2 = f1;
      x1 = c - gr * (c - a);
      f1 = probe(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (c - a);
      f2 = probe(x2);
    }
  }

  const double best_logl = warm_logl;
  const bool at_bound = best_logl < budget.log10_lambda_min + 0.05 ||
                        best_logl > budget.log10_lambda_max - 0.05;
  const double lambda = std::pow(10.0, best_logl);

  // Phase D: full multi-start at the selected lambda.
  obj.set_lambda(lambda);
  starts = starts_at(lambda);
  starts.push_back(warm_field);
  double final_val = 1e300;
  VectorXd final_x;
  for (const auto& s : starts) {
    auto r = solve_inner(obj, s, budget.smoothing, budget.max_iters, grad_tol);
    total_iters += r.iterations;
    if (r.exact_value < final_val) {
      final_val = r.exact_value;
      final_x = std::move(r.x);
    }
  }

  CellSolution sol;
  sol.value = final_val;
  sol.lambda = lambda;
  sol.field = CellField(grid);
  const VectorXd phi = obj.shifted(final_x);
  for (size_t p = 0; p < sol.field.values.size(); ++p)
    sol.field.values[p] = phi.segment<3>(3 * p);
  sol.diag.iterations = total_iters;
  sol.diag.restarts = static_cast<int>(starts.size());
  sol.diag.lambda_at_bound = at_bound;
  sol.diag.constraint_residual = (lambda * obj.mean_grad3(phi) - b).norm();
  return sol;
}

std::vector<SweepRow> qstar_sweep(const EnergyModel& model,
                                  const std::vector<std::pair<Mat32, Vec3>>& samples,
                                  const CellGrid& grid, const SolverBudget& budget) {
  if (samples.empty()) throw domain_error("empty sweep sample list");
  std::vector<SweepRow> rows(samples.size());
  const int threads = std::min<int>(env_thread_cap(), static_cast<int>(samples.size()));
  auto run_row = [&](size_t r) {
    rows[r].xi_bar = samples[r].first;
    rows[r].b = samples[r].second;
    try {
      rows[r].solution = qstar(model, samples[r].first, samples[r].second, grid, budget);
    } catch (const std::exception& e) {
      rows[r].error = e.what();
    }
  };
  if (threads <= 1) {
    for (size_t r = 0; r < samples.size(); ++r) run_row(r);
  } else {
    std::vector<std::future<void>> futs;
    std::atomic<size_t> next{0};
    for (int t = 0; t < threads; ++t)
      futs.push_back(std::async(std::launch::async, [&]() {
        for (size_t r = next.fetch_add(1); r < rows.size(); r = next.fetch_add(1)) run_row(r);
      }));
    for (auto& f : futs) f.get();
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(12);
  os << "xi11,xi12,xi21,xi22,xi31,xi32,b1,b2,b3,value,lambda,iters,flag\n";
  for (const auto& r : rows) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j) os << r.xi_bar(i, j) << ",";
    os << r.b.x() << "," << r.b.y() << "," << r.b.z() << ",";
    if (r.solution) {
      os << r.solution->value << "," << r.solution->lambda << "," << r.solution->diag.iterations
         << "," << (r.solution->diag.lambda_at_bound ? "lambda_bound" : "ok");
    } else {
      os << "nan,nan,0,error:" << r.error;
    }
    os << "\n";
  }
  return os.str();
}

// --- 2D relaxation of W_0 ----------------------------------------------

namespace {

double exact_w0(const EnergyModel& model, const Mat32& xi_bar) {
  if (auto cf = model.planar_infimum_closed_form(xi_bar)) return cf->value;
  return w_zero(model, xi_bar).value;
}

class PlanarObjective {
 public:
  PlanarObjective(const EnergyModel& model, const Mat32& xi_bar, int na)
      : model_(model), xi_bar_(xi_bar), na_(na) {}

  int dof() const { return 3 * na_ * na_; }

  double eval(const VectorXd& x, VectorXd* grad, double delta) const {
    if (grad) grad->setZero();
    const double w = 1.0 / (na_ * na_);
    double energy = 0.0;
    for (int j = 0; j < na_; ++j)
      for (int i = 0; i < na_; ++i) {
        const int i1 = (i + 1) % na_, j1 = (j + 1) % na_;
        const int p00 = 3 * (j * na_ + i), pi = 3 * (j * na_ + i1), pj = 3 * (j1 * na_ + i);
        Mat32 G = xi_bar_;
        G.col(0) += na_ * (x.segment<3>(pi) - x.segment<3>(p00));
        G.col(1) += na_ * (x.segment<3>(pj) - x.segment<3>(p00));
        if (delta > 0.0) {
          Mat32 dW;
          energy += w * model_.planar_infimum_smoothed(G, delta, grad ? &dW : nullptr);
          if (grad) {
            const Vec3 c0 = (w * na_) * dW.col(0);
            const Vec3 c1 = (w * na_) * dW.col(1);
            grad->segment<3>(pi) += c0;
            grad->segment<3>(pj) += c1;
            grad->segment<3>(p00) -= c0 + c1;
          }
        } else {
          energy += w * exact_w0(model_, G);
        }
      }
    return energy;
  }

 private:
  const EnergyModel& model_;
  Mat32 xi_bar_;
  int na_;
};

}  // namespace

double qw_zero(const EnergyModel& model, const Mat32& xi_bar, const CellGrid& grid,
               const SolverBudget& budget) {
  grid.validate();
  if (!xi_bar.allFinite()) throw domain_error("non-finite cell data");
  PlanarObjective obj(model, xi_bar, grid.n_alpha);
  const double grad_tol = budget.grad_tol * (1.0 + xi_bar.norm());

  std::mt19937_64 rng(budget.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<VectorXd> starts;
  starts.push_back(VectorXd::Zero(obj.dof()));
  const int n_random = std::max(1, budget.multi_start / 2 - 1);
  for (int s = 0; s < n_random; ++s) {
    VectorXd x(obj.dof());
    for (int p = 0; p < obj.dof(); ++p)
      x[p] = 0.4 * (1.0 + xi_bar.norm()) / grid.n_alpha * gauss(rng);
    starts.push_back(std::move(x));
  }

  double best = 1e300;
  for (auto& x : starts) {
    for (double delta : budget.smoothing) {
      auto fg = [&](const VectorXd& v, VectorXd& g) { return obj.eval(v, &g, delta); };
      detail::lbfgs_minimize(x, fg, budget.max_iters, grad_tol);
    }
    best = std::min(best, obj.eval(x, nullptr, 0.0));
  }
  return best;
}

// --- recessions ---------------------------------------------------------

double qstar_recession(const EnergyModel& model, const Mat32& xi_bar, const Vec3& b,
                       const CellGrid& grid, const SolverBudget& budget,
                       std::span<const double> ladder, double* residual, double residual_tol) {
  const double norm = std::sqrt(xi_bar.squaredNorm() + b.squaredNorm());
  if (norm == 0.0) throw domain_error("recession direction must be nonzero");
  if (ladder.size() < 3) throw domain_error("t_ladder needs at least 3 entries");
  for (size_t i = 1; i < ladder.size(); ++i)
    if (ladder[i] <= ladder[i - 1]) throw domain_error("t_ladder must be strictly increasing");
  if (ladder.back() < 1024.0) throw domain_error("t_ladder must reach 2^10");

  const Mat32 xu = xi_bar / norm;
  const Vec3 bu = b / norm;
  const double r = model.constants().r;
  std::array<double, 3> t{}, f{};
  for (int k = 0; k < 3; ++k) {
    t[k] = ladder[ladder.size() - 3 + k];
    f[k] = qstar(model, t[k] * xu, t[k] * bu, grid, budget).value / t[k];
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
  const double cfit = (3.0 * sxy - sx * sy) / det;
  const double afit = (sy - cfit * sx) / 3.0;
  double res = 0.0;
  for (int k = 0; k < 3; ++k)
    res = std::max(res, std::abs(f[k] - (afit + cfit * std::pow(t[k], -r))));
  if (residual) *residual = res;
  if (res > residual_tol * (1.0 + std::abs(afit))) {
    std::ostringstream os;
    os << "cell recession ladder did not settle: residual " << res << ", values " << f[0] << ", "
       << f[1] << ", " << f[2];
    throw convergence_error(os.str());
  }
  return std::max(afit, 0.0) * norm;
}

namespace {

// Pointwise ladder extrapolation of W^inf, for models without a closed
// form. Gradients fall back to finite differences; intended for small
// verification runs, not hot loops.
class ExtrapolatedRecessionModel final : public EnergyModel {
 public:
  ExtrapolatedRecessionModel(ModelPtr base, std::vector<double> ladder)
      : base_(std::move(base)), ladder_(std::move(ladder)) {
    constants_ = base_->constants();
    constants_.C = 0.0;
    convex_ = base_->is_convex();
    closed_recession_ = false;
  }
  double eval(const Mat33& xi) const override {
    return recession_density(*base_, xi, ladder_, true, nullptr, 1e300);
  }
  std::string describe() const override { return base_->describe() + ":recession-ladder"; }

 private:
  ModelPtr base_;
  std::vector<double> ladder_;
};

ModelPtr recession_as_model(const EnergyModel& model) {
  if (auto rec = model.recession_model()) return rec;
  return std::make_shared<ExtrapolatedRecessionModel>(
      std::shared_ptr<const EnergyModel>(&model, [](const EnergyModel*) {}), default_t_ladder());
}

// Integrand conjugated by an in-plane rotation: W_R(eta|b) = W(eta R^T|b).
class RotatedModel final : public EnergyModel {
 public:
  RotatedModel(ModelPtr base, const Mat22& R) : base_(std::move(base)), R_(R) {
    constants_ = base_->constants();
    convex_ = base_->is_convex();
    closed_recession_ = base_->has_closed_form_recession();
  }
  double eval(const Mat33& xi) const override {
    return base_->eval(join(planar_part(xi) * R_.transpose(), third_column(xi)));
  }
  double eval_smoothed(const Mat33& xi, double delta) const override {
    return base_->eval_smoothed(join(planar_part(xi) * R_.transpose(), third_column(xi)), delta);
  }
  Mat33 grad_smoothed(const Mat33& xi, double delta) const override {
    const Mat33 g =
        base_->grad_smoothed(join(planar_part(xi) * R_.transpose(), third_column(xi)), delta);
    return join(planar_part(g) * R_, third_column(g));
  }
  double recession_closed_form(const Mat33& xi) const override {
    return base_->recession_closed_form(join(planar_part(xi) * R_.transpose(), third_column(xi)));
  }
  std::optional<PlanarInfimum> planar_infimum_closed_form(const Mat32& xi_bar) const override {
    return base_->planar_infimum_closed_form(xi_bar * R_.transpose());
  }
  double planar_infimum_smoothed(const Mat32& xi_bar, double delta, Mat32* grad) const override {
    Mat32 g;
    const double v =
        base_->planar_infimum_smoothed(xi_bar * R_.transpose(), delta, grad ? &g : nullptr);
    if (grad) *grad = g * R_;
    return v;
  }
  std::shared_ptr<const EnergyModel> recession_model() const override {
    if (auto rec = base_->recession_model()) return std::make_shared<RotatedModel>(rec, R_);
    return nullptr;
  }
  std::string describe() const override { return base_->describe() + ":rotated"; }

 private:
  ModelPtr base_;
  Mat22 R_;
};

}  // namespace

double qstar_of_recession(const EnergyModel& model, const Mat32& xi_bar, const Vec3& b,
                          const CellGrid& grid, const SolverBudget& budget) {
  return qstar(*recession_as_model(model), xi_bar, b, grid, budget).value;
}

double gamma_surface(const EnergyModel& model, const JumpSpec& spec, const CellGrid& grid,
                     const SolverBudget& budget) {
  spec.validate();
  const Mat32 xi_bar = outer32(spec.z, spec.nu);
  return qstar_rotated(*recession_as_model(model), xi_bar, spec.b, spec.nu, grid, budget).value;
}

CellSolution qstar_rotated(const EnergyModel& model, const Mat32& xi_bar, const Vec3& b,
                           const Vec2& nu, const CellGrid& grid, const SolverBudget& budget) {
  if (std::abs(nu.norm() - 1.0) > 1e-12) throw domain_error("rotation normal must be unit");
  Mat22 R;
  R << nu.y(), nu.x(), -nu.x(), nu.y();  // columns (tau | nu), maps e2 to nu
  auto base = std::shared_ptr<const EnergyModel>(&model, [](const EnergyModel*) {});
  RotatedModel conjugated(base, R);
  return qstar(conjugated, xi_bar * R, b, grid, budget);
}

ConvexityReport check_directional_convexity(const EnergyModel& model,
                                            const std::pair<Mat32, Vec3>& base,
                                            const std::pair<Mat32, Vec3>& direction,
                                            const std::vector<double>& t_samples,
                                            const CellGrid& grid, const SolverBudget& budget) {
  const Eigen::JacobiSVD<Mat32> svd(direction.first);
  const double s0 = svd.singularValues()[0], s1 = svd.singularValues()[1];
  if (s1 > 1e-9 * std::max(1.0, s0))
    throw domain_error("direction's planar part must be rank one");

  ConvexityReport rep;
  rep.t_samples = t_samples;
  std::sort(rep.t_samples.begin(), rep.t_samples.end());
  for (double t : rep.t_samples) {
    const Mat32 xb = base.first + t * direction.first;
    const Vec3 bb = base.second + t * direction.second;
    rep.values.push_back(qstar(model, xb, bb, grid, budget).value);
  }
  for (size_t i = 0; i + 2 < rep.values.size(); ++i) {
    const double t0 = rep.t_samples[i], t1 = rep.t_samples[i + 1], t2 = rep.t_samples[i + 2];
    const double chord = ((t2 - t1) * rep.values[i] + (t1 - t0) * rep.values[i + 2]) / (t2 - t0);
    rep.worst_violation = std::max(rep.worst_violation, rep.values[i + 1] - chord);
  }
  return rep;
}

}  // namespace membrelax
