#ifndef MEMBRELAX_CELL_HPP
#define MEMBRELAX_CELL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "membrelax/base.hpp"
#include "membrelax/density.hpp"

namespace membrelax {

// Discretization of the unit cell Q' x I: n_alpha cells per in-plane axis
// (periodic, no duplicated seam nodes), n_three cells across the thickness
// (free top/bottom values, n_three + 1 node layers).
struct CellGrid {
  int n_alpha = 16;
  int n_three = 8;
  void validate() const {
    if (n_alpha < 4) throw domain_error("cell grid needs n_alpha >= 4");
    if (n_three < 2) throw domain_error("cell grid needs n_three >= 2");
  }
  int node_count() const { return n_alpha * n_alpha * (n_three + 1); }
};

// One-point-quadrature tolerance model, calibrated on the convex model.
inline double quadrature_tolerance(const CellGrid& g) {
  return 1.0 * (1.0 / g.n_alpha + 1.0 / g.n_three);
}

// Periodic-in-plane multilinear test field on the cell grid.
struct CellField {
  CellGrid grid;
  std::vector<Vec3> values;  // index ((k * n_alpha + j) * n_alpha + i)

  CellField() = default;
  explicit CellField(const CellGrid& g) : grid(g), values(g.node_count(), Vec3::Zero()) {}

  Vec3& at(int i, int j, int k) {
    return values[(k * grid.n_alpha + j) * grid.n_alpha + i];
  }
  const Vec3& at(int i, int j, int k) const {
    return values[(k * grid.n_alpha + j) * grid.n_alpha + i];
  }
  // Multilinear interpolation; in-plane coordinates wrap periodically on
  // Q' = (-1/2,1/2)^2, x3 is clamped to I.
  Vec3 sample(const Vec2& y_alpha, double x3) const;

  std::string to_json() const;
  static CellField from_json(const std::string& text);
};

struct SolverBudget {
  int multi_start = 8;
  int max_iters = 160;           // per smoothing stage
  double grad_tol = 1e-8;        // scaled by (1 + |xi_bar| + |b|)
  int lambda_coarse = 7;         // log-spaced scan points
  int lambda_golden = 12;        // golden-section refinements
  double log10_lambda_min = -3.0;
  double log10_lambda_max = 3.0;
  std::vector<double> smoothing = {1e-1, 1e-2, 1e-3};
  std::uint64_t seed = 0;
};

struct CellDiagnostics {
  int iterations = 0;
  int restarts = 0;
  bool lambda_at_bound = false;
  double constraint_residual = 0.0;
};

struct CellSolution {
  double value = 0.0;
  double lambda = 1.0;
  CellField field;
  CellDiagnostics diag;

  std::string to_json() const;
};

// Discrete minimum of the cell energy
//   int_{Q' x I} W(xi_bar + grad_a phi | lambda grad_3 phi)
// over periodic fields and lambda > 0, with lambda * mean(grad_3 phi) = b
// enforced exactly by an affine shift in x3. Upper bound for the continuum
// value up to quadrature error.
CellSolution qstar(const EnergyModel& model, const Mat32& xi_bar, const Vec3& b,
                   const CellGrid& grid, const SolverBudget& budget,
                   const CellField* warm_start = nullptr);

struct SweepRow {
  Mat32 xi_bar;
  Vec3 b;
  std::optional<CellSolution> solution;
  std::string error;  // empty on success
};

std::vector<SweepRow> qstar_sweep(const EnergyModel& model,
                                  const std::vector<std::pair<Mat32, Vec3>>& samples,
                                  const CellGrid& grid, const SolverBudget& budget);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

// 2D quasiconvexification of W_0 at xi_bar: periodic relaxation on Q'.
double qw_zero(const EnergyModel& model, const Mat32& xi_bar, const CellGrid& grid,
               const SolverBudget& budget);

// limsup_t qstar(t .)/t extrapolated over the ladder with the t^{-r} decay
// model; positively 1-homogeneous by construction.
double qstar_recession(const EnergyModel& model, const Mat32& xi_bar, const Vec3& b,
                       const CellGrid& grid, const SolverBudget& budget,
                       std::span<const double> t_ladder, double* residual = nullptr,
                       double residual_tol = 5e-2);

// Cell problem with W replaced by its recession W^inf.
double qstar_of_recession(const EnergyModel& model, const Mat32& xi_bar, const Vec3& b,
                          const CellGrid& grid, const SolverBudget& budget);

struct JumpSpec {
  Vec3 z = Vec3::Zero();   // jump amplitude
  Vec2 nu = Vec2(0, 1);    // unit jump normal
  Vec3 b = Vec3::Zero();
  void validate() const {
    if (std::abs(nu.norm() - 1.0) > 1e-12) throw domain_error("jump normal must be unit");
  }
};

// Surface density: the trace-offset problem reduces, via phi =
// (x_a . nu) z + psi with psi fully periodic, to the W^inf cell problem at
// xi_bar = z (x) nu posed on the rotated cell.
double gamma_surface(const EnergyModel& model, const JumpSpec& spec, const CellGrid& grid,
                     const SolverBudget& budget);

// Cell problem on the rotated cube Q'_nu, mapped back to Q' by the exact
// change of variables psi(y) = phi(R_nu y).
CellSolution qstar_rotated(const EnergyModel& model, const Mat32& xi_bar, const Vec3& b,
                           const Vec2& nu, const CellGrid& grid, const SolverBudget& budget);

struct ConvexityReport {
  std::vector<double> t_samples;
  std::vector<double> values;
  double worst_violation = 0.0;  // max chord defect over consecutive triples
};

ConvexityReport check_directional_convexity(const EnergyModel& model,
                                            const std::pair<Mat32, Vec3>& base,
                                            const std::pair<Mat32, Vec3>& direction,
                                            const std::vector<double>& t_samples,
                                            const CellGrid& grid, const SolverBudget& budget);

}  // namespace membrelax

#endif
