#ifndef MEMBRELAX_THINFILM_HPP
#define MEMBRELAX_THINFILM_HPP

#include <string>
#include <vector>

#include "membrelax/membrane.hpp"

namespace membrelax {

// Multilinear nodal field on a slab grid over omega x I, I = (-1/2, 1/2).
struct SlabField {
  Rect domain;
  int nx = 16, ny = 16, nz = 8;  // cells per axis
  std::vector<Vec3> values;      // node ((k*(ny+1) + j)*(nx+1) + i)

  SlabField() = default;
  SlabField(const Rect& dom, int nx_, int ny_, int nz_);
  void validate() const;

  Vec3& at(int i, int j, int k) { return values[(k * (ny + 1) + j) * (nx + 1) + i]; }
  const Vec3& at(int i, int j, int k) const {
    return values[(k * (ny + 1) + j) * (nx + 1) + i];
  }
  Vec2 node_alpha(int i, int j) const {
    return Vec2(domain.x0 + domain.width() * i / nx, domain.y0 + domain.height() * j / ny);
  }
  double node_x3(int k) const { return -0.5 + static_cast<double>(k) / nz; }
};

void save_slab(const SlabField& u, const std::string& path_base);  // .bin + .json sidecar
SlabField load_slab(const std::string& path_base);

// int_{omega x I} W(grad_a u | (1/eps) grad_3 u), cell-center quadrature.
double scaled_energy(const EnergyModel& model, const SlabField& u, double eps);

// (1/eps) int_I grad_3 u dx3, exact by telescoping across the thickness.
struct MomentField {
  Rect domain;
  int nx = 0, ny = 0;
  std::vector<Vec3> values;  // node (j*(nx+1) + i)

  const Vec3& at(int i, int j) const { return values[j * (nx + 1) + i]; }
  Vec3 mean() const;
  // int phi . field dx_alpha with 2x2 Gauss per cell on the bilinear interpolant.
  Vec3 pairing(const TestFunction& phi) const;
};

MomentField moment_average(const SlabField& u, double eps);

// Recovery sequence for affine data: xi_bar x_alpha + eps x3 b plus the
// rescaled corrector oscillation lambda*eps*phi(x_alpha/(lambda eps), x3).
SlabField recovery_bulk(const EnergyModel& model, const Mat32& xi_bar, const Vec3& b, double eps,
                        const CellSolution& corrector, const Rect& domain, int nx, int ny, int nz);

// Example 4.1: u_eps = u + (1/eps) phi(x/eps) e3 with phi the partial
// x3-integral of a unit-mass radial bump supported in B(0, 1/2).
SlabField example_dirac(double eps, const Rect& domain, int nx, int ny, int nz,
                        const PlanarScene& base, const Vec3& direction = Vec3(0, 0, 1));

// L1 distance between the slab field and the base scene's planar map,
// cell-center quadrature.
double slab_l1_distance(const SlabField& u, const PlanarScene& base);

// Fixed test-function battery: tensor bumps at 5 locations + a plateau.
struct NamedTest {
  std::string name;
  TestFunction phi;
};
std::vector<NamedTest> make_test_battery(const Rect& domain);

enum class StudyBuilder { Recovery, Dirac, Files };

struct GammaStudyConfig {
  StudyBuilder builder = StudyBuilder::Recovery;
  std::vector<double> eps_list = {0.25, 0.125, 0.0625, 0.03125};
  int nx = 64, ny = 64, nz = 16;
  double rel_tol = 0.05;        // final |J_eps - E| / max(E,1) gate
  double slope_tol = 1e-3;      // pairing-error trend gate (per-row slope)
  std::vector<std::string> slab_files;  // Files builder only
  std::uint64_t seed = 0;
};

struct StudyRow {
  double eps = 0.0;
  double J_eps = 0.0;
  double rel_gap = 0.0;
  std::vector<double> pairings;  // measured, projected on the target direction
  std::string error;             // nonempty when the row could not be built
};

struct EpsilonStudy {
  std::vector<StudyRow> rows;
  std::vector<std::string> test_names;
  std::vector<double> targets;  // |int phi dbbar| per test
  double E_target = 0.0;
  bool liminf_ok = true;
  bool verdict = false;

  std::string to_csv() const;
  std::string to_json() const;
};

EpsilonStudy gamma_study(const EnergyModel& model, const PlanarScene& scene,
                         const BendingMeasure& measure, const GammaStudyConfig& config,
                         const CellGrid& grid, const SolverBudget& budget,
                         DensityCache* cache = nullptr);

}  // namespace membrelax

#endif
