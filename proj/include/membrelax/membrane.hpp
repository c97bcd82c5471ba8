#ifndef MEMBRELAX_MEMBRANE_HPP
#define MEMBRELAX_MEMBRANE_HPP

#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "membrelax/cell.hpp"
#include "membrelax/planar.hpp"

namespace membrelax {

struct EnergyBreakdown {
  double bulk = 0.0;
  double jump = 0.0;
  double cantor = 0.0;
  double singular = 0.0;
  double total = 0.0;
  // Per-term quadrature/extrapolation error estimates.
  double bulk_tol = 0.0;
  double jump_tol = 0.0;
  double cantor_tol = 0.0;
  double singular_tol = 0.0;

  std::string to_json() const;
};

// Memoizes cell solves keyed by (model id, xi_bar, b) quantized to 1e-12.
// Safe for concurrent insert/lookup.
class DensityCache {
 public:
  std::optional<double> lookup(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }
  void store(const std::string& key, double value) {
    std::lock_guard<std::mutex> lock(mutex_);
    map_.emplace(key, value);
  }
  static std::string key(const std::string& model_id, const Mat32& xi_bar, const Vec3& b,
                         const char* tag);

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, double> map_;
};

// Gamma-limit membrane energy E(u, bbar): bulk Q*W term plus (Q*W)^inf on
// the jump, Cantor and residual-singular parts routed by besicovitch_split.
EnergyBreakdown membrane_energy(const EnergyModel& model, const PlanarScene& scene,
                                const BendingMeasure& measure, const CellGrid& grid,
                                const SolverBudget& budget, DensityCache* cache = nullptr);

// Moment-free functional: QW_0 in the bulk, (QW_0)^inf on jump and Cantor
// parts; no singular term.
EnergyBreakdown membrane_energy_no_moment(const EnergyModel& model, const PlanarScene& scene,
                                          const CellGrid& grid, const SolverBudget& budget,
                                          DensityCache* cache = nullptr);

// --- external loads -----------------------------------------------------

// Closed-form continuous field on omega vanishing at the boundary.
struct G0Field {
  enum class Kind { Zero, Bump, Sine };
  Kind kind = Kind::Zero;
  Vec3 direction = Vec3::Zero();
  Vec2 center = Vec2::Zero();  // bump only
  double radius = 0.25;        // bump only

  Vec3 eval(const Vec2& p, const Rect& domain) const;
};

struct LoadSet {
  std::vector<Vec3> fbar;      // per region; empty = zero
  std::vector<Vec3> g1_plus;   // per region; empty = zero
  std::vector<Vec3> g1_minus;  // per region; empty = zero
  G0Field g0_plus;             // g0- = -g0+ implicitly

  // Checks region-count consistency and g0's boundary decay (sampled).
  void validate(const PlanarScene& scene) const;
};

// F(u, bbar) = int (fbar + g1+ + g1-) . u dx_alpha + int g0+ . dbbar.
double load_work(const LoadSet& loads, const PlanarScene& scene, const BendingMeasure& measure,
                 const QuadratureConfig& quad = {});

LoadSet load_loads_json(const std::string& json_text, const PlanarScene& scene);
LoadSet load_loads_file(const std::string& path, const PlanarScene& scene);

}  // namespace membrelax

#endif
