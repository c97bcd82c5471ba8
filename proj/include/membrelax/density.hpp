#ifndef MEMBRELAX_DENSITY_HPP
#define MEMBRELAX_DENSITY_HPP

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "membrelax/base.hpp"

namespace membrelax {

// Structural constants of a linear-growth stored energy:
//   beta_prime |xi| <= W(xi) <= beta (1 + |xi|)
//   |Winf(xi) - W(xi)| <= C (1 + |xi|^{1-r})
//   |W(xi) - W(xi')| <= L |xi - xi'|
struct GrowthConstants {
  double beta_prime = 1.0;
  double beta = 1.0;
  double C = 1.0;
  double r = 0.5;
  double L = 1.0;
};

struct PlanarInfimum {
  double value = 0.0;
  Vec3 argmin = Vec3::Zero();
};

class EnergyModel {
 public:
  virtual ~EnergyModel() = default;

  // Exact density value. Throws domain_error on non-finite input.
  virtual double eval(const Mat33& xi) const = 0;

  // Huber-smoothed surrogate used by descent solvers. The default assumes
  // the density is already smooth and falls back to eval().
  virtual double eval_smoothed(const Mat33& xi, double delta) const {
    (void)delta;
    return eval(xi);
  }

  // Gradient of the smoothed surrogate. Default: central differences.
  virtual Mat33 grad_smoothed(const Mat33& xi, double delta) const;

  const GrowthConstants& constants() const { return constants_; }
  bool is_convex() const { return convex_; }
  bool has_closed_form_recession() const { return closed_recession_; }

  // W^inf in closed form; throws domain_error when unavailable.
  virtual double recession_closed_form(const Mat33& xi) const;

  // Closed-form W_0 = inf_b W(.|b); nullopt means callers must search.
  virtual std::optional<PlanarInfimum> planar_infimum_closed_form(const Mat32& xi_bar) const {
    (void)xi_bar;
    return std::nullopt;
  }

  // Smoothed W_0 with its planar gradient (envelope differentiation);
  // used by the 2D relaxation of W_0. Default searches via w_zero.
  virtual double planar_infimum_smoothed(const Mat32& xi_bar, double delta, Mat32* grad) const;

  // Recession density as a standalone model, when it is available in
  // closed form. Null means callers should extrapolate pointwise.
  virtual std::shared_ptr<const EnergyModel> recession_model() const { return nullptr; }

  // Stable identifier for cache keys and reports.
  virtual std::string describe() const = 0;

 protected:
  GrowthConstants constants_;
  bool convex_ = false;
  bool closed_recession_ = false;
};

using ModelPtr = std::shared_ptr<const EnergyModel>;

// Built-in model families.
ModelPtr make_convex_norm_model();       // W(xi) = sqrt(1 + |xi|^2)
ModelPtr make_separable_laminate_model();  // W(xi) = |xi_bar| + g(xi_3), double-well g
// Tabulated isotropic-split model: bilinear in (|xi_bar|, |b|), linear
// extension beyond the last node.
ModelPtr make_table_model(std::vector<double> s_nodes, std::vector<double> t_nodes,
                          std::vector<double> values, GrowthConstants constants,
                          bool convex = false);
// Convexified separable-laminate density |xi_bar| + Cg(b), with Cg
// tabulated by a double Legendre transform at construction.
ModelPtr make_laminate_envelope_model();

// JSON loading with certification. Accepts
//   {"kind": "convex-norm" | "separable-laminate" | "user-table",
//    "params": {...}, "constants": {...}?, "certify": {"samples": N}?}
// Constants absent for user tables are estimated by the validation pass.
ModelPtr load_model_json(const std::string& json_text);
ModelPtr load_model_file(const std::string& path);

struct CertificationReport {
  bool growth_ok = true;
  bool recession_ok = true;
  bool lipschitz_ok = true;
  double growth_slack = 0.0;     // min over samples of min(W - b'|xi|, b(1+|xi|) - W)
  double recession_slack = 0.0;  // min over samples of C(1+|xi|^{1-r}) - |Winf - W|
  double lipschitz_slack = 0.0;  // min over pairs of L|dxi| - |dW|
  bool ok() const { return growth_ok && recession_ok && lipschitz_ok; }
};

CertificationReport certify(const EnergyModel& model, int samples, std::uint64_t seed);

// --- Operations ---------------------------------------------------------

double eval_density(const EnergyModel& model, const Mat33& xi);

// Extrapolated limsup_t W(t xi)/t using the (H2) decay model a + c t^{-r}.
// Positively 1-homogeneous by construction: computed on xi/|xi|, rescaled.
double recession_density(const EnergyModel& model, const Mat33& xi,
                         std::span<const double> t_ladder, bool force_ladder = false,
                         double* residual = nullptr, double residual_tol = 5e-2);

inline std::vector<double> default_t_ladder() { return {64.0, 256.0, 1024.0}; }

// inf_b W(xi_bar | b) via coarse grid search on |b| <= (beta/beta')(1+|xi_bar|)
// followed by compass descent. Ties: smallest norm, then lexicographic.
PlanarInfimum w_zero(const EnergyModel& model, const Mat32& xi_bar);

}  // namespace membrelax

#endif
