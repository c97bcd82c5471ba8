#ifndef MEMBRELAX_PLANAR_HPP
#define MEMBRELAX_PLANAR_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "membrelax/base.hpp"

namespace membrelax {

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
  double area() const { return (x1 - x0) * (y1 - y0); }
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(const Vec2& p, double tol = 0.0) const {
    return p.x() >= x0 - tol && p.x() <= x1 + tol && p.y() >= y0 - tol && p.y() <= y1 + tol;
  }
  bool on_boundary(const Vec2& p, double tol = 1e-12) const;
};

// Affine piece u(x_alpha) = M x_alpha + c on a convex polygonal region.
struct Region {
  std::vector<Vec2> polygon;  // counter-clockwise
  Mat32 M = Mat32::Zero();
  Vec3 c = Vec3::Zero();

  double area() const;
  Vec2 centroid() const;
  bool contains(const Vec2& p, double tol = 1e-12) const;
  Vec3 u(const Vec2& p) const { return M * p + c; }
};

// Straight jump segment; u-, u+ and nu are derived from the adjacent
// regions (nu points from minus to plus).
struct JumpSegment {
  Vec2 p0 = Vec2::Zero(), p1 = Vec2::Zero();
  int minus_region = -1, plus_region = -1;
  Vec3 u_minus = Vec3::Zero(), u_plus = Vec3::Zero();  // traces at the midpoint
  Vec2 nu = Vec2(0, 1);

  double length() const { return (p1 - p0).norm(); }
  Vec3 amplitude() const { return u_plus - u_minus; }
};

// Devil's-staircase component u_c(x_alpha) = a * cantor((x2-s0)/(s1-s0))
// over the full x1 extent of the domain.
struct Staircase {
  Vec3 a = Vec3::Zero();
  double s0 = 0.0, s1 = 1.0;  // x2 interval carrying the Cantor set
};

// Standard middle-thirds Cantor function on [0,1] (clamped outside).
double cantor_function(double t);

struct PlanarScene {
  Rect domain;
  std::vector<Region> regions;
  std::vector<JumpSegment> jumps;
  std::optional<Staircase> staircase;

  int region_of(const Vec2& p) const;  // -1 when outside every region
  Vec3 u(const Vec2& p) const;         // affine part + staircase component
};

struct ValidationFinding {
  std::string code;     // "trace-mismatch", "partition-gap", ...
  std::string message;
  int index = -1;       // offending segment/region, -1 when global
};

std::vector<ValidationFinding> validate_scene(const PlanarScene& scene);

// --- measures -----------------------------------------------------------

struct LinePart {
  Vec2 p0 = Vec2::Zero(), p1 = Vec2::Zero();
  Vec3 density = Vec3::Zero();  // per unit length
  double length() const { return (p1 - p0).norm(); }
};

struct Atom {
  Vec2 p = Vec2::Zero();
  Vec3 w = Vec3::Zero();
};

// Structured Radon measure on omega, R^3-valued. Parts stay symbolic so
// mutual singularity survives into the energy evaluation.
struct BendingMeasure {
  std::vector<Vec3> ac;          // per-region density w.r.t. area; empty = 0
  std::vector<LinePart> lines;
  std::vector<Atom> atoms;
  std::optional<Vec3> cantor;    // density w.r.t. the staircase Cantor measure

  bool is_zero() const {
    bool ac_zero = true;
    for (const auto& d : ac) ac_zero = ac_zero && d.isZero();
    return ac_zero && lines.empty() && atoms.empty() && !cantor;
  }
};

struct BesicovitchSplit {
  BendingMeasure b_a;      // absolutely continuous w.r.t. area
  BendingMeasure b_j;      // carried by the jump set
  BendingMeasure b_c;      // carried by the staircase Cantor set
  BendingMeasure b_sigma;  // mutually singular remainder
  // b_j line parts are re-cut so each is flagged with its host jump.
  std::vector<int> b_j_host;  // jump index per b_j.lines entry
};

// Routing per the structured-carrier convention: ac -> b_a; line parts on
// jump segments -> b_j (cut at the overlap endpoints, remainder ->
// b_sigma); atoms -> b_sigma; cantor -> b_c iff the scene has a staircase.
// Near-coincidence between 1e-9 and 1e-6 raises ambiguity_error.
BesicovitchSplit besicovitch_split(const PlanarScene& scene, const BendingMeasure& measure);

struct TotalVariations {
  double area = 0.0;      // |omega|
  double du = 0.0;        // |D_alpha u|(omega)
  double h1_jump = 0.0;   // H^1(J_u)
  double dcu = 0.0;       // |D^c_alpha u|(omega)
  double btv = 0.0;       // |bbar|(omega)
};

TotalVariations total_variations(const PlanarScene& scene, const BendingMeasure& measure);

// --- weak* pairing ------------------------------------------------------

struct QuadratureConfig {
  int area_subdiv = 8;    // per-triangle uniform refinement
  int line_subdiv = 8;    // composite Gauss panels per segment
  int cantor_level = 12;  // triadic approximation depth
};

using TestFunction = std::function<double(const Vec2&)>;

struct PairingResult {
  Vec3 value = Vec3::Zero();
  double truncation_bound = 0.0;  // Cantor-level truncation estimate
};

// int phi dbbar, part by part: area by triangulated Gauss, lines by
// composite Gauss, atoms exactly, Cantor by level-k triadic midpoints.
PairingResult weakstar_pairing(const PlanarScene& scene, const BendingMeasure& measure,
                               const TestFunction& phi, const QuadratureConfig& quad = {});

// --- scene files --------------------------------------------------------

struct SceneFile {
  PlanarScene scene;
  BendingMeasure measure;
};

SceneFile load_scene_json(const std::string& json_text);
SceneFile load_scene_file(const std::string& path);
std::string scene_to_json(const SceneFile& sf);

}  // namespace membrelax

#endif
