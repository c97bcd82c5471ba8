#include "membrelax/planar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace membrelax {

namespace {

constexpr double kCoincide = 1e-9;   // geometric coincidence tolerance
constexpr double kNearMiss = 1e-6;   // near-miss band: hard error, no snapping

// 4-point Gauss-Legendre on [-1, 1].
constexpr double kGx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                           0.8611363115940526};
constexpr double kGw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                           0.3478548451374538};

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

bool Rect::on_boundary(const Vec2& p, double tol) const {
  if (!contains(p, tol)) return false;
  return std::abs(p.x() - x0) <= tol || std::abs(p.x() - x1) <= tol ||
         std::abs(p.y() - y0) <= tol || std::abs(p.y() - y1) <= tol;
}

double Region::area() const {
  double a = 0.0;
  const int n = static_cast<int>(polygon.size());
  for (int i = 0; i < n; ++i) a += cross2(polygon[i], polygon[(i + 1) % n]);
  return 0.5 * a;
}

Vec2 Region::centroid() const {
  Vec2 c = Vec2::Zero();
  double a = 0.0;
  const int n = static_cast<int>(polygon.size());
  for (int i = 0; i < n; ++i) {
    const double w = cross2(polygon[i], polygon[(i + 1) % n]);
    c += w * (polygon[i] + polygon[(i + 1) % n]);
    a += w;
  }
  return c / (3.0 * a);
}

bool Region::contains(const Vec2& p, double tol) const {
  const int n = static_cast<int>(polygon.size());
  for (int i = 0; i < n; ++i) {
    const Vec2 e = polygon[(i + 1) % n] - polygon[i];
    if (cross2(e, p - polygon[i]) < -tol * std::max(1.0, e.norm())) return false;
  }
  return true;
}

double cantor_function(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  double value = 0.0, scale = 0.5;
  for (int d = 0; d < 60; ++d) {
    t *= 3.0;
    const int digit = static_cast<int>(t);
    t -= digit;
    if (digit == 1) return value + scale;  // inside a removed middle third
    value += scale * (digit / 2);
    scale *= 0.5;
  }
  return value;
}

int PlanarScene::region_of(const Vec2& p) const {
  for (size_t r = 0; r < regions.size(); ++r)
    if (regions[r].contains(p)) return static_cast<int>(r);
  return -1;
}

Vec3 PlanarScene::u(const Vec2& p) const {
  Vec3 v = Vec3::Zero();
  const int r = region_of(p);
  if (r >= 0) v = regions[r].u(p);
  if (staircase && staircase->s1 > staircase->s0)
    v += staircase->a * cantor_function((p.y() - staircase->s0) / (staircase->s1 - staircase->s0));
  return v;
}

std::vector<ValidationFinding> validate_scene(const PlanarScene& scene) {
  std::vector<ValidationFinding> findings;
  auto flag = [&](std::string code, std::string msg, int idx) {
    findings.push_back({std::move(code), std::move(msg), idx});
  };

  if (scene.domain.x1 <= scene.domain.x0 || scene.domain.y1 <= scene.domain.y0)
    flag("bad-domain", "domain rectangle is degenerate", -1);
  if (scene.regions.empty()) flag("no-regions", "scene has no regions", -1);

  double area_sum = 0.0;
  for (size_t r = 0; r < scene.regions.size(); ++r) {
    const auto& reg = scene.regions[r];
    if (reg.polygon.size() < 3) {
      flag("bad-region", "region polygon needs at least 3 vertices", static_cast<int>(r));
      continue;
    }
    const double a = reg.area();
    if (a <= 0.0)
      flag("bad-region", "region polygon is not counter-clockwise or is degenerate",
           static_cast<int>(r));
    for (const auto& v : reg.polygon)
      if (!scene.domain.contains(v, kCoincide))
        flag("region-outside", "region vertex outside the domain", static_cast<int>(r));
    area_sum += a;
  }
  if (!scene.regions.empty() &&
      std::abs(area_sum - scene.domain.area()) > 1e-9 * std::max(1.0, scene.domain.area()))
    flag("partition-gap", "region areas do not tile the domain", -1);

  const int nr = static_cast<int>(scene.regions.size());
  for (size_t s = 0; s < scene.jumps.size(); ++s) {
    const auto& j = scene.jumps[s];
    const int idx = static_cast<int>(s);
    if (j.minus_region < 0 || j.minus_region >= nr || j.plus_region < 0 || j.plus_region >= nr) {
      flag("bad-jump", "jump references a missing region", idx);
      continue;
    }
    if (j.length() <= kCoincide) {
      flag("bad-jump", "jump segment is degenerate", idx);
      continue;
    }
    const auto& rm = scene.regions[j.minus_region];
    const auto& rp = scene.regions[j.plus_region];
    const Vec3 d0 = rp.u(j.p0) - rm.u(j.p0);
    const Vec3 d1 = rp.u(j.p1) - rm.u(j.p1);
    if ((d1 - d0).norm() > kCoincide * (1.0 + d0.norm()))
      flag("trace-mismatch", "jump amplitude is not constant along the segment", idx);
    const Vec3 mid = 0.5 * (d0 + d1);
    if ((j.u_plus - j.u_minus - mid).norm() > kCoincide * (1.0 + mid.norm()))
      flag("trace-mismatch", "stored traces disagree with the adjacent affine maps", idx);
    const Vec2 tau = (j.p1 - j.p0).normalized();
    if (std::abs(j.nu.norm() - 1.0) > kCoincide || std::abs(j.nu.dot(tau)) > kCoincide)
      flag("bad-normal", "jump normal is not a unit normal to the segment", idx);
    const Vec2 pm = 0.5 * (j.p0 + j.p1);
    const double delta = 1e-6 * std::max(1.0, j.length());
    const int side_plus = scene.region_of(pm + delta * j.nu);
    const int side_minus = scene.region_of(pm - delta * j.nu);
    if ((side_plus >= 0 && side_plus != j.plus_region) ||
        (side_minus >= 0 && side_minus != j.minus_region))
      flag("bad-normal", "jump normal does not point from the minus to the plus region", idx);
  }

  if (scene.staircase) {
    const auto& st = *scene.staircase;
    if (st.s1 <= st.s0) flag("bad-staircase", "staircase interval is degenerate", -1);
    if (st.s0 < scene.domain.y0 - kCoincide || st.s1 > scene.domain.y1 + kCoincide)
      flag("bad-staircase", "staircase interval leaves the domain", -1);
  }
  return findings;
}

// --- Besicovitch split --------------------------------------------------

BesicovitchSplit besicovitch_split(const PlanarScene& scene, const BendingMeasure& measure) {
  BesicovitchSplit split;
  split.b_a.ac = measure.ac;

  for (size_t li = 0; li < measure.lines.size(); ++li) {
    const auto& line = measure.lines[li];
    const Vec2 dir = line.p1 - line.p0;
    const double len = dir.norm();
    if (len <= kCoincide) throw scene_error("degenerate line part in measure");
    const Vec2 tau = dir / len;

    // Remaining sub-intervals of [0, len] along the line part, cut down as
    // jump overlaps are carved out.
    std::vector<std::pair<double, double>> remaining{{0.0, len}};
    for (size_t ji = 0; ji < scene.jumps.size(); ++ji) {
      const auto& j = scene.jumps[ji];
      const Vec2 jd = j.p1 - j.p0;
      const double jlen = jd.norm();
      if (jlen <= kCoincide) continue;
      const Vec2 jt = jd / jlen;
      const Vec2 jn(jt.y(), -jt.x());
      const double d0 = std::abs(jn.dot(line.p0 - j.p0));
      const double d1 = std::abs(jn.dot(line.p1 - j.p0));
      const double dmax = std::max(d0, d1);
      // Projection of the line part onto the jump's arclength.
      const double t0 = jt.dot(line.p0 - j.p0), t1 = jt.dot(line.p1 - j.p0);
      const double plo = std::max(std::min(t0, t1), 0.0);
      const double phi = std::min(std::max(t0, t1), jlen);
      const bool overlaps = phi - plo > kCoincide;
      if (dmax > kNearMiss || !overlaps) continue;
      if (dmax > kCoincide) {
        std::ostringstream os;
        os << "line part " << li << " misses jump " << ji << " by " << dmax
           << ": between the coincidence tolerance and the near-miss band";
        throw ambiguity_error(os.str());
      }
      // Map the overlap back to the line part's own parameter.
      const double sgn = jt.dot(tau) >= 0.0 ? 1.0 : -1.0;
      const double base = jt.dot(line.p0 - j.p0);
      double slo = (plo - base) * sgn, shi = (phi - base) * sgn;
      if (slo > shi) std::swap(slo, shi);
      slo = std::max(slo, 0.0);
      shi = std::min(shi, len);
      if (shi - slo <= kCoincide) continue;
      std::vector<std::pair<double, double>> next;
      for (auto [a, b] : remaining) {
        const double lo = std::max(a, slo), hi = std::min(b, shi);
        if (hi - lo > kCoincide) {
          split.b_j.lines.push_back({line.p0 + lo * tau, line.p0 + hi * tau, line.density});
          split.b_j_host.push_back(static_cast<int>(ji));
          if (lo - a > kCoincide) next.push_back({a, lo});
          if (b - hi > kCoincide) next.push_back({hi, b});
        } else {
          next.push_back({a, b});
        }
      }
      remaining = std::move(next);
    }
    for (auto [a, b] : remaining)
      split.b_sigma.lines.push_back({line.p0 + a * tau, line.p0 + b * tau, line.density});
  }

  // Atoms are singular w.r.t. area, H^1 lines and Cantor measure alike.
  split.b_sigma.atoms = measure.atoms;

  if (measure.cantor) {
    if (scene.staircase)
      split.b_c.cantor = measure.cantor;
    else
      split.b_sigma.cantor = measure.cantor;
  }
  return split;
}

TotalVariations total_variations(const PlanarScene& scene, const BendingMeasure& measure) {
  TotalVariations tv;
  tv.area = scene.domain.area();
  for (const auto& reg : scene.regions) tv.du += reg.area() * reg.M.norm();
  for (const auto& j : scene.jumps) {
    tv.h1_jump += j.length();
    tv.du += j.length() * j.amplitude().norm();
  }
  if (scene.staircase) {
    tv.dcu = scene.staircase->a.norm() * scene.domain.width();
    tv.du += tv.dcu;
  }
  if (!measure.ac.empty())
    for (size_t r = 0; r < scene.regions.size() && r < measure.ac.size(); ++r)
      tv.btv += scene.regions[r].area() * measure.ac[r].norm();
  for (const auto& l : measure.lines) tv.btv += l.length() * l.density.norm();
  for (const auto& a : measure.atoms) tv.btv += a.w.norm();
  if (measure.cantor) tv.btv += measure.cantor->norm() * scene.domain.width();
  return tv;
}

// --- weak* pairing ------------------------------------------------------

namespace {

// Degree-2 rule on m^2 uniform subtriangles (edge-midpoint 3-point rule).
double integrate_triangle(const Vec2& A, const Vec2& B, const Vec2& C, const TestFunction& phi,
                          int m) {
  const double area = 0.5 * std::abs(cross2(B - A, C - A));
  if (area == 0.0) return 0.0;
  auto node = [&](double i, double j) { return Vec2(A + (i / m) * (B - A) + (j / m) * (C - A)); };
  auto rule = [&](const Vec2& a, const Vec2& b, const Vec2& c) {
    return (phi(0.5 * (a + b)) + phi(0.5 * (b + c)) + phi(0.5 * (c + a))) / 3.0;
  };
  double sum = 0.0;
  const double sub_area = area / (m * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m - i; ++j) {
      sum += sub_area * rule(node(i, j), node(i + 1, j), node(i, j + 1));
      if (j < m - i - 1)
        sum += sub_area * rule(node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
    }
  return sum;
}

double integrate_segment(const Vec2& p0, const Vec2& p1, const TestFunction& phi, int panels) {
  const double len = (p1 - p0).norm();
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = static_cast<double>(p) / panels, b = static_cast<double>(p + 1) / panels;
    for (int q = 0; q < 4; ++q) {
      const double t = 0.5 * (a + b) + 0.5 * (b - a) * kGx[q];
      sum += 0.5 * (b - a) * len * kGw[q] * phi(p0 + t * (p1 - p0));
    }
  }
  return sum;
}

double integrate_x1(const PlanarScene& scene, double y, const TestFunction& phi, int panels) {
  return integrate_segment(Vec2(scene.domain.x0, y), Vec2(scene.domain.x1, y), phi, panels);
}

}  // namespace

PairingResult weakstar_pairing(const PlanarScene& scene, const BendingMeasure& measure,
                               const TestFunction& phi, const QuadratureConfig& quad) {
  PairingResult res;

  if (!measure.ac.empty()) {
    for (size_t r = 0; r < scene.regions.size() && r < measure.ac.size(); ++r) {
      if (measure.ac[r].isZero()) continue;
      const auto& poly = scene.regions[r].polygon;
      const Vec2 c = scene.regions[r].centroid();
      double integral = 0.0;
      for (size_t i = 0; i < poly.size(); ++i)
        integral +=
            integrate_triangle(c, poly[i], poly[(i + 1) % poly.size()], phi, quad.area_subdiv);
      res.value += integral * measure.ac[r];
    }
  }

  for (const auto& l : measure.lines)
    res.value += integrate_segment(l.p0, l.p1, phi, quad.line_subdiv) * l.density;

  for (const auto& a : measure.atoms) res.value += phi(a.p) * a.w;

  if (measure.cantor && scene.staircase) {
    const auto& st = *scene.staircase;
    const int k = quad.cantor_level;
    const double width3 = std::pow(3.0, -k);
    // Level-k triadic approximation: 2^k intervals, mass 2^-k each, atom at
    // each midpoint, tensorized with exact x1 integration over the strip.
    double sum = 0.0;
    const std::uint64_t count = 1ull << k;
    for (std::uint64_t code = 0; code < count; ++code) {
      double start = 0.0, step = 1.0 / 3.0;
      for (int d = k - 1; d >= 0; --d) {
        if ((code >> d) & 1ull) start += 2.0 * step;
        step /= 3.0;
      }
      const double t = start + 0.5 * width3;
      const double y = st.s0 + (st.s1 - st.s0) * t;
      sum += integrate_x1(scene, y, phi, quad.line_subdiv);
    }
    sum /= static_cast<double>(count);
    res.value += sum * (*measure.cantor);

    // Midpoint-truncation bound: Lip(phi) estimated by sampled differences.
    double grad_max = 0.0;
    const double h = 1e-5 * std::max(scene.domain.width(), scene.domain.height());
    for (int i = 0; i <= 16; ++i)
      for (int j = 0; j <= 16; ++j) {
        const Vec2 p(scene.domain.x0 + scene.domain.width() * i / 16.0,
                     st.s0 + (st.s1 - st.s0) * j / 16.0);
        const double gx = (phi(p + Vec2(h, 0)) - phi(p - Vec2(h, 0))) / (2 * h);
        const double gy = (phi(p + Vec2(0, h)) - phi(p - Vec2(0, h))) / (2 * h);
        grad_max = std::max(grad_max, std::hypot(gx, gy));
      }
    res.truncation_bound = measure.cantor->norm() * scene.domain.width() * grad_max *
                           0.5 * (st.s1 - st.s0) * width3;
  }
  return res;
}

// --- scene files --------------------------------------------------------

namespace {

using nlohmann::json;

Vec2 vec2_of(const json& j) {
  if (!j.is_array() || j.size() != 2) throw scene_error("expected a 2-vector");
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

Vec3 vec3_of(const json& j) {
  if (!j.is_array() || j.size() != 3) throw scene_error("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json to_list(const Vec2& v) { return json::array({v.x(), v.y()}); }
json to_list(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

SceneFile load_scene_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw scene_error(std::string("scene file is not valid JSON: ") + e.what());
  }
  try {
    SceneFile sf;
    const auto& dom = j.at("domain");
    if (!dom.is_array() || dom.size() != 4) throw scene_error("domain must be [x0,y0,x1,y1]");
    sf.scene.domain = {dom[0].get<double>(), dom[1].get<double>(), dom[2].get<double>(),
                       dom[3].get<double>()};

    for (const auto& rj : j.at("regions")) {
      Region reg;
      for (const auto& v : rj.at("polygon")) reg.polygon.push_back(vec2_of(v));
      if (rj.contains("M")) {
        const auto& M = rj.at("M");
        if (!M.is_array() || M.size() != 3) throw scene_error("region M must be 3 rows of 2");
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 2; ++c) reg.M(r, c) = M[r][c].get<double>();
      }
      if (rj.contains("c")) reg.c = vec3_of(rj.at("c"));
      sf.scene.regions.push_back(std::move(reg));
    }

    if (j.contains("jumps")) {
      for (const auto& sj : j.at("jumps")) {
        JumpSegment seg;
        seg.p0 = vec2_of(sj.at("p0"));
        seg.p1 = vec2_of(sj.at("p1"));
        seg.minus_region = sj.at("minus").get<int>();
        seg.plus_region = sj.at("plus").get<int>();
        const int nr = static_cast<int>(sf.scene.regions.size());
        if (seg.minus_region >= 0 && seg.minus_region < nr && seg.plus_region >= 0 &&
            seg.plus_region < nr && seg.length() > 0.0) {
          const Vec2 mid = 0.5 * (seg.p0 + seg.p1);
          seg.u_minus = sf.scene.regions[seg.minus_region].u(mid);
          seg.u_plus = sf.scene.regions[seg.plus_region].u(mid);
          const Vec2 tau = (seg.p1 - seg.p0).normalized();
          seg.nu = Vec2(tau.y(), -tau.x());
          const double delta = 1e-6 * std::max(1.0, seg.length());
          // Orient nu from the minus region to the plus region.
          if (sf.scene.region_of(mid + delta * seg.nu) == seg.minus_region) seg.nu = -seg.nu;
        }
        sf.scene.jumps.push_back(seg);
      }
    }

    if (j.contains("staircase") && !j.at("staircase").is_null()) {
      const auto& st = j.at("staircase");
      Staircase s;
      s.a = vec3_of(st.at("a"));
      const auto& iv = st.at("x2");
      if (!iv.is_array() || iv.size() != 2) throw scene_error("staircase x2 must be [s0,s1]");
      s.s0 = iv[0].get<double>();
      s.s1 = iv[1].get<double>();
      sf.scene.staircase = s;
    }

    if (j.contains("measure") && !j.at("measure").is_null()) {
      const auto& mj = j.at("measure");
      if (mj.contains("ac") && !mj.at("ac").is_null()) {
        for (const auto& d : mj.at("ac")) sf.measure.ac.push_back(vec3_of(d));
        if (sf.measure.ac.size() != sf.scene.regions.size())
          throw scene_error("measure.ac must list one density per region");
      }
      if (mj.contains("lines"))
        for (const auto& lj : mj.at("lines"))
          sf.measure.lines.push_back(
              {vec2_of(lj.at("p0")), vec2_of(lj.at("p1")), vec3_of(lj.at("density"))});
      if (mj.contains("atoms"))
        for (const auto& aj : mj.at("atoms"))
          sf.measure.atoms.push_back({vec2_of(aj.at("p")), vec3_of(aj.at("w"))});
      if (mj.contains("cantor") && !mj.at("cantor").is_null())
        sf.measure.cantor = vec3_of(mj.at("cantor"));
    }
    return sf;
  } catch (const json::exception& e) {
    throw scene_error(std::string("scene file schema error: ") + e.what());
  }
}

SceneFile load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw scene_error("scene file not found: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_scene_json(buf.str());
}

std::string scene_to_json(const SceneFile& sf) {
  json j;
  j["domain"] = {sf.scene.domain.x0, sf.scene.domain.y0, sf.scene.domain.x1, sf.scene.domain.y1};
  j["regions"] = json::array();
  for (const auto& reg : sf.scene.regions) {
    json rj;
    rj["polygon"] = json::array();
    for (const auto& v : reg.polygon) rj["polygon"].push_back(to_list(v));
    rj["M"] = json::array();
    for (int r = 0; r < 3; ++r) rj["M"].push_back(json::array({reg.M(r, 0), reg.M(r, 1)}));
    rj["c"] = to_list(reg.c);
    j["regions"].push_back(std::move(rj));
  }
  j["jumps"] = json::array();
  for (const auto& seg : sf.scene.jumps)
    j["jumps"].push_back({{"p0", to_list(seg.p0)},
                          {"p1", to_list(seg.p1)},
                          {"minus", seg.minus_region},
                          {"plus", seg.plus_region}});
  if (sf.scene.staircase)
    j["staircase"] = {{"a", to_list(sf.scene.staircase->a)},
                      {"x2", {sf.scene.staircase->s0, sf.scene.staircase->s1}}};
  else
    j["staircase"] = nullptr;
  json mj;
  if (!sf.measure.ac.empty()) {
    mj["ac"] = json::array();
    for (const auto& d : sf.measure.ac) mj["ac"].push_back(to_list(d));
  }
  mj["lines"] = json::array();
  for (const auto& l : sf.measure.lines)
    mj["lines"].push_back(
        {{"p0", to_list(l.p0)}, {"p1", to_list(l.p1)}, {"density", to_list(l.density)}});
  mj["atoms"] = json::array();
  for (const auto& a : sf.measure.atoms)
    mj["atoms"].push_back({{"p", to_list(a.p)}, {"w", to_list(a.w)}});
  if (sf.measure.cantor) mj["cantor"] = to_list(*sf.measure.cantor);
  j["measure"] = std::move(mj);
  return j.dump(2);
}

}  // namespace membrelax
