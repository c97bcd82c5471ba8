#include "membrelax/membrane.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace membrelax {

namespace {

void require_valid(const PlanarScene& scene) {
  const auto findings = validate_scene(scene);
  if (findings.empty()) return;
  std::ostringstream os;
  os << "invalid scene:";
  for (const auto& f : findings) {
    os << " [" << f.code;
    if (f.index >= 0) os << " #" << f.index;
    os << ": " << f.message << "]";
  }
  throw scene_error(os.str());
}

std::string term_wrap(const char* term, const std::function<std::string()>& what) {
  return std::string(term) + " term: " + what();
}

double cached_qstar(const EnergyModel& model, const Mat32& xi, const Vec3& b,
                    const CellGrid& grid, const SolverBudget& budget, DensityCache* cache,
                    const char* tag) {
  std::string key;
  if (cache) {
    key = DensityCache::key(model.describe(), xi, b, tag);
    if (auto hit = cache->lookup(key)) return *hit;
  }
  const double v = qstar(model, xi, b, grid, budget).value;
  if (cache) cache->store(key, v);
  return v;
}

double cached_recession(const EnergyModel& model, const Mat32& xi, const Vec3& b,
                        const CellGrid& grid, const SolverBudget& budget, DensityCache* cache) {
  if (xi.isZero() && b.isZero()) return 0.0;
  std::string key;
  if (cache) {
    key = DensityCache::key(model.describe(), xi, b, "rec");
    if (auto hit = cache->lookup(key)) return *hit;
  }
  const auto ladder = default_t_ladder();
  const double v = qstar_recession(model, xi, b, grid, budget, ladder);
  if (cache) cache->store(key, v);
  return v;
}

// Ladder extrapolation of (QW_0)^inf with the t^{-r} decay model.
double qw_zero_recession(const EnergyModel& model, const Mat32& xi, const CellGrid& grid,
                         const SolverBudget& budget, DensityCache* cache) {
  const double norm = xi.norm();
  if (norm == 0.0) return 0.0;
  std::string key;
  if (cache) {
    key = DensityCache::key(model.describe(), xi, Vec3::Zero(), "qw0rec");
    if (auto hit = cache->lookup(key)) return *hit;
  }
  const Mat32 xu = xi / norm;
  const double r = model.constants().r;
  const auto ladder = default_t_ladder();
  std::array<double, 3> t{}, f{};
  for (int k = 0; k < 3; ++k) {
    t[k] = ladder[ladder.size() - 3 + k];
    f[k] = qw_zero(model, t[k] * xu, grid, budget) / t[k];
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
  if (res > 5e-2 * (1.0 + std::abs(afit)))
    throw convergence_error("QW0 recession ladder did not settle");
  const double v = std::max(afit, 0.0) * norm;
  if (cache) cache->store(key, v);
  return v;
}

}  // namespace

std::string DensityCache::key(const std::string& model_id, const Mat32& xi_bar, const Vec3& b,
                              const char* tag) {
  std::ostringstream os;
  os << model_id << '|' << tag;
  auto put = [&os](double v) { os << '|' << std::llround(v * 1e12); };
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) put(xi_bar(i, j));
  for (int i = 0; i < 3; ++i) put(b[i]);
  return os.str();
}

std::string EnergyBreakdown::to_json() const {
  nlohmann::json j;
  j["bulk"] = bulk;
  j["jump"] = jump;
  j["cantor"] = cantor;
  j["singular"] = singular;
  j["total"] = total;
  j["tolerances"] = {{"bulk", bulk_tol},
                     {"jump", jump_tol},
                     {"cantor", cantor_tol},
                     {"singular", singular_tol}};
  return j.dump();
}

EnergyBreakdown membrane_energy(const EnergyModel& model, const PlanarScene& scene,
                                const BendingMeasure& measure, const CellGrid& grid,
                                const SolverBudget& budget, DensityCache* cache) {
  require_valid(scene);
  const auto split = besicovitch_split(scene, measure);
  const double q_tol = quadrature_tolerance(grid);
  EnergyBreakdown out;

  // Bulk: one cell solve per region (piecewise-constant data).
  try {
    for (size_t r = 0; r < scene.regions.size(); ++r) {
      const Vec3 ac = r < split.b_a.ac.size() ? split.b_a.ac[r] : Vec3::Zero();
      const double area = scene.regions[r].area();
      out.bulk += area * cached_qstar(model, scene.regions[r].M, ac, grid, budget, cache, "q");
      out.bulk_tol += area * q_tol * (1.0 + scene.regions[r].M.norm() + ac.norm());
    }
  } catch (const std::exception& e) {
    throw convergence_error(term_wrap("bulk", [&] { return std::string(e.what()); }));
  }

  // Jump: (Q*W)^inf((u+ - u-) (x) nu | line density), per covered piece plus
  // the measure-free remainder of each segment.
  try {
    for (size_t ji = 0; ji < scene.jumps.size(); ++ji) {
      const auto& j = scene.jumps[ji];
      const Mat32 zxnu = outer32(j.amplitude(), j.nu);
      double covered = 0.0;
      for (size_t li = 0; li < split.b_j.lines.size(); ++li) {
        if (split.b_j_host[li] != static_cast<int>(ji)) continue;
        const auto& piece = split.b_j.lines[li];
        covered += piece.length();
        out.jump += piece.length() *
                    cached_recession(model, zxnu, piece.density, grid, budget, cache);
        out.jump_tol += piece.length() * q_tol * (zxnu.norm() + piece.density.norm());
      }
      const double bare = j.length() - covered;
      if (bare > 1e-12 && !zxnu.isZero()) {
        out.jump += bare * cached_recession(model, zxnu, Vec3::Zero(), grid, budget, cache);
        out.jump_tol += bare * q_tol * zxnu.norm();
      }
    }
  } catch (const std::exception& e) {
    throw convergence_error(term_wrap("jump", [&] { return std::string(e.what()); }));
  }

  // Cantor: homogeneity factors the closed-form |D^c u| mass out; the
  // density pair is constant on the strip.
  try {
    if (scene.staircase) {
      const Vec3 a = scene.staircase->a;
      const Vec3 kappa = split.b_c.cantor.value_or(Vec3::Zero());
      const double mass = scene.domain.width();  // Cantor measure of the strip
      if (!a.isZero() || !kappa.isZero()) {
        out.cantor = mass * cached_recession(model, outer32(a, Vec2(0, 1)), kappa, grid, budget,
                                             cache);
        out.cantor_tol = mass * q_tol * (a.norm() + kappa.norm());
      }
    }
  } catch (const std::exception& e) {
    throw convergence_error(term_wrap("cantor", [&] { return std::string(e.what()); }));
  }

  // Singular remainder: atoms and off-carrier line/Cantor mass at xi = 0.
  try {
    for (const auto& atom : split.b_sigma.atoms) {
      if (atom.w.isZero()) continue;
      out.singular += cached_recession(model, Mat32::Zero(), atom.w, grid, budget, cache);
      out.singular_tol += q_tol * atom.w.norm();
    }
    for (const auto& l : split.b_sigma.lines) {
      if (l.density.isZero()) continue;
      out.singular += l.length() *
                      cached_recession(model, Mat32::Zero(), l.density, grid, budget, cache);
      out.singular_tol += l.length() * q_tol * l.density.norm();
    }
    if (split.b_sigma.cantor && !split.b_sigma.cantor->isZero()) {
      const double mass = scene.domain.width();
      out.singular += mass * cached_recession(model, Mat32::Zero(), *split.b_sigma.cantor, grid,
                                              budget, cache);
      out.singular_tol += mass * q_tol * split.b_sigma.cantor->norm();
    }
  } catch (const std::exception& e) {
    throw convergence_error(term_wrap("singular", [&] { return std::string(e.what()); }));
  }

  out.total = out.bulk + out.jump + out.cantor + out.singular;
  return out;
}

EnergyBreakdown membrane_energy_no_moment(const EnergyModel& model, const PlanarScene& scene,
                                          const CellGrid& grid, const SolverBudget& budget,
                                          DensityCache* cache) {
  require_valid(scene);
  const double q_tol = quadrature_tolerance(grid);
  EnergyBreakdown out;

  for (const auto& reg : scene.regions) {
    std::string key;
    double v;
    if (cache) {
      key = DensityCache::key(model.describe(), reg.M, Vec3::Zero(), "qw0");
      if (auto hit = cache->lookup(key)) {
        v = *hit;
      } else {
        v = qw_zero(model, reg.M, grid, budget);
        cache->store(key, v);
      }
    } else {
      v = qw_zero(model, reg.M, grid, budget);
    }
    out.bulk += reg.area() * v;
    out.bulk_tol += reg.area() * q_tol * (1.0 + reg.M.norm());
  }

  for (const auto& j : scene.jumps) {
    const Mat32 zxnu = outer32(j.amplitude(), j.nu);
    if (zxnu.isZero()) continue;
    out.jump += j.length() * qw_zero_recession(model, zxnu, grid, budget, cache);
    out.jump_tol += j.length() * q_tol * zxnu.norm();
  }

  if (scene.staircase && !scene.staircase->a.isZero()) {
    const double mass = scene.domain.width();
    out.cantor = mass * qw_zero_recession(model, outer32(scene.staircase->a, Vec2(0, 1)), grid,
                                          budget, cache);
    out.cantor_tol = mass * q_tol * scene.staircase->a.norm();
  }

  out.total = out.bulk + out.jump + out.cantor;
  return out;
}

// --- loads --------------------------------------------------------------

Vec3 G0Field::eval(const Vec2& p, const Rect& domain) const {
  switch (kind) {
    case Kind::Zero:
      return Vec3::Zero();
    case Kind::Bump: {
      const double r2 = (p - center).squaredNorm() / (radius * radius);
      if (r2 >= 1.0) return Vec3::Zero();
      return direction * std::exp(1.0 - 1.0 / (1.0 - r2));
    }
    case Kind::Sine: {
      const double sx = std::sin(M_PI * (p.x() - domain.x0) / domain.width());
      const double sy = std::sin(M_PI * (p.y() - domain.y0) / domain.height());
      return direction * (sx * sy);
    }
  }
  return Vec3::Zero();
}

void LoadSet::validate(const PlanarScene& scene) const {
  const size_t nr = scene.regions.size();
  auto check_size = [&](const std::vector<Vec3>& v, const char* name) {
    if (!v.empty() && v.size() != nr)
      throw scene_error(std::string("load field ") + name + " must list one value per region");
  };
  check_size(fbar, "fbar");
  check_size(g1_plus, "g1_plus");
  check_size(g1_minus, "g1_minus");
  // g0+ must vanish on the boundary; bump fields near the edge are caught
  // here rather than silently clipped.
  const auto& d = scene.domain;
  for (int i = 0; i <= 8; ++i) {
    const double tx = d.x0 + d.width() * i / 8.0;
    const double ty = d.y0 + d.height() * i / 8.0;
    for (const Vec2& p : {Vec2(tx, d.y0), Vec2(tx, d.y1), Vec2(d.x0, ty), Vec2(d.x1, ty)})
      if (g0_plus.eval(p, d).norm() > 1e-9)
        throw scene_error("g0_plus does not vanish on the domain boundary");
  }
}

double load_work(const LoadSet& loads, const PlanarScene& scene, const BendingMeasure& measure,
                 const QuadratureConfig& quad) {
  loads.validate(scene);
  double work = 0.0;

  // Body term: load constant per region, u affine there, so the centroid
  // rule is exact for the affine part.
  for (size_t r = 0; r < scene.regions.size(); ++r) {
    Vec3 load = Vec3::Zero();
    if (!loads.fbar.empty()) load += loads.fbar[r];
    if (!loads.g1_plus.empty()) load += loads.g1_plus[r];
    if (!loads.g1_minus.empty()) load += loads.g1_minus[r];
    if (load.isZero()) continue;
    const auto& reg = scene.regions[r];
    work += reg.area() * load.dot(reg.u(reg.centroid()));
    if (scene.staircase && !scene.staircase->a.isZero()) {
      // Staircase contribution: int_region cantor(..) dx via the pairing
      // quadrature with a unit area density on this region only.
      BendingMeasure probe;
      probe.ac.assign(scene.regions.size(), Vec3::Zero());
      probe.ac[r] = Vec3(1, 0, 0);
      const auto& st = *scene.staircase;
      const auto pr = weakstar_pairing(
          scene, probe,
          [&](const Vec2& p) { return cantor_function((p.y() - st.s0) / (st.s1 - st.s0)); },
          quad);
      work += pr.value.x() * load.dot(st.a);
    }
  }

  // Moment term: int g0+ . dbbar, componentwise weak* pairings.
  if (loads.g0_plus.kind != G0Field::Kind::Zero) {
    for (int c = 0; c < 3; ++c) {
      const auto pr = weakstar_pairing(
          scene, measure,
          [&](const Vec2& p) { return loads.g0_plus.eval(p, scene.domain)[c]; }, quad);
      work += pr.value[c];
    }
  }
  return work;
}

LoadSet load_loads_json(const std::string& json_text, const PlanarScene& scene) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw scene_error(std::string("loads file is not valid JSON: ") + e.what());
  }
  try {
    LoadSet loads;
    auto read_field = [&](const char* name, std::vector<Vec3>& out) {
      if (!j.contains(name) || j.at(name).is_null()) return;
      const auto& fj = j.at(name);
      if (fj.is_array() && fj.size() == 3 && fj[0].is_number()) {
        // Constant shorthand: one vector for every region.
        const Vec3 v(fj[0].get<double>(), fj[1].get<double>(), fj[2].get<double>());
        out.assign(scene.regions.size(), v);
        return;
      }
      for (const auto& vj : fj)
        out.push_back(Vec3(vj[0].get<double>(), vj[1].get<double>(), vj[2].get<double>()));
    };
    read_field("fbar", loads.fbar);
    read_field("g1_plus", loads.g1_plus);
    read_field("g1_minus", loads.g1_minus);
    if (j.contains("g0_plus") && !j.at("g0_plus").is_null()) {
      const auto& gj = j.at("g0_plus");
      const std::string kind = gj.at("kind").get<std::string>();
      if (kind == "zero") {
        loads.g0_plus.kind = G0Field::Kind::Zero;
      } else if (kind == "bump" || kind == "sine") {
        loads.g0_plus.kind = kind == "bump" ? G0Field::Kind::Bump : G0Field::Kind::Sine;
        const auto& dj = gj.at("direction");
        loads.g0_plus.direction =
            Vec3(dj[0].get<double>(), dj[1].get<double>(), dj[2].get<double>());
        if (kind == "bump") {
          const auto& cj = gj.at("center");
          loads.g0_plus.center = Vec2(cj[0].get<double>(), cj[1].get<double>());
          loads.g0_plus.radius = gj.at("radius").get<double>();
        }
      } else {
        throw scene_error("unknown g0_plus kind: " + kind);
      }
    }
    loads.validate(scene);
    return loads;
  } catch (const nlohmann::json::exception& e) {
    throw scene_error(std::string("loads file schema error: ") + e.what());
  }
}

LoadSet load_loads_file(const std::string& path, const PlanarScene& scene) {
  std::ifstream in(path);
  if (!in) throw scene_error("loads file not found: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_loads_json(buf.str(), scene);
}

}  // namespace membrelax
