#include "membrelax/thinfilm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace membrelax {

namespace {

constexpr double kGauss2 = 0.5773502691896257;  // 1/sqrt(3)

double bump_profile(double t) {  // C^inf bump on (-1,1), value 1 at 0
  const double t2 = t * t;
  if (t2 >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - t2));
}

// Smoothed Heaviside used by the jump builder: integral of the standard
// bump, normalized so H(0)=0, H(1)=1.
double smoothed_heaviside(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  static const double total = [] {
    double s = 0.0;
    const int n = 2048;
    for (int i = 0; i < n; ++i) s += bump_profile(2.0 * (i + 0.5) / n - 1.0) / n;
    return s;
  }();
  double s = 0.0;
  const int n = 512;
  for (int i = 0; i < n; ++i) {
    const double x = t * (i + 0.5) / n;
    s += bump_profile(2.0 * x - 1.0) * t / n;
  }
  return s / total;
}

}  // namespace

SlabField::SlabField(const Rect& dom, int nx_, int ny_, int nz_)
    : domain(dom), nx(nx_), ny(ny_), nz(nz_) {
  validate();
  values.assign(static_cast<size_t>(nx + 1) * (ny + 1) * (nz + 1), Vec3::Zero());
}

void SlabField::validate() const {
  if (nx < 4 || ny < 4 || nz < 4) throw domain_error("slab grid needs at least 4 cells per axis");
  if (domain.x1 <= domain.x0 || domain.y1 <= domain.y0)
    throw domain_error("slab domain is degenerate");
}

void save_slab(const SlabField& u, const std::string& path_base) {
  nlohmann::json side;
  side["shape"] = {u.nx + 1, u.ny + 1, u.nz + 1};
  side["domain"] = {u.domain.x0, u.domain.y0, u.domain.x1, u.domain.y1};
  std::ofstream js(path_base + ".json");
  if (!js) throw domain_error("cannot write slab sidecar: " + path_base + ".json");
  js << side.dump(2) << "\n";
  std::ofstream bin(path_base + ".bin", std::ios::binary);
  if (!bin) throw domain_error("cannot write slab data: " + path_base + ".bin");
  for (const auto& v : u.values) {
    const double row[3] = {v.x(), v.y(), v.z()};
    bin.write(reinterpret_cast<const char*>(row), sizeof(row));
  }
}

SlabField load_slab(const std::string& path_base) {
  std::ifstream js(path_base + ".json");
  if (!js) throw domain_error("slab sidecar not found: " + path_base + ".json");
  nlohmann::json side;
  js >> side;
  const auto shape = side.at("shape").get<std::vector<int>>();
  const auto dom = side.at("domain").get<std::vector<double>>();
  if (shape.size() != 3 || dom.size() != 4) throw domain_error("malformed slab sidecar");
  SlabField u(Rect{dom[0], dom[1], dom[2], dom[3]}, shape[0] - 1, shape[1] - 1, shape[2] - 1);
  std::ifstream bin(path_base + ".bin", std::ios::binary);
  if (!bin) throw domain_error("slab data not found: " + path_base + ".bin");
  for (auto& v : u.values) {
    double row[3];
    bin.read(reinterpret_cast<char*>(row), sizeof(row));
    if (!bin) throw domain_error("slab data truncated: " + path_base + ".bin");
    v = Vec3(row[0], row[1], row[2]);
  }
  return u;
}

double scaled_energy(const EnergyModel& model, const SlabField& u, double eps) {
  u.validate();
  if (!(eps > 0.0)) throw domain_error("scaled_energy needs eps > 0");
  const double hx = u.domain.width() / u.nx, hy = u.domain.height() / u.ny, hz = 1.0 / u.nz;
  const double vol = hx * hy * hz;
  double energy = 0.0;
  Mat33 G;
  for (int k = 0; k < u.nz; ++k)
    for (int j = 0; j < u.ny; ++j)
      for (int i = 0; i < u.nx; ++i) {
        // Cell-center gradient of the trilinear interpolant: face averages.
        Vec3 gx = Vec3::Zero(), gy = Vec3::Zero(), gz = Vec3::Zero();
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            gx += u.at(i + 1, j + a, k + b) - u.at(i, j + a, k + b);
            gy += u.at(i + a, j + 1, k + b) - u.at(i + a, j, k + b);
            gz += u.at(i + a, j + b, k + 1) - u.at(i + a, j + b, k);
          }
        G.col(0) = gx / (4.0 * hx);
        G.col(1) = gy / (4.0 * hy);
        G.col(2) = gz / (4.0 * hz * eps);
        energy += vol * model.eval(G);
      }
  return energy;
}

Vec3 MomentField::mean() const {
  Vec3 sum = Vec3::Zero();
  double wsum = 0.0;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const double w = ((i == 0 || i == nx) ? 0.5 : 1.0) * ((j == 0 || j == ny) ? 0.5 : 1.0);
      sum += w * at(i, j);
      wsum += w;
    }
  return sum / wsum;
}

Vec3 MomentField::pairing(const TestFunction& phi) const {
  const double hx = domain.width() / nx, hy = domain.height() / ny;
  Vec3 sum = Vec3::Zero();
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      for (int qa = 0; qa < 2; ++qa)
        for (int qb = 0; qb < 2; ++qb) {
          const double s = 0.5 + (qa ? 0.5 : -0.5) * kGauss2;
          const double t = 0.5 + (qb ? 0.5 : -0.5) * kGauss2;
          const Vec2 p(domain.x0 + (i + s) * hx, domain.y0 + (j + t) * hy);
          const Vec3 f = (1 - s) * (1 - t) * at(i, j) + s * (1 - t) * at(i + 1, j) +
                         (1 - s) * t * at(i, j + 1) + s * t * at(i + 1, j + 1);
          sum += 0.25 * hx * hy * phi(p) * f;
        }
  return sum;
}

MomentField moment_average(const SlabField& u, double eps) {
  if (!(eps > 0.0)) throw domain_error("moment_average needs eps > 0");
  MomentField m;
  m.domain = u.domain;
  m.nx = u.nx;
  m.ny = u.ny;
  m.values.resize(static_cast<size_t>(u.nx + 1) * (u.ny + 1));
  for (int j = 0; j <= u.ny; ++j)
    for (int i = 0; i <= u.nx; ++i)
      m.values[j * (u.nx + 1) + i] = (u.at(i, j, u.nz) - u.at(i, j, 0)) / eps;
  return m;
}

SlabField recovery_bulk(const EnergyModel& model, const Mat32& xi_bar, const Vec3& b, double eps,
                        const CellSolution& corrector, const Rect& domain, int nx, int ny,
                        int nz) {
  (void)model;
  if (!(eps > 0.0)) throw domain_error("recovery_bulk needs eps > 0");
  const double lambda = corrector.lambda;
  const double period = lambda * eps;
  const double scale = 1.0 + xi_bar.norm() + b.norm();

  // Tilt-removed corrector amplitude: when the optimal corrector is pure
  // tilt (convex case), no oscillation needs resolving.
  double amp = 0.0;
  const auto& cg = corrector.field.grid;
  for (int k = 0; k <= cg.n_three; ++k) {
    const double x3 = -0.5 + static_cast<double>(k) / cg.n_three;
    for (int j = 0; j < cg.n_alpha; ++j)
      for (int i = 0; i < cg.n_alpha; ++i)
        amp = std::max(amp, (corrector.field.at(i, j, k) - x3 * b / lambda).norm());
  }
  const bool oscillating = amp > 1e-9 * scale;
  if (oscillating) {
    const double cells_x = period * nx / domain.width();
    const double cells_y = period * ny / domain.height();
    if (std::min(cells_x, cells_y) < 8.0) {
      std::ostringstream os;
      os << "slab grid does not resolve the corrector period " << period << ": need at least "
         << static_cast<int>(std::ceil(8.0 * domain.width() / period)) << "x"
         << static_cast<int>(std::ceil(8.0 * domain.height() / period)) << " planar cells";
      throw resolution_error(os.str());
    }
  }

  SlabField u(domain, nx, ny, nz);
  for (int k = 0; k <= nz; ++k) {
    const double x3 = u.node_x3(k);
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        const Vec2 xa = u.node_alpha(i, j);
        Vec3 v = xi_bar * xa + eps * x3 * b;
        if (oscillating) {
          const Vec2 y((xa.x() - domain.x0) / period, (xa.y() - domain.y0) / period);
          v += period * (corrector.field.sample(y, x3) - x3 * b / lambda);
        }
        u.at(i, j, k) = v;
      }
  }
  return u;
}

// --- Example 4.1 --------------------------------------------------------

namespace {

// phi(y_alpha, y3) = int_{-1/2}^{y3} rho(y_alpha, s) ds for the unit-mass
// radial bump rho supported in B(0,1/2); tabulated in (|y_alpha|, y3).
class DiracProfile {
 public:
  static const DiracProfile& instance() {
    static DiracProfile p;
    return p;
  }

  double phi(double r, double y3) const {
    if (r >= 0.5) return 0.0;
    const double fr = std::min(r / 0.5, 1.0 - 1e-12) * (kNr - 1);
    const double fz = std::clamp((y3 + 0.5), 0.0, 1.0 - 1e-12) * (kNz - 1);
    const int ir = static_cast<int>(fr), iz = static_cast<int>(fz);
    const double ar = fr - ir, az = fz - iz;
    return (1 - ar) * (1 - az) * table_[iz][ir] + ar * (1 - az) * table_[iz][ir + 1] +
           (1 - ar) * az * table_[iz + 1][ir] + ar * az * table_[iz + 1][ir + 1];
  }

 private:
  static constexpr int kNr = 256, kNz = 257;

  DiracProfile() {
    // Normalize rho(x) = c * bump(2|x|) to unit mass over R^3.
    double mass = 0.0;
    const int n = 4096;
    for (int i = 0; i < n; ++i) {
      const double rr = 0.5 * (i + 0.5) / n;
      mass += 4.0 * M_PI * rr * rr * bump_profile(2.0 * rr) * (0.5 / n);
    }
    const double c = 1.0 / mass;
    for (int iz = 0; iz < kNz; ++iz) {
      const double y3 = -0.5 + static_cast<double>(iz) / (kNz - 1);
      for (int ir = 0; ir < kNr; ++ir) {
        const double r = 0.5 * ir / (kNr - 1);
        // Composite midpoint over s in (-1/2, y3) restricted to the support.
        double v = 0.0;
        const double smax = std::min(y3, 0.5);
        const double lo = -0.5;
        const int m = 512;
        for (int q = 0; q < m; ++q) {
          const double s = lo + (smax - lo) * (q + 0.5) / m;
          v += c * bump_profile(2.0 * std::hypot(r, s)) * (smax - lo) / m;
        }
        table_[iz][ir] = v;
      }
    }
  }

  double table_[kNz][kNr];
};

}  // namespace

SlabField example_dirac(double eps, const Rect& domain, int nx, int ny, int nz,
                        const PlanarScene& base, const Vec3& direction) {
  if (!(eps > 0.0)) throw domain_error("example_dirac needs eps > 0");
  if (!domain.contains(Vec2::Zero()))
    throw domain_error("example_dirac needs the origin inside the domain");
  const double cells_across = eps * std::min(nx / domain.width(), ny / domain.height());
  if (cells_across < 8.0) {
    std::ostringstream os;
    os << "slab grid does not resolve the bump scale " << eps << ": need at least "
       << static_cast<int>(std::ceil(8.0 * domain.width() / eps)) << " planar cells per axis";
    throw resolution_error(os.str());
  }

  const auto& prof = DiracProfile::instance();
  SlabField u(domain, nx, ny, nz);
  for (int k = 0; k <= nz; ++k) {
    const double x3 = u.node_x3(k);
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        const Vec2 xa = u.node_alpha(i, j);
        Vec3 v = base.u(xa);
        const double r = xa.norm() / eps;
        if (r < 0.5) v += (1.0 / eps) * prof.phi(r, x3 / eps) * direction;
        u.at(i, j, k) = v;
      }
  }
  return u;
}

double slab_l1_distance(const SlabField& u, const PlanarScene& base) {
  const double hx = u.domain.width() / u.nx, hy = u.domain.height() / u.ny, hz = 1.0 / u.nz;
  double sum = 0.0;
  for (int k = 0; k < u.nz; ++k)
    for (int j = 0; j < u.ny; ++j)
      for (int i = 0; i < u.nx; ++i) {
        Vec3 center = Vec3::Zero();
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) center += u.at(i + a, j + b, k + c);
        center /= 8.0;
        const Vec2 xa(u.domain.x0 + (i + 0.5) * hx, u.domain.y0 + (j + 0.5) * hy);
        sum += hx * hy * hz * (center - base.u(xa)).norm();
      }
  return sum;
}

// --- test battery -------------------------------------------------------

std::vector<NamedTest> make_test_battery(const Rect& domain) {
  std::vector<NamedTest> battery;
  const double w = domain.width(), h = domain.height();
  const double delta = 0.15 * std::min(w, h);
  auto smooth = [](double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * (3.0 - 2.0 * t);
  };
  battery.push_back({"plateau", [=](const Vec2& p) {
                       const double dx = std::min(p.x() - domain.x0, domain.x1 - p.x());
                       const double dy = std::min(p.y() - domain.y0, domain.y1 - p.y());
                       return smooth(dx / delta) * smooth(dy / delta);
                     }});
  const double frac[5][2] = {{0.5, 0.5}, {0.3, 0.3}, {0.7, 0.3}, {0.3, 0.7}, {0.7, 0.7}};
  const double radius = 0.15 * std::min(w, h);
  for (int t = 0; t < 5; ++t) {
    const Vec2 c(domain.x0 + frac[t][0] * w, domain.y0 + frac[t][1] * h);
    battery.push_back({"bump" + std::to_string(t + 1),
                       [=](const Vec2& p) { return bump_profile((p - c).norm() / radius); }});
  }
  return battery;
}

// --- gamma study --------------------------------------------------------

namespace {

// Recovery builder: per-region affine map + tilt + corrector oscillation,
// with jumps replaced by a mollified Heaviside profile of width eps.
SlabField build_recovery(const PlanarScene& scene, const BendingMeasure& measure, double eps,
                         const std::vector<CellSolution>& correctors, const Rect& domain, int nx,
                         int ny, int nz) {
  SlabField u(domain, nx, ny, nz);
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const Vec2 xa = u.node_alpha(i, j);
      int r = scene.region_of(xa);

      // Nearest jump within the mollification strip of width eps.
      int jump_idx = -1;
      double sdist = 0.0;
      for (size_t ji = 0; ji < scene.jumps.size(); ++ji) {
        const auto& seg = scene.jumps[ji];
        const Vec2 tau = (seg.p1 - seg.p0).normalized();
        const double along = tau.dot(xa - seg.p0);
        if (along < -eps || along > seg.length() + eps) continue;
        const double s = seg.nu.dot(xa - seg.p0);
        if (std::abs(s) <= 0.5 * eps && (jump_idx < 0 || std::abs(s) < std::abs(sdist))) {
          jump_idx = static_cast<int>(ji);
          sdist = s;
        }
      }
      if (jump_idx >= 0) r = scene.jumps[jump_idx].minus_region;
      if (r < 0) r = 0;

      Vec3 base = scene.regions[r].u(xa);
      if (jump_idx >= 0) {
        const auto& seg = scene.jumps[jump_idx];
        base = scene.regions[seg.minus_region].u(xa) +
               smoothed_heaviside(sdist / eps + 0.5) * seg.amplitude();
      }

      const Vec3 b = r < static_cast<int>(measure.ac.size()) ? measure.ac[r] : Vec3::Zero();
      const auto& corr = correctors[r];
      const double lambda = corr.lambda;
      const double period = lambda * eps;
      double amp = 0.0;
      const auto& cg = corr.field.grid;
      for (int kk = 0; kk <= cg.n_three; ++kk) {
        const double x3 = -0.5 + static_cast<double>(kk) / cg.n_three;
        for (int jj = 0; jj < cg.n_alpha; ++jj)
          for (int ii = 0; ii < cg.n_alpha; ++ii)
            amp = std::max(amp, (corr.field.at(ii, jj, kk) - x3 * b / lambda).norm());
      }
      const bool oscillating = amp > 1e-9 * (1.0 + scene.regions[r].M.norm() + b.norm());
      if (oscillating && period * std::min(nx / domain.width(), ny / domain.height()) < 8.0) {
        std::ostringstream os;
        os << "slab grid does not resolve the corrector period " << period
           << ": need at least " << static_cast<int>(std::ceil(8.0 * domain.width() / period))
           << " planar cells per axis";
        throw resolution_error(os.str());
      }

      for (int k = 0; k <= nz; ++k) {
        const double x3 = u.node_x3(k);
        Vec3 v = base + eps * x3 * b;
        if (oscillating) {
          const Vec2 y((xa.x() - domain.x0) / period, (xa.y() - domain.y0) / period);
          v += period * (corr.field.sample(y, x3) - x3 * b / lambda);
        }
        u.at(i, j, k) = v;
      }
    }
  return u;
}

}  // namespace

std::string EpsilonStudy::to_csv() const {
  std::ostringstream os;
  os.precision(12);
  os << "eps,J_eps,E_target,rel_gap";
  for (size_t t = 0; t < test_names.size(); ++t) os << ",pairing_" << (t + 1);
  os << ",verdict\n";
  for (const auto& row : rows) {
    os << row.eps << ",";
    if (!row.error.empty()) {
      os << "nan," << E_target << ",nan";
      for (size_t t = 0; t < test_names.size(); ++t) os << ",nan";
      os << ",error:" << row.error << "\n";
      continue;
    }
    os << row.J_eps << "," << E_target << "," << row.rel_gap;
    for (double p : row.pairings) os << "," << p;
    os << "," << (verdict ? "PASS" : "FAIL") << "\n";
  }
  return os.str();
}

std::string EpsilonStudy::to_json() const {
  nlohmann::json j;
  j["E_target"] = E_target;
  j["tests"] = test_names;
  j["targets"] = targets;
  j["liminf_ok"] = liminf_ok;
  j["verdict"] = verdict ? "PASS" : "FAIL";
  j["rows"] = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json rj;
    rj["eps"] = row.eps;
    if (row.error.empty()) {
      rj["J_eps"] = row.J_eps;
      rj["rel_gap"] = row.rel_gap;
      rj["pairings"] = row.pairings;
    } else {
      rj["error"] = row.error;
    }
    j["rows"].push_back(std::move(rj));
  }
  return j.dump(2);
}

EpsilonStudy gamma_study(const EnergyModel& model, const PlanarScene& scene,
                         const BendingMeasure& measure, const GammaStudyConfig& config,
                         const CellGrid& grid, const SolverBudget& budget, DensityCache* cache) {
  if (config.eps_list.empty()) throw domain_error("gamma study needs a nonempty eps list");
  for (size_t i = 1; i < config.eps_list.size(); ++i)
    if (config.eps_list[i] >= config.eps_list[i - 1])
      throw domain_error("eps list must be strictly decreasing");
  if (config.builder == StudyBuilder::Recovery && scene.staircase)
    throw domain_error("Cantor scenes are not supported by the recovery builder");
  if (config.builder == StudyBuilder::Files &&
      config.slab_files.size() != config.eps_list.size())
    throw domain_error("Files builder needs one slab file per eps");

  EpsilonStudy study;
  study.E_target = membrane_energy(model, scene, measure, grid, budget, cache).total;

  const auto battery = make_test_battery(scene.domain);
  std::vector<Vec3> target_dirs;
  for (const auto& test : battery) {
    study.test_names.push_back(test.name);
    const Vec3 tgt = weakstar_pairing(scene, measure, test.phi).value;
    study.targets.push_back(tgt.norm());
    target_dirs.push_back(tgt.norm() > 1e-12 ? Vec3(tgt / tgt.norm()) : Vec3(0, 0, 1));
  }

  // One corrector per region, reused across the eps ladder.
  std::vector<CellSolution> correctors;
  if (config.builder == StudyBuilder::Recovery) {
    for (size_t r = 0; r < scene.regions.size(); ++r) {
      const Vec3 b = r < measure.ac.size() ? measure.ac[r] : Vec3::Zero();
      correctors.push_back(qstar(model, scene.regions[r].M, b, grid, budget));
    }
  }

  for (size_t e = 0; e < config.eps_list.size(); ++e) {
    const double eps = config.eps_list[e];
    StudyRow row;
    row.eps = eps;
    try {
      SlabField u;
      switch (config.builder) {
        case StudyBuilder::Recovery:
          u = build_recovery(scene, measure, eps, correctors, scene.domain, config.nx, config.ny,
                             config.nz);
          break;
        case StudyBuilder::Dirac: {
          // Auto-refine so the bump stays resolved down the ladder.
          const int need = static_cast<int>(std::ceil(8.0 * scene.domain.width() / eps));
          const int nx = std::max(config.nx, need), ny = std::max(config.ny, need);
          u = example_dirac(eps, scene.domain, nx, ny, config.nz, scene);
          break;
        }
        case StudyBuilder::Files:
          u = load_slab(config.slab_files[e]);
          break;
      }
      row.J_eps = scaled_energy(model, u, eps);
      row.rel_gap = std::abs(row.J_eps - study.E_target) / std::max(std::abs(study.E_target), 1.0);
      const auto m = moment_average(u, eps);
      for (size_t t = 0; t < battery.size(); ++t)
        row.pairings.push_back(m.pairing(battery[t].phi).dot(target_dirs[t]));
    } catch (const std::exception& ex) {
      row.error = ex.what();
    }
    study.rows.push_back(std::move(row));
  }

  // Verdict: final gap within tolerance, pairing errors trending down the
  // ladder, and no row undercutting the Gamma-limit.
  const double liminf_tol =
      config.rel_tol * std::max(1.0, std::abs(study.E_target)) +
      quadrature_tolerance(grid) * (1.0 + std::abs(study.E_target));
  bool final_ok = false;
  for (const auto& row : study.rows) {
    if (!row.error.empty()) continue;
    if (row.J_eps < study.E_target - liminf_tol) study.liminf_ok = false;
  }
  if (!study.rows.empty() && study.rows.back().error.empty())
    final_ok = study.rows.back().rel_gap <= config.rel_tol;

  bool trend_ok = true;
  for (size_t t = 0; t < battery.size(); ++t) {
    std::vector<double> err;
    for (const auto& row : study.rows)
      if (row.error.empty()) err.push_back(std::abs(row.pairings[t] - study.targets[t]));
    if (err.size() < 2) continue;
    // Least-squares slope of the error against the ladder position
    // (eps decreasing); a downward trend gives a nonpositive slope.
    const double n = static_cast<double>(err.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < err.size(); ++i) {
      sx += i;
      sy += err[i];
      sxx += static_cast<double>(i) * i;
      sxy += i * err[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    double emax = 1e-12;
    for (double v : err) emax = std::max(emax, v);
    if (slope > config.slope_tol * emax) trend_ok = false;
  }

  study.verdict = final_ok && trend_ok && study.liminf_ok;
  return study;
}

}  // namespace membrelax
