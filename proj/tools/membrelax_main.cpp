#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "membrelax/membrane.hpp"
#include "membrelax/thinfilm.hpp"
#include "membrelax/verify.hpp"

namespace {

using namespace membrelax;

enum ExitCode { kOk = 0, kFail = 1, kUsage = 2, kSolver = 3, kScene = 4, kResolution = 5 };

std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    size_t pos = 0;
    out.push_back(std::stod(item, &pos));
  }
  return out;
}

Mat32 parse_xi(const std::string& text) {
  const auto v = parse_numbers(text);
  Mat32 xi = Mat32::Zero();
  if (v.size() == 1 && v[0] == 0.0) return xi;
  if (v.size() != 6)
    throw CLI::ValidationError("--xi", "expects 6 comma-separated values (row-major) or 0");
  xi << v[0], v[1], v[2], v[3], v[4], v[5];
  return xi;
}

Vec3 parse_vec3(const std::string& text) {
  const auto v = parse_numbers(text);
  if (v.size() == 1 && v[0] == 0.0) return Vec3::Zero();
  if (v.size() != 3) throw CLI::ValidationError("vector option expects 3 comma-separated values");
  return Vec3(v[0], v[1], v[2]);
}

Vec2 parse_vec2(const std::string& text) {
  const auto v = parse_numbers(text);
  if (v.size() != 2) throw CLI::ValidationError("--nu expects 2 comma-separated values");
  return Vec2(v[0], v[1]);
}

// Outputs are written atomically: temp file in the same directory, then
// renamed into place.
void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    if (!content.empty() && content.back() != '\n') std::cout << "\n";
    return;
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write output file: " + path);
    out << content;
    if (!content.empty() && content.back() != '\n') out << "\n";
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::pair<Mat32, Vec3>> read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw domain_error("samples file not found: " + path);
  std::vector<std::pair<Mat32, Vec3>> samples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.find_first_not_of("0123456789+-.eE, \t\r") != std::string::npos) continue;  // header
    const auto v = parse_numbers(line);
    if (v.size() < 9) throw domain_error("sample rows need 9 values (xi11..xi32,b1..b3)");
    Mat32 xi;
    xi << v[0], v[1], v[2], v[3], v[4], v[5];
    samples.push_back({xi, Vec3(v[6], v[7], v[8])});
  }
  if (samples.empty()) throw domain_error("samples file has no data rows: " + path);
  return samples;
}

struct CommonOpts {
  std::string model_path;
  std::string out_path;
  std::string format = "csv";
  std::uint64_t seed = 0;
  int n_alpha = 16;
  int n_three = 8;
  double tol_rel = -1.0;    // <0 keeps the per-command default
  double tol_slope = 1e-3;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_model) {
  auto* m = cmd->add_option("--model", opts.model_path, "density model JSON file");
  if (needs_model) m->required();
  cmd->add_option("--out", opts.out_path, "output file (stdout when omitted)");
  cmd->add_option("--format", opts.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--seed", opts.seed, "RNG seed (default 0)");
  cmd->add_option("--n-alpha", opts.n_alpha, "cell grid: in-plane cells per axis");
  cmd->add_option("--n-three", opts.n_three, "cell grid: thickness cells");
  cmd->add_option("--tol-rel", opts.tol_rel, "relative tolerance override");
  cmd->add_option("--tol-slope", opts.tol_slope, "pairing trend slope tolerance");
}

SolverBudget budget_from(const CommonOpts& opts) {
  SolverBudget b;
  b.seed = opts.seed;
  return b;
}

int run(int argc, char** argv) {
  CLI::App app{"membrelax: membrane densities with bending moments"};
  app.require_subcommand(1);

  // --- density ---
  auto* density = app.add_subcommand("density", "evaluate W, its recession, or W_0");
  CommonOpts dop;
  add_common(density, dop, true);
  std::string d_xi = "0", d_b = "0";
  bool d_recession = false, d_w0 = false, d_xi_unit = false;
  std::string d_samples;
  density->add_option("--xi", d_xi, "planar gradient, 6 values row-major (or 0)");
  density->add_option("--b", d_b, "third column, 3 values (or 0)");
  density->add_flag("--recession", d_recession, "evaluate the recession density");
  density->add_flag("--w0", d_w0, "evaluate the planar infimum W_0");
  density->add_flag("--xi-unit", d_xi_unit, "use the unit rank-one planar gradient e1 (x) e2");
  density->add_option("--samples", d_samples, "CSV of (xi|b) rows to tabulate");

  // --- cell ---
  auto* cell = app.add_subcommand("cell", "cell-problem solves");
  cell->require_subcommand(1);
  CommonOpts cop;
  std::string c_xi = "0", c_b = "0", c_nu = "0,1", c_z = "0", c_samples, c_warm;
  auto add_cell_sub = [&](const char* name, const char* desc) {
    auto* sub = cell->add_subcommand(name, desc);
    add_common(sub, cop, true);
    sub->add_option("--xi", c_xi, "planar gradient, 6 values row-major (or 0)");
    sub->add_option("--b", c_b, "bending vector, 3 values (or 0)");
    return sub;
  };
  auto* c_qstar = add_cell_sub("qstar", "Q*W cell problem");
  c_qstar->add_option("--warm", c_warm, "warm-start field (CellSolution JSON)");
  auto* c_qw0 = add_cell_sub("qw0", "2D relaxation QW_0");
  auto* c_rec = add_cell_sub("recession", "(Q*W)^inf by t-ladder extrapolation");
  auto* c_gamma = add_cell_sub("gamma-surface", "surface density gamma(z, nu, b)");
  c_gamma->add_option("--z", c_z, "jump amplitude, 3 values");
  c_gamma->add_option("--nu", c_nu, "unit jump normal, 2 values");
  auto* c_rot = add_cell_sub("rotated", "cell problem on the rotated cube");
  c_rot->add_option("--nu", c_nu, "unit rotation normal, 2 values");
  auto* c_sweep = cell->add_subcommand("sweep", "batch qstar over a sample CSV");
  add_common(c_sweep, cop, true);
  c_sweep->add_option("--samples", c_samples, "CSV of (xi|b) rows")->required();

  // --- membrane ---
  auto* membrane = app.add_subcommand("membrane", "Gamma-limit energy E(u, bbar)");
  CommonOpts mop;
  add_common(membrane, mop, true);
  std::string m_scene, m_loads;
  bool m_no_moment = false;
  membrane->add_option("--scene", m_scene, "scene JSON file")->required();
  membrane->add_option("--loads", m_loads, "load-set JSON file (adds the work F)");
  membrane->add_flag("--no-moment", m_no_moment, "use the moment-free QW_0 functional");

  // --- gamma ---
  auto* gamma = app.add_subcommand("gamma", "epsilon-sweep Gamma-convergence study");
  CommonOpts gop;
  add_common(gamma, gop, true);
  std::string g_scene, g_builder = "recovery", g_eps = "0.25,0.125,0.0625,0.03125";
  std::vector<std::string> g_slabs;
  int g_nx = 64, g_ny = 64, g_nz = 16;
  gamma->add_option("--scene", g_scene, "scene JSON file")->required();
  gamma->add_option("--builder", g_builder, "recovery|dirac|files")
      ->check(CLI::IsMember({"recovery", "dirac", "files"}));
  gamma->add_option("--eps", g_eps, "strictly decreasing eps list");
  gamma->add_option("--slab", g_slabs, "slab file base path, one per eps (files builder)");
  gamma->add_option("--nx", g_nx, "slab cells in x");
  gamma->add_option("--ny", g_ny, "slab cells in y");
  gamma->add_option("--nz", g_nz, "slab cells across the thickness");

  // --- verify ---
  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  CommonOpts vop;
  add_common(verify, vop, false);
  std::vector<std::string> v_only;
  verify->add_option("--only", v_only, "restrict to named checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (density->parsed()) {
    const auto model = load_model_file(dop.model_path);
    const Mat32 xi = d_xi_unit ? outer32(Vec3(1, 0, 0), Vec2(0, 1)) : parse_xi(d_xi);
    const Vec3 b = parse_vec3(d_b);
    std::ostringstream os;
    os.precision(12);
    if (!d_samples.empty()) {
      const auto samples = read_samples_csv(d_samples);
      os << "xi11,xi12,xi21,xi22,xi31,xi32,b1,b2,b3,value\n";
      for (const auto& [sxi, sb] : samples) {
        const Mat33 full = join(sxi, sb);
        const double v = d_recession ? recession_density(*model, full, default_t_ladder())
                         : d_w0      ? w_zero(*model, sxi).value
                                     : eval_density(*model, full);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 2; ++j) os << sxi(i, j) << ",";
        os << sb.x() << "," << sb.y() << "," << sb.z() << "," << v << "\n";
      }
    } else {
      const Mat33 full = join(xi, b);
      const double v = d_recession ? recession_density(*model, full, default_t_ladder())
                       : d_w0      ? w_zero(*model, xi).value
                                   : eval_density(*model, full);
      os << v << "\n";
    }
    write_output(dop.out_path, os.str());
    return kOk;
  }

  if (cell->parsed()) {
    const auto model = load_model_file(cop.model_path);
    const CellGrid grid{cop.n_alpha, cop.n_three};
    const SolverBudget budget = budget_from(cop);
    std::ostringstream os;
    os.precision(12);
    if (c_sweep->parsed()) {
      const auto rows = qstar_sweep(*model, read_samples_csv(c_samples), grid, budget);
      write_output(cop.out_path, sweep_to_csv(rows));
      return kOk;
    }
    const Mat32 xi = parse_xi(c_xi);
    const Vec3 b = parse_vec3(c_b);
    if (c_qstar->parsed()) {
      CellField warm;
      const CellField* warm_ptr = nullptr;
      if (!c_warm.empty()) {
        std::ifstream in(c_warm);
        if (!in) throw domain_error("warm-start file not found: " + c_warm);
        std::stringstream buf;
        buf << in.rdbuf();
        const auto parsed = nlohmann::json::parse(buf.str());
        warm = CellField::from_json(parsed.contains("field") ? parsed.at("field").dump()
                                                             : buf.str());
        warm_ptr = &warm;
      }
      const auto sol = qstar(*model, xi, b, grid, budget, warm_ptr);
      if (cop.format == "json") {
        write_output(cop.out_path, sol.to_json());
      } else {
        os << sol.value << "\n";
        write_output(cop.out_path, os.str());
      }
      return kOk;
    }
    if (c_qw0->parsed()) {
      os << qw_zero(*model, xi, grid, budget) << "\n";
    } else if (c_rec->parsed()) {
      os << qstar_recession(*model, xi, b, grid, budget, default_t_ladder()) << "\n";
    } else if (c_gamma->parsed()) {
      JumpSpec spec{parse_vec3(c_z), parse_vec2(c_nu), b};
      os << gamma_surface(*model, spec, grid, budget) << "\n";
    } else if (c_rot->parsed()) {
      const auto sol = qstar_rotated(*model, xi, b, parse_vec2(c_nu), grid, budget);
      if (cop.format == "json") {
        write_output(cop.out_path, sol.to_json());
        return kOk;
      }
      os << sol.value << "\n";
    }
    write_output(cop.out_path, os.str());
    return kOk;
  }

  if (membrane->parsed()) {
    const auto model = load_model_file(mop.model_path);
    const auto sf = load_scene_file(m_scene);
    const CellGrid grid{mop.n_alpha, mop.n_three};
    const SolverBudget budget = budget_from(mop);
    DensityCache cache;
    const EnergyBreakdown breakdown =
        m_no_moment ? membrane_energy_no_moment(*model, sf.scene, grid, budget, &cache)
                    : membrane_energy(*model, sf.scene, sf.measure, grid, budget, &cache);
    nlohmann::json out = nlohmann::json::parse(breakdown.to_json());
    if (!m_loads.empty()) {
      const auto loads = load_loads_file(m_loads, sf.scene);
      out["load_work"] = load_work(loads, sf.scene, sf.measure);
    }
    write_output(mop.out_path, out.dump(2));
    return kOk;
  }

  if (gamma->parsed()) {
    const auto model = load_model_file(gop.model_path);
    const auto sf = load_scene_file(g_scene);
    const CellGrid grid{gop.n_alpha, gop.n_three};
    const SolverBudget budget = budget_from(gop);
    GammaStudyConfig config;
    config.builder = g_builder == "recovery" ? StudyBuilder::Recovery
                     : g_builder == "dirac"  ? StudyBuilder::Dirac
                                             : StudyBuilder::Files;
    config.eps_list = parse_numbers(g_eps);
    config.nx = g_nx;
    config.ny = g_ny;
    config.nz = g_nz;
    if (gop.tol_rel > 0) config.rel_tol = gop.tol_rel;
    config.slope_tol = gop.tol_slope;
    config.slab_files = g_slabs;
    config.seed = gop.seed;
    DensityCache cache;
    const auto study = gamma_study(*model, sf.scene, sf.measure, config, grid, budget, &cache);
    write_output(gop.out_path, gop.format == "json" ? study.to_json() : study.to_csv());
    for (const auto& row : study.rows)
      if (row.error.find("resolve") != std::string::npos) {
        std::cerr << "under-resolved row at eps = " << row.eps << ": " << row.error << "\n";
        return kResolution;
      }
    return study.verdict ? kOk : kFail;
  }

  if (verify->parsed()) {
    const CellGrid grid{vop.n_alpha, vop.n_three};
    const auto results = run_verification(v_only, vop.seed, grid);
    std::ostringstream os;
    bool all_pass = true;
    for (const auto& r : results) {
      os << (r.pass ? "PASS" : "FAIL") << " " << r.name << " slack=" << r.slack << " ("
         << r.detail << ")\n";
      all_pass = all_pass && r.pass;
    }
    write_output(vop.out_path, os.str());
    return all_pass ? kOk : kFail;
  }

  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const membrelax::resolution_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kResolution;
  } catch (const membrelax::scene_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kScene;
  } catch (const membrelax::ambiguity_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kScene;
  } catch (const membrelax::convergence_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolver;
  } catch (const membrelax::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
}
