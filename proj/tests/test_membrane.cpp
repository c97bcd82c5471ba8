#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "membrelax/membrane.hpp"

using namespace membrelax;

namespace {

SolverBudget cheap() {
  SolverBudget b;
  b.multi_start = 3;
  b.max_iters = 40;
  b.lambda_coarse = 3;
  b.lambda_golden = 4;
  b.smoothing = {1e-1};
  return b;
}

SolverBudget medium() {
  SolverBudget b;
  b.multi_start = 7;
  b.max_iters = 80;
  b.lambda_coarse = 5;
  b.lambda_golden = 8;
  return b;
}

const CellGrid kGrid{16, 8};

PlanarScene one_region_scene() {
  PlanarScene scene;
  scene.domain = {0, 0, 1, 1};
  Region reg;
  reg.polygon = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)};
  scene.regions.push_back(reg);
  return scene;
}

PlanarScene two_region_scene() {
  PlanarScene scene;
  scene.domain = {0, 0, 1, 1};
  Region lower, upper;
  lower.polygon = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 0.5), Vec2(0, 0.5)};
  upper.polygon = {Vec2(0, 0.5), Vec2(1, 0.5), Vec2(1, 1), Vec2(0, 1)};
  upper.c = Vec3(1, 0, 0);
  scene.regions = {lower, upper};
  JumpSegment j;
  j.p0 = Vec2(0, 0.5);
  j.p1 = Vec2(1, 0.5);
  j.minus_region = 0;
  j.plus_region = 1;
  j.u_minus = Vec3::Zero();
  j.u_plus = Vec3(1, 0, 0);
  j.nu = Vec2(0, 1);
  scene.jumps.push_back(j);
  return scene;
}

}  // namespace

TEST_CASE("atom scene: convex model, bulk + singular closed form") {
  const auto model = make_convex_norm_model();
  const auto scene = one_region_scene();
  BendingMeasure measure;
  measure.atoms = {{Vec2(0.5, 0.5), Vec3(0, 0, 1)}};
  const auto e = membrane_energy(*model, scene, measure, kGrid, cheap());
  CHECK(e.bulk == doctest::Approx(1.0).epsilon(0.02));      // area * sqrt(1 + 0)
  CHECK(e.singular == doctest::Approx(1.0).epsilon(0.03));  // |w|
  CHECK(e.jump == doctest::Approx(0.0));
  CHECK(e.cantor == doctest::Approx(0.0));
  CHECK(e.total == doctest::Approx(2.0).epsilon(0.03));
  CHECK(e.total == doctest::Approx(e.bulk + e.jump + e.cantor + e.singular));
  CHECK(e.bulk_tol > 0.0);
}

TEST_CASE("jump scene: convex model recession on the jump") {
  const auto model = make_convex_norm_model();
  const auto scene = two_region_scene();
  const auto e = membrane_energy(*model, scene, BendingMeasure{}, kGrid, cheap());
  CHECK(e.bulk == doctest::Approx(1.0).epsilon(0.02));
  CHECK(e.jump == doctest::Approx(1.0).epsilon(0.03));  // len 1, |z (x) nu| = 1
  CHECK(e.total == doctest::Approx(2.0).epsilon(0.03));
}

TEST_CASE("laminate bulk relaxes below the pointwise density") {
  const auto model = make_separable_laminate_model();
  const auto scene = one_region_scene();
  const auto e = membrane_energy(*model, scene, BendingMeasure{}, kGrid, medium());
  // W(0|0) = 1.5 pointwise; the cell problem laminates down to Cg(0) = 0.5.
  CHECK(e.bulk == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("cantor term factors the Cantor mass and matches a direct solve") {
  const auto model = make_convex_norm_model();
  auto scene = one_region_scene();
  scene.staircase = Staircase{Vec3(0, 0, 1), 0.25, 0.75};
  BendingMeasure measure;
  measure.cantor = Vec3(0, 0, 0.5);
  const auto budget = cheap();
  const auto e = membrane_energy(*model, scene, measure, kGrid, budget);
  const auto ladder = default_t_ladder();
  const double direct = qstar_recession(*model, outer32(Vec3(0, 0, 1), Vec2(0, 1)),
                                        Vec3(0, 0, 0.5), kGrid, budget, ladder);
  CHECK(e.cantor == doctest::Approx(direct).epsilon(1e-12));  // width 1 strip
  // Frobenius recession of the convex model: sqrt(|a|^2 + |kappa|^2).
  CHECK(e.cantor == doctest::Approx(std::sqrt(1.25)).epsilon(0.03));
  CHECK(e.singular == doctest::Approx(0.0));
}

TEST_CASE("jump line density feeds the recession pair") {
  const auto model = make_convex_norm_model();
  const auto scene = two_region_scene();
  BendingMeasure measure;
  measure.lines = {{Vec2(0, 0.5), Vec2(1, 0.5), Vec3(0, 0, 1)}};
  const auto e = membrane_energy(*model, scene, measure, kGrid, cheap());
  // Whole segment covered: len 1 of |(z (x) nu | kappa)| = sqrt(2).
  CHECK(e.jump == doctest::Approx(std::sqrt(2.0)).epsilon(0.03));
}

TEST_CASE("invalid scenes are rejected with scene_error") {
  const auto model = make_convex_norm_model();
  auto scene = one_region_scene();
  scene.regions.clear();
  CHECK_THROWS_AS(membrane_energy(*model, scene, BendingMeasure{}, kGrid, cheap()), scene_error);
  CHECK_THROWS_AS(membrane_energy_no_moment(*model, scene, kGrid, cheap()), scene_error);
}

TEST_CASE("no-moment functional: QW0 closed forms") {
  const auto convex = make_convex_norm_model();
  const auto e1 = membrane_energy_no_moment(*convex, one_region_scene(), kGrid, cheap());
  CHECK(e1.total == doctest::Approx(1.0).epsilon(0.02));  // inf_b sqrt(1+|b|^2) = 1

  const auto e2 = membrane_energy_no_moment(*convex, two_region_scene(), kGrid, cheap());
  CHECK(e2.bulk == doctest::Approx(1.0).epsilon(0.02));
  CHECK(e2.jump == doctest::Approx(1.0).epsilon(0.03));
  CHECK(e2.total == doctest::Approx(2.0).epsilon(0.03));

  const auto laminate = make_separable_laminate_model();
  const auto e3 = membrane_energy_no_moment(*laminate, one_region_scene(), kGrid, medium());
  CHECK(e3.total == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("moment measure never increases the energy below the no-moment value") {
  // inf over bbar of E(u, bbar) is attained pointwise by QW0; the zero
  // measure is already within tolerance for the convex model.
  const auto model = make_convex_norm_model();
  const auto scene = two_region_scene();
  const auto with = membrane_energy(*model, scene, BendingMeasure{}, kGrid, cheap());
  const auto without = membrane_energy_no_moment(*model, scene, kGrid, cheap());
  CHECK(without.total <= with.total + without.bulk_tol + with.bulk_tol + 1e-9);
}

TEST_CASE("density cache: quantized keys and reproducible totals") {
  const std::string k1 = DensityCache::key("m", Mat32::Zero(), Vec3(0.5, 0, 0), "q");
  const std::string k2 = DensityCache::key("m", Mat32::Zero(), Vec3(0.5 + 1e-14, 0, 0), "q");
  const std::string k3 = DensityCache::key("m", Mat32::Zero(), Vec3(0.5 + 1e-9, 0, 0), "q");
  CHECK(k1 == k2);
  CHECK(k1 != k3);
  CHECK(k1 != DensityCache::key("m", Mat32::Zero(), Vec3(0.5, 0, 0), "rec"));

  const auto model = make_convex_norm_model();
  const auto scene = two_region_scene();
  DensityCache cache;
  const auto a = membrane_energy(*model, scene, BendingMeasure{}, kGrid, cheap(), &cache);
  const auto b = membrane_energy(*model, scene, BendingMeasure{}, kGrid, cheap(), &cache);
  CHECK(a.total == b.total);
}

TEST_CASE("load_work: body term, staircase term, moment term") {
  SUBCASE("centroid rule on affine pieces") {
    const auto scene = two_region_scene();
    LoadSet loads;
    loads.fbar.assign(2, Vec3(1, 0, 0));
    CHECK(load_work(loads, scene, BendingMeasure{}) == doctest::Approx(0.5));
    loads.g1_plus.assign(2, Vec3(1, 0, 0));  // doubles the body load
    CHECK(load_work(loads, scene, BendingMeasure{}) == doctest::Approx(1.0));
  }
  SUBCASE("staircase contribution integrates the Cantor function") {
    auto scene = one_region_scene();
    scene.staircase = Staircase{Vec3(0, 0, 2), 0.0, 1.0};
    LoadSet loads;
    loads.fbar.assign(1, Vec3(0, 0, 1));
    // int_0^1 cantor(y) dy = 1/2 by symmetry, times a . f = 2.
    CHECK(load_work(loads, scene, BendingMeasure{}) == doctest::Approx(1.0).epsilon(1e-4));
  }
  SUBCASE("moment term pairs g0 with the measure") {
    const auto scene = one_region_scene();
    BendingMeasure measure;
    measure.atoms = {{Vec2(0.5, 0.5), Vec3(0, 0, 2)}};
    LoadSet loads;
    loads.g0_plus.kind = G0Field::Kind::Bump;
    loads.g0_plus.direction = Vec3(0, 0, 1);
    loads.g0_plus.center = Vec2(0.5, 0.5);
    loads.g0_plus.radius = 0.3;
    // Bump value at its center is exp(0) = 1.
    CHECK(load_work(loads, scene, measure) == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("g0 must vanish on the boundary") {
    const auto scene = one_region_scene();
    LoadSet loads;
    loads.g0_plus.kind = G0Field::Kind::Bump;
    loads.g0_plus.direction = Vec3(0, 0, 1);
    loads.g0_plus.center = Vec2(0.0, 0.5);
    loads.g0_plus.radius = 0.3;
    CHECK_THROWS_AS(load_work(loads, scene, BendingMeasure{}), scene_error);
  }
  SUBCASE("per-region count mismatch") {
    const auto scene = two_region_scene();
    LoadSet loads;
    loads.fbar.assign(1, Vec3(1, 0, 0));
    CHECK_THROWS_AS(load_work(loads, scene, BendingMeasure{}), scene_error);
  }
}

TEST_CASE("loads JSON: shorthand broadcast, per-region lists, bad kinds") {
  const auto scene = two_region_scene();
  const auto loads = load_loads_json(R"({
    "fbar": [1, 0, 0],
    "g1_plus": [[0, 0, 1], [0, 0, 2]],
    "g0_plus": {"kind": "sine", "direction": [0, 1, 0]}
  })",
                                     scene);
  REQUIRE(loads.fbar.size() == 2);
  CHECK(loads.fbar[1].x() == doctest::Approx(1.0));
  REQUIRE(loads.g1_plus.size() == 2);
  CHECK(loads.g1_plus[1].z() == doctest::Approx(2.0));
  CHECK(loads.g0_plus.kind == G0Field::Kind::Sine);
  // The sine field vanishes on the boundary by construction.
  CHECK(loads.g0_plus.eval(Vec2(0.0, 0.5), scene.domain).norm() == doctest::Approx(0.0));

  CHECK_THROWS_AS(load_loads_json("{\"g0_plus\": {\"kind\": \"mystery\"}}", scene), scene_error);
  CHECK_THROWS_AS(load_loads_json("nope", scene), scene_error);
}
