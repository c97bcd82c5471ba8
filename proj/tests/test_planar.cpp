#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "membrelax/planar.hpp"

using namespace membrelax;

namespace {

// Unit square split along y = 1/2; the upper region is shifted by (1,0,0).
const char* kTwoRegionScene = R"({
  "domain": [0, 0, 1, 1],
  "regions": [
    {"polygon": [[0,0],[1,0],[1,0.5],[0,0.5]]},
    {"polygon": [[0,0.5],[1,0.5],[1,1],[0,1]], "c": [1, 0, 0]}
  ],
  "jumps": [{"p0": [0,0.5], "p1": [1,0.5], "minus": 0, "plus": 1}]
})";

SceneFile two_region_scene() { return load_scene_json(kTwoRegionScene); }

bool has_code(const std::vector<ValidationFinding>& fs, const std::string& code) {
  for (const auto& f : fs)
    if (f.code == code) return true;
  return false;
}

}  // namespace

TEST_CASE("cantor_function: endpoints, plateaus, self-similar values") {
  CHECK(cantor_function(0.0) == doctest::Approx(0.0));
  CHECK(cantor_function(1.0) == doctest::Approx(1.0));
  CHECK(cantor_function(-0.5) == doctest::Approx(0.0));
  CHECK(cantor_function(1.5) == doctest::Approx(1.0));
  CHECK(cantor_function(1.0 / 3) == doctest::Approx(0.5));
  CHECK(cantor_function(0.5) == doctest::Approx(0.5));   // middle plateau
  CHECK(cantor_function(2.0 / 3) == doctest::Approx(0.5));
  CHECK(cantor_function(1.0 / 9) == doctest::Approx(0.25));
  CHECK(cantor_function(0.25) == doctest::Approx(1.0 / 3).epsilon(1e-9));
}

TEST_CASE("scene loading derives traces and oriented normals") {
  const auto sf = two_region_scene();
  REQUIRE(sf.scene.jumps.size() == 1);
  const auto& j = sf.scene.jumps[0];
  CHECK(j.amplitude().x() == doctest::Approx(1.0));
  CHECK(j.nu.x() == doctest::Approx(0.0));
  CHECK(j.nu.y() == doctest::Approx(1.0));  // points from region 0 into region 1
  CHECK(sf.scene.region_of(Vec2(0.5, 0.25)) == 0);
  CHECK(sf.scene.region_of(Vec2(0.5, 0.75)) == 1);
  CHECK(sf.scene.region_of(Vec2(2.0, 0.5)) == -1);
  CHECK(sf.scene.u(Vec2(0.5, 0.75)).x() == doctest::Approx(1.0));
}

TEST_CASE("validate_scene: clean scene and individual findings") {
  auto sf = two_region_scene();
  CHECK(validate_scene(sf.scene).empty());

  SUBCASE("no regions") {
    sf.scene.regions.clear();
    CHECK(has_code(validate_scene(sf.scene), "no-regions"));
  }
  SUBCASE("partition gap") {
    sf.scene.regions.pop_back();
    sf.scene.jumps.clear();
    CHECK(has_code(validate_scene(sf.scene), "partition-gap"));
  }
  SUBCASE("clockwise region") {
    std::reverse(sf.scene.regions[0].polygon.begin(), sf.scene.regions[0].polygon.end());
    CHECK(has_code(validate_scene(sf.scene), "bad-region"));
  }
  SUBCASE("region outside the domain") {
    sf.scene.regions[1].polygon[2] = Vec2(1.5, 1.0);
    CHECK(has_code(validate_scene(sf.scene), "region-outside"));
  }
  SUBCASE("jump references a missing region") {
    sf.scene.jumps[0].plus_region = 7;
    CHECK(has_code(validate_scene(sf.scene), "bad-jump"));
  }
  SUBCASE("trace mismatch: amplitude varies along the segment") {
    sf.scene.regions[1].M(0, 0) = 1.0;
    CHECK(has_code(validate_scene(sf.scene), "trace-mismatch"));
  }
  SUBCASE("flipped normal") {
    sf.scene.jumps[0].nu = -sf.scene.jumps[0].nu;
    CHECK(has_code(validate_scene(sf.scene), "bad-normal"));
  }
  SUBCASE("degenerate staircase interval") {
    sf.scene.staircase = Staircase{Vec3(0, 0, 1), 0.8, 0.2};
    CHECK(has_code(validate_scene(sf.scene), "bad-staircase"));
  }
  SUBCASE("degenerate domain") {
    sf.scene.domain = {0, 0, 0, 1};
    CHECK(has_code(validate_scene(sf.scene), "bad-domain"));
  }
}

TEST_CASE("besicovitch_split routes each structured part") {
  auto sf = two_region_scene();

  SUBCASE("ac densities go to b_a") {
    sf.measure.ac = {Vec3(1, 0, 0), Vec3(0, 2, 0)};
    const auto split = besicovitch_split(sf.scene, sf.measure);
    REQUIRE(split.b_a.ac.size() == 2);
    CHECK(split.b_a.ac[1].y() == doctest::Approx(2.0));
    CHECK(split.b_j.is_zero());
    CHECK(split.b_sigma.is_zero());
  }
  SUBCASE("a line on the jump goes to b_j with its host recorded") {
    sf.measure.lines = {{Vec2(0.25, 0.5), Vec2(0.75, 0.5), Vec3(0, 0, 1)}};
    const auto split = besicovitch_split(sf.scene, sf.measure);
    REQUIRE(split.b_j.lines.size() == 1);
    CHECK(split.b_j.lines[0].length() == doctest::Approx(0.5));
    REQUIRE(split.b_j_host.size() == 1);
    CHECK(split.b_j_host[0] == 0);
    CHECK(split.b_sigma.is_zero());
  }
  SUBCASE("a line off the jump goes to b_sigma") {
    sf.measure.lines = {{Vec2(0.2, 0.2), Vec2(0.8, 0.2), Vec3(0, 0, 1)}};
    const auto split = besicovitch_split(sf.scene, sf.measure);
    CHECK(split.b_j.lines.empty());
    REQUIRE(split.b_sigma.lines.size() == 1);
  }
  SUBCASE("near-coincidence is ambiguous, not silently routed") {
    sf.measure.lines = {{Vec2(0.25, 0.5 + 1e-8), Vec2(0.75, 0.5 + 1e-8), Vec3(0, 0, 1)}};
    CHECK_THROWS_AS(besicovitch_split(sf.scene, sf.measure), ambiguity_error);
  }
  SUBCASE("atoms always go to b_sigma") {
    sf.measure.atoms = {{Vec2(0.5, 0.5), Vec3(1, 1, 1)}};
    const auto split = besicovitch_split(sf.scene, sf.measure);
    REQUIRE(split.b_sigma.atoms.size() == 1);
    CHECK(split.b_j.is_zero());
  }
  SUBCASE("cantor goes to b_c only when a staircase exists") {
    sf.measure.cantor = Vec3(0, 0, 1);
    auto split = besicovitch_split(sf.scene, sf.measure);
    CHECK(!split.b_c.cantor.has_value());
    CHECK(split.b_sigma.cantor.has_value());
    sf.scene.staircase = Staircase{Vec3(0, 0, 1), 0.25, 0.75};
    split = besicovitch_split(sf.scene, sf.measure);
    CHECK(split.b_c.cantor.has_value());
    CHECK(!split.b_sigma.cantor.has_value());
  }
}

TEST_CASE("partial overlap is cut at the jump and the rest is remainder") {
  // Declare the jump only on the left half of the interface; a line spanning
  // the full width splits into a hosted piece and a singular remainder.
  auto sf = two_region_scene();
  sf.scene.jumps[0].p1 = Vec2(0.5, 0.5);
  sf.measure.lines = {{Vec2(0, 0.5), Vec2(1, 0.5), Vec3(0, 0, 2)}};
  const auto split = besicovitch_split(sf.scene, sf.measure);
  REQUIRE(split.b_j.lines.size() == 1);
  CHECK(split.b_j.lines[0].length() == doctest::Approx(0.5));
  REQUIRE(split.b_sigma.lines.size() == 1);
  CHECK(split.b_sigma.lines[0].length() == doctest::Approx(0.5));
  CHECK(split.b_sigma.lines[0].density.z() == doctest::Approx(2.0));
}

TEST_CASE("total_variations on the reference scene") {
  auto sf = two_region_scene();
  sf.scene.staircase = Staircase{Vec3(0, 0, 2), 0.25, 0.75};
  sf.measure.ac = {Vec3(1, 0, 0), Vec3(0, 0, 0)};
  sf.measure.lines = {{Vec2(0, 0.5), Vec2(1, 0.5), Vec3(0, 3, 0)}};
  sf.measure.cantor = Vec3(0, 0, 4);
  const auto tv = total_variations(sf.scene, sf.measure);
  CHECK(tv.area == doctest::Approx(1.0));
  CHECK(tv.h1_jump == doctest::Approx(1.0));
  // |D u| = jump (len 1, amp 1) + Cantor (|a| = 2 across width 1).
  CHECK(tv.du == doctest::Approx(3.0));
  CHECK(tv.dcu == doctest::Approx(2.0));
  // |b| = area ac (0.5 * 1) + line (1 * 3) + cantor (4 * width 1).
  CHECK(tv.btv == doctest::Approx(0.5 + 3.0 + 4.0));
}

TEST_CASE("weakstar_pairing: exact parts and quadrature parts") {
  auto sf = two_region_scene();

  SUBCASE("atoms pair exactly") {
    sf.measure.atoms = {{Vec2(0.3, 0.4), Vec3(1, 2, 3)}};
    const auto res = weakstar_pairing(sf.scene, sf.measure,
                                      [](const Vec2& p) { return p.x() + 2 * p.y(); });
    CHECK(res.value.x() == doctest::Approx(1.1));
    CHECK(res.value.z() == doctest::Approx(3.3));
  }
  SUBCASE("lines with constant phi give length times density") {
    sf.measure.lines = {{Vec2(0.25, 0.5), Vec2(0.75, 0.5), Vec3(0, 0, 2)}};
    const auto res = weakstar_pairing(sf.scene, sf.measure, [](const Vec2&) { return 1.0; });
    CHECK(res.value.z() == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("area part is exact for affine phi") {
    sf.measure.ac = {Vec3(2, 0, 0), Vec3(0, 0, 0)};
    const auto res = weakstar_pairing(sf.scene, sf.measure,
                                      [](const Vec2& p) { return p.x(); });
    // int_{lower half} x dx dy = 1/4; density (2,0,0).
    CHECK(res.value.x() == doctest::Approx(0.5).epsilon(1e-9));
  }
  SUBCASE("cantor part integrates to the full mass for phi = 1") {
    sf.scene.staircase = Staircase{Vec3(0, 0, 1), 0.25, 0.75};
    sf.measure.cantor = Vec3(0, 0, 5);
    const auto res = weakstar_pairing(sf.scene, sf.measure, [](const Vec2&) { return 1.0; });
    CHECK(res.value.z() == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(res.truncation_bound >= 0.0);
  }
  SUBCASE("pairing is linear in the test function") {
    sf.measure.ac = {Vec3(1, 0, 0), Vec3(0, 1, 0)};
    sf.measure.atoms = {{Vec2(0.5, 0.25), Vec3(0, 0, 1)}};
    const auto f = [](const Vec2& p) { return std::sin(3 * p.x()) + p.y() * p.y(); };
    const auto g = [](const Vec2& p) { return std::cos(2 * p.y()); };
    const auto sum = [&](const Vec2& p) { return f(p) + 2.0 * g(p); };
    const Vec3 lhs = weakstar_pairing(sf.scene, sf.measure, sum).value;
    const Vec3 rhs = weakstar_pairing(sf.scene, sf.measure, f).value +
                     2.0 * weakstar_pairing(sf.scene, sf.measure, g).value;
    CHECK((lhs - rhs).norm() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("scene JSON round trip and schema errors") {
  auto sf = two_region_scene();
  sf.scene.staircase = Staircase{Vec3(0, 0, 2), 0.25, 0.75};
  sf.measure.ac = {Vec3(1, 0, 0), Vec3(0, 2, 0)};
  sf.measure.atoms = {{Vec2(0.5, 0.5), Vec3(0, 0, 3)}};
  sf.measure.cantor = Vec3(0, 0, 4);
  const auto rt = load_scene_json(scene_to_json(sf));
  CHECK(rt.scene.regions.size() == 2);
  CHECK(rt.scene.jumps[0].amplitude().x() == doctest::Approx(1.0));
  CHECK(rt.scene.staircase->s1 == doctest::Approx(0.75));
  CHECK(rt.measure.ac[1].y() == doctest::Approx(2.0));
  CHECK(rt.measure.cantor->z() == doctest::Approx(4.0));

  CHECK_THROWS_AS(load_scene_json("not json"), scene_error);
  CHECK_THROWS_AS(load_scene_json("{\"regions\": []}"), scene_error);  // no domain
  CHECK_THROWS_AS(load_scene_json(R"({
    "domain": [0,0,1,1],
    "regions": [{"polygon": [[0,0],[1,0],[1,1],[0,1]]}],
    "measure": {"ac": [[1,0,0],[0,1,0]]}
  })"),
                  scene_error);  // ac count != region count
}
