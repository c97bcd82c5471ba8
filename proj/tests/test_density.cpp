#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "membrelax/density.hpp"
#include "oracles.hpp"

using namespace membrelax;

namespace {

Mat33 full_of(double a, double b, double c, double d, double e, double f, double g, double h,
              double i) {
  Mat33 m;
  m << a, b, c, d, e, f, g, h, i;
  return m;
}

}  // namespace

TEST_CASE("convex-norm model evaluates sqrt(1 + |xi|^2)") {
  const auto model = make_convex_norm_model();
  CHECK(model->eval(Mat33::Zero()) == doctest::Approx(1.0));
  const Mat33 xi = full_of(1, 0, 0, 0, 2, 0, 0, 0, -2);
  CHECK(model->eval(xi) == doctest::Approx(std::sqrt(1.0 + xi.squaredNorm())));
  CHECK(model->is_convex());
  CHECK(model->constants().beta_prime == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("convex-norm recession is the Frobenius norm") {
  const auto model = make_convex_norm_model();
  const Mat33 xi = full_of(0.3, -1, 0.5, 2, 0, 1, 0, 0.25, -0.75);
  CHECK(model->recession_closed_form(xi) == doctest::Approx(xi.norm()));
  const double extrap = recession_density(*model, xi, default_t_ladder(), true);
  CHECK(extrap == doctest::Approx(xi.norm()).epsilon(1e-3));
}

TEST_CASE("recession_density is exactly 1-homogeneous by construction") {
  const auto model = make_separable_laminate_model();
  const Mat33 xi = full_of(0.4, 0, 0, 0, 0, 0, 1, 0, 0.7);
  const double v = recession_density(*model, xi, default_t_ladder(), true);
  const double v2 = recession_density(*model, 2.0 * xi, default_t_ladder(), true);
  CHECK(v2 == doctest::Approx(2.0 * v).epsilon(1e-14));
}

TEST_CASE("recession_density rejects bad ladders") {
  const auto model = make_convex_norm_model();
  const Mat33 xi = full_of(1, 0, 0, 0, 0, 0, 0, 0, 0);
  CHECK_THROWS_AS(recession_density(*model, xi, std::vector<double>{64.0, 64.0, 1024.0}, true),
                  domain_error);
  CHECK_THROWS_AS(recession_density(*model, xi, std::vector<double>{8.0, 16.0, 32.0}, true),
                  domain_error);
}

TEST_CASE("separable laminate density splits as |xi_bar| + g(b)") {
  const auto model = make_separable_laminate_model();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int s = 0; s < 32; ++s) {
    Mat33 xi;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) xi(i, j) = gauss(rng);
    const double expected = planar_part(xi).norm() + oracles::laminate_g(third_column(xi));
    CHECK(model->eval(xi) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("laminate recession model matches |xi_bar| + 1.5 |b| and the ladder") {
  const auto model = make_separable_laminate_model();
  const auto rec = model->recession_model();
  REQUIRE(rec != nullptr);
  const Mat33 xi = full_of(0.2, 0.1, 0, -0.4, 0, 0, 0, 0, 1.0);
  const double expected = planar_part(xi).norm() + 1.5 * third_column(xi).norm();
  CHECK(rec->eval(xi) == doctest::Approx(expected).epsilon(1e-12));
  const double extrap = recession_density(*model, xi, default_t_ladder(), true);
  CHECK(extrap == doctest::Approx(expected).epsilon(0.03));
}

TEST_CASE("w_zero: closed forms and tie-breaking") {
  const auto convex = make_convex_norm_model();
  Mat32 xi = Mat32::Zero();
  xi(0, 0) = 1.0;
  const auto pc = w_zero(*convex, xi);
  CHECK(pc.value == doctest::Approx(std::sqrt(2.0)));
  CHECK(pc.argmin.norm() == doctest::Approx(0.0));

  const auto laminate = make_separable_laminate_model();
  const auto pl = w_zero(*laminate, xi);
  CHECK(pl.value == doctest::Approx(1.5));  // |xi| + 0.5
  // Two global minimizers (+-e3); the smallest-norm-then-lexicographic
  // tie-break lands on (0, 0, -1).
  CHECK(pl.argmin.x() == doctest::Approx(0.0));
  CHECK(pl.argmin.y() == doctest::Approx(0.0));
  CHECK(pl.argmin.z() == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("laminate-envelope model matches the two-point enumeration on the axis") {
  const auto envelope = make_laminate_envelope_model();
  for (double b3 : {0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, -0.5, -1.25}) {
    Mat33 xi = Mat33::Zero();
    xi(2, 2) = b3;
    const double oracle = oracles::two_point_envelope_axis(b3);
    CHECK(envelope->eval(xi) == doctest::Approx(oracle).epsilon(0.01));
  }
}

TEST_CASE("laminate-envelope model is convex along segments") {
  const auto envelope = make_laminate_envelope_model();
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int s = 0; s < 24; ++s) {
    Mat33 a, d;
    for (int i = 0; i < 9; ++i) {
      a(i / 3, i % 3) = gauss(rng);
      d(i / 3, i % 3) = gauss(rng);
    }
    const double mid = envelope->eval(a + 0.5 * d);
    const double chord = 0.5 * (envelope->eval(a) + envelope->eval(a + d));
    CHECK(mid <= chord + 1e-4);
  }
}

TEST_CASE("certification accepts the built-in models") {
  for (const auto& model :
       {make_convex_norm_model(), make_separable_laminate_model(), make_laminate_envelope_model()}) {
    const auto report = certify(*model, 128, 0);
    CHECK(report.ok());
    CHECK(report.growth_slack >= 0.0);
  }
}

TEST_CASE("user-table model interpolates and extends linearly") {
  // Tabulate f(s, t) = s + 2 t on a coarse grid: bilinear interpolation and
  // the linear extension are both exact for affine data.
  std::vector<double> s_nodes = {0.0, 1.0, 2.0}, t_nodes = {0.0, 0.5, 1.0};
  std::vector<double> values;
  for (double t : t_nodes)
    for (double s : s_nodes) values.push_back(s + 2.0 * t);
  GrowthConstants gc;
  gc.beta_prime = 0.5;
  gc.beta = 3.0;
  gc.C = 2.0;
  gc.r = 0.5;
  gc.L = 3.0;
  const auto table = make_table_model(s_nodes, t_nodes, values, gc);
  Mat33 xi = Mat33::Zero();
  xi(0, 0) = 0.7;  // |xi_bar| = 0.7, |b| = 0.25
  xi(2, 2) = 0.25;
  CHECK(table->eval(xi) == doctest::Approx(0.7 + 0.5).epsilon(1e-9));
  xi(0, 0) = 5.0;  // beyond the grid: linear extension
  xi(2, 2) = 3.0;
  CHECK(table->eval(xi) == doctest::Approx(5.0 + 6.0).epsilon(1e-9));
}

TEST_CASE("model loading: kinds, missing files, certification failures") {
  CHECK_THROWS_WITH_AS(load_model_file("/nonexistent/model.json"),
                       doctest::Contains("model file not found"), domain_error);
  CHECK_THROWS_AS(load_model_json("{\"kind\": \"mystery\"}"), domain_error);
  CHECK_THROWS_AS(load_model_json("not json"), domain_error);
  const auto model = load_model_json("{\"kind\": \"convex-norm\"}");
  CHECK(model->eval(Mat33::Zero()) == doctest::Approx(1.0));

  // A table violating its declared growth bounds must fail certification.
  const char* bad = R"({
    "kind": "user-table",
    "params": {"s_nodes": [0, 1], "t_nodes": [0, 1], "values": [0, 0, 0, 0]},
    "constants": {"beta_prime": 1.0, "beta": 2.0, "C": 1.0, "r": 0.5, "L": 2.0}
  })";
  CHECK_THROWS_AS(load_model_json(bad), domain_error);
}

TEST_CASE("eval_density rejects non-finite input") {
  const auto model = make_convex_norm_model();
  Mat33 xi = Mat33::Zero();
  xi(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(eval_density(*model, xi), domain_error);
}
