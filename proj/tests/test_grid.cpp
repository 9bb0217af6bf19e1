#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "dgd/games.hpp"
#include "dgd/grid.hpp"
#include "dgd/superdiff.hpp"

using namespace dgd;

namespace {

ValueField sample_field(const Grid& g, const std::function<double(ConstSpan)>& fn) {
  ValueField f;
  f.grid = g;
  f.scale = ValueScale::Direct;
  f.values.resize(g.size());
  f.mask.resize(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Vec x = g.node_point(k);
    f.values[k] = fn(x);
    f.mask[k] = g.on_face(k) ? NodeKind::Boundary : NodeKind::Interior;
  }
  return f;
}

bool has_vector(const std::vector<Vec>& vs, const Vec& want, double tol) {
  for (const auto& v : vs) {
    double d = 0;
    for (std::size_t i = 0; i < v.size(); ++i) d = std::max(d, std::abs(v[i] - want[i]));
    if (d <= tol) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("build_grid examples") {
  const Grid a = build_grid({{-2, 2}}, {5});
  CHECK(a.size() == 5);
  CHECK(a.spacing(0) == 1.0);
  for (std::size_t k = 0; k < 5; ++k) CHECK(a.coordinate(0, k) == -2.0 + double(k));

  const Grid b = build_grid({{0, 1}, {0, 1}}, {3, 3});
  CHECK(b.size() == 9);
  CHECK(b.spacing(0) == 0.5);
  CHECK(b.spacing(1) == 0.5);

  const Grid c = build_grid({{-2, 2}, {-2, 2}, {-2, 2}}, {81, 81, 81});
  CHECK(c.size() == 81u * 81u * 81u);
  for (std::size_t i = 0; i < 3; ++i) CHECK(c.spacing(i) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(c.coordinate(0, 80) == 2.0);
}

TEST_CASE("build_grid rejects inverted bounds and short axes") {
  CHECK_THROWS_AS(build_grid({{1, -1}}, {5}), InputError);
  CHECK_THROWS_AS(build_grid({{0, 0}}, {5}), InputError);
  CHECK_THROWS_AS(build_grid({{0, 1}}, {1}), InputError);
  CHECK_THROWS_AS(build_grid({{0, 1}}, {3, 3}), InputError);
}

TEST_CASE("node layout is lexicographic and reproducible") {
  const Grid g = build_grid({{0, 1}, {-1, 1}, {2, 3}}, {3, 4, 5});
  const Grid h = build_grid({{0, 1}, {-1, 1}, {2, 3}}, {3, 4, 5});
  std::vector<std::size_t> m(3);
  for (std::size_t k = 0; k < g.size(); ++k) {
    g.node_index(k, m);
    CHECK(g.flat_index(m) == k);
    CHECK(g.node_point(k) == h.node_point(k));
  }
  CHECK(g.node_point(1) == Vec{0, -1, 2.25});
  const Vec p5 = g.node_point(5);
  CHECK(p5[0] == 0.0);
  CHECK(p5[1] == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
  CHECK(p5[2] == 2.0);
}

TEST_CASE("interpolation examples") {
  const Grid g = build_grid({{-1, 1}}, {7});
  const ValueField f = sample_field(g, [](ConstSpan x) { return 2 * x[0] + 1; });
  CHECK(interpolate(f, Vec{0.3}).value == doctest::Approx(1.6).epsilon(1e-15));
  CHECK_FALSE(interpolate(f, Vec{0.3}).out_of_domain);

  const Grid u = build_grid({{0, 1}}, {2});
  ValueField s = sample_field(u, [](ConstSpan x) { return x[0]; });
  CHECK(interpolate(s, Vec{0.25}).value == 0.25);
  for (std::size_t k = 0; k < g.size(); ++k) CHECK(interpolate(f, g.node_point(k)).value == f.values[k]);
}

TEST_CASE("interpolation outside the box clamps and flags") {
  const Grid g = build_grid({{0, 1}}, {3});
  const ValueField f = sample_field(g, [](ConstSpan x) { return x[0]; });
  const Interpolated hi = interpolate(f, Vec{1.7});
  CHECK(hi.out_of_domain);
  CHECK(hi.value == 1.0);
  const Interpolated lo = interpolate(f, Vec{-0.2});
  CHECK(lo.out_of_domain);
  CHECK(lo.value == 0.0);
  CHECK_THROWS_AS(interpolate(f, Vec{0.1, 0.1}), InputError);
}

TEST_CASE("interpolation reproduces nodes and affine fields in 3D") {
  const Grid g = build_grid({{-1, 2}, {0, 1}, {-3, -1}}, {7, 5, 9});
  auto aff = [](ConstSpan x) { return 0.7 * x[0] - 1.3 * x[1] + 2.1 * x[2] + 0.25; };
  ValueField f = sample_field(g, aff);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 500; ++k) {
    const Vec x{-1 + 3 * u(rng), u(rng), -3 + 2 * u(rng)};
    CHECK(interpolate(f, x).value == doctest::Approx(aff(x)).epsilon(1e-13));
  }
  // arbitrary node values, exact at nodes
  for (std::size_t k = 0; k < g.size(); ++k) f.values[k] = u(rng);
  for (std::size_t k = 0; k < g.size(); k += 7) CHECK(interpolate(f, g.node_point(k)).value == f.values[k]);
}

TEST_CASE("central gradient examples") {
  const Grid g = build_grid({{-2, 2}, {-1, 1}}, {9, 5});
  const ValueField f = sample_field(g, [](ConstSpan x) { return 2 * x[0] + 1; });
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto est = central_gradient(f, k);
    CHECK(est.gradient[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(std::abs(est.gradient[1]) < 1e-14);
    CHECK_FALSE(est.flagged);
  }

  const Grid l = build_grid({{-2, 2}}, {9});
  const ValueField a = sample_field(l, [](ConstSpan x) { return std::abs(x[0]); });
  CHECK(central_gradient(a, 6).gradient[0] == doctest::Approx(1.0));  // x = 1
  CHECK(central_gradient(a, 4).gradient[0] == 0.0);                   // x = 0
  CHECK(central_gradient(a, 0).gradient[0] == doctest::Approx(-1.0)); // one-sided at the face

  ValueField t = a;
  t.mask[4] = NodeKind::Target;
  t.values[4] = 0;
  CHECK(central_gradient(t, 4).flagged);
}

TEST_CASE("to_direct maps evasion to infinity") {
  const Grid g = build_grid({{0, 1}}, {3});
  ValueField f = sample_field(g, [](ConstSpan) { return 0.0; });
  f.scale = ValueScale::Kruzkov;
  f.values = {0.0, 0.5, 1.0};
  const ValueField d = to_direct(f);
  CHECK(d.scale == ValueScale::Direct);
  CHECK(d.values[0] == 0.0);
  CHECK(d.values[1] == doctest::Approx(std::log(2.0)));
  CHECK(std::isinf(d.values[2]));
}

TEST_CASE("projections") {
  const Projection p = Projection::indices({0, 2}, 3);
  CHECK(p.apply(Vec{1, 2, 3}) == Vec{1, 3});
  CHECK(p.embed_gradient(Vec{5, 7}) == Vec{5, 0, 7});
  CHECK(p.is_index_map());
  CHECK_THROWS_AS(Projection::indices({1, 1}, 3), InputError);
  CHECK_THROWS_AS(Projection::indices({0, 3}, 3), InputError);

  const Projection l = Projection::linear({{1, 0, -1, 0}, {0, 1, 0, -1}}, 4);
  CHECK_FALSE(l.is_index_map());
  CHECK(l.apply(Vec{1, 2, 3, 5}) == Vec{-2, -3});
  CHECK(l.embed_gradient(Vec{2, 3}) == Vec{2, 3, -2, -3});
  CHECK_THROWS_AS(Projection::linear({{1, 0}}, 3), InputError);
}

TEST_CASE("superdifferential of min(x, -x) at the kink") {
  const Grid g = build_grid({{-1, 1}}, {101});
  const ValueField f = sample_field(g, [](ConstSpan x) { return std::min(x[0], -x[0]); });
  const auto s = estimate_limiting_superdiff(f, Vec{0.0}, 4 * g.spacing(0), 32);
  REQUIRE(s.vectors.size() == 2);
  CHECK(has_vector(s.vectors, {1.0}, 1e-6));
  CHECK(has_vector(s.vectors, {-1.0}, 1e-6));
  CHECK(s.requested == 32);
  CHECK(s.accepted > 0);
  CHECK(s.radius == doctest::Approx(0.08));
}

TEST_CASE("superdifferential of a smooth field is one cluster") {
  const Grid g = build_grid({{-1, 1}, {-1, 1}}, {41, 41});
  const ValueField f = sample_field(g, [](ConstSpan x) { return 2 * x[0] + 1; });
  for (const Vec& x : {Vec{0, 0}, Vec{0.3, -0.4}, Vec{-0.5, 0.55}}) {
    const auto s = estimate_limiting_superdiff(f, x, 0.2, 48);
    REQUIRE(s.vectors.size() == 1);
    CHECK(s.vectors[0][0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(std::abs(s.vectors[0][1]) < 1e-9);
  }
}

TEST_CASE("superdifferential of the three-agent envelope at (0, 1, -1)") {
  const double alpha = 0.5;
  const Grid g = build_grid({{-2, 2}, {-2, 2}, {-2, 2}}, {81, 81, 81});
  const ValueField f = sample_field(g, [&](ConstSpan x) {
    return std::min(std::abs(x[1] - x[0]), std::abs(x[2] - x[0])) / (1 - alpha);
  });
  const auto s = estimate_limiting_superdiff(f, Vec{0, 1, -1}, 4 * g.max_spacing(), 64);
  REQUIRE(s.vectors.size() == 2);
  CHECK(has_vector(s.vectors, {-2, 2, 0}, 1e-6));
  CHECK(has_vector(s.vectors, {2, 0, -2}, 1e-6));
}

TEST_CASE("superdifferential of a min of two affine functions on the crossing set") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  const Grid g = build_grid({{-1, 1}, {-1, 1}}, {41, 41});
  for (int trial = 0; trial < 12; ++trial) {
    const Vec p{u(rng) * 2, u(rng) * 2};
    Vec q{u(rng) * 2, u(rng) * 2};
    if (std::hypot(p[0] - q[0], p[1] - q[1]) < 1.0) q[0] = p[0] + 1.5;
    // crossing set passes through x0
    const Vec x0{0.3 * u(rng), 0.3 * u(rng)};
    const double c = p[0] * x0[0] + p[1] * x0[1], d = q[0] * x0[0] + q[1] * x0[1];
    const ValueField f = sample_field(g, [&](ConstSpan x) {
      return std::min(p[0] * x[0] + p[1] * x[1] - c, q[0] * x[0] + q[1] * x[1] - d);
    });
    for (double mult : {4.0, 6.0}) {
      const auto s = estimate_limiting_superdiff(f, x0, mult * g.max_spacing(), 64);
      REQUIRE(s.vectors.size() == 2);
      CHECK(has_vector(s.vectors, p, 1e-6));
      CHECK(has_vector(s.vectors, q, 1e-6));
    }
  }
}

TEST_CASE("superdifferential inputs are validated") {
  const Grid g = build_grid({{-1, 1}}, {21});
  const ValueField f = sample_field(g, [](ConstSpan x) { return x[0]; });
  CHECK_THROWS_AS(estimate_limiting_superdiff(f, Vec{0.0}, 0.05, 16), InputError);
  CHECK_THROWS_AS(estimate_limiting_superdiff(f, Vec{0.0, 1.0}, 0.5, 16), InputError);
  ValueField t = f;
  for (auto& m : t.mask) m = NodeKind::Target;
  for (auto& v : t.values) v = 0;
  const auto s = estimate_limiting_superdiff(t, Vec{0.0}, 0.4, 16);
  CHECK(s.empty());
  CHECK_FALSE(s.diagnostic.empty());
}

TEST_CASE("embedding pads unused coordinates with zeros") {
  const Grid g = build_grid({{-1, 1}, {-1, 1}}, {21, 21});
  const ValueField f = sample_field(g, [](ConstSpan x) { return 3 * x[0] - x[1]; });
  const auto s = estimate_limiting_superdiff(f, Vec{0, 0}, 0.4, 16);
  const auto e = embed(s, Projection::indices({0, 2}, 4), Vec{0, 9, 0, 9});
  REQUIRE(e.vectors.size() == 1);
  CHECK(e.vectors[0].size() == 4);
  CHECK(e.vectors[0][0] == doctest::Approx(3));
  CHECK(e.vectors[0][1] == 0.0);
  CHECK(e.vectors[0][2] == doctest::Approx(-1));
  CHECK(e.vectors[0][3] == 0.0);
  CHECK(e.point == Vec{0, 9, 0, 9});
}

TEST_CASE("grid CSV round trip") {
  const Grid g = build_grid({{-1, 1}, {0, 2}}, {4, 3});
  ValueField f = sample_field(g, [](ConstSpan x) { return std::sin(x[0]) + x[1] / 3.0; });
  f.mask[4] = NodeKind::Target;
  f.values[4] = 0.0;
  f.values[5] = std::numeric_limits<double>::infinity();
  std::stringstream ss;
  write_grid_csv(ss, f);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "x1,x2,value,mask");
  ss.seekg(0);
  const ValueField r = read_grid_csv(ss, ValueScale::Direct);
  CHECK(r.grid.size() == g.size());
  CHECK(r.values == f.values);
  CHECK(r.mask == f.mask);
  for (std::size_t k = 0; k < g.size(); ++k) CHECK(r.grid.node_point(k) == g.node_point(k));

  std::stringstream bad("x1,value,mask\n0,1,INTERIOR\n");
  CHECK_THROWS_AS(read_grid_csv(bad, ValueScale::Direct), InputError);
}

TEST_CASE("masks from a game") {
  const P3Game game = make_p3(0.5, 0.25);
  const Grid g = build_grid({{-1, 1}, {-1, 1}, {-1, 1}}, {5, 5, 5});
  const ValueField f = ValueField::with_masks(g, game.full, ValueScale::Kruzkov);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Vec x = g.node_point(k);
    if (game.full.in_target(x))
      CHECK(f.mask[k] == NodeKind::Target);
    else if (g.on_face(k))
      CHECK(f.mask[k] == NodeKind::Boundary);
    else
      CHECK(f.mask[k] == NodeKind::Interior);
    CHECK(f.values[k] == 0.0);
  }
}
