#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "dgd/games.hpp"
#include "dgd/model.hpp"
#include "oracles.hpp"

using namespace dgd;

namespace {

// f = a*b on R, a, b in {-1, 1}, unit running cost.
GameSpec coupled_game() {
  GameSpec s;
  s.name = "coupled";
  s.state_dim = 1;
  s.control_set_a = ControlGrid({{-1.0}, {1.0}}, "{-1,1}");
  s.control_set_b = ControlGrid({{-1.0}, {1.0}}, "{-1,1}");
  s.dynamics = [](ConstSpan, ConstSpan a, ConstSpan b, std::span<double> out) { out[0] = a[0] * b[0]; };
  s.payoff_integrand = [](ConstSpan, ConstSpan, ConstSpan) { return 1.0; };
  TargetSet t;
  t.label = 1;
  t.contains = [](ConstSpan x) { return std::abs(x[0]) <= 0.1; };
  s.targets = {t};
  s.minimum_time = true;
  return s;
}

}  // namespace

TEST_CASE("control grids reject empty, mixed and duplicate point sets") {
  CHECK_THROWS_AS(ControlGrid({}, "empty"), InputError);
  CHECK_THROWS_AS(ControlGrid({{0.0}, {0.0, 1.0}}, "mixed"), InputError);
  CHECK_THROWS_AS(ControlGrid({{0.5}, {0.5}}, "dup"), InputError);
  const auto g = ControlGrid::interval(-1, 1, 21);
  CHECK(g.size() == 21);
  CHECK(g[0][0] == -1.0);
  CHECK(g[20][0] == 1.0);
  CHECK(g[10][0] == doctest::Approx(0.0));
  const auto p = ControlGrid::product(ControlGrid::interval(-1, 1, 3), ControlGrid::interval(0, 1, 2));
  CHECK(p.size() == 6);
  CHECK(p.dim() == 2);
}

TEST_CASE("target consistency check catches membership/distance disagreement") {
  TargetSet t;
  t.label = 4;
  t.contains = [](ConstSpan x) { return x[0] <= 0.0; };
  t.signed_distance = [](ConstSpan x) { return x[0] - 0.5; };
  std::vector<Vec> pts{{-1.0}, {0.25}};
  CHECK_THROWS_AS(check_target_consistency(t, pts), InputError);
  t.signed_distance = [](ConstSpan x) { return x[0]; };
  CHECK_NOTHROW(check_target_consistency(t, pts));
}

TEST_CASE("eval_dynamics on the registered families") {
  const P3Game p3 = make_p3(0.5);
  const Vec v = eval_dynamics(p3.full, Vec{0, 0, 0}, Vec{0.5}, Vec{1, -1});
  CHECK(v == Vec{0.5, 1.0, -1.0});

  P2Params q;
  const P2Game p2 = make_p2(q);
  const Vec w = eval_dynamics(p2.reduced[0].spec, Vec{0, 0, 1, 0}, Vec{0.0}, Vec{0.0});
  CHECK(w[0] == 0.0);
  CHECK(w[1] == 0.0);

  P1Params p;
  p.m = 1;
  p.alphas = {0.5};
  const P1Game p1 = make_p1(p);
  const Vec u = eval_dynamics(p1.full, Vec{1, 2}, Vec{0.5}, Vec{0.0});
  CHECK(u[0] == 0.5);

  CHECK_THROWS_AS(eval_dynamics(p3.full, Vec{0, 0}, Vec{0.5}, Vec{1, -1}), InputError);
  CHECK_THROWS_AS(eval_dynamics(p3.full, Vec{0, 0, 0}, Vec{0.5, 0}, Vec{1, -1}), InputError);
}

TEST_CASE("upper Hamiltonian of the three-agent line game") {
  const GameSpec s = make_p3(0.5).full;
  const Vec x{0, 0, 0};
  CHECK(hamiltonian_upper(s, x, 0, Vec{0, 0, 0}) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(hamiltonian_upper(s, x, 0, Vec{-2, 2, 0}) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(hamiltonian_upper(s, x, 0, Vec{0, 1, -1}) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(hamiltonian_upper(s, x, 0, Vec{0, 1}), InputError);
}

TEST_CASE("lower Hamiltonian matches brute-force max-min") {
  const GameSpec s = make_p3(0.5).full;
  const Vec x{0.3, -0.2, 1.0};
  for (const Vec& p : {Vec{0, 0, 0}, Vec{-2, 2, 0}, Vec{0, 1, -1}, Vec{0.7, -1.3, 0.4}}) {
    std::vector<std::vector<double>> t;
    for (const auto& a : s.control_set_a.points()) {
      t.emplace_back();
      for (const auto& b : s.control_set_b.points()) {
        const double dot = p[0] * a[0] + p[1] * b[0] + p[2] * b[1];
        t.back().push_back(-dot - 1.0);
      }
    }
    CHECK(hamiltonian_lower(s, x, 0, p) == doctest::Approx(oracle::maxmin(t)).epsilon(1e-14));
    CHECK(hamiltonian_upper(s, x, 0, p) == doctest::Approx(oracle::minmax(t)).epsilon(1e-14));
  }
  CHECK(hamiltonian_lower(s, x, 0, Vec{0, 0, 0}) == -1.0);
  CHECK(hamiltonian_lower(s, x, 0, Vec{-2, 2, 0}) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(hamiltonian_lower(s, x, 0, Vec{0, 1, -1}) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("decoupled Hamiltonians of single agents") {
  const GameSpec s = make_p3(0.5).full;
  CHECK(decoupled_hamiltonian(s, 0, Vec{0.0}, Vec{2.0}) == doctest::Approx(1.0));
  CHECK(decoupled_hamiltonian(s, 0, Vec{0.0}, Vec{0.0}) == 0.0);
  CHECK(decoupled_hamiltonian(s, 1, Vec{0.0}, Vec{-3.0}) == doctest::Approx(3.0));
  CHECK_THROWS_AS(decoupled_hamiltonian(coupled_game(), 0, Vec{0.0}, Vec{1.0}), UsageError);
  CHECK_THROWS_AS(decoupled_hamiltonian(s, 7, Vec{0.0}, Vec{1.0}), InputError);
}

TEST_CASE("Isaacs gap") {
  const GameSpec s = make_p3(0.5).full;
  CHECK(isaacs_gap(s, Vec{0, 0, 0}, Vec{0, 1, -1}) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(isaacs_gap(s, Vec{0, 0, 0}, Vec{0, 0, 0}) == 0.0);
  // min_a max_b (-ab) = 1, max_b min_a (-ab) = -1
  CHECK(isaacs_gap(coupled_game(), Vec{0.5}, Vec{1.0}) == doctest::Approx(2.0));
}

TEST_CASE("Hamiltonian properties on sampled states and costates") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3, 3);
  const GameSpec s = make_p3(0.4, 0.0, 7).full;
  P1Params pp;
  pp.control_samples = 5;
  const GameSpec s1 = make_p1(pp).full;
  for (int k = 0; k < 200; ++k) {
    const Vec x{u(rng), u(rng), u(rng)};
    const Vec p{u(rng), u(rng), u(rng)};
    CHECK(hamiltonian_upper(s, x, 0, p) >= hamiltonian_lower(s, x, 0, p));
    CHECK(hamiltonian_upper(s1, x, 0, p) >= hamiltonian_lower(s1, x, 0, p));
    CHECK(hamiltonian_upper(coupled_game(), Vec{x[0]}, 0, Vec{p[0]}) >=
          hamiltonian_lower(coupled_game(), Vec{x[0]}, 0, Vec{p[0]}));

    const double c = std::abs(u(rng)) + 0.1;
    for (std::size_t i = 0; i < 3; ++i) {
      const double h = decoupled_hamiltonian(s, i, Vec{x[i]}, Vec{p[i]});
      CHECK(decoupled_hamiltonian(s, i, Vec{x[i]}, Vec{c * p[i]}) == doctest::Approx(c * h).epsilon(1e-14));
      const double q = u(rng);
      const double mid = decoupled_hamiltonian(s, i, Vec{x[i]}, Vec{0.5 * (p[i] + q)});
      CHECK(mid <= 0.5 * (h + decoupled_hamiltonian(s, i, Vec{x[i]}, Vec{q})) + 1e-14);
    }
  }
}

TEST_CASE("upper Hamiltonian is nondecreasing in u with slope equal to the discount") {
  GameSpec s = coupled_game();
  s.discount = 0.7;
  s.minimum_time = false;
  const Vec x{0.3}, p{0.4};
  const double f0 = hamiltonian_upper(s, x, 0.0, p);
  for (double du : {0.1, 1.0, 5.0}) CHECK(hamiltonian_upper(s, x, du, p) - f0 == doctest::Approx(0.7 * du));
}

TEST_CASE("validation flags unbounded dynamics and empty targets") {
  GameSpec s = coupled_game();
  const std::vector<std::pair<double, double>> box{{-1, 1}};
  CHECK_NOTHROW(validate(s, box));
  GameSpec bad = s;
  bad.dynamics = [](ConstSpan x, ConstSpan, ConstSpan, std::span<double> out) { out[0] = 1.0 / (x[0] - x[0]); };
  CHECK_THROWS_AS(validate(bad, box), InputError);
  GameSpec none = s;
  none.targets.clear();
  CHECK_THROWS_AS(validate(none, box), InputError);
}
