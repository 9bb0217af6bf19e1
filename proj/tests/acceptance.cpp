// Acceptance criteria 1-8. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "dgd/cli.hpp"
#include "dgd/envelope.hpp"
#include "dgd/games.hpp"
#include "dgd/kruzkov.hpp"
#include "dgd/solver.hpp"
#include "dgd/synthesis.hpp"
#include "oracles.hpp"

using namespace dgd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "dgd_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int dgd(std::vector<std::string> args) {
  args.insert(args.begin(), "dgd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != cli::kOk) std::cerr << err.str();
  return code;
}

json read_json(const fs::path& p) {
  std::ifstream is(p);
  return json::parse(is);
}

std::vector<json> read_jsonl(const fs::path& p) {
  std::ifstream is(p);
  std::vector<json> out;
  for (std::string l; std::getline(is, l);)
    if (!l.empty()) out.push_back(json::parse(l));
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

SolverConfig clamp_config() {
  SolverConfig c;
  c.out_of_domain = OutOfDomain::Clamp;
  return c;
}

std::vector<ValueField> solve_all(const std::vector<ReducedGame>& games, const Grid& grid) {
  std::vector<ValueField> out;
  for (const auto& g : games) out.push_back(solve(g.spec, grid, clamp_config()).field);
  return out;
}

Result criterion1() {
  const double lam = 0.5, alpha = 0.5;
  const double r = p3_condition_E_residual(lam, alpha);
  const Vec g2 = p3_grad_u2(alpha), g3 = p3_grad_u3(alpha);
  Vec p(3);
  for (std::size_t d = 0; d < 3; ++d) p[d] = lam * g2[d] + (1 - lam) * g3[d];
  const double direct = hamiltonian_upper(make_p3(alpha).full, Vec{0, 1, -1}, 0.0, p);
  const bool ok = std::abs(r - 1.0) <= 1e-12 && std::abs(r - direct) <= 1e-12;
  return {ok, "residual=" + fmt(r) + " direct F=" + fmt(direct)};
}

Result criterion2() {
  const fs::path d = scratch("c2");
  if (dgd({"check", "--game", "p3", "--alpha", "0.5", "--boundary", "clamp", "--bounds", "-2:2", "--res", "201",
           "--point", "0,1,-1", "--out", d.string()}) != cli::kOk)
    return {false, "check command failed"};
  const auto reps = read_jsonl(d / "conditions.jsonl");
  if (reps.size() != 1) return {false, "expected one report"};
  const std::string verdict = reps[0]["verdict"];
  const double e = reps[0]["residual_E"];
  return {verdict == "VIOLATED" && e >= 0.7 && e <= 1.3, "verdict=" + verdict + " residual_E=" + fmt(e)};
}

// Nodes at least `margin` from every capture set |x_p - x_i| <= r.
std::function<bool(ConstSpan)> away_from_p1_targets(const P1Params& p, double margin) {
  return [p, margin](ConstSpan x) {
    for (std::size_t i = 0; i < p.m; ++i)
      if (std::abs(x[p.m] - x[i]) - p.r < margin) return false;
    return true;
  };
}

Result p1_decomposition(bool pure, double* linf_out) {
  P1Params p;
  p.pure_control = pure;
  p.control_samples = 3;
  const P1Game game = make_p1(p);
  const Grid full_grid = build_grid({{-2, 2}, {-2, 2}, {-2, 2}}, {81, 81, 81});
  const Grid red_grid = build_grid({{-2, 2}, {-2, 2}}, {201, 201});
  const SolveResult full = solve(game.full, full_grid, clamp_config());
  if (!full.converged) return {false, "full solve did not converge"};
  const EnvelopeField env =
      envelope_from_solves(game.reduced, solve_all(game.reduced, red_grid), default_tol_eq(red_grid.max_spacing()));
  const double h = full_grid.max_spacing();
  const FieldComparison cmp =
      compare_fields(GridFunction(full.field), env, full_grid, away_from_p1_targets(p, 3 * h));
  *linf_out = cmp.linf_kruzkov;
  return {true, "L_inf(kruzkov)=" + fmt(cmp.linf_kruzkov) + " on " + std::to_string(cmp.compared) + " nodes"};
}

Result criterion3() {
  double linf = 0;
  Result solved = p1_decomposition(false, &linf);
  if (!solved.pass) return solved;
  const fs::path d = scratch("c3");
  if (dgd({"check", "--game", "p1", "--boundary", "clamp", "--bounds", "-2:2", "--res", "201", "--query-res", "41",
           "--max-points", "400", "--out", d.string()}) != cli::kOk)
    return {false, "check command failed"};
  const json meta = read_json(d / "meta.json");
  const double n = meta["points"], holds = meta["verdicts"]["HOLDS"], violated = meta["verdicts"]["VIOLATED"];
  const bool ok = linf <= 0.15 && n > 0 && holds >= 0.99 * n && violated == 0;
  return {ok, solved.detail + "; sigma points=" + fmt(n) + " HOLDS=" + fmt(holds) + " VIOLATED=" + fmt(violated)};
}

Result criterion4() {
  const double alpha = 0.5;
  const Grid grid = build_grid({{-2, 2}, {-2, 2}, {-2, 2}}, {81, 81, 81});
  const double h = grid.max_spacing();
  const P3Game game = make_p3(alpha, h, 3);
  const SolveResult full = solve(game.full, grid, clamp_config());
  if (!full.converged) return {false, "full solve did not converge"};
  const oracle::P3 o{alpha};
  double worst = 0;
  std::size_t compared = 0;
  for (std::size_t n = 0; n < grid.size(); ++n) {
    if (full.field.mask[n] != NodeKind::Interior) continue;
    const Vec x = grid.node_point(n);
    if (std::abs(x[1] - x[0]) - h < 3 * h || std::abs(x[2] - x[0]) - h < 3 * h) continue;
    if (o.distance_to_D_boundary(x[0], x[1], x[2]) < 3 * h) continue;
    // the evader's optimal flight must stay in the box
    if (!o.play_stays_inside(x[0], x[1], x[2], -2, 2, 3 * h)) continue;
    worst = std::max(worst, std::abs(full.field.values[n] - kruzkov(o.value(x[0], x[1], x[2]))));
    ++compared;
  }
  const Grid red = build_grid({{-2, 2}, {-2, 2}}, {81, 81});
  const EnvelopeField env = envelope_from_solves(game.reduced, solve_all(game.reduced, red), default_tol_eq(h));
  const Vec x0{0, 1, -1};
  const double gap = env.value(x0) - kruzkov_inverse(interpolate(full.field, x0).value);
  const bool ok = worst <= 0.15 && compared > 0 && std::abs(gap - 1.0) <= 0.15;
  return {ok, "L_inf(kruzkov)=" + fmt(worst) + " on " + std::to_string(compared) + " nodes; envelope - u at (0,1,-1)=" +
                  fmt(gap)};
}

Result criterion5() {
  double linf = 0;
  Result solved = p1_decomposition(true, &linf);
  if (!solved.pass) return solved;
  P1Params p;
  p.pure_control = true;
  p.control_samples = 3;
  const P1Game game = make_p1(p);
  const Grid red_grid = build_grid({{-2, 2}, {-2, 2}}, {201, 201});
  const EnvelopeField env =
      envelope_from_solves(game.reduced, solve_all(game.reduced, red_grid), default_tol_eq(red_grid.max_spacing()));
  P1Params check = p;
  check.control_samples = 21;
  const std::vector<Vec> sigma = sigma_set(env, build_grid({{-2, 2}, {-2, 2}, {-2, 2}}, {41, 41, 41}));
  const ViscosityReport vr = verify_viscosity(env, make_p1(check).full, sigma);
  const bool ok = linf <= 0.1 && !sigma.empty() && vr.sub_violations == 0;
  return {ok, solved.detail + "; sigma points=" + std::to_string(sigma.size()) +
                  " sub_violations=" + std::to_string(vr.sub_violations)};
}

Result criterion6() {
  std::mt19937_64 rng(6);
  std::vector<std::function<double(double)>> strategies;
  const double t_max = 10.0;
  for (int k = 0; k < 100; ++k) strategies.push_back(random_piecewise_constant(rng, t_max, 1 + k % 25));
  P2Params p;
  const DampedIntegrator in{[p](double y) { return p2_damping(p, y); }, p.alpha, 0.01};
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = std::numeric_limits<double>::infinity();
  std::size_t samples = 0;
  for (int base = 0; base < 5; ++base) {
    const std::array<double, 2> z{u(rng), u(rng)};
    for (const auto& dz : {std::array<double, 2>{0, 0}, {0, 0.1}, {0.1, 0}}) {
      const auto rep = lemma1_dominance(in, z, {z[0] + dz[0], z[1] + dz[1]}, strategies, t_max);
      worst = std::min(worst, rep.worst);
      samples += rep.samples;
    }
  }
  return {worst >= -1e-9, "min gap=" + fmt(worst) + " over " + std::to_string(samples) + " samples"};
}

ValueField random_kruzkov(const ValueField& masked, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  ValueField f = masked;
  for (std::size_t k = 0; k < f.values.size(); ++k) f.values[k] = f.mask[k] == NodeKind::Target ? 0.0 : u(rng);
  return f;
}

Result criterion7() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1), s(-3, 3);
  std::size_t failures = 0;
  const P3Game game = make_p3(0.5, 0.1, 5);
  const GameSpec& red = game.reduced[0].spec;
  const Grid g2 = build_grid({{-1, 1}, {-1, 1}}, {21, 21});
  const ValueField masked = ValueField::with_masks(g2, red, ValueScale::Kruzkov);

  // monotonicity, both orders
  for (int trial = 0; trial < 20; ++trial) {
    const ValueField v = random_kruzkov(masked, rng);
    ValueField w = v;
    for (std::size_t k = 0; k < g2.size(); ++k)
      if (w.mask[k] != NodeKind::Target) w.values[k] = std::min(1.0, v.values[k] + u(rng) * u(rng));
    for (Order order : {Order::Upper, Order::Lower}) {
      SolverConfig cfg;
      cfg.order = order;
      const ValueField tv = sl_update(v, red, cfg), tw = sl_update(w, red, cfg);
      for (std::size_t k = 0; k < g2.size(); ++k) failures += tv.values[k] > tw.values[k];
    }
  }
  // contraction in Jacobi mode
  double worst_ratio = 0;
  {
    SolverConfig cfg;
    cfg.sweep_mode = SweepMode::Jacobi;
    const double factor = std::exp(-g2.max_spacing());
    for (int trial = 0; trial < 20; ++trial) {
      const ValueField v = random_kruzkov(masked, rng), w = random_kruzkov(masked, rng);
      const ValueField tv = sl_update(v, red, cfg), tw = sl_update(w, red, cfg);
      double din = 0, dout = 0;
      for (std::size_t k = 0; k < g2.size(); ++k) {
        din = std::max(din, std::abs(v.values[k] - w.values[k]));
        dout = std::max(dout, std::abs(tv.values[k] - tw.values[k]));
      }
      worst_ratio = std::max(worst_ratio, dout / din);
      failures += dout > factor * din + 1e-15;
    }
  }
  // Kruzkov range, full 3D game, both boundary policies
  {
    const Grid g3 = build_grid({{-1, 1}, {-1, 1}, {-1, 1}}, {11, 11, 11});
    const ValueField m3 = ValueField::with_masks(g3, game.full, ValueScale::Kruzkov);
    for (OutOfDomain policy : {OutOfDomain::Evasion, OutOfDomain::Clamp}) {
      SolverConfig cfg;
      cfg.out_of_domain = policy;
      for (int trial = 0; trial < 5; ++trial) {
        const ValueField t = sl_update(random_kruzkov(m3, rng), game.full, cfg);
        for (std::size_t k = 0; k < g3.size(); ++k)
          failures += t.values[k] < 0.0 || t.values[k] > 1.0 || (t.mask[k] == NodeKind::Target && t.values[k] != 0.0);
      }
    }
  }
  // decoupled Hamiltonians: positive homogeneity and convexity; min-max >= max-min
  P1Params pp;
  pp.control_samples = 5;
  const GameSpec s3 = make_p3(0.4, 0.0, 7).full;
  const GameSpec s1 = make_p1(pp).full;
  for (int k = 0; k < 500; ++k) {
    const Vec x{s(rng), s(rng), s(rng)}, p{s(rng), s(rng), s(rng)};
    for (const GameSpec* spec : {&s3, &s1}) {
      failures += hamiltonian_upper(*spec, x, 0, p) < hamiltonian_lower(*spec, x, 0, p);
      const double c = std::abs(s(rng)) + 0.1;
      for (std::size_t i = 0; i < 3; ++i) {
        const double h = decoupled_hamiltonian(*spec, i, Vec{x[i]}, Vec{p[i]});
        const double hc = decoupled_hamiltonian(*spec, i, Vec{x[i]}, Vec{c * p[i]});
        failures += std::abs(hc - c * h) > 1e-14 * std::max(1.0, std::abs(c * h));
        const double q = s(rng);
        const double mid = decoupled_hamiltonian(*spec, i, Vec{x[i]}, Vec{0.5 * (p[i] + q)});
        failures += mid > 0.5 * (h + decoupled_hamiltonian(*spec, i, Vec{x[i]}, Vec{q})) + 1e-14;
      }
    }
  }
  return {failures == 0, "failures=" + std::to_string(failures) + " worst contraction ratio=" + fmt(worst_ratio) +
                             " (bound " + fmt(std::exp(-g2.max_spacing())) + ")"};
}

// Finite-value region of the relative game and its smallest value on the first
// node column outside the target.
struct CaptureRegion {
  std::size_t finite = 0;
  std::size_t touching = 0;
  double first_column_min = std::numeric_limits<double>::infinity();
  double time_step = 0.0;
};

CaptureRegion capture_region(const GameSpec& rel, std::size_t n1, std::size_t n2) {
  const Grid grid = build_grid({{-0.5, 4.0}, {-3.0, 3.0}}, {n1, n2});
  const SolveResult r = solve(rel, grid, clamp_config());
  if (!r.converged) throw SolverError("relative solve did not converge");
  CaptureRegion c;
  c.time_step = grid.max_spacing();
  const double h1 = grid.spacing(0);
  for (std::size_t n = 0; n < grid.size(); ++n) {
    if (r.field.mask[n] == NodeKind::Target || r.field.values[n] >= 1.0 - 1e-9) continue;
    ++c.finite;
    const Vec y = grid.node_point(n);
    if (y[0] > 0.0 && y[0] <= h1 * (1 + 1e-9)) {
      ++c.touching;
      c.first_column_min = std::min(c.first_column_min, kruzkov_inverse(r.field.values[n]));
    }
  }
  return c;
}

Result criterion8() {
  P2Params p;
  p.damping = Damping::Linear;
  p.control_samples = 3;
  const P2Game game = make_p2(p);
  const GameSpec& rel = game.relative.at(0).spec;
  // One characteristic step bounds the discrete value from below, so the
  // limit value -> 0 shows up as O(h) values that shrink under refinement.
  const CaptureRegion coarse = capture_region(rel, 91, 121), fine = capture_region(rel, 181, 241);
  bool region_ok = true;
  for (const auto* c : {&coarse, &fine})
    region_ok = region_ok && c->finite > 0 && c->touching > 0 && c->first_column_min <= 1.5 * c->time_step;
  region_ok = region_ok && fine.first_column_min < coarse.first_column_min;

  const fs::path d = scratch("c8");
  if (dgd({"simulate", "--config", std::string(DGD_SCENARIO_DIR) + "/p2_farther_pursuer.json", "--out", d.string()}) !=
      cli::kOk)
    return {false, "scenario simulation failed"};
  const json meta = read_json(d / "meta.json");
  const auto x0 = meta["config"]["point"].get<std::vector<double>>();
  const bool farther3 = x0[0] - x0[4] > x0[0] - x0[2];
  const bool captured = meta["outcome"]["captured"].get<bool>();
  const int label = meta["outcome"]["label"];
  const int farther = farther3 ? 3 : 2;
  const bool ok = region_ok && captured && label == farther;
  return {ok, "finite nodes=" + std::to_string(fine.finite) + " next to target=" + std::to_string(fine.touching) +
                  " min value there=" + fmt(coarse.first_column_min) + " -> " + fmt(fine.first_column_min) +
                  "; scenario CAPTURED j=" + std::to_string(label) +
                  " tau=" + fmt(meta["outcome"]["tau"].get<double>()) + " (farther pursuer " +
                  std::to_string(farther) + ")"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria{
      {"1 line-game (E) residual, exact layer", criterion1},
      {"2 line-game (E) violation, numeric layer", criterion2},
      {"3 one-pursuer decomposition validity", criterion3},
      {"4 line-game true value vs solver", criterion4},
      {"5 pure-control decomposition", criterion5},
      {"6 dominance property suite", criterion6},
      {"7 scheme property suite", criterion7},
      {"8 damped pursuit qualitative", criterion8},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Result r;
    try {
      r = run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (r.pass ? "PASS" : "FAIL") << "  criterion " << name << ": " << r.detail << " [" << fmt(secs) << " s]"
              << std::endl;
    failed += !r.pass;
  }
  return failed == 0 ? 0 : 1;
}
