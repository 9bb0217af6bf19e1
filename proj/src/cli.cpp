#include "dgd/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "dgd/kruzkov.hpp"
#include "dgd/synthesis.hpp"

namespace dgd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "dgd 0.1.0";

class IncompatibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BadStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw InputError(where + " must be a JSON object");
  for (const auto& [k, _] : j.items())
    if (!known.count(k)) throw InputError("unknown key '" + k + "' in " + where);
}

Vec number_or_list(const json& j, std::size_t m, const std::string& key) {
  if (j.is_number()) return Vec(m, j.get<double>());
  auto v = j.get<Vec>();
  if (v.size() == 1) v.assign(m, v[0]);
  if (v.size() != m) throw InputError("'" + key + "' needs 1 or " + std::to_string(m) + " values");
  return v;
}

std::vector<Interval> broadcast(const std::vector<Interval>& b, std::size_t dim) {
  if (b.size() == 1) return std::vector<Interval>(dim, b[0]);
  if (b.size() != dim) throw InputError("bounds need 1 or " + std::to_string(dim) + " intervals");
  return b;
}

std::vector<std::size_t> broadcast(const std::vector<std::size_t>& r, std::size_t dim) {
  if (r.size() == 1) return std::vector<std::size_t>(dim, r[0]);
  if (r.size() != dim) throw InputError("resolution needs 1 or " + std::to_string(dim) + " counts");
  return r;
}

Grid make_grid(const std::vector<Interval>& bounds, const std::vector<std::size_t>& res, std::size_t dim) {
  return build_grid(broadcast(bounds, dim), broadcast(res, dim));
}

double first_spacing(const RunConfig& c) {
  if (c.bounds.empty() || c.res.empty() || c.res[0] < 2) throw InputError("grid bounds/resolution missing");
  return (c.bounds[0].hi - c.bounds[0].lo) / static_cast<double>(c.res[0] - 1);
}

struct Built {
  std::string family;
  GameSpec full;
  /// Envelope components, in label order.
  std::vector<ReducedGame> components;
  std::optional<P1Params> p1;
  std::optional<P3Game> p3;
  std::vector<std::string> flags;
};

Built build_game(const RunConfig& c, std::size_t samples) {
  Built b;
  b.family = c.game;
  const json& p = c.params;
  if (c.game == "p1") {
    reject_unknown(p, {"m", "alpha", "beta", "r", "pure_control"}, "p1 params");
    P1Params q;
    q.m = p.value("m", std::size_t{2});
    q.alphas = p.contains("alpha") ? number_or_list(p["alpha"], q.m, "alpha") : Vec(q.m, 0.5);
    q.beta = p.value("beta", 1.0);
    q.r = p.value("r", 0.1);
    q.pure_control = p.value("pure_control", false);
    q.control_samples = samples;
    P1Game g = make_p1(q);
    b.full = std::move(g.full);
    b.components = std::move(g.reduced);
    b.p1 = q;
  } else if (c.game == "p2") {
    reject_unknown(p, {"m", "alpha", "beta", "c_d", "k_d", "damping", "reduction", "enforce_constraints"},
                   "p2 params");
    P2Params q;
    q.m = p.value("m", std::size_t{2});
    q.alpha = p.value("alpha", 0.4);
    q.betas = p.contains("beta") ? number_or_list(p["beta"], q.m, "beta") : Vec(q.m, 1.0);
    q.c_d = p.value("c_d", 0.2);
    q.k_d = p.value("k_d", 1.0);
    const std::string damping = p.value("damping", std::string("clamp"));
    if (damping != "clamp" && damping != "linear") throw InputError("damping must be clamp or linear");
    q.damping = damping == "clamp" ? Damping::Clamp : Damping::Linear;
    q.enforce_constraints = p.value("enforce_constraints", true);
    q.control_samples = samples;
    const std::string reduction = p.value("reduction", std::string(q.damping == Damping::Linear ? "relative" : "pair"));
    if (reduction != "relative" && reduction != "pair") throw InputError("reduction must be relative or pair");
    P2Game g = make_p2(q);
    if (reduction == "relative" && g.relative.empty())
      throw UnsupportedError("relative coordinates exist only for linear damping");
    b.full = std::move(g.full);
    b.components = reduction == "relative" ? std::move(g.relative) : std::move(g.reduced);
    b.flags = std::move(g.flags);
  } else if (c.game == "p3") {
    reject_unknown(p, {"alpha", "eps_target"}, "p3 params");
    const double eps = p.contains("eps_target") ? p["eps_target"].get<double>() : first_spacing(c);
    P3Game g = make_p3(p.value("alpha", 0.5), eps, samples);
    b.full = g.full;
    b.components = g.reduced;
    b.p3 = std::move(g);
  } else {
    throw UnsupportedError("unknown game family '" + c.game + "'");
  }
  return b;
}

SolverConfig solver_config(const RunConfig& c) {
  SolverConfig s;
  s.time_step = c.time_step;
  s.tolerance = c.tol;
  s.max_iterations = c.max_iters;
  if (c.order != "upper" && c.order != "lower") throw InputError("order must be upper or lower");
  s.order = c.order == "upper" ? Order::Upper : Order::Lower;
  if (c.sweep != "gauss_seidel" && c.sweep != "jacobi") throw InputError("sweep must be gauss_seidel or jacobi");
  s.sweep_mode = c.sweep == "jacobi" ? SweepMode::Jacobi : SweepMode::GaussSeidel;
  if (c.boundary != "evasion" && c.boundary != "clamp") throw InputError("boundary must be evasion or clamp");
  s.out_of_domain = c.boundary == "clamp" ? OutOfDomain::Clamp : OutOfDomain::Evasion;
  s.threads = std::max(1u, c.threads);
  return s;
}

const ReducedGame& component_by_label(const Built& b, int label) {
  for (const auto& rg : b.components)
    if (rg.label == label) return rg;
  throw InputError("no reduced game with target label " + std::to_string(label));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

fs::path ensure_out(const RunConfig& c) {
  fs::path dir(c.out);
  fs::create_directories(dir);
  return dir;
}

json meta_base(const RunConfig& c) {
  json m;
  m["config"] = c.to_json();
  m["version"] = kVersion;
#ifdef __VERSION__
  m["compiler"] = __VERSION__;
#endif
  return m;
}

struct Components {
  std::vector<ValueField> fields;
  double h = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
};

Components load_or_solve(const RunConfig& c, const Built& b) {
  Components out;
  if (!c.inputs.empty()) {
    if (c.inputs.size() != b.components.size())
      throw IncompatibleError("expected " + std::to_string(b.components.size()) + " component inputs, got " +
                              std::to_string(c.inputs.size()));
    std::map<int, ValueField> by_label;
    for (const auto& dir : c.inputs) {
      std::ifstream ms(fs::path(dir) / "meta.json");
      if (!ms) throw IncompatibleError("missing meta.json in " + dir);
      const json meta = json::parse(ms);
      const json& cfg = meta.at("config");
      if (cfg.at("game") != c.game || cfg.at("params") != c.params)
        throw IncompatibleError(dir + " was solved for a different game");
      const int label = cfg.at("reduced").get<int>();
      const ReducedGame* rg = nullptr;
      for (const auto& g : b.components)
        if (g.label == label) rg = &g;
      if (!rg) throw IncompatibleError(dir + " is not a reduced component of this game");
      const auto scale = meta.at("scale") == "kruzkov" ? ValueScale::Kruzkov : ValueScale::Direct;
      ValueField f = read_grid_csv((fs::path(dir) / "value.csv").string(), scale);
      if (f.grid.dim() != rg->projection.reduced_dim())
        throw IncompatibleError(dir + " has the wrong dimension for component " + std::to_string(label));
      if (!by_label.emplace(label, std::move(f)).second)
        throw IncompatibleError("component " + std::to_string(label) + " supplied twice");
    }
    for (const auto& g : b.components) {
      out.h = std::max(out.h, by_label.at(g.label).grid.max_spacing());
      out.fields.push_back(std::move(by_label.at(g.label)));
    }
    return out;
  }
  const SolverConfig s = solver_config(c);
  for (const auto& g : b.components) {
    const Grid grid = make_grid(c.bounds, c.res, g.spec.state_dim);
    SolveResult r = solve(g.spec, grid, s);
    out.iterations += r.iterations;
    out.converged = out.converged && r.converged;
    out.h = std::max(out.h, grid.max_spacing());
    out.fields.push_back(std::move(r.field));
  }
  return out;
}

EnvelopeField build_envelope(const RunConfig& c, const Built& b, Components& comps) {
  const double tol_eq = c.tol_eq > 0.0 ? c.tol_eq : default_tol_eq(comps.h);
  return envelope_from_solves(b.components, std::move(comps.fields), tol_eq);
}

Grid query_grid(const RunConfig& c, std::size_t dim) {
  return make_grid(c.query_bounds.empty() ? c.bounds : c.query_bounds, c.query_res, dim);
}

std::string join_labels(const std::vector<int>& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) s += (i ? ";" : "") + std::to_string(labels[i]);
  return s;
}

void write_point(std::ostream& os, ConstSpan x) {
  for (double v : x) os << v << ',';
}

void write_header(std::ostream& os, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) os << 'x' << (i + 1) << ',';
}

std::vector<Vec> check_points(const RunConfig& c, const EnvelopeField& env, std::size_t dim) {
  if (!c.point.empty()) {
    if (c.point.size() != dim) throw InputError("--point needs " + std::to_string(dim) + " coordinates");
    return {c.point};
  }
  std::vector<Vec> pts = sigma_set(env, query_grid(c, dim));
  if (pts.size() > c.max_points) {
    std::vector<std::size_t> idx(pts.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(c.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(c.max_points);
    std::sort(idx.begin(), idx.end());
    std::vector<Vec> kept;
    for (std::size_t i : idx) kept.push_back(pts[i]);
    pts = std::move(kept);
  }
  return pts;
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["command"] = command;
  j["game"] = game;
  j["params"] = params;
  auto ivs = [](const std::vector<Interval>& b) {
    json a = json::array();
    for (const auto& iv : b) a.push_back({iv.lo, iv.hi});
    return a;
  };
  j["bounds"] = ivs(bounds);
  j["res"] = res;
  j["query_bounds"] = ivs(query_bounds);
  j["query_res"] = query_res;
  j["tol"] = tol;
  j["max_iters"] = max_iters;
  j["order"] = order;
  j["sweep"] = sweep;
  j["boundary"] = boundary;
  j["time_step"] = time_step;
  j["threads"] = threads;
  j["solve_control_samples"] = solve_control_samples;
  j["control_samples"] = control_samples;
  j["reduced"] = reduced;
  j["point"] = point;
  j["inputs"] = inputs;
  j["tol_eq"] = tol_eq;
  j["weights_per_axis"] = weights_per_axis;
  j["radius"] = radius;
  j["samples"] = samples;
  j["tol_numeric"] = tol_numeric;
  j["dirichlet_samples"] = dirichlet_samples;
  j["max_points"] = max_points;
  j["analytic"] = analytic;
  j["viscosity_tol"] = viscosity_tol;
  j["dt"] = dt;
  j["t_max"] = t_max;
  j["policy"] = policy;
  j["seed"] = seed;
  j["out"] = out;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  const RunConfig defaults;
  reject_unknown(j, {"command", "game", "params", "bounds", "res", "query_bounds", "query_res", "tol", "max_iters",
                     "order", "sweep", "boundary", "time_step", "threads", "solve_control_samples",
                     "control_samples", "reduced", "point", "inputs", "tol_eq", "weights_per_axis", "radius",
                     "samples", "tol_numeric", "dirichlet_samples", "max_points", "analytic", "viscosity_tol", "dt",
                     "t_max", "policy", "seed", "out"},
                 "config");
  RunConfig c;
  auto ivs = [](const json& a) {
    std::vector<Interval> out;
    for (const auto& e : a) {
      if (!e.is_array() || e.size() != 2) throw InputError("bounds entries must be [lo, hi] pairs");
      out.push_back({e[0].get<double>(), e[1].get<double>()});
    }
    return out;
  };
  c.command = j.value("command", defaults.command);
  c.game = j.value("game", defaults.game);
  c.params = j.value("params", defaults.params);
  if (j.contains("bounds")) c.bounds = ivs(j["bounds"]);
  c.res = j.value("res", defaults.res);
  if (j.contains("query_bounds")) c.query_bounds = ivs(j["query_bounds"]);
  c.query_res = j.value("query_res", defaults.query_res);
  c.tol = j.value("tol", defaults.tol);
  c.max_iters = j.value("max_iters", defaults.max_iters);
  c.order = j.value("order", defaults.order);
  c.sweep = j.value("sweep", defaults.sweep);
  c.boundary = j.value("boundary", defaults.boundary);
  c.time_step = j.value("time_step", defaults.time_step);
  c.threads = j.value("threads", defaults.threads);
  c.solve_control_samples = j.value("solve_control_samples", defaults.solve_control_samples);
  c.control_samples = j.value("control_samples", defaults.control_samples);
  c.reduced = j.value("reduced", defaults.reduced);
  c.point = j.value("point", defaults.point);
  c.inputs = j.value("inputs", defaults.inputs);
  c.tol_eq = j.value("tol_eq", defaults.tol_eq);
  c.weights_per_axis = j.value("weights_per_axis", defaults.weights_per_axis);
  c.radius = j.value("radius", defaults.radius);
  c.samples = j.value("samples", defaults.samples);
  c.tol_numeric = j.value("tol_numeric", defaults.tol_numeric);
  c.dirichlet_samples = j.value("dirichlet_samples", defaults.dirichlet_samples);
  c.max_points = j.value("max_points", defaults.max_points);
  c.analytic = j.value("analytic", defaults.analytic);
  c.viscosity_tol = j.value("viscosity_tol", defaults.viscosity_tol);
  c.dt = j.value("dt", defaults.dt);
  c.t_max = j.value("t_max", defaults.t_max);
  c.policy = j.value("policy", defaults.policy);
  c.seed = j.value("seed", defaults.seed);
  c.out = j.value("out", defaults.out);
  return c;
}

int cmd_solve(const RunConfig& c, std::ostream& out) {
  const Built b = build_game(c, c.solve_control_samples);
  const GameSpec& spec = c.reduced == 0 ? b.full : component_by_label(b, c.reduced).spec;
  const Grid grid = make_grid(c.bounds, c.res, spec.state_dim);
  std::vector<std::pair<double, double>> box;
  for (std::size_t i = 0; i < grid.dim(); ++i) box.emplace_back(grid.bounds(i).lo, grid.bounds(i).hi);
  validate(spec, box);

  const fs::path dir = ensure_out(c);
  std::ofstream log(dir / "convergence.jsonl");
  SolverConfig s = solver_config(c);
  s.on_iteration = [&log](const IterationLog& e) {
    log << json{{"iteration", e.iteration}, {"sup_change", e.sup_change}, {"wall_ms", e.wall_ms}}.dump() << '\n';
  };
  const SolveResult r = solve(spec, grid, s);
  write_grid_csv((dir / "value.csv").string(), r.field);

  json meta = meta_base(c);
  meta["spec"] = spec.name;
  meta["state_dim"] = spec.state_dim;
  meta["scale"] = to_string(r.field.scale);
  meta["iterations"] = r.iterations;
  meta["sup_change"] = r.sup_change;
  meta["converged"] = r.converged;
  meta["status"] = r.converged ? "CONVERGED" : "NOT_CONVERGED";
  meta["wall_ms"] = r.wall_ms;
  meta["control_set_a"] = spec.control_set_a.description();
  meta["control_set_b"] = spec.control_set_b.description();
  meta["flags"] = b.flags;
  write_text(dir / "meta.json", meta.dump(2) + "\n");

  out << "solve " << spec.name << ": " << grid.size() << " nodes, " << r.iterations << " iterations, "
      << (r.converged ? "CONVERGED" : "NOT_CONVERGED") << ", sup_change=" << r.sup_change << '\n';
  return r.converged ? kOk : kNotConverged;
}

int cmd_envelope(const RunConfig& c, std::ostream& out) {
  const Built b = build_game(c, c.solve_control_samples);
  Components comps = load_or_solve(c, b);
  const EnvelopeField env = build_envelope(c, b, comps);
  const Grid q = query_grid(c, b.full.state_dim);
  const fs::path dir = ensure_out(c);
  write_grid_csv((dir / "envelope.csv").string(), envelope_on_grid(env, q, ValueScale::Kruzkov));

  const auto active = active_map(env, q);
  std::ofstream sig(dir / "sigma.csv"), act(dir / "active.csv");
  sig.precision(17);
  act.precision(17);
  write_header(sig, q.dim());
  sig << "active\n";
  write_header(act, q.dim());
  act << "active,branch\n";
  std::size_t crossings = 0;
  for (std::size_t n = 0; n < q.size(); ++n) {
    const Vec x = q.node_point(n);
    const int br = env.branch(x);
    write_point(act, x);
    act << join_labels(active[n]) << ',' << (br >= 0 ? env.components()[static_cast<std::size_t>(br)].target.label : 0)
        << '\n';
    if (active[n].size() >= 2) {
      write_point(sig, x);
      sig << join_labels(active[n]) << '\n';
      ++crossings;
    }
  }
  json meta = meta_base(c);
  meta["scale"] = "kruzkov";
  meta["tol_eq"] = env.tol_eq();
  meta["components"] = b.components.size();
  meta["sigma_nodes"] = crossings;
  meta["flags"] = b.flags;
  meta["converged"] = comps.converged;
  write_text(dir / "meta.json", meta.dump(2) + "\n");
  out << "envelope: " << b.components.size() << " components, " << q.size() << " query nodes, " << crossings
      << " crossing nodes\n";
  return comps.converged ? kOk : kNotConverged;
}

int cmd_check(const RunConfig& c, std::ostream& out) {
  const Built solve_game = build_game(c, c.solve_control_samples);
  const Built check_game = build_game(c, c.control_samples);
  std::optional<EnvelopeField> env;
  bool converged = true;
  if (c.analytic) {
    if (!check_game.p3) throw UnsupportedError("analytic gradients are available for p3 only");
    env.emplace(p3_analytic_envelope(*check_game.p3, first_spacing(c),
                                      c.tol_eq > 0.0 ? c.tol_eq : default_tol_eq(first_spacing(c))));
  } else {
    Components comps = load_or_solve(c, solve_game);
    converged = comps.converged;
    env.emplace(build_envelope(c, solve_game, comps));
  }
  const std::size_t n = check_game.full.state_dim;
  const std::vector<Vec> pts = check_points(c, *env, n);

  CheckOptions opts;
  opts.radius = c.radius;
  opts.samples = c.samples;
  opts.tol_numeric = c.tol_numeric;
  opts.dirichlet_samples = c.dirichlet_samples;
  opts.seed = c.seed;

  const fs::path dir = ensure_out(c);
  std::ofstream jl(dir / "conditions.jsonl");
  std::map<std::string, std::size_t> counts{{"HOLDS", 0}, {"VIOLATED", 0}, {"INCONCLUSIVE", 0}};
  ConditionReport last;
  for (const auto& x : pts) {
    ConditionReport rep = check_conditions(*env, check_game.full, x, c.weights_per_axis, opts);
    json j = json::parse(rep.to_json());
    if (check_game.p3 && rep.worst_weights_E.size() == 2) {
      // Closed form at the worst weight, reported under both readings of the constant (beta taken as alpha).
      const double a = check_game.p3->oracle.alpha;
      const double lam = rep.worst_weights_E[0];
      j["closed_form_E"] = {{"lambda", lam},
                            {"alpha", a},
                            {"beta_read_as_alpha", a},
                            {"exact", p3_condition_E_residual(lam, a)},
                            {"two_lambda_beta_over_one_minus_beta", p3_condition_E_residual_half(lam, a)}};
    }
    jl << j.dump() << '\n';
    ++counts[to_string(rep.verdict)];
    last = std::move(rep);
  }

  ViscosityOptions vo;
  vo.radius = c.radius;
  vo.samples = c.samples;
  vo.tol = c.viscosity_tol;
  const ViscosityReport vr = verify_viscosity(*env, check_game.full, pts, vo);
  {
    std::ofstream vs(dir / "viscosity.csv");
    vr.write_csv(vs);
  }
  json meta = meta_base(c);
  meta["points"] = pts.size();
  meta["verdicts"] = counts;
  meta["sub_violations"] = vr.sub_violations;
  meta["super_violations"] = vr.super_violations;
  meta["flags"] = solve_game.flags;
  meta["converged"] = converged;
  write_text(dir / "meta.json", meta.dump(2) + "\n");

  if (pts.size() == 1) {
    out << "verdict=" << to_string(last.verdict) << " residual_E=" << last.residual_E
        << " residual_C=" << last.residual_C << " active=" << join_labels(last.active) << '\n';
  }
  out << "check: " << pts.size() << " points, HOLDS=" << counts["HOLDS"] << " VIOLATED=" << counts["VIOLATED"]
      << " INCONCLUSIVE=" << counts["INCONCLUSIVE"] << "; viscosity sub_violations=" << vr.sub_violations
      << " super_violations=" << vr.super_violations << '\n';
  return converged ? kOk : kNotConverged;
}

int cmd_simulate(const RunConfig& c, std::ostream& out) {
  const Built b = build_game(c, c.solve_control_samples);
  const std::size_t n = b.full.state_dim;
  if (c.point.size() != n) throw InputError("simulate needs --point with " + std::to_string(n) + " coordinates");
  if (const int j = b.full.target_index(c.point); j >= 0)
    throw BadStateError("initial state lies in target " + std::to_string(b.full.targets[static_cast<std::size_t>(j)].label));

  const double h = c.time_step > 0.0 ? c.time_step : first_spacing(c);
  std::optional<EnvelopeField> env;
  std::optional<SolveResult> full;
  std::shared_ptr<ScalarFunction> oracle;
  ValueSource source;
  if (c.policy == "envelope") {
    Components comps = load_or_solve(c, b);
    env.emplace(build_envelope(c, b, comps));
    source = function_source(*env, ValueScale::Kruzkov);
  } else if (c.policy == "full") {
    full = solve(b.full, make_grid(c.bounds, c.res, n), solver_config(c));
    source = field_source(full->field, solver_config(c).out_of_domain);
  } else if (c.policy == "oracle") {
    if (b.p3) {
      oracle = std::make_shared<AnalyticFunction>(p3_true_function(b.p3->oracle, h));
    } else if (b.p1) {
      const P1Params q = *b.p1;
      oracle = std::make_shared<AnalyticFunction>(
          n,
          [q](ConstSpan x) {
            double v = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < q.m; ++i) v = std::min(v, p1_reduced_value(q, i, x[i], x[q.m]));
            return v;
          },
          Vec(n, h));
    } else {
      throw UnsupportedError("no closed-form policy for " + c.game);
    }
    source = function_source(*oracle, ValueScale::Kruzkov);
  } else {
    throw InputError("policy must be envelope, full or oracle");
  }

  FeedbackOptions fo;
  fo.step = h;
  fo.order = solver_config(c).order;
  const double dt = c.dt > 0.0 ? c.dt : 0.5 * h;
  const Trajectory tr = simulate(b.full, feedback_policy(source, b.full, fo), c.point, dt, c.t_max);

  const fs::path dir = ensure_out(c);
  {
    std::ofstream ts(dir / "trajectory.csv");
    tr.write_csv(ts);
  }
  json res = {{"captured", tr.outcome.captured}, {"label", tr.outcome.label}, {"tau", tr.outcome.tau},
              {"steps", tr.controls_a.size()}};
  if (env) {
    std::vector<int> switches;
    int prev = 0;
    for (const auto& x : tr.states) {
      const int br = env->branch(x);
      if (br < 0) continue;
      const int lab = env->components()[static_cast<std::size_t>(br)].target.label;
      if (lab != prev) switches.push_back(lab);
      prev = lab;
    }
    res["argmin_sequence"] = switches;
    json initial;
    for (std::size_t j = 0; j < env->size(); ++j)
      initial[std::to_string(env->components()[j].target.label)] = env->component_value(j, c.point);
    res["initial_component_values"] = initial;
  }
  json meta = meta_base(c);
  meta["outcome"] = res;
  meta["dt"] = dt;
  meta["flags"] = b.flags;
  write_text(dir / "meta.json", meta.dump(2) + "\n");
  out << tr.outcome_line() << '\n';
  return kOk;
}

int cmd_oracle(const RunConfig& c, std::ostream& out) {
  json j;
  if (c.game == "p3") {
    const double alpha = c.params.value("alpha", 0.5);
    reject_unknown(c.params, {"alpha", "eps_target"}, "p3 params");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("p3 requires alpha in (0, 1)");
    if (c.point.size() != 3) throw InputError("p3 oracle needs --point x1,x2,x3");
    const P3Values v = p3_values(P3Oracle{alpha}, c.point);
    j = {{"u2", v.u2}, {"u3", v.u3}, {"envelope", v.envelope}, {"true_u", v.true_u}, {"in_D", v.in_D}};
  } else if (c.game == "p1") {
    const Built b = build_game(c, 3);
    const P1Params& q = *b.p1;
    if (c.point.size() == 2) {
      const std::size_t i = c.reduced > 0 ? static_cast<std::size_t>(c.reduced - 1) : 0;
      j = {{"evader", i + 1}, {"value", p1_reduced_value(q, i, c.point[0], c.point[1])}};
    } else if (c.point.size() == q.m + 1) {
      Vec vals;
      for (std::size_t i = 0; i < q.m; ++i) vals.push_back(p1_reduced_value(q, i, c.point[i], c.point[q.m]));
      j = {{"values", vals}, {"envelope", *std::min_element(vals.begin(), vals.end())}};
    } else {
      throw InputError("p1 oracle needs (x_i, x_p) or the full state");
    }
  } else {
    throw UnsupportedError("no closed-form oracle for game '" + c.game + "'");
  }
  out << j.dump() << '\n';
  return kOk;
}

namespace {

std::vector<double> parse_numbers(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) throw InputError("empty entry in list '" + s + "'");
    std::size_t used = 0;
    const double d = std::stod(tok, &used);
    if (used != tok.size()) throw InputError("not a number: '" + tok + "'");
    v.push_back(d);
  }
  return v;
}

std::vector<Interval> parse_bounds(const std::string& s) {
  std::vector<Interval> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    // lo:hi where either side may be negative.
    const auto colon = tok.find(':', 1);
    if (colon == std::string::npos) throw InputError("bounds must look like lo:hi[,lo:hi...]");
    out.push_back({std::stod(tok.substr(0, colon)), std::stod(tok.substr(colon + 1))});
  }
  return out;
}

json number_list_json(const std::vector<double>& v) { return v.size() == 1 ? json(v[0]) : json(v); }

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Differential game solver and decomposition checker"};
  app.require_subcommand(1);
  std::string config_path, game, alpha, beta, bounds, res, order, point, out_dir, boundary, damping, inputs, policy,
      query_bounds, query_res;
  double tol = 0, r = 0, c_d = 0, dt = 0, t_max = 0, tol_eq = 0;
  std::size_t max_iters = 0, m = 0, control_samples = 0, solve_control_samples = 0, max_points = 0;
  int reduced = 0;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  bool analytic = false, pure = false;

  std::vector<CLI::Option*> opts;
  auto add = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config; flags override its keys");
    sub->add_option("--game", game, "p1 | p2 | p3");
    sub->add_option("--alpha", alpha, "evader bound(s), comma separated for p1");
    sub->add_option("--beta", beta, "pursuer bound(s), comma separated for p2");
    sub->add_option("--m", m, "number of evaders (p1) or pursuers (p2)");
    sub->add_option("--r", r, "p1 capture radius");
    sub->add_option("--c-d", c_d, "p2 damping bound");
    sub->add_option("--damping", damping, "p2 damping: clamp | linear");
    sub->add_flag("--pure-control", pure, "p1 with frozen evaders");
    sub->add_option("--bounds", bounds, "lo:hi[,lo:hi...] (one interval broadcasts)");
    sub->add_option("--res", res, "n[,n...] nodes per axis");
    sub->add_option("--query-bounds", query_bounds, "full-state query box");
    sub->add_option("--query-res", query_res, "full-state query resolution");
    sub->add_option("--tol", tol, "solver tolerance");
    sub->add_option("--max-iters", max_iters, "solver iteration cap");
    sub->add_option("--order", order, "upper | lower");
    sub->add_option("--boundary", boundary, "evasion | clamp");
    sub->add_option("--reduced", reduced, "target label of the reduced game (0 = full)");
    sub->add_option("--point", point, "x1,x2,...");
    sub->add_option("--threads", threads, "Jacobi worker threads");
    sub->add_option("--seed", seed, "seed for sampled weights and point subsets");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--inputs", inputs, "comma separated solve directories for envelope components");
    sub->add_option("--control-samples", control_samples, "control samples per axis for checks");
    sub->add_option("--solve-control-samples", solve_control_samples, "control samples per axis for solves");
    sub->add_option("--tol-eq", tol_eq, "envelope equality tolerance");
    sub->add_option("--max-points", max_points, "cap on sampled crossing points");
    sub->add_flag("--analytic", analytic, "p3: inject closed-form branch gradients");
    sub->add_option("--dt", dt, "simulation step");
    sub->add_option("--t-max", t_max, "simulation horizon");
    sub->add_option("--policy", policy, "envelope | full | oracle");
  };
  std::map<std::string, CLI::App*> subs;
  for (const char* name : {"solve", "envelope", "check", "simulate", "oracle"}) {
    subs[name] = app.add_subcommand(name);
    add(subs[name]);
  }

  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  std::string command;
  CLI::App* sub = nullptr;
  for (auto& [name, s] : subs)
    if (s->parsed()) {
      command = name;
      sub = s;
    }
  auto given = [&](const char* flag) { return sub->count(flag) > 0; };

  try {
    RunConfig c;
    if (given("--config")) {
      std::ifstream is(config_path);
      if (!is) throw InputError("cannot read config " + config_path);
      c = RunConfig::from_json(json::parse(is));
    }
    c.command = command;
    if (given("--game")) c.game = game;
    if (given("--alpha")) c.params["alpha"] = number_list_json(parse_numbers(alpha));
    if (given("--beta")) c.params["beta"] = number_list_json(parse_numbers(beta));
    if (given("--m")) c.params["m"] = m;
    if (given("--r")) c.params["r"] = r;
    if (given("--c-d")) c.params["c_d"] = c_d;
    if (given("--damping")) c.params["damping"] = damping;
    if (given("--pure-control")) c.params["pure_control"] = pure;
    if (given("--bounds")) c.bounds = parse_bounds(bounds);
    if (given("--res")) {
      c.res.clear();
      for (double v : parse_numbers(res)) c.res.push_back(static_cast<std::size_t>(v));
    }
    if (given("--query-bounds")) c.query_bounds = parse_bounds(query_bounds);
    if (given("--query-res")) {
      c.query_res.clear();
      for (double v : parse_numbers(query_res)) c.query_res.push_back(static_cast<std::size_t>(v));
    }
    if (given("--tol")) c.tol = tol;
    if (given("--max-iters")) c.max_iters = max_iters;
    if (given("--order")) c.order = order;
    if (given("--boundary")) c.boundary = boundary;
    if (given("--reduced")) c.reduced = reduced;
    if (given("--point")) c.point = parse_numbers(point);
    if (given("--threads")) c.threads = threads;
    if (given("--seed")) c.seed = seed;
    if (given("--out")) c.out = out_dir;
    if (given("--inputs")) {
      c.inputs.clear();
      std::stringstream ss(inputs);
      std::string tok;
      while (std::getline(ss, tok, ',')) c.inputs.push_back(tok);
    }
    if (given("--control-samples")) c.control_samples = control_samples;
    if (given("--solve-control-samples")) c.solve_control_samples = solve_control_samples;
    if (given("--tol-eq")) c.tol_eq = tol_eq;
    if (given("--max-points")) c.max_points = max_points;
    if (given("--analytic")) c.analytic = analytic;
    if (given("--dt")) c.dt = dt;
    if (given("--t-max")) c.t_max = t_max;
    if (given("--policy")) c.policy = policy;

    if (command == "solve") return cmd_solve(c, out);
    if (command == "envelope") return cmd_envelope(c, out);
    if (command == "check") return cmd_check(c, out);
    if (command == "simulate") return cmd_simulate(c, out);
    return cmd_oracle(c, out);
  } catch (const IncompatibleError& e) {
    err << "error: " << e.what() << '\n';
    return kIncompatible;
  } catch (const BadStateError& e) {
    err << "error: " << e.what() << '\n';
    return kBadInitialState;
  } catch (const UnsupportedError& e) {
    err << "error: " << e.what() << '\n';
    return kUnsupported;
  } catch (const json::exception& e) {
    err << "error: config: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace dgd::cli
