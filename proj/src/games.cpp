#include "dgd/games.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace dgd {

namespace {

AgentBlock simple_motion(Player side, std::size_t index, ControlGrid controls, std::string name) {
  AgentBlock ag;
  ag.side = side;
  ag.state_indices = {index};
  ag.controls = std::move(controls);
  ag.dynamics = [](ConstSpan, ConstSpan c, std::span<double> out) { out[0] = c[0]; };
  ag.name = std::move(name);
  return ag;
}

AgentBlock damped(Player side, std::size_t first, ControlGrid controls, std::function<double(double)> d,
                  std::string name) {
  AgentBlock ag;
  ag.side = side;
  ag.state_indices = {first, first + 1};
  ag.controls = std::move(controls);
  ag.dynamics = [d = std::move(d)](ConstSpan xi, ConstSpan c, std::span<double> out) {
    out[0] = xi[1];
    out[1] = -d(xi[1]) + c[0];
  };
  ag.name = std::move(name);
  return ag;
}

// |x_i - x_j| <= radius. The slack keeps grid nodes at exactly the capture
// distance inside despite roundoff in the node coordinates.
TargetSet distance_target(int label, std::size_t i, std::size_t j, double radius, const std::string& what) {
  TargetSet t;
  t.label = label;
  const double reach = radius + 1e-9;
  t.signed_distance = [i, j, reach](ConstSpan x) { return std::abs(x[i] - x[j]) - reach; };
  t.contains = [i, j, reach](ConstSpan x) { return std::abs(x[i] - x[j]) <= reach; };
  std::ostringstream os;
  os << what << ": |x" << (i + 1) << " - x" << (j + 1) << "| <= " << radius;
  t.description = os.str();
  return t;
}

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

P1Game make_p1(const P1Params& p) {
  if (p.m < 1) throw InputError("p1 needs at least one evader");
  if (p.alphas.size() != p.m) throw InputError("p1 needs one speed bound per evader");
  if (!(p.beta > 0.0)) throw InputError("p1 pursuer speed must be positive");
  if (!(p.r >= 0.0)) throw InputError("p1 capture radius must be non-negative");
  for (double a : p.alphas) {
    if (!(a >= 0.0)) throw InputError("p1 evader speed bounds must be non-negative");
    if (p.enforce_capture && !(p.beta > a)) throw InputError("p1 requires beta > alpha_i for finite capture times");
  }
  const std::size_t pursuer = p.m;
  auto evader_controls = [&](std::size_t i) {
    return p.pure_control ? ControlGrid::singleton({0.0}) : ControlGrid::interval(-p.alphas[i], p.alphas[i], p.control_samples);
  };
  const ControlGrid pursuer_controls = ControlGrid::interval(-p.beta, p.beta, p.control_samples);

  P1Game g;
  g.params = p;
  std::vector<AgentBlock> agents;
  std::vector<TargetSet> targets;
  for (std::size_t i = 0; i < p.m; ++i) {
    agents.push_back(simple_motion(Player::A, i, evader_controls(i), "evader " + std::to_string(i + 1)));
    targets.push_back(distance_target(static_cast<int>(i + 1), pursuer, i, p.r, "capture of evader " + std::to_string(i + 1)));
  }
  agents.push_back(simple_motion(Player::B, pursuer, pursuer_controls, "pursuer"));
  g.full = make_decoupled_game("p1", p.m + 1, agents, targets, true);

  for (std::size_t i = 0; i < p.m; ++i) {
    ReducedGame rg;
    rg.label = static_cast<int>(i + 1);
    rg.projection = Projection::indices({i, pursuer}, p.m + 1);
    rg.full_target = targets[i];
    rg.spec = make_decoupled_game("p1 reduced " + std::to_string(i + 1), 2,
                                  {simple_motion(Player::A, 0, evader_controls(i), "evader"),
                                   simple_motion(Player::B, 1, pursuer_controls, "pursuer")},
                                  {distance_target(rg.label, 1, 0, p.r, "capture")}, true);
    g.reduced.push_back(std::move(rg));
  }
  return g;
}

double p1_reduced_value(const P1Params& p, std::size_t i, double xi, double xp) {
  if (i >= p.m) throw InputError("p1 evader index out of range");
  const double alpha = p.pure_control ? 0.0 : p.alphas[i];
  const double gap = std::abs(xp - xi) - p.r;
  // same slack as the capture target
  if (gap <= 1e-9) return 0.0;
  if (!(p.beta > alpha)) return std::numeric_limits<double>::infinity();
  return gap / (p.beta - alpha);
}

const char* to_string(Damping d) { return d == Damping::Clamp ? "clamp" : "linear"; }

double p2_damping(const P2Params& p, double y) {
  return p.damping == Damping::Clamp ? std::clamp(p.k_d * y, -p.c_d, p.c_d) : y;
}

P2Game make_p2(const P2Params& p) {
  if (p.m < 1) throw InputError("p2 needs at least one pursuer");
  if (p.betas.size() != p.m) throw InputError("p2 needs one control bound per pursuer");
  if (!(p.alpha > 0.0)) throw InputError("p2 evader control bound must be positive");
  if (p.damping == Damping::Clamp && !(p.c_d >= 0.0 && p.k_d >= 0.0))
    throw InputError("p2 damping constants must be non-negative");
  for (double b : p.betas) {
    if (!(b > 0.0)) throw InputError("p2 pursuer control bounds must be positive");
    if (p.enforce_constraints && !(b > p.alpha + 2.0 * p.c_d))
      throw InputError("p2 requires beta_i > alpha + 2 c_d");
  }

  P2Game g;
  g.params = p;
  if (p.damping == Damping::Linear)
    g.flags.push_back("linear damping d(y)=y is unbounded; the bound d <= c_d is not satisfied");
  const auto d = [p](double y) { return p2_damping(p, y); };
  const ControlGrid evader_controls = ControlGrid::interval(-p.alpha, p.alpha, p.control_samples);
  const std::size_t n = 2 * (p.m + 1);

  auto pursuit_target = [](int label, std::size_t pursuer_pos, std::size_t evader_pos) {
    TargetSet t;
    t.label = label;
    t.signed_distance = [=](ConstSpan x) { return x[evader_pos] - x[pursuer_pos]; };
    t.contains = [=](ConstSpan x) { return x[pursuer_pos] >= x[evader_pos]; };
    t.description = "pursuer " + std::to_string(label) + " reaches the evader";
    return t;
  };

  std::vector<AgentBlock> agents{damped(Player::A, 0, evader_controls, d, "evader")};
  std::vector<TargetSet> targets;
  for (std::size_t k = 1; k <= p.m; ++k) {
    const int label = static_cast<int>(k + 1);
    agents.push_back(damped(Player::B, 2 * k, ControlGrid::interval(-p.betas[k - 1], p.betas[k - 1], p.control_samples),
                            d, "pursuer " + std::to_string(label)));
    targets.push_back(pursuit_target(label, 2 * k, 0));
  }
  g.full = make_decoupled_game("p2", n, agents, targets, false);

  for (std::size_t k = 1; k <= p.m; ++k) {
    const int label = static_cast<int>(k + 1);
    const ControlGrid pc = ControlGrid::interval(-p.betas[k - 1], p.betas[k - 1], p.control_samples);
    ReducedGame rg;
    rg.label = label;
    rg.projection = Projection::indices({0, 1, 2 * k, 2 * k + 1}, n);
    rg.full_target = targets[k - 1];
    rg.spec = make_decoupled_game("p2 reduced " + std::to_string(label), 4,
                                  {damped(Player::A, 0, evader_controls, d, "evader"),
                                   damped(Player::B, 2, pc, d, "pursuer")},
                                  {pursuit_target(label, 2, 0)}, false);
    g.reduced.push_back(rg);

    if (p.damping != Damping::Linear) continue;
    ReducedGame rel;
    rel.label = label;
    Vec r1(n, 0.0), r2(n, 0.0);
    r1[0] = 1.0;
    r1[2 * k] = -1.0;
    r2[1] = 1.0;
    r2[2 * k + 1] = -1.0;
    rel.projection = Projection::linear({r1, r2}, n);
    rel.full_target = targets[k - 1];
    GameSpec s;
    s.name = "p2 relative " + std::to_string(label);
    s.state_dim = 2;
    s.control_set_a = evader_controls;
    s.control_set_b = pc;
    s.dynamics = [](ConstSpan y, ConstSpan a, ConstSpan b, std::span<double> out) {
      out[0] = y[1];
      out[1] = -y[1] + a[0] - b[0];
    };
    s.payoff_integrand = [](ConstSpan, ConstSpan, ConstSpan) { return 1.0; };
    s.discount = 0.0;
    s.minimum_time = true;
    TargetSet t;
    t.label = label;
    t.signed_distance = [](ConstSpan y) { return y[0]; };
    t.contains = [](ConstSpan y) { return y[0] <= 0.0; };
    t.description = "y1 <= 0";
    s.targets = {t};
    rel.spec = std::move(s);
    g.relative.push_back(std::move(rel));
  }
  return g;
}

P3Game make_p3(double alpha, double eps_target, std::size_t control_samples) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("p3 requires alpha in (0, 1)");
  if (!(eps_target >= 0.0)) throw InputError("p3 target thickness must be non-negative");
  P3Game g;
  g.oracle.alpha = alpha;
  g.eps_target = eps_target;
  const ControlGrid ev = ControlGrid::interval(-alpha, alpha, control_samples);
  const ControlGrid pu = ControlGrid::interval(-1.0, 1.0, control_samples);
  const std::vector<TargetSet> targets{distance_target(2, 0, 1, eps_target, "pursuer 2 meets the evader"),
                                       distance_target(3, 0, 2, eps_target, "pursuer 3 meets the evader")};
  g.full = make_decoupled_game("p3", 3,
                               {simple_motion(Player::A, 0, ev, "evader"), simple_motion(Player::B, 1, pu, "pursuer 2"),
                                simple_motion(Player::B, 2, pu, "pursuer 3")},
                               targets, true);
  for (std::size_t j = 1; j <= 2; ++j) {
    ReducedGame rg;
    rg.label = static_cast<int>(j + 1);
    rg.projection = Projection::indices({0, j}, 3);
    rg.full_target = targets[j - 1];
    rg.spec = make_decoupled_game("p3 reduced " + std::to_string(j + 1), 2,
                                  {simple_motion(Player::A, 0, ev, "evader"), simple_motion(Player::B, 1, pu, "pursuer")},
                                  {distance_target(rg.label, 0, 1, eps_target, "capture")}, true);
    g.reduced.push_back(std::move(rg));
  }
  return g;
}

P3Values p3_values(const P3Oracle& o, ConstSpan x) {
  if (x.size() != 3) throw InputError("p3 oracle expects a 3-component state");
  const double a = o.alpha;
  const double d2 = std::abs(x[1] - x[0]), d3 = std::abs(x[2] - x[0]);
  P3Values v;
  v.u2 = d2 / (1.0 - a);
  v.u3 = d3 / (1.0 - a);
  v.envelope = std::min(v.u2, v.u3);
  v.in_D = sgn(x[1] - x[0]) == -sgn(x[2] - x[0]) && sgn(x[1] - x[0]) != 0.0 &&
           (1.0 - a) / (1.0 + a) * d3 < d2 && d2 < (1.0 + a) / (1.0 - a) * d3;
  v.true_u = v.in_D ? 0.5 * (d2 + d3) : v.envelope;
  return v;
}

Vec p3_grad_u2(double alpha) { return {-1.0 / (1.0 - alpha), 1.0 / (1.0 - alpha), 0.0}; }
Vec p3_grad_u3(double alpha) { return {1.0 / (1.0 - alpha), 0.0, -1.0 / (1.0 - alpha)}; }

double p3_condition_E_residual(double lambda, double alpha) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("lambda must lie in [0, 1]");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  return alpha * (1.0 - std::abs(1.0 - 2.0 * lambda)) / (1.0 - alpha);
}

double p3_condition_E_residual_half(double lambda, double alpha) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("lambda must lie in [0, 1]");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  return 2.0 * lambda * alpha / (1.0 - alpha);
}

EnvelopeField p3_analytic_envelope(const P3Game& game, double step, double tol_eq) {
  const double a = game.oracle.alpha;
  const double eps = game.eps_target;
  std::vector<EnvelopeComponent> comps;
  for (const auto& rg : game.reduced) {
    EnvelopeComponent c;
    c.value = std::make_shared<AnalyticFunction>(
        2, [a](ConstSpan y) { return std::abs(y[1] - y[0]) / (1.0 - a); }, Vec{step, step},
        [eps](ConstSpan y) { return std::abs(y[1] - y[0]) <= eps; });
    c.projection = rg.projection;
    c.target = rg.full_target;
    const std::size_t j = rg.projection.index_map()[1];
    c.gradient_override = [a, j](ConstSpan x) {
      const double s = sgn(x[j] - x[0]) / (1.0 - a);
      Vec g(3, 0.0);
      g[0] = -s;
      g[j] = s;
      return std::vector<Vec>{g};
    };
    comps.push_back(std::move(c));
  }
  return EnvelopeField(std::move(comps), tol_eq);
}

AnalyticFunction p3_true_function(const P3Oracle& oracle, double step) {
  return AnalyticFunction(
      3, [oracle](ConstSpan x) { return p3_values(oracle, x).true_u; }, Vec(3, step),
      [](ConstSpan x) { return x[0] == x[1] || x[0] == x[2]; });
}

EnvelopeField envelope_from_solves(const std::vector<ReducedGame>& games, std::vector<ValueField> fields,
                                   double tol_eq) {
  if (games.size() != fields.size()) throw InputError("one solved field per reduced game is required");
  std::vector<EnvelopeComponent> comps;
  for (std::size_t j = 0; j < games.size(); ++j)
    comps.push_back(make_component(ReducedField(std::move(fields[j]), games[j].projection), games[j].full_target));
  return EnvelopeField(std::move(comps), tol_eq);
}

}  // namespace dgd
