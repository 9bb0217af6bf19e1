#include "dgd/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <limits>
#include <ostream>
#include <sstream>

#include "dgd/kruzkov.hpp"

namespace dgd {

ValueSource field_source(const ValueField& field, OutOfDomain policy) {
  const double never = field.scale == ValueScale::Kruzkov ? 1.0 : std::numeric_limits<double>::quiet_NaN();
  return [&field, policy, never](ConstSpan x) {
    const Interpolated ip = interpolate(field, x);
    if (ip.out_of_domain && policy == OutOfDomain::Evasion && !std::isnan(never)) return never;
    return ip.value;
  };
}

ValueSource function_source(const ScalarFunction& f, ValueScale scale) {
  return [&f, scale](ConstSpan x) {
    const double u = f.value(x);
    return scale == ValueScale::Kruzkov ? kruzkov(u) : u;
  };
}

ControlChoice feedback_controls(const ValueSource& source, const GameSpec& spec, ConstSpan x,
                                const FeedbackOptions& options) {
  if (x.size() != spec.state_dim) throw InputError("feedback state dimension mismatch");
  if (spec.in_target(x)) throw InputError("state is inside a target; the game is over");
  if (!(options.step > 0.0)) throw InputError("feedback lookahead step must be positive");
  const ValueScale scale = solver_scale(spec);
  const double h = options.step;
  const double gamma = std::exp(-h * (scale == ValueScale::Kruzkov ? 1.0 : spec.discount));
  const auto& A = spec.control_set_a;
  const auto& B = spec.control_set_b;
  Vec f(spec.state_dim), foot(spec.state_dim);
  std::vector<double> q(A.size() * B.size());
  for (std::size_t ia = 0; ia < A.size(); ++ia) {
    for (std::size_t ib = 0; ib < B.size(); ++ib) {
      spec.dynamics(x, A[ia], B[ib], f);
      for (std::size_t d = 0; d < f.size(); ++d) foot[d] = x[d] + h * f[d];
      const double run = scale == ValueScale::Kruzkov ? 1.0 : spec.payoff_integrand(x, A[ia], B[ib]) / spec.discount;
      q[ia * B.size() + ib] = (1.0 - gamma) * run + gamma * source(foot);
    }
  }
  constexpr double kTie = 1e-12;
  ControlChoice out;
  if (options.order == Order::Upper) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t ia = 0; ia < A.size(); ++ia) {
      double inner = std::numeric_limits<double>::infinity();
      for (std::size_t ib = 0; ib < B.size(); ++ib) inner = std::min(inner, q[ia * B.size() + ib]);
      if (inner > best + kTie) {
        best = inner;
        out.a_index = ia;
      }
    }
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t ib = 0; ib < B.size(); ++ib) {
      const double v = q[out.a_index * B.size() + ib];
      if (v < worst - kTie) {
        worst = v;
        out.b_index = ib;
      }
    }
    out.value = best;
  } else {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t ib = 0; ib < B.size(); ++ib) {
      double inner = -std::numeric_limits<double>::infinity();
      for (std::size_t ia = 0; ia < A.size(); ++ia) inner = std::max(inner, q[ia * B.size() + ib]);
      if (inner < best - kTie) {
        best = inner;
        out.b_index = ib;
      }
    }
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t ia = 0; ia < A.size(); ++ia) {
      const double v = q[ia * B.size() + out.b_index];
      if (v > top + kTie) {
        top = v;
        out.a_index = ia;
      }
    }
    out.value = best;
  }
  out.a = A[out.a_index];
  out.b = B[out.b_index];
  return out;
}

Policy feedback_policy(ValueSource source, const GameSpec& spec, FeedbackOptions options) {
  return [source = std::move(source), &spec, options](double, ConstSpan x) {
    const ControlChoice c = feedback_controls(source, spec, x, options);
    return std::make_pair(c.a, c.b);
  };
}

Policy open_loop_policy(std::function<Vec(double)> a, std::function<Vec(double)> b) {
  return [a = std::move(a), b = std::move(b)](double t, ConstSpan) { return std::make_pair(a(t), b(t)); };
}

Trajectory simulate(const GameSpec& spec, const Policy& policy, ConstSpan x0, double dt, double t_max) {
  if (x0.size() != spec.state_dim) throw InputError("initial state dimension mismatch");
  if (!(dt > 0.0)) throw InputError("simulation step must be positive");
  Trajectory tr;
  Vec x(x0.begin(), x0.end());
  tr.times.push_back(0.0);
  tr.states.push_back(x);
  if (const int j = spec.target_index(x); j >= 0) {
    tr.outcome = {true, spec.targets[static_cast<std::size_t>(j)].label, 0.0};
    return tr;
  }
  Vec f(spec.state_dim);
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t >= t_max - 1e-12 * dt) break;
    auto [a, b] = policy(t, x);
    spec.dynamics(x, a, b, f);
    for (std::size_t d = 0; d < x.size(); ++d) x[d] += dt * f[d];
    const double t_next = static_cast<double>(k + 1) * dt;
    tr.controls_a.push_back(std::move(a));
    tr.controls_b.push_back(std::move(b));
    tr.times.push_back(t_next);
    tr.states.push_back(x);
    if (const int j = spec.target_index(x); j >= 0) {
      tr.outcome = {true, spec.targets[static_cast<std::size_t>(j)].label, t_next};
      break;
    }
  }
  return tr;
}

void Trajectory::write_csv(std::ostream& os) const {
  const std::size_t n = states.front().size();
  const std::size_t na = controls_a.empty() ? 0 : controls_a.front().size();
  const std::size_t nb = controls_b.empty() ? 0 : controls_b.front().size();
  os << 't';
  for (std::size_t i = 0; i < n; ++i) os << ",x" << (i + 1);
  for (std::size_t i = 0; i < na; ++i) os << ",a" << (i + 1);
  for (std::size_t i = 0; i < nb; ++i) os << ",b" << (i + 1);
  os << ",event\n";
  os.precision(17);
  for (std::size_t k = 0; k < states.size(); ++k) {
    os << times[k];
    for (double c : states[k]) os << ',' << c;
    if (k < controls_a.size()) {
      for (double c : controls_a[k]) os << ',' << c;
      for (double c : controls_b[k]) os << ',' << c;
    } else {
      for (std::size_t i = 0; i < na + nb; ++i) os << ',';
    }
    os << ',';
    if (k + 1 == states.size()) {
      if (outcome.captured)
        os << "CAPTURED:" << outcome.label;
      else
        os << "TIMEOUT";
    }
    os << '\n';
  }
}

std::string Trajectory::outcome_line() const {
  std::ostringstream os;
  if (outcome.captured)
    os << "CAPTURED j=" << outcome.label << " tau=" << outcome.tau;
  else
    os << "TIMEOUT";
  return os.str();
}

std::pair<double, double> DampedIntegrator::step(double y1, double y2, double a) const {
  return {y1 + dt * y2, y2 + dt * (-damping(y2) + alpha * a)};
}

DominanceReport lemma1_dominance(const DampedIntegrator& integrator, std::array<double, 2> z,
                                 std::array<double, 2> z_prime,
                                 const std::vector<std::function<double(double)>>& strategies, double t_max) {
  if (z_prime[0] < z[0] || z_prime[1] < z[1])
    throw UsageError("dominance comparison needs z' >= z componentwise");
  if (!(integrator.dt > 0.0) || !integrator.damping) throw UsageError("integrator is not configured");
  const auto steps = static_cast<std::size_t>(std::ceil(t_max / integrator.dt - 1e-9));
  DominanceReport rep;
  rep.worst = std::numeric_limits<double>::infinity();
  // The dominating run is shared by every strategy.
  std::vector<double> top(steps + 1);
  {
    double y1 = z_prime[0], y2 = z_prime[1];
    top[0] = y1;
    for (std::size_t k = 0; k < steps; ++k) {
      std::tie(y1, y2) = integrator.step(y1, y2, 1.0);
      top[k + 1] = y1;
    }
  }
  for (const auto& a : strategies) {
    double y1 = z[0], y2 = z[1];
    double gap = top[0] - y1;
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * integrator.dt;
      const double ak = a(t);
      if (!(ak >= -1.0 && ak <= 1.0)) throw UsageError("strategy value outside [-1, 1]");
      std::tie(y1, y2) = integrator.step(y1, y2, ak);
      gap = std::min(gap, top[k + 1] - y1);
    }
    rep.min_gap.push_back(gap);
    rep.worst = std::min(rep.worst, gap);
    rep.samples += steps + 1;
  }
  if (strategies.empty()) rep.worst = 0.0;
  rep.pass = rep.worst >= -1e-9;
  return rep;
}

std::function<double(double)> random_piecewise_constant(std::mt19937_64& rng, double t_max, std::size_t pieces) {
  if (pieces == 0 || !(t_max > 0.0)) throw InputError("piecewise-constant signal needs pieces and a horizon");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> vals(pieces);
  for (double& v : vals) v = u(rng);
  return [vals = std::move(vals), t_max](double t) {
    const double s = std::clamp(t / t_max, 0.0, 1.0) * static_cast<double>(vals.size());
    const auto k = std::min(vals.size() - 1, static_cast<std::size_t>(s));
    return vals[k];
  };
}

}  // namespace dgd
