#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "dgd/envelope.hpp"
#include "dgd/grid.hpp"
#include "dgd/model.hpp"
#include "dgd/solver.hpp"

namespace dgd {

/// Value lookup in the solver's scale (Kruzkov for minimum time, direct when discounted).
using ValueSource = std::function<double(ConstSpan x)>;

/// Interpolated field; off-box lookups follow the out-of-domain policy.
ValueSource field_source(const ValueField& field, OutOfDomain policy = OutOfDomain::Evasion);
/// Any direct-scale function (an envelope, an oracle) converted to `scale`.
ValueSource function_source(const ScalarFunction& f, ValueScale scale);

struct FeedbackOptions {
  /// Lookahead step of the discrete operator.
  double step = 0.05;
  Order order = Order::Upper;
};

struct ControlChoice {
  std::size_t a_index = 0;
  std::size_t b_index = 0;
  Vec a;
  Vec b;
  double value = 0.0;
};

/// Arg-optimal controls of the semi-Lagrangian right-hand side at x, lowest index on ties.
ControlChoice feedback_controls(const ValueSource& source, const GameSpec& spec, ConstSpan x,
                                const FeedbackOptions& options);

/// Controls for one step starting at (t, x).
using Policy = std::function<std::pair<Vec, Vec>(double t, ConstSpan x)>;

Policy feedback_policy(ValueSource source, const GameSpec& spec, FeedbackOptions options);
Policy open_loop_policy(std::function<Vec(double)> a, std::function<Vec(double)> b);

struct Outcome {
  bool captured = false;
  int label = 0;
  double tau = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  /// controls[k] acts on [times[k], times[k+1]); one fewer than states.
  std::vector<Vec> controls_a;
  std::vector<Vec> controls_b;
  Outcome outcome;

  void write_csv(std::ostream& os) const;
  std::string outcome_line() const;
};

/// Forward Euler rollout stopping at the first state inside a target or at t_max.
Trajectory simulate(const GameSpec& spec, const Policy& policy, ConstSpan x0, double dt, double t_max);

/// Evader-only double integrator with damping, as used for dominance comparisons.
struct DampedIntegrator {
  std::function<double(double)> damping;
  double alpha = 1.0;
  double dt = 0.01;

  /// (position, velocity) after one step under control a in [-1, 1].
  std::pair<double, double> step(double y1, double y2, double a) const;
};

struct DominanceReport {
  /// Minimum position gap per strategy.
  std::vector<double> min_gap;
  double worst = 0.0;
  bool pass = true;
  std::size_t samples = 0;
};

/// Runs a = +1 from z' against each strategy from z on one shared integrator
/// and reports min over sample times of x1(t; +1, z') - x1(t; a, z).
DominanceReport lemma1_dominance(const DampedIntegrator& integrator, std::array<double, 2> z,
                                 std::array<double, 2> z_prime,
                                 const std::vector<std::function<double(double)>>& strategies, double t_max);

/// Piecewise-constant signal on [0, t_max] with `pieces` equal segments and values uniform in [-1, 1].
std::function<double(double)> random_piecewise_constant(std::mt19937_64& rng, double t_max, std::size_t pieces);

}  // namespace dgd
