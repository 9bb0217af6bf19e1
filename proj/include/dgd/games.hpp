#pragma once

#include <string>
#include <vector>

#include "dgd/envelope.hpp"
#include "dgd/grid.hpp"
#include "dgd/model.hpp"

namespace dgd {

/// A per-target game on reduced coordinates plus how it sits in the full state.
struct ReducedGame {
  GameSpec spec;
  Projection projection;
  /// The matching target of the full game.
  TargetSet full_target;
  int label = 0;
};

// Pursuer chasing m evaders on a line, simple motion on both sides.
struct P1Params {
  std::size_t m = 2;
  Vec alphas{0.5, 0.5};
  double beta = 1.0;
  double r = 0.1;
  bool enforce_capture = true;
  std::size_t control_samples = 21;
  /// Evaders frozen: a-control set {0}.
  bool pure_control = false;
};

struct P1Game {
  P1Params params;
  /// State (x_1..x_m, x_p), targets labelled 1..m.
  GameSpec full;
  std::vector<ReducedGame> reduced;
};

P1Game make_p1(const P1Params& params);
/// max(0, |x_p - x_i| - r) / (beta - alpha_i); alpha_i is 0 for frozen evaders.
double p1_reduced_value(const P1Params& params, std::size_t i, double xi, double xp);

enum class Damping { Clamp, Linear };
const char* to_string(Damping d);

// Damped double integrators: one evader ahead, m pursuers behind.
struct P2Params {
  std::size_t m = 2;
  double alpha = 0.4;
  Vec betas{1.0, 1.0};
  Damping damping = Damping::Clamp;
  double c_d = 0.2;
  double k_d = 1.0;
  bool enforce_constraints = true;
  std::size_t control_samples = 21;
};

struct P2Game {
  P2Params params;
  /// State (x1_1, x1_2, x2_1, x2_2, ...), evader first; targets labelled 2..m+1.
  GameSpec full;
  /// Evader-pursuer pairs on R^4.
  std::vector<ReducedGame> reduced;
  /// Relative coordinates (y1, y2) per pursuer; linear damping only.
  std::vector<ReducedGame> relative;
  /// Assumption notes, e.g. unbounded damping.
  std::vector<std::string> flags;
};

double p2_damping(const P2Params& params, double y);
P2Game make_p2(const P2Params& params);

// Evader between two pursuers on a line.
struct P3Oracle {
  double alpha = 0.5;
};

struct P3Game {
  GameSpec full;
  /// On (x1, x2) and (x1, x3), labels 2 and 3.
  std::vector<ReducedGame> reduced;
  P3Oracle oracle;
  double eps_target = 0.0;
};

/// Targets |x1 - xj| <= eps_target.
P3Game make_p3(double alpha, double eps_target = 0.0, std::size_t control_samples = 21);

struct P3Values {
  double u2 = 0.0;
  double u3 = 0.0;
  double envelope = 0.0;
  double true_u = 0.0;
  bool in_D = false;
};

P3Values p3_values(const P3Oracle& oracle, ConstSpan x);
Vec p3_grad_u2(double alpha);
Vec p3_grad_u3(double alpha);
/// F3 at lambda * grad u2 + (1 - lambda) * grad u3, in closed form.
double p3_condition_E_residual(double lambda, double alpha);
/// Linear form 2 lambda alpha / (1 - alpha); agrees with the above only for lambda <= 1/2.
double p3_condition_E_residual_half(double lambda, double alpha);

/// Envelope of the closed-form u2, u3 with analytic gradients injected.
EnvelopeField p3_analytic_envelope(const P3Game& game, double step, double tol_eq);
/// Closed-form true value as a function on R^3.
AnalyticFunction p3_true_function(const P3Oracle& oracle, double step);

/// Envelope of solved reduced fields against the full targets.
EnvelopeField envelope_from_solves(const std::vector<ReducedGame>& games, std::vector<ValueField> fields,
                                   double tol_eq);

}  // namespace dgd
