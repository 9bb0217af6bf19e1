#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "dgd/grid.hpp"
#include "dgd/kruzkov.hpp"
#include "dgd/model.hpp"

namespace dgd {

enum class SweepMode { Jacobi, GaussSeidel };
/// Upper: max over a of min over b on values (the a-player commits first).
/// Lower: min over b of max over a.
enum class Order { Upper, Lower };
/// Foot points leaving the box: Evasion scores them as never captured,
/// Clamp projects them back onto the box (the box acts as a wall).
enum class OutOfDomain { Evasion, Clamp };

const char* to_string(SweepMode mode);
const char* to_string(Order order);
const char* to_string(OutOfDomain policy);

struct IterationLog {
  std::size_t iteration = 0;
  double sup_change = 0.0;
  double wall_ms = 0.0;
};

struct SolverConfig {
  /// Characteristic step; 0 selects the grid's largest spacing.
  double time_step = 0.0;
  double tolerance = 1e-6;
  std::size_t max_iterations = 5000;
  SweepMode sweep_mode = SweepMode::GaussSeidel;
  Order order = Order::Upper;
  OutOfDomain out_of_domain = OutOfDomain::Evasion;
  /// Worker threads for Jacobi sweeps.
  unsigned threads = 1;
  std::function<void(const IterationLog&)> on_iteration;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Kruzkov for minimum-time games (discount 0), direct for discounted games.
ValueScale solver_scale(const GameSpec& spec);

/// Masked field with 0 on targets and the never-captured value elsewhere.
ValueField initial_field(const GameSpec& spec, const Grid& grid);

/// One Jacobi application of the discrete Isaacs operator:
///   v'(x) = opt_a opt_b { (1 - g) l + g I[v](x + h f(x,a,b)) },  g = exp(-h (lambda + kappa))
/// with kappa = 1, l = 1 for minimum time and kappa = 0, l = payoff / lambda when discounted.
ValueField sl_update(const ValueField& field, const GameSpec& spec, const SolverConfig& config);

struct SolveResult {
  ValueField field;
  std::size_t iterations = 0;
  double sup_change = 0.0;
  bool converged = false;
  double wall_ms = 0.0;
  std::vector<IterationLog> log;
};

/// Iterates the operator to a fixed point. Non-convergence is reported, not thrown.
SolveResult solve(const GameSpec& spec, const Grid& grid, const SolverConfig& config);
SolveResult solve(const GameSpec& spec, ValueField initial, const SolverConfig& config);

struct ResidualReport {
  /// Signed F(x, u, Du) per node; NaN where not evaluated.
  std::vector<double> residual;
  double sup = 0.0;
  double mean_abs = 0.0;
  std::size_t evaluated = 0;
  /// INTERIOR nodes rejected by the neighbourhood or smoothness tests.
  std::size_t skipped = 0;
};

/// Upper Hamiltonian at central-difference gradients, on INTERIOR nodes whose
/// 3^n neighbourhood is finite, free of targets and passes the smoothness test.
ResidualReport pde_residual(const ValueField& field, const GameSpec& spec, double smoothness = 0.1);

}  // namespace dgd
