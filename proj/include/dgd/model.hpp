#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgd {

using Vec = std::vector<double>;
using ConstSpan = std::span<const double>;

/// Raised for malformed inputs (dimension mismatches, invalid parameters).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation is called on an object that does not support it.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class Player { A, B };

/// Finite sample of a control set. Points are distinct and share one dimension.
class ControlGrid {
 public:
  ControlGrid(std::vector<Vec> points, std::string description);

  /// `samples` equispaced values over [lo, hi] including both ends.
  /// A single sample is placed at the midpoint.
  static ControlGrid interval(double lo, double hi, std::size_t samples);
  static ControlGrid singleton(Vec point);
  /// Cartesian product; components of `first` come first in each vector.
  static ControlGrid product(const ControlGrid& first, const ControlGrid& second);

  std::size_t size() const { return points_.size(); }
  std::size_t dim() const { return dim_; }
  const Vec& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<Vec>& points() const { return points_; }
  const std::string& description() const { return description_; }

 private:
  std::vector<Vec> points_;
  std::size_t dim_ = 0;
  std::string description_;
};

/// One component of a union-of-targets termination set.
struct TargetSet {
  int label = 0;
  std::function<bool(ConstSpan)> contains;
  /// Optional; negative inside. When present, contains(x) <=> signed_distance(x) <= 0.
  std::function<double(ConstSpan)> signed_distance;
  std::string description;
};

/// Throws InputError at the first sampled point where membership and the
/// signed distance disagree.
void check_target_consistency(const TargetSet& target, std::span<const Vec> samples);

using DynamicsFn = std::function<void(ConstSpan x, ConstSpan a, ConstSpan b, std::span<double> out)>;
using PayoffFn = std::function<double(ConstSpan x, ConstSpan a, ConstSpan b)>;
using AgentDynamicsFn = std::function<void(ConstSpan xi, ConstSpan ci, std::span<double> out)>;

/// A single pursuer or evader in a game whose agents move independently.
struct AgentBlock {
  Player side = Player::A;
  std::vector<std::size_t> state_indices;
  ControlGrid controls{{{0.0}}, "rest"};
  AgentDynamicsFn dynamics;
  std::string name;
};

/// A zero-sum differential game terminating on a union of targets.
/// Immutable once built; share by const reference.
struct GameSpec {
  std::string name;
  std::size_t state_dim = 0;
  DynamicsFn dynamics;
  ControlGrid control_set_a{{{0.0}}, "rest"};
  ControlGrid control_set_b{{{0.0}}, "rest"};
  PayoffFn payoff_integrand;
  double discount = 0.0;
  std::vector<TargetSet> targets;

  /// Present for agent-decoupled games; agents of side A own consecutive
  /// components of the a-control in declaration order (same for B).
  std::optional<std::vector<AgentBlock>> agents;
  /// f(x,a,b) does not depend on x. Lets the solver reuse interpolation stencils.
  bool state_independent_dynamics = false;
  /// payoff_integrand == 1 and discount == 0.
  bool minimum_time = false;

  bool in_target(ConstSpan x) const;
  /// Index into `targets` of the first member containing x, or -1.
  int target_index(ConstSpan x) const;
};

/// Assembles a decoupled game from agent blocks: the joint control grids are
/// products of the agents' grids, the payoff is 1 and the discount 0.
GameSpec make_decoupled_game(std::string name, std::size_t state_dim, std::vector<AgentBlock> agents,
                             std::vector<TargetSet> targets, bool state_independent);

/// Throws InputError when the spec violates its type invariants. Dynamics
/// boundedness is sampled on `box` (one [lo,hi] pair per state axis).
void validate(const GameSpec& spec, std::span<const std::pair<double, double>> box, std::size_t samples = 64);

Vec eval_dynamics(const GameSpec& spec, ConstSpan x, ConstSpan a, ConstSpan b);

/// lambda*u + min_a max_b { -p.f(x,a,b) - l(x,a,b) } over the control grids.
double hamiltonian_upper(const GameSpec& spec, ConstSpan x, double u, ConstSpan p);
/// lambda*u + max_b min_a { -p.f(x,a,b) - l(x,a,b) }.
double hamiltonian_lower(const GameSpec& spec, ConstSpan x, double u, ConstSpan p);

/// sup over the agent's control grid of p_i . f_i(x_i, c).
double decoupled_hamiltonian(const GameSpec& spec, std::size_t agent_index, ConstSpan xi, ConstSpan pi);

/// hamiltonian_upper - hamiltonian_lower at u = 0.
double isaacs_gap(const GameSpec& spec, ConstSpan x, ConstSpan p);

}  // namespace dgd
