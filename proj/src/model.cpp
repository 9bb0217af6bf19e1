#include "dgd/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace dgd {

ControlGrid::ControlGrid(std::vector<Vec> points, std::string description)
    : points_(std::move(points)), description_(std::move(description)) {
  if (points_.empty()) throw InputError("control grid must be non-empty");
  dim_ = points_.front().size();
  if (dim_ == 0) throw InputError("control vectors must have positive dimension");
  for (const auto& p : points_) {
    if (p.size() != dim_) throw InputError("control grid points have mixed dimensions");
    for (double c : p)
      if (!std::isfinite(c)) throw InputError("control grid point is not finite");
  }
  std::vector<Vec> sorted = points_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InputError("control grid contains duplicate points");
}

ControlGrid ControlGrid::interval(double lo, double hi, std::size_t samples) {
  if (!(hi >= lo)) throw InputError("control interval has inverted bounds");
  if (samples == 0) throw InputError("control interval needs at least one sample");
  std::vector<Vec> pts;
  if (samples == 1 || hi == lo) {
    pts.push_back({0.5 * (lo + hi)});
  } else {
    for (std::size_t k = 0; k < samples; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(samples - 1);
      pts.push_back({k + 1 == samples ? hi : lo + (hi - lo) * t});
    }
  }
  std::ostringstream os;
  os << "interval [" << lo << "," << hi << "], " << pts.size() << " samples";
  return ControlGrid(std::move(pts), os.str());
}

ControlGrid ControlGrid::singleton(Vec point) {
  std::ostringstream os;
  os << "singleton {";
  for (std::size_t i = 0; i < point.size(); ++i) os << (i ? "," : "") << point[i];
  os << "}";
  return ControlGrid({std::move(point)}, os.str());
}

ControlGrid ControlGrid::product(const ControlGrid& first, const ControlGrid& second) {
  std::vector<Vec> pts;
  pts.reserve(first.size() * second.size());
  for (const auto& p : first.points()) {
    for (const auto& q : second.points()) {
      Vec v = p;
      v.insert(v.end(), q.begin(), q.end());
      pts.push_back(std::move(v));
    }
  }
  return ControlGrid(std::move(pts), first.description() + " x " + second.description());
}

void check_target_consistency(const TargetSet& target, std::span<const Vec> samples) {
  if (!target.contains) throw InputError("target has no membership test");
  if (!target.signed_distance) return;
  for (const auto& x : samples) {
    const bool inside = target.contains(x);
    const bool by_distance = target.signed_distance(x) <= 0.0;
    if (inside != by_distance) {
      std::ostringstream os;
      os << "target " << target.label << ": membership and signed distance disagree at (";
      for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
      os << ")";
      throw InputError(os.str());
    }
  }
}

bool GameSpec::in_target(ConstSpan x) const { return target_index(x) >= 0; }

int GameSpec::target_index(ConstSpan x) const {
  for (std::size_t j = 0; j < targets.size(); ++j)
    if (targets[j].contains(x)) return static_cast<int>(j);
  return -1;
}

GameSpec make_decoupled_game(std::string name, std::size_t state_dim, std::vector<AgentBlock> agents,
                             std::vector<TargetSet> targets, bool state_independent) {
  if (agents.empty()) throw InputError("decoupled game needs at least one agent");
  std::vector<bool> covered(state_dim, false);
  for (const auto& ag : agents) {
    if (!ag.dynamics) throw InputError("agent '" + ag.name + "' has no dynamics");
    for (std::size_t i : ag.state_indices) {
      if (i >= state_dim || covered[i]) throw InputError("agent state indices overlap or exceed the state dimension");
      covered[i] = true;
    }
  }
  if (std::find(covered.begin(), covered.end(), false) != covered.end())
    throw InputError("agent state indices do not cover the state");

  std::optional<ControlGrid> grid_a, grid_b;
  struct Slice {
    std::size_t agent;
    Player side;
    std::size_t offset;
    std::size_t width;
  };
  std::vector<Slice> slices;
  std::size_t width_a = 0, width_b = 0;
  for (std::size_t k = 0; k < agents.size(); ++k) {
    const auto& ag = agents[k];
    auto& grid = ag.side == Player::A ? grid_a : grid_b;
    auto& width = ag.side == Player::A ? width_a : width_b;
    grid = grid ? ControlGrid::product(*grid, ag.controls) : ag.controls;
    slices.push_back({k, ag.side, width, ag.controls.dim()});
    width += ag.controls.dim();
  }

  GameSpec spec;
  spec.name = std::move(name);
  spec.state_dim = state_dim;
  spec.control_set_a = grid_a ? *grid_a : ControlGrid::singleton({0.0});
  spec.control_set_b = grid_b ? *grid_b : ControlGrid::singleton({0.0});
  spec.payoff_integrand = [](ConstSpan, ConstSpan, ConstSpan) { return 1.0; };
  spec.discount = 0.0;
  spec.targets = std::move(targets);
  spec.state_independent_dynamics = state_independent;
  spec.minimum_time = true;

  auto blocks = agents;
  spec.dynamics = [blocks, slices](ConstSpan x, ConstSpan a, ConstSpan b, std::span<double> out) {
    double xi_buf[8];
    double out_buf[8];
    for (const auto& s : slices) {
      const auto& ag = blocks[s.agent];
      const std::size_t k = ag.state_indices.size();
      for (std::size_t i = 0; i < k; ++i) xi_buf[i] = x[ag.state_indices[i]];
      ConstSpan c = (s.side == Player::A ? a : b).subspan(s.offset, s.width);
      ag.dynamics(ConstSpan(xi_buf, k), c, std::span<double>(out_buf, k));
      for (std::size_t i = 0; i < k; ++i) out[ag.state_indices[i]] = out_buf[i];
    }
  };
  for (const auto& ag : agents)
    if (ag.state_indices.size() > 8) throw InputError("agent state blocks are limited to 8 components");
  spec.agents = std::move(agents);
  return spec;
}

void validate(const GameSpec& spec, std::span<const std::pair<double, double>> box, std::size_t samples) {
  if (spec.state_dim == 0) throw InputError("state dimension must be positive");
  if (!spec.dynamics) throw InputError("game has no dynamics");
  if (!spec.payoff_integrand) throw InputError("game has no payoff integrand");
  if (!(spec.discount >= 0.0)) throw InputError("discount must be non-negative");
  if (spec.targets.empty()) throw InputError("target list must be non-empty");
  if (box.size() != spec.state_dim) throw InputError("validation box dimension mismatch");

  std::mt19937_64 rng(0x5eedULL);
  std::vector<Vec> pts;
  for (std::size_t s = 0; s < samples; ++s) {
    Vec x(spec.state_dim);
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = std::uniform_real_distribution<double>(box[i].first, box[i].second)(rng);
    pts.push_back(std::move(x));
  }
  for (const auto& t : spec.targets) {
    check_target_consistency(t, pts);
    for (const auto& x : pts)
      if (t.contains(x) != t.contains(x)) throw InputError("target membership is not deterministic");
  }
  Vec out(spec.state_dim);
  for (const auto& x : pts) {
    for (const auto& a : spec.control_set_a.points()) {
      for (const auto& b : spec.control_set_b.points()) {
        spec.dynamics(x, a, b, out);
        for (double v : out)
          if (!std::isfinite(v)) throw InputError("dynamics unbounded on the validation box");
      }
    }
  }
}

namespace {

void require_dim(const GameSpec& spec, ConstSpan v, const char* what) {
  if (v.size() != spec.state_dim)
    throw InputError(std::string(what) + " has dimension " + std::to_string(v.size()) + ", expected " +
                     std::to_string(spec.state_dim));
}

// term(a,b) = -p.f(x,a,b) - l(x,a,b), tabulated row-major over (a,b).
std::vector<double> hamiltonian_terms(const GameSpec& spec, ConstSpan x, ConstSpan p) {
  require_dim(spec, x, "state");
  require_dim(spec, p, "costate");
  const auto& A = spec.control_set_a;
  const auto& B = spec.control_set_b;
  std::vector<double> terms(A.size() * B.size());
  Vec f(spec.state_dim);
  for (std::size_t i = 0; i < A.size(); ++i) {
    for (std::size_t j = 0; j < B.size(); ++j) {
      spec.dynamics(x, A[i], B[j], f);
      double dot = 0.0;
      for (std::size_t k = 0; k < f.size(); ++k) dot += p[k] * f[k];
      terms[i * B.size() + j] = -dot - spec.payoff_integrand(x, A[i], B[j]);
    }
  }
  return terms;
}

}  // namespace

Vec eval_dynamics(const GameSpec& spec, ConstSpan x, ConstSpan a, ConstSpan b) {
  require_dim(spec, x, "state");
  if (a.size() != spec.control_set_a.dim() || b.size() != spec.control_set_b.dim())
    throw InputError("control dimension mismatch");
  Vec out(spec.state_dim);
  spec.dynamics(x, a, b, out);
  return out;
}

double hamiltonian_upper(const GameSpec& spec, ConstSpan x, double u, ConstSpan p) {
  const auto terms = hamiltonian_terms(spec, x, p);
  const std::size_t nb = spec.control_set_b.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.control_set_a.size(); ++i) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nb; ++j) worst = std::max(worst, terms[i * nb + j]);
    best = std::min(best, worst);
  }
  return spec.discount * u + best;
}

double hamiltonian_lower(const GameSpec& spec, ConstSpan x, double u, ConstSpan p) {
  const auto terms = hamiltonian_terms(spec, x, p);
  const std::size_t nb = spec.control_set_b.size();
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < nb; ++j) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < spec.control_set_a.size(); ++i) worst = std::min(worst, terms[i * nb + j]);
    best = std::max(best, worst);
  }
  return spec.discount * u + best;
}

double decoupled_hamiltonian(const GameSpec& spec, std::size_t agent_index, ConstSpan xi, ConstSpan pi) {
  if (!spec.agents) throw UsageError("decoupled_hamiltonian called on a game without agent structure");
  const auto& agents = *spec.agents;
  if (agent_index >= agents.size()) throw InputError("agent index out of range");
  const auto& ag = agents[agent_index];
  const std::size_t k = ag.state_indices.size();
  if (xi.size() != k || pi.size() != k) throw InputError("agent state/costate dimension mismatch");
  Vec f(k);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : ag.controls.points()) {
    ag.dynamics(xi, c, f);
    double dot = 0.0;
    for (std::size_t i = 0; i < k; ++i) dot += pi[i] * f[i];
    best = std::max(best, dot);
  }
  return best;
}

double isaacs_gap(const GameSpec& spec, ConstSpan x, ConstSpan p) {
  return hamiltonian_upper(spec, x, 0.0, p) - hamiltonian_lower(spec, x, 0.0, p);
}

}  // namespace dgd
