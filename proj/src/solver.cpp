#include "dgd/solver.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace dgd {

const char* to_string(SweepMode mode) { return mode == SweepMode::Jacobi ? "jacobi" : "gauss_seidel"; }
const char* to_string(Order order) { return order == Order::Upper ? "upper" : "lower"; }
const char* to_string(OutOfDomain policy) { return policy == OutOfDomain::Evasion ? "evasion" : "clamp"; }

ValueScale solver_scale(const GameSpec& spec) {
  if (spec.discount > 0.0) return ValueScale::Direct;
  if (!spec.minimum_time)
    throw InputError("undiscounted games are supported only with the minimum-time payoff");
  return ValueScale::Kruzkov;
}

namespace {

constexpr std::size_t kMaxDim = 12;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Corner {
  std::ptrdiff_t offset;
  double weight;
};

// Interpolation stencil of one control pair for state-independent dynamics.
struct PairStencil {
  std::vector<Corner> corners;
  std::array<std::size_t, kMaxDim> lo{};
  std::array<std::size_t, kMaxDim> hi{};
  bool usable = false;
};

class Operator {
 public:
  Operator(const GameSpec& spec, const Grid& grid, const SolverConfig& config)
      : spec_(spec), grid_(grid), config_(config), scale_(solver_scale(spec)) {
    if (grid.dim() != spec.state_dim) throw InputError("grid dimension does not match the game");
    h_ = config.time_step > 0.0 ? config.time_step : grid.max_spacing();
    if (!(h_ > 0.0)) throw InputError("time step must be positive");
    const double rate = scale_ == ValueScale::Kruzkov ? 1.0 : spec.discount;
    gamma_ = std::exp(-h_ * rate);
    na_ = spec.control_set_a.size();
    nb_ = spec.control_set_b.size();
    if (spec.state_independent_dynamics && scale_ == ValueScale::Kruzkov) build_stencils();
  }

  double gamma() const { return gamma_; }

  // New value at a non-target node, reading `v`.
  double update(const std::vector<double>& v, std::size_t node) const {
    std::array<std::size_t, kMaxDim> idx{};
    grid_.node_index(node, std::span(idx.data(), grid_.dim()));
    const bool upper = config_.order == Order::Upper;
    double outer = upper ? -kInf : kInf;
    const std::size_t n_outer = upper ? na_ : nb_;
    const std::size_t n_inner = upper ? nb_ : na_;
    Vec x;
    for (std::size_t o = 0; o < n_outer; ++o) {
      double inner = upper ? kInf : -kInf;
      for (std::size_t i = 0; i < n_inner; ++i) {
        const std::size_t ia = upper ? o : i;
        const std::size_t ib = upper ? i : o;
        const double q = pair_value(v, node, idx, ia, ib, x);
        if (upper) {
          inner = std::min(inner, q);
          if (inner <= outer) break;
        } else {
          inner = std::max(inner, q);
          if (inner >= outer) break;
        }
      }
      outer = upper ? std::max(outer, inner) : std::min(outer, inner);
    }
    if (std::isnan(outer)) throw SolverError(nan_message("NaN produced", node));
    return outer;
  }

 private:
  std::string nan_message(const char* what, std::size_t node) const {
    std::ostringstream os;
    os << what << " at node " << node << " (";
    const Vec p = grid_.node_point(node);
    for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << p[i];
    os << ")";
    return os.str();
  }

  void build_stencils() {
    const std::size_t n = grid_.dim();
    stencils_.resize(na_ * nb_);
    const Vec x0(n, 0.0);
    Vec f(n);
    for (std::size_t ia = 0; ia < na_; ++ia) {
      for (std::size_t ib = 0; ib < nb_; ++ib) {
        spec_.dynamics(x0, spec_.control_set_a[ia], spec_.control_set_b[ib], f);
        for (double fd : f)
          if (!std::isfinite(fd)) throw SolverError("non-finite dynamics for control pair " + std::to_string(ia) + "," + std::to_string(ib));
        PairStencil& st = stencils_[ia * nb_ + ib];
        std::array<long, kMaxDim> shift{};
        std::array<double, kMaxDim> frac{};
        bool ok = true;
        for (std::size_t d = 0; d < n; ++d) {
          const double t = h_ * f[d] / grid_.spacing(d);
          double s = std::floor(t);
          double fr = t - s;
          if (fr < 1e-12) fr = 0.0;
          if (fr > 1.0 - 1e-12) {
            fr = 0.0;
            s += 1.0;
          }
          shift[d] = static_cast<long>(s);
          frac[d] = fr;
          const long cnt = static_cast<long>(grid_.count(d));
          const long lo = std::max(0L, -shift[d]);
          const long hi = cnt - 1 - shift[d] - (fr > 0.0 ? 1 : 0);
          if (hi < lo) {
            ok = false;
            break;
          }
          st.lo[d] = static_cast<std::size_t>(lo);
          st.hi[d] = static_cast<std::size_t>(hi);
        }
        if (!ok) continue;
        for (std::size_t corner = 0; corner < (std::size_t{1} << n); ++corner) {
          double w = 1.0;
          std::ptrdiff_t off = 0;
          for (std::size_t d = 0; d < n; ++d) {
            const bool up = corner & (std::size_t{1} << d);
            const double wd = up ? frac[d] : 1.0 - frac[d];
            w *= wd;
            off += (shift[d] + (up ? 1 : 0)) * static_cast<std::ptrdiff_t>(grid_.stride(d));
          }
          if (w != 0.0) st.corners.push_back({off, w});
        }
        st.usable = true;
      }
    }
  }

  double pair_value(const std::vector<double>& v, std::size_t node, const std::array<std::size_t, kMaxDim>& idx,
                    std::size_t ia, std::size_t ib, Vec& x) const {
    const auto& a = spec_.control_set_a[ia];
    const auto& b = spec_.control_set_b[ib];
    if (!stencils_.empty()) {
      const PairStencil& st = stencils_[ia * nb_ + ib];
      bool inside = st.usable;
      for (std::size_t d = 0; inside && d < grid_.dim(); ++d)
        inside = idx[d] >= st.lo[d] && idx[d] <= st.hi[d];
      if (inside) {
        double acc = 0.0;
        for (const auto& c : st.corners) acc += c.weight * v[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) + c.offset)];
        return (1.0 - gamma_) + gamma_ * acc;
      }
    }
    if (x.empty()) x = grid_.node_point(node);
    const std::size_t n = grid_.dim();
    Vec f(n), foot(n);
    spec_.dynamics(x, a, b, f);
    for (std::size_t d = 0; d < n; ++d) {
      if (!std::isfinite(f[d])) throw SolverError(nan_message("non-finite dynamics", node));
      foot[d] = x[d] + h_ * f[d];
    }
    double running, evasion;
    if (scale_ == ValueScale::Kruzkov) {
      running = 1.0;
      evasion = 1.0;
    } else {
      running = spec_.payoff_integrand(x, a, b) / spec_.discount;
      evasion = running;
    }
    const Interpolated ip = interpolate_raw(v, foot);
    const double next = (ip.out_of_domain && config_.out_of_domain == OutOfDomain::Evasion) ? evasion : ip.value;
    return (1.0 - gamma_) * running + gamma_ * next;
  }

  Interpolated interpolate_raw(const std::vector<double>& v, ConstSpan x) const {
    const std::size_t n = grid_.dim();
    std::array<std::size_t, kMaxDim> base{};
    std::array<double, kMaxDim> frac{};
    bool clamped = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& bd = grid_.bounds(i);
      double xi = x[i];
      if (!(xi >= bd.lo)) {
        xi = bd.lo;
        clamped = true;
      } else if (xi > bd.hi) {
        xi = bd.hi;
        clamped = true;
      }
      const double t = (xi - bd.lo) / grid_.spacing(i);
      auto k = static_cast<std::size_t>(std::floor(t));
      if (k + 1 >= grid_.count(i)) k = grid_.count(i) - 2;
      base[i] = k;
      frac[i] = std::clamp(t - static_cast<double>(k), 0.0, 1.0);
    }
    std::size_t flat = 0;
    for (std::size_t i = 0; i < n; ++i) flat += base[i] * grid_.stride(i);
    double acc = 0.0;
    for (std::size_t corner = 0; corner < (std::size_t{1} << n); ++corner) {
      double w = 1.0;
      std::size_t off = flat;
      for (std::size_t i = 0; i < n; ++i) {
        if (corner & (std::size_t{1} << i)) {
          w *= frac[i];
          off += grid_.stride(i);
        } else {
          w *= 1.0 - frac[i];
        }
      }
      if (w != 0.0) acc += w * v[off];
    }
    return {acc, clamped};
  }

  const GameSpec& spec_;
  const Grid& grid_;
  const SolverConfig& config_;
  ValueScale scale_;
  double h_ = 0.0;
  double gamma_ = 1.0;
  std::size_t na_ = 0, nb_ = 0;
  std::vector<PairStencil> stencils_;
};

void check_field(const ValueField& field, const GameSpec& spec) {
  if (field.grid.dim() != spec.state_dim) throw InputError("field dimension does not match the game");
  if (field.values.size() != field.grid.size() || field.mask.size() != field.grid.size())
    throw InputError("field storage does not match its grid");
  if (field.scale != solver_scale(spec)) throw InputError("field scale does not match the game's solver scale");
}

double never_captured_value(const GameSpec& spec) {
  return solver_scale(spec) == ValueScale::Kruzkov ? 1.0 : 0.0;
}

double now_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

double jacobi_sweep(const Operator& op, const ValueField& in, std::vector<double>& out, unsigned threads) {
  const std::size_t total = in.values.size();
  out = in.values;
  const unsigned workers = std::max(1u, threads);
  std::vector<double> change(workers, 0.0);
  auto work = [&](unsigned w) {
    const std::size_t begin = total * w / workers, end = total * (w + 1) / workers;
    double c = 0.0;
    for (std::size_t node = begin; node < end; ++node) {
      if (in.mask[node] == NodeKind::Target) continue;
      out[node] = op.update(in.values, node);
      c = std::max(c, std::abs(out[node] - in.values[node]));
    }
    change[w] = c;
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  return *std::max_element(change.begin(), change.end());
}

double gauss_seidel_sweep(const Operator& op, ValueField& field, bool reverse) {
  const std::size_t total = field.values.size();
  double change = 0.0;
  for (std::size_t k = 0; k < total; ++k) {
    const std::size_t node = reverse ? total - 1 - k : k;
    if (field.mask[node] == NodeKind::Target) continue;
    const double next = op.update(field.values, node);
    change = std::max(change, std::abs(next - field.values[node]));
    field.values[node] = next;
  }
  return change;
}

}  // namespace

ValueField initial_field(const GameSpec& spec, const Grid& grid) {
  ValueField f = ValueField::with_masks(grid, spec, solver_scale(spec));
  const double init = never_captured_value(spec);
  for (std::size_t n = 0; n < grid.size(); ++n) f.values[n] = f.mask[n] == NodeKind::Target ? 0.0 : init;
  return f;
}

ValueField sl_update(const ValueField& field, const GameSpec& spec, const SolverConfig& config) {
  check_field(field, spec);
  const Operator op(spec, field.grid, config);
  ValueField out = field;
  jacobi_sweep(op, field, out.values, config.threads);
  return out;
}

SolveResult solve(const GameSpec& spec, const Grid& grid, const SolverConfig& config) {
  return solve(spec, initial_field(spec, grid), config);
}

SolveResult solve(const GameSpec& spec, ValueField initial, const SolverConfig& config) {
  check_field(initial, spec);
  if (!(config.tolerance > 0.0)) throw InputError("solver tolerance must be positive");
  if (config.max_iterations == 0) throw InputError("max_iterations must be positive");
  if (!(config.time_step >= 0.0)) throw InputError("time step must be non-negative (0 selects the grid spacing)");
  const auto t0 = std::chrono::steady_clock::now();
  SolveResult result;
  result.field = std::move(initial);
  const Operator op(spec, result.field.grid, config);
  std::vector<double> scratch;
  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    double change;
    if (config.sweep_mode == SweepMode::Jacobi) {
      change = jacobi_sweep(op, result.field, scratch, config.threads);
      result.field.values.swap(scratch);
    } else {
      change = gauss_seidel_sweep(op, result.field, it % 2 == 0);
    }
    const IterationLog entry{it, change, now_ms(t0)};
    result.log.push_back(entry);
    if (config.on_iteration) config.on_iteration(entry);
    result.iterations = it;
    result.sup_change = change;
    if (change < config.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.wall_ms = now_ms(t0);
  return result;
}

ResidualReport pde_residual(const ValueField& field, const GameSpec& spec, double smoothness) {
  if (field.grid.dim() != spec.state_dim) throw InputError("field dimension does not match the game");
  const ValueField u = to_direct(field);
  const Grid& g = u.grid;
  const std::size_t n = g.dim();
  ResidualReport rep;
  rep.residual.assign(g.size(), std::numeric_limits<double>::quiet_NaN());

  std::size_t stencil = 1;
  for (std::size_t i = 0; i < n; ++i) stencil *= 3;
  std::vector<std::array<int, kMaxDim>> offsets(stencil);
  for (std::size_t k = 0; k < stencil; ++k) {
    std::size_t rem = k;
    for (std::size_t i = 0; i < n; ++i) {
      offsets[k][i] = static_cast<int>(rem % 3) - 1;
      rem /= 3;
    }
  }

  // Observed Lipschitz constant over finite neighbour pairs.
  double lip = 0.0;
  std::array<std::size_t, kMaxDim> idx{};
  for (std::size_t node = 0; node < g.size(); ++node) {
    g.node_index(node, std::span(idx.data(), n));
    for (std::size_t d = 0; d < n; ++d) {
      if (idx[d] + 1 >= g.count(d)) continue;
      const double a = u.values[node], b = u.values[node + g.stride(d)];
      if (std::isfinite(a) && std::isfinite(b)) lip = std::max(lip, std::abs(b - a) / g.spacing(d));
    }
  }
  const double threshold = smoothness * g.max_spacing() * lip;

  double sum = 0.0;
  std::vector<double> vals(stencil);
  for (std::size_t node = 0; node < g.size(); ++node) {
    if (u.mask[node] != NodeKind::Interior) continue;
    g.node_index(node, std::span(idx.data(), n));
    bool ok = true;
    for (std::size_t k = 0; k < stencil && ok; ++k) {
      std::ptrdiff_t off = 0;
      for (std::size_t d = 0; d < n; ++d) off += offsets[k][d] * static_cast<std::ptrdiff_t>(g.stride(d));
      const auto nb = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) + off);
      if (u.mask[nb] == NodeKind::Target || !std::isfinite(u.values[nb])) ok = false;
      vals[k] = u.values[nb];
    }
    if (!ok) {
      ++rep.skipped;
      continue;
    }
    const GradientEstimate grad = central_gradient(u, node);
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(stencil);
    double ss = 0.0;
    for (std::size_t k = 0; k < stencil; ++k) {
      double pred = mean;
      for (std::size_t d = 0; d < n; ++d) pred += grad.gradient[d] * offsets[k][d] * g.spacing(d);
      ss += (vals[k] - pred) * (vals[k] - pred);
    }
    if (std::sqrt(ss / static_cast<double>(stencil)) > threshold) {
      ++rep.skipped;
      continue;
    }
    const Vec x = g.node_point(node);
    const double r = hamiltonian_upper(spec, x, u.values[node], grad.gradient);
    rep.residual[node] = r;
    rep.sup = std::max(rep.sup, std::abs(r));
    sum += std::abs(r);
    ++rep.evaluated;
  }
  rep.mean_abs = rep.evaluated ? sum / static_cast<double>(rep.evaluated) : 0.0;
  return rep;
}

}  // namespace dgd
