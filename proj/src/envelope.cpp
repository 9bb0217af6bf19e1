#include "dgd/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "dgd/kruzkov.hpp"
#include "json.hpp"

namespace dgd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double max_step(const ScalarFunction& f) {
  const Vec s = f.step();
  return *std::max_element(s.begin(), s.end());
}

double norm(ConstSpan v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

}  // namespace

EnvelopeComponent make_component(ReducedField reduced, TargetSet target) {
  EnvelopeComponent c;
  c.value = std::make_shared<GridFunction>(std::move(reduced.field));
  c.projection = std::move(reduced.projection);
  c.target = std::move(target);
  return c;
}

EnvelopeField::EnvelopeField(std::vector<EnvelopeComponent> components, double tol_eq)
    : components_(std::move(components)), tol_eq_(tol_eq) {
  if (components_.empty()) throw InputError("envelope needs at least one component");
  if (!(tol_eq_ > 0.0)) throw InputError("envelope equality tolerance must be positive");
  dim_ = components_.front().projection.full_dim();
  double smallest = std::numeric_limits<double>::infinity();
  for (const auto& c : components_) {
    if (!c.value) throw InputError("envelope component has no value function");
    if (c.projection.full_dim() != dim_) throw InputError("envelope components embed into different dimensions");
    if (c.projection.reduced_dim() != c.value->dim())
      throw InputError("envelope component projection does not match its field dimension");
    if (!c.target.contains) throw InputError("envelope component has no target");
    const Vec s = c.value->step();
    smallest = std::min(smallest, *std::min_element(s.begin(), s.end()));
  }
  // Full-state step: the finest reduced step that sees each axis.
  step_.assign(dim_, std::numeric_limits<double>::infinity());
  for (const auto& c : components_) {
    const Vec s = c.value->step();
    const auto& rows = c.projection.rows();
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t a = 0; a < dim_; ++a)
        if (rows[r][a] != 0.0) step_[a] = std::min(step_[a], s[r] / std::abs(rows[r][a]));
  }
  for (double& s : step_)
    if (!std::isfinite(s)) s = smallest;
}

double EnvelopeField::component_value(std::size_t j, ConstSpan x) const {
  const auto& c = components_.at(j);
  return c.value->value(c.projection.apply(x));
}

bool EnvelopeField::in_target(ConstSpan x) const {
  for (const auto& c : components_)
    if (c.target.contains(x)) return true;
  return false;
}

double EnvelopeField::value(ConstSpan x) const {
  if (x.size() != dim_) throw InputError("envelope query dimension mismatch");
  if (in_target(x)) return 0.0;
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < components_.size(); ++j) m = std::min(m, component_value(j, x));
  return m;
}

bool EnvelopeField::excluded(ConstSpan x) const {
  if (x.size() != dim_ || in_target(x)) return true;
  for (const auto& c : components_)
    if (c.value->excluded(c.projection.apply(x))) return true;
  return false;
}

int EnvelopeField::branch(ConstSpan x) const {
  if (in_target(x)) return -1;
  int best = 0;
  double m = component_value(0, x);
  for (std::size_t j = 1; j < components_.size(); ++j) {
    const double v = component_value(j, x);
    if (v < m) {
      m = v;
      best = static_cast<int>(j);
    }
  }
  return best;
}

std::vector<std::size_t> EnvelopeField::active_set(ConstSpan x) const {
  Vec vals(components_.size());
  for (std::size_t j = 0; j < vals.size(); ++j) vals[j] = component_value(j, x);
  const double m = *std::min_element(vals.begin(), vals.end());
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < vals.size(); ++j) {
    if (std::isinf(m) ? std::isinf(vals[j]) : vals[j] - m <= tol_eq_) out.push_back(j);
  }
  return out;
}

std::vector<int> EnvelopeField::active_labels(ConstSpan x) const {
  std::vector<int> out;
  for (std::size_t j : active_set(x)) out.push_back(components_[j].target.label);
  return out;
}

double default_tol_eq(double h, double c) { return 2.0 * c * h; }

std::vector<Vec> sigma_set(const EnvelopeField& env, const Grid& query) {
  if (query.dim() != env.dim()) throw InputError("query grid dimension does not match the envelope");
  std::vector<Vec> out;
  for (std::size_t n = 0; n < query.size(); ++n) {
    Vec x = query.node_point(n);
    if (env.in_target(x)) continue;
    if (env.active_set(x).size() >= 2) out.push_back(std::move(x));
  }
  return out;
}

std::vector<std::vector<int>> active_map(const EnvelopeField& env, const Grid& query) {
  if (query.dim() != env.dim()) throw InputError("query grid dimension does not match the envelope");
  std::vector<std::vector<int>> out(query.size());
  for (std::size_t n = 0; n < query.size(); ++n) {
    const Vec x = query.node_point(n);
    if (!env.in_target(x)) out[n] = env.active_labels(x);
  }
  return out;
}

ValueField envelope_on_grid(const EnvelopeField& env, const Grid& grid, ValueScale scale) {
  if (grid.dim() != env.dim()) throw InputError("grid dimension does not match the envelope");
  ValueField f;
  f.grid = grid;
  f.scale = scale;
  f.values.resize(grid.size());
  f.mask.resize(grid.size());
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const Vec x = grid.node_point(n);
    if (env.in_target(x)) {
      f.mask[n] = NodeKind::Target;
      f.values[n] = 0.0;
      continue;
    }
    f.mask[n] = grid.on_face(n) ? NodeKind::Boundary : NodeKind::Interior;
    const double u = env.value(x);
    f.values[n] = scale == ValueScale::Kruzkov ? kruzkov(u) : u;
  }
  return f;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "HOLDS";
    case Verdict::Violated: return "VIOLATED";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

std::vector<Vec> simplex_lattice(std::size_t k, std::size_t subdivisions) {
  if (k == 0) throw InputError("simplex needs at least one vertex");
  if (subdivisions == 0) throw InputError("simplex lattice needs at least one subdivision");
  std::vector<Vec> out;
  std::vector<std::size_t> counts(k, 0);
  // Enumerate compositions of `subdivisions` into k parts.
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t left) {
    if (i + 1 == k) {
      counts[i] = left;
      Vec w(k);
      for (std::size_t j = 0; j < k; ++j) w[j] = static_cast<double>(counts[j]) / static_cast<double>(subdivisions);
      out.push_back(std::move(w));
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      counts[i] = c;
      rec(i + 1, left - c);
    }
  };
  rec(0, subdivisions);
  return out;
}

std::string ConditionReport::to_json() const {
  nlohmann::json j;
  j["point"] = point;
  j["active"] = active;
  j["residual_C"] = residual_C;
  j["residual_E"] = residual_E;
  j["verdict"] = to_string(verdict);
  j["verdict_C"] = to_string(verdict_C);
  j["verdict_E"] = to_string(verdict_E);
  j["threshold"] = threshold;
  j["envelope"] = envelope;
  j["combinations"] = combinations;
  j["worst_weights_E"] = worst_weights_E;
  if (!diagnostic.empty()) j["diagnostic"] = diagnostic;
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& c : components) {
    nlohmann::json s;
    s["label"] = c.label;
    s["value"] = c.value;
    s["vectors"] = c.vectors;
    s["method"] = c.analytic ? "analytic" : "sampled";
    if (!c.analytic) {
      s["radius"] = c.sample.radius;
      s["stencil_points"] = c.sample.stencil_points;
      s["requested"] = c.sample.requested;
      s["accepted"] = c.sample.accepted;
      s["support"] = c.sample.support;
      if (!c.sample.diagnostic.empty()) s["diagnostic"] = c.sample.diagnostic;
    }
    samples.push_back(std::move(s));
  }
  j["samples"] = std::move(samples);
  return j.dump();
}

ConditionReport check_conditions(const EnvelopeField& env, const GameSpec& spec, ConstSpan x,
                                 std::size_t weights_per_axis, const CheckOptions& options) {
  if (x.size() != env.dim() || x.size() != spec.state_dim) throw InputError("check point dimension mismatch");
  ConditionReport rep;
  rep.point.assign(x.begin(), x.end());
  if (env.in_target(x)) {
    rep.diagnostic = "point lies in a target";
    return rep;
  }
  rep.envelope = env.value(x);
  const auto active = env.active_set(x);
  for (std::size_t j : active) rep.active.push_back(env.components()[j].target.label);
  if (active.size() < 2) {
    rep.diagnostic = "singleton active set";
    return rep;
  }

  bool empty = false;
  for (std::size_t j : active) {
    const auto& comp = env.components()[j];
    ComponentSample cs;
    cs.label = comp.target.label;
    cs.value = env.component_value(j, x);
    if (comp.gradient_override) {
      cs.vectors = comp.gradient_override(x);
      cs.analytic = true;
    } else {
      const Vec y = comp.projection.apply(x);
      const double r = options.radius > 0.0 ? options.radius : 4.0 * max_step(*comp.value);
      cs.sample = estimate_limiting_superdiff(*comp.value, y, r, options.samples, options.superdiff);
      for (const auto& v : cs.sample.vectors) cs.vectors.push_back(comp.projection.embed_gradient(v));
    }
    if (cs.vectors.empty()) {
      empty = true;
      rep.diagnostic += "component " + std::to_string(cs.label) + ": " +
                        (cs.sample.diagnostic.empty() ? "no gradients" : cs.sample.diagnostic) + "; ";
    }
    rep.components.push_back(std::move(cs));
  }
  if (empty) {
    rep.verdict = rep.verdict_C = rep.verdict_E = Verdict::Inconclusive;
    return rep;
  }

  const std::size_t k = active.size();
  std::vector<Vec> weights;
  if (k <= 4) {
    weights = simplex_lattice(k, std::max<std::size_t>(1, weights_per_axis));
  } else {
    std::mt19937_64 rng(options.seed);
    std::gamma_distribution<double> gamma(1.0, 1.0);
    for (std::size_t s = 0; s < options.dirichlet_samples; ++s) {
      Vec w(k);
      double total = 0.0;
      for (double& c : w) total += (c = gamma(rng));
      for (double& c : w) c /= total;
      weights.push_back(std::move(w));
    }
  }

  // Per-candidate branch Hamiltonians.
  std::vector<Vec> branch_f(k);
  double f_scale = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (const auto& p : rep.components[i].vectors) {
      const double f = hamiltonian_upper(spec, x, rep.components[i].value, p);
      branch_f[i].push_back(f);
      f_scale = std::max(f_scale, std::abs(f));
    }
  }

  rep.residual_C = -std::numeric_limits<double>::infinity();
  rep.residual_E = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pick(k, 0);
  Vec combined(spec.state_dim);
  while (true) {
    for (const auto& w : weights) {
      std::fill(combined.begin(), combined.end(), 0.0);
      double rhs = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const Vec& p = rep.components[i].vectors[pick[i]];
        for (std::size_t d = 0; d < combined.size(); ++d) combined[d] += w[i] * p[d];
        rhs += w[i] * branch_f[i][pick[i]];
      }
      const double f = hamiltonian_upper(spec, x, rep.envelope, combined);
      ++rep.combinations;
      rep.residual_C = std::max(rep.residual_C, f - rhs);
      if (f > rep.residual_E) {
        rep.residual_E = f;
        rep.worst_weights_E = w;
      }
    }
    std::size_t i = 0;
    while (i < k && ++pick[i] == rep.components[i].vectors.size()) pick[i++] = 0;
    if (i == k) break;
  }

  rep.threshold = std::max(10.0 * options.tol_numeric, 0.05 * (1.0 + f_scale));
  rep.verdict_C = rep.residual_C > rep.threshold ? Verdict::Violated : Verdict::Holds;
  rep.verdict_E = rep.residual_E > rep.threshold ? Verdict::Violated : Verdict::Holds;
  rep.verdict = rep.verdict_E;
  return rep;
}

const char* to_string(PointKind kind) {
  switch (kind) {
    case PointKind::Smooth: return "SMOOTH";
    case PointKind::ConcaveKink: return "CONCAVE_KINK";
    case PointKind::ConvexKink: return "CONVEX_KINK";
    case PointKind::Excluded: return "EXCLUDED";
    case PointKind::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

void ViscosityReport::write_csv(std::ostream& os) const {
  const std::size_t n = rows.empty() ? 0 : rows.front().point.size();
  for (std::size_t i = 0; i < n; ++i) os << 'x' << (i + 1) << ',';
  os << "kind,value,sub_residual,super_residual,sub_ok,super_ok\n";
  os.precision(17);
  for (const auto& r : rows) {
    for (double c : r.point) os << c << ',';
    os << to_string(r.kind) << ',' << r.value << ',' << r.sub_residual << ',' << r.super_residual << ','
       << (r.sub_ok ? 1 : 0) << ',' << (r.super_ok ? 1 : 0) << '\n';
  }
}

namespace {

std::vector<Vec> hull_samples(const std::vector<Vec>& vertices, std::size_t subdivisions) {
  std::vector<Vec> out = vertices;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    for (std::size_t j = i + 1; j < vertices.size(); ++j) {
      for (std::size_t s = 1; s < subdivisions; ++s) {
        const double t = static_cast<double>(s) / static_cast<double>(subdivisions);
        Vec p(vertices[i].size());
        for (std::size_t d = 0; d < p.size(); ++d) p[d] = (1.0 - t) * vertices[i][d] + t * vertices[j][d];
        out.push_back(std::move(p));
      }
    }
  }
  if (vertices.size() > 2) {
    Vec c(vertices[0].size(), 0.0);
    for (const auto& v : vertices)
      for (std::size_t d = 0; d < c.size(); ++d) c[d] += v[d] / static_cast<double>(vertices.size());
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

ViscosityReport verify_viscosity(const ScalarFunction& f, const GameSpec& spec, std::span<const Vec> points,
                                 const ViscosityOptions& options) {
  if (f.dim() != spec.state_dim) throw InputError("function dimension does not match the game");
  ViscosityReport rep;
  const double hmax = max_step(f);
  const double radius = options.radius > 0.0 ? options.radius : 4.0 * hmax;
  const NegatedFunction neg(f);
  rep.worst_sub = -std::numeric_limits<double>::infinity();
  rep.worst_super = std::numeric_limits<double>::infinity();

  for (const auto& x : points) {
    ViscosityRow row;
    row.point = x;
    row.sub_residual = row.super_residual = kNaN;
    if (f.excluded(x)) {
      row.kind = PointKind::Excluded;
      ++rep.excluded;
      rep.rows.push_back(std::move(row));
      continue;
    }
    row.value = f.value(x);
    const SuperdiffSample sup = estimate_limiting_superdiff(f, x, radius, options.samples, options.superdiff);
    if (sup.empty()) {
      row.kind = PointKind::Inconclusive;
      ++rep.inconclusive;
      rep.rows.push_back(std::move(row));
      continue;
    }
    auto F = [&](ConstSpan p) { return hamiltonian_upper(spec, x, row.value, p); };
    auto test_sub = [&](const std::vector<Vec>& ps) {
      double worst = -std::numeric_limits<double>::infinity();
      for (const auto& p : ps) worst = std::max(worst, F(p));
      row.sub_residual = worst;
      row.sub_ok = worst <= options.tol;
      rep.worst_sub = std::max(rep.worst_sub, worst);
    };
    auto test_super = [&](const std::vector<Vec>& ps) {
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& p : ps) worst = std::min(worst, F(p));
      row.super_residual = worst;
      row.super_ok = worst >= -options.tol;
      rep.worst_super = std::min(rep.worst_super, worst);
    };

    if (sup.vectors.size() == 1) {
      // A single cluster of supergradients; confirm with the subgradient side.
      const SuperdiffSample sub = estimate_limiting_superdiff(neg, x, radius, options.samples, options.superdiff);
      row.kind = PointKind::Smooth;
      ++rep.smooth;
      test_sub({sup.vectors[0]});
      Vec q = sup.vectors[0];
      if (!sub.empty()) {
        q = sub.vectors[0];
        for (double& c : q) c = -c;
      }
      test_super({q});
    } else {
      const Vec& p1 = sup.vectors[0];
      const Vec& p2 = sup.vectors[1];
      Vec d(p1.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = p1[i] - p2[i];
      const double len = norm(d);
      const double eps = 2.0 * hmax;
      Vec xp(x), xm(x);
      for (std::size_t i = 0; i < d.size(); ++i) {
        xp[i] += eps * d[i] / len;
        xm[i] -= eps * d[i] / len;
      }
      const double second = f.value(xp) + f.value(xm) - 2.0 * row.value;
      const std::vector<Vec> hull = hull_samples(sup.vectors, options.hull_subdivisions);
      if (second <= 0.0) {
        row.kind = PointKind::ConcaveKink;
        ++rep.concave;
        test_sub(hull);
        test_super(sup.vectors);
      } else {
        row.kind = PointKind::ConvexKink;
        ++rep.convex;
        test_sub(sup.vectors);
        test_super(hull);
      }
    }
    if (!row.sub_ok) ++rep.sub_violations;
    if (!row.super_ok) ++rep.super_violations;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

ViscosityReport verify_viscosity(const ScalarFunction& f, const GameSpec& spec, const Grid& query,
                                 const ViscosityOptions& options) {
  std::vector<Vec> pts;
  pts.reserve(query.size());
  for (std::size_t n = 0; n < query.size(); ++n) pts.push_back(query.node_point(n));
  return verify_viscosity(f, spec, pts, options);
}

FieldComparison compare_fields(const ScalarFunction& a, const ScalarFunction& b, std::span<const Vec> points) {
  if (a.dim() != b.dim()) throw InputError("compared functions have different dimensions");
  FieldComparison out;
  double sum_d = 0.0, sum_k = 0.0;
  std::size_t branch_pairs = 0, branch_agree = 0;
  for (const auto& x : points) {
    if (x.size() != a.dim()) throw InputError("comparison point dimension mismatch");
    if (a.excluded(x) || b.excluded(x)) continue;
    const double va = a.value(x), vb = b.value(x);
    ++out.compared;
    const double dk = std::abs(kruzkov(va) - kruzkov(vb));
    if (out.worst_point.empty() || dk > out.linf_kruzkov) {
      out.linf_kruzkov = dk;
      out.worst_point = x;
    }
    sum_k += dk;
    if (std::isfinite(va) && std::isfinite(vb)) {
      ++out.finite_pairs;
      const double dd = std::abs(va - vb);
      out.linf_direct = std::max(out.linf_direct, dd);
      sum_d += dd;
    } else if (std::isfinite(va) != std::isfinite(vb)) {
      ++out.finiteness_mismatch;
    }
    const int ba = a.branch(x), bb = b.branch(x);
    if (ba >= 0 && bb >= 0) {
      ++branch_pairs;
      if (ba == bb) ++branch_agree;
    }
  }
  out.mean_abs_direct = out.finite_pairs ? sum_d / static_cast<double>(out.finite_pairs) : 0.0;
  out.mean_abs_kruzkov = out.compared ? sum_k / static_cast<double>(out.compared) : 0.0;
  out.argmin_agreement =
      branch_pairs ? static_cast<double>(branch_agree) / static_cast<double>(branch_pairs) : kNaN;
  return out;
}

FieldComparison compare_fields(const ScalarFunction& a, const ScalarFunction& b, const Grid& query,
                               const std::function<bool(ConstSpan)>& keep) {
  std::vector<Vec> pts;
  for (std::size_t n = 0; n < query.size(); ++n) {
    Vec x = query.node_point(n);
    if (!keep || keep(x)) pts.push_back(std::move(x));
  }
  return compare_fields(a, b, pts);
}

}  // namespace dgd
