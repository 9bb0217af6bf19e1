#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dgd/grid.hpp"
#include "dgd/model.hpp"
#include "dgd/superdiff.hpp"

namespace dgd {

/// One branch u_j of an envelope: a function of reduced coordinates, the map
/// from the full state, and the full-state target it is measured against.
struct EnvelopeComponent {
  std::shared_ptr<const ScalarFunction> value;  // direct scale, reduced coordinates
  Projection projection;
  TargetSet target;
  /// Full-state gradients to use instead of sampled ones (analytic branches).
  std::function<std::vector<Vec>(ConstSpan x)> gradient_override;
};

EnvelopeComponent make_component(ReducedField reduced, TargetSet target);

/// Lower envelope min_j u_j of embedded components. Also a ScalarFunction on the full state.
class EnvelopeField final : public ScalarFunction {
 public:
  EnvelopeField(std::vector<EnvelopeComponent> components, double tol_eq);

  std::size_t dim() const override { return dim_; }
  /// 0 inside any component target, otherwise the minimum of the components.
  double value(ConstSpan x) const override;
  Vec step() const override { return step_; }
  bool excluded(ConstSpan x) const override;
  /// Component index attaining the minimum (lowest index on ties), -1 in targets.
  int branch(ConstSpan x) const override;

  double component_value(std::size_t j, ConstSpan x) const;
  bool in_target(ConstSpan x) const;
  /// Component indices within tol_eq of the minimum.
  std::vector<std::size_t> active_set(ConstSpan x) const;
  std::vector<int> active_labels(ConstSpan x) const;

  const std::vector<EnvelopeComponent>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }
  double tol_eq() const { return tol_eq_; }

 private:
  std::vector<EnvelopeComponent> components_;
  double tol_eq_;
  std::size_t dim_ = 0;
  Vec step_;
};

/// Default equality tolerance 2*C*h.
double default_tol_eq(double h, double c = 1.0);

/// Query nodes outside every target whose active set has two or more members.
std::vector<Vec> sigma_set(const EnvelopeField& env, const Grid& query);

/// Active labels per query node; empty for target nodes.
std::vector<std::vector<int>> active_map(const EnvelopeField& env, const Grid& query);

/// Envelope sampled on a grid, in the requested scale, with target masks from the envelope.
ValueField envelope_on_grid(const EnvelopeField& env, const Grid& grid, ValueScale scale);

enum class Verdict { Holds, Violated, Inconclusive };
const char* to_string(Verdict v);

struct CheckOptions {
  /// Superdifferential sampling radius; 0 selects 4 * the component's largest step.
  double radius = 0.0;
  std::size_t samples = 64;
  double tol_numeric = 0.01;
  std::size_t dirichlet_samples = 200;
  std::uint64_t seed = 1;
  SuperdiffOptions superdiff;
};

struct ComponentSample {
  int label = 0;
  double value = 0.0;
  std::vector<Vec> vectors;  // full-state gradients
  bool analytic = false;
  SuperdiffSample sample;    // metadata when estimated
};

struct ConditionReport {
  Vec point;
  std::vector<int> active;
  std::vector<ComponentSample> components;
  double envelope = 0.0;
  std::size_t combinations = 0;
  double residual_C = 0.0;
  double residual_E = 0.0;
  Vec worst_weights_E;
  double threshold = 0.0;
  Verdict verdict_C = Verdict::Holds;
  Verdict verdict_E = Verdict::Holds;
  /// Sufficient-condition verdict; follows (E).
  Verdict verdict = Verdict::Holds;
  std::string diagnostic;

  std::string to_json() const;
};

/// Tests (C) and (E) at x with simplex-lattice weights (`weights_per_axis`
/// subdivisions), or seeded Dirichlet samples above four active components.
ConditionReport check_conditions(const EnvelopeField& env, const GameSpec& spec, ConstSpan x,
                                 std::size_t weights_per_axis = 10, const CheckOptions& options = {});

/// Convex weights on the simplex with k vertices and `subdivisions` steps per axis.
std::vector<Vec> simplex_lattice(std::size_t k, std::size_t subdivisions);

enum class PointKind { Smooth, ConcaveKink, ConvexKink, Excluded, Inconclusive };
const char* to_string(PointKind kind);

struct ViscosityOptions {
  double radius = 0.0;
  std::size_t samples = 48;
  /// Absolute tolerance on F for both inequalities.
  double tol = 0.1;
  /// Hull samples per pair of branch gradients.
  std::size_t hull_subdivisions = 10;
  SuperdiffOptions superdiff;
};

struct ViscosityRow {
  Vec point;
  PointKind kind = PointKind::Inconclusive;
  double value = 0.0;
  /// max F over vectors tested for the subsolution inequality (NaN if none).
  double sub_residual = 0.0;
  /// min F over vectors tested for the supersolution inequality (NaN if none).
  double super_residual = 0.0;
  bool sub_ok = true;
  bool super_ok = true;
};

struct ViscosityReport {
  std::vector<ViscosityRow> rows;
  std::size_t smooth = 0, concave = 0, convex = 0, excluded = 0, inconclusive = 0;
  std::size_t sub_violations = 0, super_violations = 0;
  double worst_sub = 0.0;    // largest F seen in sub tests
  double worst_super = 0.0;  // smallest F seen in super tests

  void write_csv(std::ostream& os) const;
};

/// Sub/supersolution residuals of f on the given points: smooth points test
/// |F| <= tol; kinks are classified by the second difference across the two
/// leading branch gradients, and the one-sided inequalities are tested on
/// hull samples of the nonempty side.
ViscosityReport verify_viscosity(const ScalarFunction& f, const GameSpec& spec, std::span<const Vec> points,
                                 const ViscosityOptions& options = {});
ViscosityReport verify_viscosity(const ScalarFunction& f, const GameSpec& spec, const Grid& query,
                                 const ViscosityOptions& options = {});

struct FieldComparison {
  std::size_t compared = 0;
  /// Both values finite.
  std::size_t finite_pairs = 0;
  /// Exactly one value infinite.
  std::size_t finiteness_mismatch = 0;
  double linf_direct = 0.0;
  double mean_abs_direct = 0.0;
  double linf_kruzkov = 0.0;
  double mean_abs_kruzkov = 0.0;
  Vec worst_point;  // of the Kruzkov L-infinity
  /// Fraction of points where both report the same branch (NaN if neither reports branches).
  double argmin_agreement = 0.0;
};

/// Points excluded by either function are skipped, as are nodes the predicate rejects.
FieldComparison compare_fields(const ScalarFunction& a, const ScalarFunction& b, std::span<const Vec> points);
FieldComparison compare_fields(const ScalarFunction& a, const ScalarFunction& b, const Grid& query,
                               const std::function<bool(ConstSpan)>& keep = {});

}  // namespace dgd
