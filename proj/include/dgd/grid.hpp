#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "dgd/model.hpp"

namespace dgd {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Rectangular lattice. Nodes are ordered lexicographically: the first axis
/// varies slowest.
class Grid {
 public:
  Grid() = default;
  Grid(std::vector<Interval> bounds, std::vector<std::size_t> counts);

  std::size_t dim() const { return bounds_.size(); }
  std::size_t size() const { return size_; }
  const Interval& bounds(std::size_t axis) const { return bounds_[axis]; }
  std::size_t count(std::size_t axis) const { return counts_[axis]; }
  double spacing(std::size_t axis) const { return spacing_[axis]; }
  const std::vector<double>& spacings() const { return spacing_; }
  double max_spacing() const;
  std::size_t stride(std::size_t axis) const { return strides_[axis]; }

  /// lo + (hi - lo) * k / (n - 1), with the last node pinned to hi.
  double coordinate(std::size_t axis, std::size_t k) const;
  void node_index(std::size_t flat, std::span<std::size_t> multi) const;
  std::size_t flat_index(std::span<const std::size_t> multi) const;
  Vec node_point(std::size_t flat) const;
  bool contains(ConstSpan x) const;
  bool on_face(std::size_t flat) const;

 private:
  std::vector<Interval> bounds_;
  std::vector<std::size_t> counts_;
  std::vector<double> spacing_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

Grid build_grid(std::vector<Interval> bounds, std::vector<std::size_t> counts);

enum class NodeKind : std::uint8_t { Target, Interior, Boundary };
/// Direct: values are payoffs. Kruzkov: values are 1 - exp(-payoff).
enum class ValueScale { Direct, Kruzkov };

const char* to_string(NodeKind kind);
const char* to_string(ValueScale scale);

struct ValueField {
  Grid grid;
  std::vector<double> values;
  std::vector<NodeKind> mask;
  ValueScale scale = ValueScale::Direct;

  /// Values zero, TARGET where `spec` says so, BOUNDARY on box faces.
  static ValueField with_masks(const Grid& grid, const GameSpec& spec, ValueScale scale);
};

struct Interpolated {
  double value = 0.0;
  bool out_of_domain = false;
};

/// Multilinear interpolation. Points outside the box are clamped onto it and flagged.
Interpolated interpolate(const ValueField& field, ConstSpan x);

struct GradientEstimate {
  Vec gradient;
  /// Set on TARGET nodes, where the field is identically zero nearby.
  bool flagged = false;
};

/// Central differences per axis, one-sided on box faces.
GradientEstimate central_gradient(const ValueField& field, std::size_t node);

/// Copy of the field converted to the direct (payoff) scale; Kruzkov values
/// at or above 1 become +infinity.
ValueField to_direct(const ValueField& field);

/// Linear map from the full state to a reduced coordinate space.
class Projection {
 public:
  static Projection identity(std::size_t n);
  /// Row r picks full coordinate indices[r]. Indices distinct and < full_dim.
  static Projection indices(std::vector<std::size_t> indices, std::size_t full_dim);
  /// Row r is rows[r] (length full_dim).
  static Projection linear(std::vector<Vec> rows, std::size_t full_dim);

  std::size_t full_dim() const { return full_dim_; }
  std::size_t reduced_dim() const { return rows_.size(); }
  const std::vector<Vec>& rows() const { return rows_; }
  const std::vector<std::size_t>& index_map() const { return index_map_; }
  bool is_index_map() const { return !index_map_.empty(); }

  Vec apply(ConstSpan x) const;
  /// Full-state gradient M^T g; zero on coordinates the reduction ignores.
  Vec embed_gradient(ConstSpan g) const;

 private:
  std::size_t full_dim_ = 0;
  std::vector<Vec> rows_;
  std::vector<std::size_t> index_map_;
};

struct ReducedField {
  ValueField field;
  Projection projection;

  ReducedField(ValueField field, Projection projection);
};

/// Scalar function in the direct (payoff) scale, the common input of the
/// differential estimators and checkers.
class ScalarFunction {
 public:
  virtual ~ScalarFunction() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(ConstSpan x) const = 0;
  /// Finite-difference step per axis.
  virtual Vec step() const = 0;
  /// Points where the function must not be sampled (targets, outside the box).
  virtual bool excluded(ConstSpan) const { return false; }
  /// Index of the branch attaining the value, for envelopes; -1 otherwise.
  virtual int branch(ConstSpan) const { return -1; }
};

/// Interpolated ValueField viewed in the direct scale. Excludes points outside
/// the box and points whose interpolation cell touches a TARGET node.
class GridFunction final : public ScalarFunction {
 public:
  explicit GridFunction(ValueField field);
  std::size_t dim() const override { return field_.grid.dim(); }
  double value(ConstSpan x) const override;
  Vec step() const override { return field_.grid.spacings(); }
  bool excluded(ConstSpan x) const override;
  const ValueField& field() const { return field_; }

 private:
  ValueField field_;
};

/// Analytic function with an explicit finite-difference step.
class AnalyticFunction final : public ScalarFunction {
 public:
  AnalyticFunction(std::size_t dim, std::function<double(ConstSpan)> fn, Vec step,
                   std::function<bool(ConstSpan)> excluded = {});
  std::size_t dim() const override { return dim_; }
  double value(ConstSpan x) const override { return fn_(x); }
  Vec step() const override { return step_; }
  bool excluded(ConstSpan x) const override { return excluded_ && excluded_(x); }

 private:
  std::size_t dim_;
  std::function<double(ConstSpan)> fn_;
  Vec step_;
  std::function<bool(ConstSpan)> excluded_;
};

/// -f, used to estimate subdifferentials as negated superdifferentials.
class NegatedFunction final : public ScalarFunction {
 public:
  explicit NegatedFunction(const ScalarFunction& inner) : inner_(inner) {}
  std::size_t dim() const override { return inner_.dim(); }
  double value(ConstSpan x) const override { return -inner_.value(x); }
  Vec step() const override { return inner_.step(); }
  bool excluded(ConstSpan x) const override { return inner_.excluded(x); }

 private:
  const ScalarFunction& inner_;
};

// Grid dump: header x1,...,xn,value,mask; lexicographic rows; 17 significant digits.
void write_grid_csv(std::ostream& os, const ValueField& field);
void write_grid_csv(const std::string& path, const ValueField& field);
/// Inverse of write_grid_csv. The scale is not stored in the file and must be supplied.
ValueField read_grid_csv(std::istream& is, ValueScale scale);
ValueField read_grid_csv(const std::string& path, ValueScale scale);

}  // namespace dgd
