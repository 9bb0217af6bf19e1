#include "dgd/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dgd/kruzkov.hpp"

namespace dgd {

namespace {
constexpr std::size_t kMaxDim = 12;
}

Grid::Grid(std::vector<Interval> bounds, std::vector<std::size_t> counts)
    : bounds_(std::move(bounds)), counts_(std::move(counts)) {
  if (bounds_.empty()) throw InputError("grid needs at least one axis");
  if (bounds_.size() != counts_.size()) throw InputError("grid bounds and counts differ in length");
  if (bounds_.size() > kMaxDim) throw InputError("grid dimension exceeds supported maximum");
  spacing_.resize(dim());
  strides_.resize(dim());
  size_ = 1;
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!(bounds_[i].hi > bounds_[i].lo)) throw InputError("grid axis " + std::to_string(i + 1) + " has inverted bounds");
    if (counts_[i] < 2) throw InputError("grid axes need at least 2 nodes");
    spacing_[i] = (bounds_[i].hi - bounds_[i].lo) / static_cast<double>(counts_[i] - 1);
  }
  for (std::size_t i = dim(); i-- > 0;) {
    strides_[i] = size_;
    size_ *= counts_[i];
  }
}

Grid build_grid(std::vector<Interval> bounds, std::vector<std::size_t> counts) {
  return Grid(std::move(bounds), std::move(counts));
}

double Grid::max_spacing() const { return *std::max_element(spacing_.begin(), spacing_.end()); }

double Grid::coordinate(std::size_t axis, std::size_t k) const {
  const auto& b = bounds_[axis];
  const std::size_t n = counts_[axis];
  if (k + 1 >= n) return b.hi;
  return b.lo + (b.hi - b.lo) * static_cast<double>(k) / static_cast<double>(n - 1);
}

void Grid::node_index(std::size_t flat, std::span<std::size_t> multi) const {
  for (std::size_t i = 0; i < dim(); ++i) {
    multi[i] = flat / strides_[i];
    flat -= multi[i] * strides_[i];
  }
}

std::size_t Grid::flat_index(std::span<const std::size_t> multi) const {
  std::size_t flat = 0;
  for (std::size_t i = 0; i < dim(); ++i) flat += multi[i] * strides_[i];
  return flat;
}

Vec Grid::node_point(std::size_t flat) const {
  std::array<std::size_t, kMaxDim> idx{};
  node_index(flat, std::span(idx.data(), dim()));
  Vec x(dim());
  for (std::size_t i = 0; i < dim(); ++i) x[i] = coordinate(i, idx[i]);
  return x;
}

bool Grid::contains(ConstSpan x) const {
  for (std::size_t i = 0; i < dim(); ++i)
    if (x[i] < bounds_[i].lo || x[i] > bounds_[i].hi) return false;
  return true;
}

bool Grid::on_face(std::size_t flat) const {
  std::array<std::size_t, kMaxDim> idx{};
  node_index(flat, std::span(idx.data(), dim()));
  for (std::size_t i = 0; i < dim(); ++i)
    if (idx[i] == 0 || idx[i] + 1 == counts_[i]) return true;
  return false;
}

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Target: return "TARGET";
    case NodeKind::Interior: return "INTERIOR";
    case NodeKind::Boundary: return "BOUNDARY";
  }
  return "?";
}

const char* to_string(ValueScale scale) { return scale == ValueScale::Kruzkov ? "kruzkov" : "direct"; }

ValueField ValueField::with_masks(const Grid& grid, const GameSpec& spec, ValueScale scale) {
  if (grid.dim() != spec.state_dim) throw InputError("grid dimension does not match the game state dimension");
  ValueField f;
  f.grid = grid;
  f.scale = scale;
  f.values.assign(grid.size(), 0.0);
  f.mask.resize(grid.size());
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const Vec x = grid.node_point(n);
    if (spec.in_target(x))
      f.mask[n] = NodeKind::Target;
    else
      f.mask[n] = grid.on_face(n) ? NodeKind::Boundary : NodeKind::Interior;
  }
  return f;
}

namespace {

struct Cell {
  std::array<std::size_t, kMaxDim> base{};
  std::array<double, kMaxDim> frac{};
  bool clamped = false;
};

Cell locate(const Grid& g, ConstSpan x) {
  Cell c;
  for (std::size_t i = 0; i < g.dim(); ++i) {
    const auto& b = g.bounds(i);
    double xi = x[i];
    if (!(xi >= b.lo)) {
      xi = b.lo;
      c.clamped = true;
    } else if (xi > b.hi) {
      xi = b.hi;
      c.clamped = true;
    }
    const double t = (xi - b.lo) / g.spacing(i);
    auto k = static_cast<std::size_t>(std::floor(t));
    if (k + 1 >= g.count(i)) k = g.count(i) - 2;
    // fix up roundoff in t so that nodes interpolate exactly
    if (k > 0 && xi < g.coordinate(i, k)) --k;
    if (k + 2 < g.count(i) && xi >= g.coordinate(i, k + 1)) ++k;
    const double a = g.coordinate(i, k), bnd = g.coordinate(i, k + 1);
    c.base[i] = k;
    c.frac[i] = std::clamp((xi - a) / (bnd - a), 0.0, 1.0);
  }
  return c;
}

}  // namespace

Interpolated interpolate(const ValueField& field, ConstSpan x) {
  const Grid& g = field.grid;
  if (x.size() != g.dim()) throw InputError("interpolation point dimension mismatch");
  const Cell c = locate(g, x);
  const std::size_t n = g.dim();
  std::size_t base = 0;
  for (std::size_t i = 0; i < n; ++i) base += c.base[i] * g.stride(i);
  double acc = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << n); ++corner) {
    double w = 1.0;
    std::size_t off = base;
    for (std::size_t i = 0; i < n; ++i) {
      if (corner & (std::size_t{1} << i)) {
        w *= c.frac[i];
        off += g.stride(i);
      } else {
        w *= 1.0 - c.frac[i];
      }
    }
    if (w != 0.0) acc += w * field.values[off];
  }
  return {acc, c.clamped};
}

GradientEstimate central_gradient(const ValueField& field, std::size_t node) {
  const Grid& g = field.grid;
  std::array<std::size_t, kMaxDim> idx{};
  g.node_index(node, std::span(idx.data(), g.dim()));
  GradientEstimate est;
  est.gradient.resize(g.dim());
  est.flagged = field.mask[node] == NodeKind::Target;
  for (std::size_t i = 0; i < g.dim(); ++i) {
    const std::size_t s = g.stride(i);
    const double h = g.spacing(i);
    if (idx[i] == 0)
      est.gradient[i] = (field.values[node + s] - field.values[node]) / h;
    else if (idx[i] + 1 == g.count(i))
      est.gradient[i] = (field.values[node] - field.values[node - s]) / h;
    else
      est.gradient[i] = (field.values[node + s] - field.values[node - s]) / (2.0 * h);
  }
  return est;
}

ValueField to_direct(const ValueField& field) {
  if (field.scale == ValueScale::Direct) return field;
  ValueField out = field;
  out.scale = ValueScale::Direct;
  for (double& v : out.values) v = kruzkov_to_payoff(v);
  return out;
}

Projection Projection::identity(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return indices(std::move(idx), n);
}

Projection Projection::indices(std::vector<std::size_t> indices, std::size_t full_dim) {
  if (indices.empty()) throw InputError("projection needs at least one coordinate");
  std::vector<std::size_t> sorted = indices;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InputError("projection indices must be distinct");
  if (sorted.back() >= full_dim) throw InputError("projection index exceeds the full state dimension");
  Projection p;
  p.full_dim_ = full_dim;
  for (std::size_t i : indices) {
    Vec row(full_dim, 0.0);
    row[i] = 1.0;
    p.rows_.push_back(std::move(row));
  }
  p.index_map_ = std::move(indices);
  return p;
}

Projection Projection::linear(std::vector<Vec> rows, std::size_t full_dim) {
  if (rows.empty()) throw InputError("projection needs at least one row");
  for (const auto& r : rows)
    if (r.size() != full_dim) throw InputError("projection row length differs from the full dimension");
  Projection p;
  p.full_dim_ = full_dim;
  p.rows_ = std::move(rows);
  return p;
}

Vec Projection::apply(ConstSpan x) const {
  if (x.size() != full_dim_) throw InputError("projection input dimension mismatch");
  Vec y(rows_.size());
  if (is_index_map()) {
    for (std::size_t r = 0; r < rows_.size(); ++r) y[r] = x[index_map_[r]];
    return y;
  }
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < full_dim_; ++i) s += rows_[r][i] * x[i];
    y[r] = s;
  }
  return y;
}

Vec Projection::embed_gradient(ConstSpan g) const {
  if (g.size() != rows_.size()) throw InputError("reduced gradient dimension mismatch");
  Vec out(full_dim_, 0.0);
  if (is_index_map()) {
    for (std::size_t r = 0; r < rows_.size(); ++r) out[index_map_[r]] = g[r];
    return out;
  }
  for (std::size_t r = 0; r < rows_.size(); ++r)
    for (std::size_t i = 0; i < full_dim_; ++i) out[i] += rows_[r][i] * g[r];
  return out;
}

ReducedField::ReducedField(ValueField f, Projection p) : field(std::move(f)), projection(std::move(p)) {
  if (field.grid.dim() != projection.reduced_dim())
    throw InputError("reduced field dimension does not match its projection");
}

GridFunction::GridFunction(ValueField field) : field_(std::move(field)) {}

double GridFunction::value(ConstSpan x) const {
  const double v = interpolate(field_, x).value;
  return field_.scale == ValueScale::Kruzkov ? kruzkov_to_payoff(v) : v;
}

bool GridFunction::excluded(ConstSpan x) const {
  const Grid& g = field_.grid;
  if (x.size() != g.dim() || !g.contains(x)) return true;
  const Cell c = locate(g, x);
  std::size_t base = 0;
  for (std::size_t i = 0; i < g.dim(); ++i) base += c.base[i] * g.stride(i);
  for (std::size_t corner = 0; corner < (std::size_t{1} << g.dim()); ++corner) {
    std::size_t off = base;
    for (std::size_t i = 0; i < g.dim(); ++i)
      if (corner & (std::size_t{1} << i)) off += g.stride(i);
    if (field_.mask[off] == NodeKind::Target) return true;
  }
  return false;
}

AnalyticFunction::AnalyticFunction(std::size_t dim, std::function<double(ConstSpan)> fn, Vec step,
                                   std::function<bool(ConstSpan)> excluded)
    : dim_(dim), fn_(std::move(fn)), step_(std::move(step)), excluded_(std::move(excluded)) {
  if (step_.size() != dim_) throw InputError("analytic function step dimension mismatch");
}

void write_grid_csv(std::ostream& os, const ValueField& field) {
  const Grid& g = field.grid;
  for (std::size_t i = 0; i < g.dim(); ++i) os << 'x' << (i + 1) << ',';
  os << "value,mask\n";
  os << std::setprecision(17);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Vec x = g.node_point(n);
    for (double c : x) os << c << ',';
    os << field.values[n] << ',' << to_string(field.mask[n]) << '\n';
  }
}

void write_grid_csv(const std::string& path, const ValueField& field) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open " + path + " for writing");
  write_grid_csv(os, field);
}

namespace {

double parse_number(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw InputError("malformed number '" + s + "' in grid file");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  return out;
}

NodeKind parse_kind(const std::string& s) {
  if (s == "TARGET") return NodeKind::Target;
  if (s == "INTERIOR") return NodeKind::Interior;
  if (s == "BOUNDARY") return NodeKind::Boundary;
  throw InputError("unknown mask '" + s + "' in grid file");
}

}  // namespace

ValueField read_grid_csv(std::istream& is, ValueScale scale) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("empty grid file");
  const auto header = split(line);
  if (header.size() < 3 || header[header.size() - 2] != "value" || header.back() != "mask")
    throw InputError("grid file header must be x1,...,xn,value,mask");
  const std::size_t n = header.size() - 2;
  std::vector<Vec> coords;
  std::vector<double> values;
  std::vector<NodeKind> mask;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != n + 2) throw InputError("grid file row has the wrong number of columns");
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = parse_number(cells[i]);
    coords.push_back(std::move(x));
    values.push_back(parse_number(cells[n]));
    mask.push_back(parse_kind(cells[n + 1]));
  }
  if (coords.empty()) throw InputError("grid file has no rows");
  std::vector<Interval> bounds(n);
  std::vector<std::size_t> counts(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> axis;
    for (const auto& x : coords) axis.push_back(x[i]);
    std::sort(axis.begin(), axis.end());
    axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
    if (axis.size() < 2) throw InputError("grid file axis has fewer than 2 nodes");
    bounds[i] = {axis.front(), axis.back()};
    counts[i] = axis.size();
  }
  ValueField f;
  f.grid = Grid(bounds, counts);
  if (f.grid.size() != coords.size()) throw InputError("grid file rows do not form a full lattice");
  for (std::size_t r = 0; r < coords.size(); ++r) {
    const Vec x = f.grid.node_point(r);
    for (std::size_t i = 0; i < n; ++i)
      if (std::abs(x[i] - coords[r][i]) > 1e-12 * (1.0 + std::abs(x[i])))
        throw InputError("grid file rows are not in lexicographic node order");
  }
  f.values = std::move(values);
  f.mask = std::move(mask);
  f.scale = scale;
  return f;
}

ValueField read_grid_csv(const std::string& path, ValueScale scale) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path);
  return read_grid_csv(is, scale);
}

}  // namespace dgd
