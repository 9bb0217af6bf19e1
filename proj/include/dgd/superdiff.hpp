#pragma once

#include <string>
#include <vector>

#include "dgd/grid.hpp"

namespace dgd {

/// Candidate elements of the limiting superdifferential at a point.
struct SuperdiffSample {
  Vec point;
  std::vector<Vec> vectors;
  /// Number of accepted sample gradients behind each vector.
  std::vector<std::size_t> support;
  double radius = 0.0;
  std::size_t stencil_points = 0;
  std::size_t requested = 0;
  std::size_t accepted = 0;
  double lipschitz = 0.0;
  std::string diagnostic;

  bool empty() const { return vectors.empty(); }
};

struct SuperdiffOptions {
  /// Fit residual threshold, relative to step * observed Lipschitz constant.
  double smoothness = 0.1;
  /// Clusters closer than merge * (|p| + 1) are merged.
  double merge = 0.15;
};

/// Samples gradients at up to `samples` points within `radius` of x (the
/// centre first, then a Halton sequence), keeps those whose 3^n-stencil linear
/// fit is smooth, clusters them by centroid linkage and returns one vector per
/// cluster. Cluster vectors average the members with the smallest fit
/// residuals, so exact affine pieces are recovered to roundoff.
SuperdiffSample estimate_limiting_superdiff(const ScalarFunction& f, ConstSpan x, double radius,
                                            std::size_t samples, const SuperdiffOptions& options = {});

SuperdiffSample estimate_limiting_superdiff(const ValueField& field, ConstSpan x, double radius,
                                            std::size_t samples, const SuperdiffOptions& options = {});

/// Maps a reduced-coordinate sample into the full state through the projection.
SuperdiffSample embed(const SuperdiffSample& sample, const Projection& projection, ConstSpan full_point);

}  // namespace dgd
