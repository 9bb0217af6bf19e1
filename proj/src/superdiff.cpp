#include "dgd/superdiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace dgd {

namespace {

constexpr std::array<unsigned, 12> kPrimes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

double radical_inverse(std::size_t index, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

double norm(ConstSpan v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

double distance(ConstSpan a, ConstSpan b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

struct Fit {
  Vec gradient;
  double residual = 0.0;
};

struct Cluster {
  Vec centroid;
  std::vector<std::size_t> members;
};

}  // namespace

SuperdiffSample estimate_limiting_superdiff(const ScalarFunction& f, ConstSpan x, double radius,
                                            std::size_t samples, const SuperdiffOptions& options) {
  const std::size_t n = f.dim();
  if (x.size() != n) throw InputError("superdifferential point dimension mismatch");
  if (n > kPrimes.size()) throw InputError("superdifferential estimation supports at most 12 dimensions");
  const Vec h = f.step();
  const double hmax = *std::max_element(h.begin(), h.end());
  if (radius < 2.0 * hmax * (1.0 - 1e-12))
    throw InputError("sampling radius must be at least twice the grid spacing");
  if (samples == 0) throw InputError("superdifferential estimation needs at least one sample");

  SuperdiffSample out;
  out.point.assign(x.begin(), x.end());
  out.radius = radius;
  out.requested = samples;
  std::size_t stencil = 1;
  for (std::size_t i = 0; i < n; ++i) stencil *= 3;
  out.stencil_points = stencil;

  if (f.excluded(x)) {
    out.diagnostic = "point is excluded (target or outside domain)";
    return out;
  }

  // Sample centres: x itself, then Halton points of the cube kept inside the ball.
  std::vector<Vec> centres{Vec(x.begin(), x.end())};
  for (std::size_t k = 1; centres.size() < samples && k < 50 * samples + 100; ++k) {
    Vec y(n);
    double r2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double off = radius * (2.0 * radical_inverse(k, kPrimes[i]) - 1.0);
      y[i] = x[i] + off;
      r2 += off * off;
    }
    if (r2 <= radius * radius) centres.push_back(std::move(y));
  }

  std::vector<Fit> fits;
  std::size_t excluded = 0;
  double lip = 0.0;
  Vec values(stencil), point(n);
  std::vector<std::array<int, 12>> offsets(stencil);
  for (std::size_t k = 0; k < stencil; ++k) {
    std::size_t rem = k;
    for (std::size_t i = 0; i < n; ++i) {
      offsets[k][i] = static_cast<int>(rem % 3) - 1;
      rem /= 3;
    }
  }
  const std::size_t centre_slot = (stencil - 1) / 2;
  for (const auto& y : centres) {
    bool ok = true;
    for (std::size_t k = 0; k < stencil && ok; ++k) {
      for (std::size_t i = 0; i < n; ++i) point[i] = y[i] + offsets[k][i] * h[i];
      if (f.excluded(point)) {
        ok = false;
        break;
      }
      values[k] = f.value(point);
      if (!std::isfinite(values[k])) ok = false;
    }
    if (!ok) {
      ++excluded;
      continue;
    }
    // The 3^n design is orthogonal, so the least-squares gradient decouples per axis.
    Fit fit;
    fit.gradient.assign(n, 0.0);
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(stencil);
    for (std::size_t i = 0; i < n; ++i) {
      double num = 0.0, den = 0.0;
      for (std::size_t k = 0; k < stencil; ++k) {
        const double o = offsets[k][i] * h[i];
        num += values[k] * o;
        den += o * o;
      }
      fit.gradient[i] = num / den;
    }
    double ss = 0.0;
    for (std::size_t k = 0; k < stencil; ++k) {
      double pred = mean;
      double dist2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double o = offsets[k][i] * h[i];
        pred += fit.gradient[i] * o;
        dist2 += o * o;
      }
      ss += (values[k] - pred) * (values[k] - pred);
      if (k != centre_slot) lip = std::max(lip, std::abs(values[k] - values[centre_slot]) / std::sqrt(dist2));
    }
    fit.residual = std::sqrt(ss / static_cast<double>(stencil));
    fits.push_back(std::move(fit));
  }
  out.lipschitz = lip;

  const double threshold = options.smoothness * hmax * lip;
  std::vector<std::size_t> accepted;
  for (std::size_t k = 0; k < fits.size(); ++k)
    if (fits[k].residual <= threshold) accepted.push_back(k);
  out.accepted = accepted.size();
  if (accepted.empty()) {
    out.diagnostic = "no smooth sample points (" + std::to_string(excluded) + " excluded, " +
                     std::to_string(fits.size()) + " rough)";
    return out;
  }

  std::vector<Cluster> clusters;
  for (std::size_t k : accepted) clusters.push_back({fits[k].gradient, {k}});
  while (clusters.size() > 1) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double d = distance(clusters[i].centroid, clusters[j].centroid);
        const double tol =
            options.merge * (std::max(norm(clusters[i].centroid), norm(clusters[j].centroid)) + 1.0);
        if (d <= tol && d / tol < best) {
          best = d / tol;
          bi = i;
          bj = j;
        }
      }
    }
    if (!std::isfinite(best)) break;
    auto& a = clusters[bi];
    auto& b = clusters[bj];
    const double wa = static_cast<double>(a.members.size()), wb = static_cast<double>(b.members.size());
    for (std::size_t i = 0; i < n; ++i) a.centroid[i] = (wa * a.centroid[i] + wb * b.centroid[i]) / (wa + wb);
    a.members.insert(a.members.end(), b.members.begin(), b.members.end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
  }

  // Representative vector: mean over the members with the smallest fit residuals.
  for (auto& c : clusters) {
    double best_res = std::numeric_limits<double>::infinity();
    for (std::size_t m : c.members) best_res = std::min(best_res, fits[m].residual);
    const double cut = 2.0 * best_res + 1e-10 * hmax * lip;
    Vec rep(n, 0.0);
    std::size_t used = 0;
    for (std::size_t m : c.members) {
      if (fits[m].residual > cut) continue;
      for (std::size_t i = 0; i < n; ++i) rep[i] += fits[m].gradient[i];
      ++used;
    }
    for (double& v : rep) v /= static_cast<double>(used);
    c.centroid = std::move(rep);
  }
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    return a.centroid < b.centroid;
  });

  // Stencils straddling a crease fit a blend of the two sides; such clusters are
  // thinly supported and sit on the segment between two well-supported ones.
  for (std::size_t k = clusters.size(); k-- > 2;) {
    const auto& c = clusters[k];
    const double tol = options.merge * (norm(c.centroid) + 1.0);
    bool blend = false;
    for (std::size_t i = 0; i < k && !blend; ++i) {
      for (std::size_t j = i + 1; j < k && !blend; ++j) {
        const auto& a = clusters[i].centroid;
        const auto& b = clusters[j].centroid;
        if (4 * c.members.size() > std::min(clusters[i].members.size(), clusters[j].members.size())) continue;
        double ab2 = 0.0, dot = 0.0;
        for (std::size_t d = 0; d < n; ++d) {
          ab2 += (b[d] - a[d]) * (b[d] - a[d]);
          dot += (c.centroid[d] - a[d]) * (b[d] - a[d]);
        }
        const double t = ab2 > 0 ? std::clamp(dot / ab2, 0.0, 1.0) : 0.0;
        double d2 = 0.0;
        for (std::size_t d = 0; d < n; ++d) {
          const double e = c.centroid[d] - (a[d] + t * (b[d] - a[d]));
          d2 += e * e;
        }
        blend = std::sqrt(d2) <= tol;
      }
    }
    if (blend) clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(k));
  }
  for (auto& c : clusters) {
    out.vectors.push_back(c.centroid);
    out.support.push_back(c.members.size());
  }
  return out;
}

SuperdiffSample estimate_limiting_superdiff(const ValueField& field, ConstSpan x, double radius,
                                            std::size_t samples, const SuperdiffOptions& options) {
  const GridFunction fn(field);
  return estimate_limiting_superdiff(fn, x, radius, samples, options);
}

SuperdiffSample embed(const SuperdiffSample& sample, const Projection& projection, ConstSpan full_point) {
  SuperdiffSample out = sample;
  out.point.assign(full_point.begin(), full_point.end());
  for (auto& v : out.vectors) v = projection.embed_gradient(v);
  return out;
}

}  // namespace dgd
