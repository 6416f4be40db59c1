#pragma once

#include <cmath>
#include <vector>

#include "mcdp/errors.hpp"
#include "mcdp/grid.hpp"

namespace mcdp {

/// n dimensionless coefficients combining a depth basis set.
using WeightVector = std::vector<double>;

/// n depth-shaped grids whose weighted sum forms a predicted depth map.
struct DepthBasisSet {
  std::vector<Grid<double>> bases;

  DepthBasisSet() = default;
  explicit DepthBasisSet(std::vector<Grid<double>> b) : bases(std::move(b)) { check(); }

  int count() const { return static_cast<int>(bases.size()); }
  int width() const { return bases.empty() ? 0 : bases.front().width(); }
  int height() const { return bases.empty() ? 0 : bases.front().height(); }

  void check() const {
    if (bases.empty())
      throw ZeroBases("basis set must contain at least one basis");
    for (const auto& b : bases) {
      if (!b.same_shape(bases.front()))
        throw ShapeMismatch("basis grids must share one shape");
      for (double x : b.data())
        if (!std::isfinite(x))
          throw ValidationError("basis values must be finite");
    }
  }
};

/// Uniform initial weights 1/n.
inline WeightVector init_weights(int n) {
  if (n < 1)
    throw ZeroBases("init_weights: basis count must be at least 1");
  return WeightVector(static_cast<std::size_t>(n), 1.0 / n);
}

constexpr double kDefaultDepthFloor = 0.1;  // meters

/// Weighted combination of a basis set into a depth map. The combined value
/// is clamped below at `floor` so free weights cannot produce non-positive
/// depth; all pixels come out valid (occlusion masks apply downstream).
inline DepthMap combine(const DepthBasisSet& B, const WeightVector& W,
                        double floor = kDefaultDepthFloor) {
  if (static_cast<int>(W.size()) != B.count())
    throw ShapeMismatch("combine: weight length does not match basis count");
  if (!(floor > 0.0))
    throw InvalidConfig("combine: depth floor must be positive");
  const int w = B.width(), h = B.height();
  DepthMap out(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      double sum = 0.0;
      for (int j = 0; j < B.count(); ++j) sum += W[j] * B.bases[j].at(u, v);
      out.set(u, v, sum > floor ? sum : floor);
    }
  return out;
}

/// Pulls an upstream d(loss)/d(depth) grid back to weight space:
/// g_j = sum_{u,v} upstream(u,v) * B_j(u,v) over pixels where the combination
/// sits above the floor. Floor-clipped pixels contribute zero gradient.
inline WeightVector combine_gradient(const DepthBasisSet& B, const Grid<double>& upstream,
                                     const WeightVector& W,
                                     double floor = kDefaultDepthFloor) {
  if (static_cast<int>(W.size()) != B.count())
    throw ShapeMismatch("combine_gradient: weight length does not match basis count");
  if (!upstream.same_shape(B.width(), B.height()))
    throw ShapeMismatch("combine_gradient: upstream shape does not match bases");
  WeightVector g(W.size(), 0.0);
  for (int v = 0; v < B.height(); ++v)
    for (int u = 0; u < B.width(); ++u) {
      double sum = 0.0;
      for (int j = 0; j < B.count(); ++j) sum += W[j] * B.bases[j].at(u, v);
      if (!(sum > floor)) continue;
      const double up = upstream.at(u, v);
      if (up == 0.0) continue;
      for (int j = 0; j < B.count(); ++j) g[j] += up * B.bases[j].at(u, v);
    }
  return g;
}

}  // namespace mcdp
