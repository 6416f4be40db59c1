#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "mcdp/errors.hpp"
#include "mcdp/grid.hpp"

namespace mcdp {

constexpr double kDefaultMinDepth = 0.1;    // meters
constexpr double kDefaultMaxDepth = 200.0;  // meters; 60 is the short-range choice

struct DepthMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double delta_125 = 0.0;
  std::int64_t pixel_count = 0;
};

namespace detail {

// Median with even counts averaging the two middle elements.
inline double median_of(std::vector<double> xs) {
  const std::size_t n = xs.size();
  const std::size_t mid = n / 2;
  std::nth_element(xs.begin(), xs.begin() + mid, xs.end());
  const double hi = xs[mid];
  if (n % 2 == 1) return hi;
  std::nth_element(xs.begin(), xs.begin() + mid - 1, xs.begin() + mid);
  return 0.5 * (xs[mid - 1] + hi);
}

}  // namespace detail

/// Rescales a prediction by median(gt)/median(pred) over jointly-valid pixels.
/// Returns the scaled map and the scale factor applied.
inline std::pair<DepthMap, double> median_scale(const DepthMap& pred, const DepthMap& gt) {
  if (!pred.values.same_shape(gt.values))
    throw ShapeMismatch("median_scale: shapes differ");
  std::vector<double> p, g;
  for (int v = 0; v < pred.height(); ++v)
    for (int u = 0; u < pred.width(); ++u)
      if (pred.is_valid(u, v) && gt.is_valid(u, v)) {
        p.push_back(pred.values.at(u, v));
        g.push_back(gt.values.at(u, v));
      }
  if (p.empty())
    throw EmptyOverlap("median_scale: no jointly-valid pixel");
  const double med_p = detail::median_of(std::move(p));
  if (med_p == 0.0)
    throw ZeroMedian("median_scale: prediction median is zero");
  const double scale = detail::median_of(std::move(g)) / med_p;
  DepthMap out = pred;
  for (int v = 0; v < out.height(); ++v)
    for (int u = 0; u < out.width(); ++u)
      if (out.is_valid(u, v)) out.values.at(u, v) *= scale;
  return {std::move(out), scale};
}

/// Standard depth metrics over jointly-valid pixels with gt inside
/// [min_depth, max_depth].
inline DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt,
                                  double min_depth = kDefaultMinDepth,
                                  double max_depth = kDefaultMaxDepth) {
  if (!pred.values.same_shape(gt.values))
    throw ShapeMismatch("depth_metrics: shapes differ");
  double abs_rel = 0.0, sq_rel = 0.0, sq_err = 0.0;
  std::int64_t count = 0, within = 0;
  for (int v = 0; v < pred.height(); ++v)
    for (int u = 0; u < pred.width(); ++u) {
      if (!pred.is_valid(u, v) || !gt.is_valid(u, v)) continue;
      const double g = gt.values.at(u, v);
      if (g < min_depth || g > max_depth) continue;
      const double p = pred.values.at(u, v);
      const double diff = p - g;
      abs_rel += std::abs(diff) / g;
      sq_rel += diff * diff / g;
      sq_err += diff * diff;
      if (std::max(p / g, g / p) < 1.25) ++within;
      ++count;
    }
  if (count == 0)
    throw EmptyOverlap("depth_metrics: no jointly-valid pixel in depth range");
  DepthMetrics m;
  m.abs_rel = abs_rel / count;
  m.sq_rel = sq_rel / count;
  m.rmse = std::sqrt(sq_err / count);
  m.delta_125 = static_cast<double>(within) / count;
  m.pixel_count = count;
  return m;
}

/// Cross-camera consistency metric: mean |D - D_hat| / gt over pixels valid
/// in all three maps and kept by the mask. Zero ground truth is treated as
/// invalid ground truth.
inline double dep_con(const DepthMap& d, const DepthMap& d_hat, const DepthMap& gt,
                      const OcclusionMask& mask) {
  if (!d.values.same_shape(d_hat.values) || !d.values.same_shape(gt.values) ||
      !d.values.same_shape(mask.keep))
    throw ShapeMismatch("dep_con: shapes differ");
  double sum = 0.0;
  std::int64_t count = 0;
  for (int v = 0; v < d.height(); ++v)
    for (int u = 0; u < d.width(); ++u) {
      if (!d.is_valid(u, v) || !d_hat.is_valid(u, v) || !gt.is_valid(u, v) ||
          !mask.kept(u, v))
        continue;
      const double g = gt.values.at(u, v);
      if (g == 0.0) continue;
      sum += std::abs(d.values.at(u, v) - d_hat.values.at(u, v)) / g;
      ++count;
    }
  if (count == 0)
    throw EmptyOverlap("dep_con: no jointly-valid pixel");
  return sum / count;
}

}  // namespace mcdp
