#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mcdp/basis.hpp"
#include "mcdp/errors.hpp"
#include "mcdp/geometry.hpp"
#include "mcdp/grid.hpp"

namespace mcdp {

// SSIM stabilizers on the [0, 1] intensity range.
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;
constexpr double kSsimAlpha = 0.85;

/// A masked mean together with how many pixels entered it.
struct MaskedMean {
  double value = 0.0;
  std::int64_t count = 0;
};

enum class SplatRule {
  overwrite,  // row-major source order, later writes win
  z_min       // nearest depth wins (comparison option, off the main path)
};

/// Forward-projects a depth map onto another camera's pixel grid. Each valid
/// source pixel warps with its own depth and splats its target-frame depth
/// into the nearest integer destination pixel. No interpolation; iteration is
/// row-major over the source and with SplatRule::overwrite later writes
/// replace earlier ones. Destination pixels nobody lands on stay 0/invalid.
/// Source pixels that warp out of bounds or behind the target are skipped.
inline DepthMap project_depth(const DepthMap& src, const CameraIntrinsics& K_src,
                              const CameraIntrinsics& K_dst,
                              const CameraExtrinsics& src_to_dst,
                              SplatRule rule = SplatRule::overwrite) {
  DepthMap out(K_dst.width, K_dst.height);
  for (int v = 0; v < src.height(); ++v)
    for (int u = 0; u < src.width(); ++u) {
      if (!src.is_valid(u, v)) continue;
      const auto warped = warp_pixel(Pixel{double(u), double(v)}, src.values.at(u, v),
                                     K_src, K_dst, src_to_dst);
      if (!warped) continue;
      const int du = static_cast<int>(std::lround(warped->pixel.u));
      const int dv = static_cast<int>(std::lround(warped->pixel.v));
      if (!out.values.in_bounds(du, dv)) continue;
      if (rule == SplatRule::overwrite || !out.is_valid(du, dv) ||
          warped->depth < out.values.at(du, dv)) {
        out.set(du, dv, warped->depth);
      }
    }
  return out;
}

/// Mean absolute depth difference over pixels valid in both maps and kept by
/// the mask. An empty overlap is not an error: the value is 0 with count 0.
inline MaskedMean depth_consistency_loss(const DepthMap& a, const DepthMap& b,
                                         const OcclusionMask& mask) {
  if (!a.values.same_shape(b.values) || !a.values.same_shape(mask.keep))
    throw ShapeMismatch("depth_consistency_loss: shapes differ");
  double sum = 0.0;
  std::int64_t count = 0;
  for (int v = 0; v < a.height(); ++v)
    for (int u = 0; u < a.width(); ++u) {
      if (!a.is_valid(u, v) || !b.is_valid(u, v) || !mask.kept(u, v)) continue;
      sum += std::abs(a.values.at(u, v) - b.values.at(u, v));
      ++count;
    }
  return {count > 0 ? sum / count : 0.0, count};
}

namespace detail {

// 3x3 box-window statistics restricted to included pixels. Window extents
// clamp to the image, so corners see 4 pixels and edges 6.
struct WindowStats {
  double n = 0.0;
  double sa = 0.0, sb = 0.0;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
};

inline WindowStats window_stats(const Grid<double>& a, const Grid<double>& b,
                                const MaskGrid* include, int cu, int cv) {
  WindowStats s;
  const int u0 = std::max(cu - 1, 0), u1 = std::min(cu + 1, a.width() - 1);
  const int v0 = std::max(cv - 1, 0), v1 = std::min(cv + 1, a.height() - 1);
  for (int v = v0; v <= v1; ++v)
    for (int u = u0; u <= u1; ++u) {
      if (include && include->at(u, v) == 0) continue;
      const double x = a.at(u, v), y = b.at(u, v);
      s.n += 1.0;
      s.sa += x;
      s.sb += y;
      s.saa += x * x;
      s.sbb += y * y;
      s.sab += x * y;
    }
  return s;
}

inline double ssim_from_stats(const WindowStats& s) {
  const double mu_a = s.sa / s.n, mu_b = s.sb / s.n;
  const double var_a = s.saa / s.n - mu_a * mu_a;
  const double var_b = s.sbb / s.n - mu_b * mu_b;
  const double cov = s.sab / s.n - mu_a * mu_b;
  const double num = (2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2);
  const double den = (mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2);
  return num / den;
}

}  // namespace detail

/// SSIM map restricted to an include mask: excluded pixels neither receive a
/// value nor enter any window's statistics, so the result is exactly
/// independent of their content. Excluded positions are left at 0.
inline Grid<double> ssim_masked(const GrayImage& a, const GrayImage& b,
                                const MaskGrid& include) {
  if (!a.values.same_shape(b.values) || !a.values.same_shape(include))
    throw ShapeMismatch("ssim: shapes differ");
  Grid<double> out(a.width(), a.height(), 0.0);
  for (int v = 0; v < a.height(); ++v)
    for (int u = 0; u < a.width(); ++u) {
      if (include.at(u, v) == 0) continue;
      out.at(u, v) = detail::ssim_from_stats(
          detail::window_stats(a.values, b.values, &include, u, v));
    }
  return out;
}

/// Plain SSIM with 3x3 box windows clamped at the image border.
inline Grid<double> ssim(const GrayImage& a, const GrayImage& b) {
  if (!a.values.same_shape(b.values))
    throw ShapeMismatch("ssim: shapes differ");
  Grid<double> out(a.width(), a.height(), 0.0);
  for (int v = 0; v < a.height(); ++v)
    for (int u = 0; u < a.width(); ++u)
      out.at(u, v) = detail::ssim_from_stats(
          detail::window_stats(a.values, b.values, nullptr, u, v));
  return out;
}

/// Per-pixel photometric error alpha/2*(1-SSIM) + (1-alpha)*|a-b| over the
/// include set, as a masked mean. SSIM windows honor the include set.
inline MaskedMean photometric_error_masked(const GrayImage& a, const GrayImage& b,
                                           const MaskGrid& include) {
  const Grid<double> s = ssim_masked(a, b, include);
  double sum = 0.0;
  std::int64_t count = 0;
  for (int v = 0; v < a.height(); ++v)
    for (int u = 0; u < a.width(); ++u) {
      if (include.at(u, v) == 0) continue;
      const double l1 = std::abs(a.at(u, v) - b.at(u, v));
      sum += 0.5 * kSsimAlpha * (1.0 - s.at(u, v)) + (1.0 - kSsimAlpha) * l1;
      ++count;
    }
  return {count > 0 ? sum / count : 0.0, count};
}

inline double photometric_error(const GrayImage& a, const GrayImage& b,
                                const OcclusionMask& mask) {
  if (!a.values.same_shape(b.values) || !a.values.same_shape(mask.keep))
    throw ShapeMismatch("photometric_error: shapes differ");
  return photometric_error_masked(a, b, mask.keep).value;
}

namespace detail {

struct BilinearSample {
  double value = 0.0;
  double du = 0.0;  // d(value)/d(u)
  double dv = 0.0;  // d(value)/d(v)
};

// Sample at continuous (u, v) with u in [0, W-1], v in [0, H-1].
inline BilinearSample bilinear(const Grid<double>& img, double u, double v) {
  const int u0 = std::clamp(static_cast<int>(std::floor(u)), 0, img.width() - 2);
  const int v0 = std::clamp(static_cast<int>(std::floor(v)), 0, img.height() - 2);
  const double fu = u - u0, fv = v - v0;
  const double a = img.at(u0, v0), b = img.at(u0 + 1, v0);
  const double c = img.at(u0, v0 + 1), d = img.at(u0 + 1, v0 + 1);
  BilinearSample out;
  out.value = (1 - fv) * ((1 - fu) * a + fu * b) + fv * ((1 - fu) * c + fu * d);
  out.du = (1 - fv) * (b - a) + fv * (d - c);
  out.dv = (1 - fu) * (c - a) + fu * (d - b);
  return out;
}

}  // namespace detail

/// One photometric source for a target view.
struct SourceView {
  const GrayImage* image = nullptr;
  const OcclusionMask* mask = nullptr;
  CameraIntrinsics intrinsics;
  CameraExtrinsics target_to_source;
};

namespace detail {

// The synthesized image of a source in the target's grid, with per-pixel
// d(intensity)/d(target depth) for the refinement path.
struct SynthesizedView {
  Grid<double> intensity;
  Grid<double> ddepth;
  MaskGrid include;

  SynthesizedView(int w, int h) : intensity(w, h, 0.0), ddepth(w, h, 0.0), include(w, h, 0) {}
};

inline SynthesizedView synthesize(const GrayImage& target_image,
                                  const OcclusionMask& target_mask,
                                  const DepthMap& target_depth,
                                  const CameraIntrinsics& K_target,
                                  const SourceView& src) {
  const int w = target_image.width(), h = target_image.height();
  SynthesizedView out(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!target_depth.is_valid(u, v) || !target_mask.kept(u, v)) continue;
      const double d = target_depth.values.at(u, v);
      // P(d) = d * r + t is linear in depth, with r the unprojected unit-depth ray.
      const Point3 ray((u - K_target.cx) / K_target.fx, (v - K_target.cy) / K_target.fy, 1.0);
      const Point3 a = src.target_to_source.rotation * ray;
      const Point3 P = d * a + src.target_to_source.translation;
      if (!(P.z() > 0.0)) continue;
      const Pixel p{src.intrinsics.fx * P.x() / P.z() + src.intrinsics.cx,
                    src.intrinsics.fy * P.y() / P.z() + src.intrinsics.cy};
      if (!src.intrinsics.contains(p)) continue;
      const int nu = static_cast<int>(std::lround(p.u));
      const int nv = static_cast<int>(std::lround(p.v));
      if (!src.mask->kept(std::clamp(nu, 0, src.intrinsics.width - 1),
                          std::clamp(nv, 0, src.intrinsics.height - 1)))
        continue;
      const auto sample = bilinear(src.image->values, p.u, p.v);
      const double inv_z = 1.0 / P.z();
      const double du_dd = src.intrinsics.fx * (a.x() * P.z() - P.x() * a.z()) * inv_z * inv_z;
      const double dv_dd = src.intrinsics.fy * (a.y() * P.z() - P.y() * a.z()) * inv_z * inv_z;
      out.intensity.at(u, v) = sample.value;
      out.ddepth.at(u, v) = sample.du * du_dd + sample.dv * dv_dd;
      out.include.at(u, v) = 1;
    }
  return out;
}

}  // namespace detail

/// Spatial photometric loss: synthesize the target view from each source by
/// warping with the target depth and bilinearly sampling the source image,
/// score each synthesis with the photometric error, and average the per-pixel
/// minimum over sources (only pixels some source actually covers count).
inline MaskedMean spatial_photometric_loss(const GrayImage& target_image,
                                           const OcclusionMask& target_mask,
                                           const DepthMap& target_depth,
                                           const CameraIntrinsics& K_target,
                                           std::span<const SourceView> sources) {
  const int w = target_image.width(), h = target_image.height();
  if (!target_depth.values.same_shape(target_mask.keep) ||
      !target_depth.values.same_shape(target_image.values))
    throw ShapeMismatch("spatial_photometric_loss: target shapes differ");
  std::vector<Grid<double>> pe_maps;
  std::vector<MaskGrid> includes;
  pe_maps.reserve(sources.size());
  for (const auto& src : sources) {
    const auto synth = detail::synthesize(target_image, target_mask, target_depth, K_target, src);
    Grid<double> s(w, h, 0.0);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        if (synth.include.at(u, v) == 0) continue;
        s.at(u, v) = detail::ssim_from_stats(detail::window_stats(
            target_image.values, synth.intensity, &synth.include, u, v));
      }
    Grid<double> pe(w, h, 0.0);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        if (synth.include.at(u, v) == 0) continue;
        const double l1 = std::abs(target_image.at(u, v) - synth.intensity.at(u, v));
        pe.at(u, v) = 0.5 * kSsimAlpha * (1.0 - s.at(u, v)) + (1.0 - kSsimAlpha) * l1;
      }
    pe_maps.push_back(std::move(pe));
    includes.push_back(synth.include);
  }
  double sum = 0.0;
  std::int64_t count = 0;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      double best = 0.0;
      bool covered = false;
      for (std::size_t k = 0; k < pe_maps.size(); ++k) {
        if (includes[k].at(u, v) == 0) continue;
        const double e = pe_maps[k].at(u, v);
        if (!covered || e < best) best = e;
        covered = true;
      }
      if (covered) {
        sum += best;
        ++count;
      }
    }
  return {count > 0 ? sum / count : 0.0, count};
}

/// Edge-aware smoothness on mean-normalized inverse depth: forward
/// differences weighted by exp(-|image gradient|), last row/column excluded
/// per axis, restricted to pairs of valid pixels.
inline double smoothness_loss(const DepthMap& depth, const GrayImage& image) {
  if (!depth.values.same_shape(image.values))
    throw ShapeMismatch("smoothness_loss: shapes differ");
  const int w = depth.width(), h = depth.height();
  double inv_sum = 0.0;
  std::int64_t n_valid = 0;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (depth.is_valid(u, v)) {
        inv_sum += 1.0 / depth.values.at(u, v);
        ++n_valid;
      }
  if (n_valid == 0) return 0.0;
  const double mean_inv = inv_sum / n_valid;
  auto dstar = [&](int u, int v) { return (1.0 / depth.values.at(u, v)) / mean_inv; };

  double sum_x = 0.0, sum_y = 0.0;
  std::int64_t count_x = 0, count_y = 0;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u + 1 < w; ++u) {
      if (!depth.is_valid(u, v) || !depth.is_valid(u + 1, v)) continue;
      const double gi = std::abs(image.at(u + 1, v) - image.at(u, v));
      sum_x += std::abs(dstar(u + 1, v) - dstar(u, v)) * std::exp(-gi);
      ++count_x;
    }
  for (int v = 0; v + 1 < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!depth.is_valid(u, v) || !depth.is_valid(u, v + 1)) continue;
      const double gi = std::abs(image.at(u, v + 1) - image.at(u, v));
      sum_y += std::abs(dstar(u, v + 1) - dstar(u, v)) * std::exp(-gi);
      ++count_y;
    }
  return (count_x > 0 ? sum_x / count_x : 0.0) + (count_y > 0 ? sum_y / count_y : 0.0);
}

constexpr double kDefaultConsistencyWeight = 0.001;  // lambda
constexpr double kDefaultSmoothnessWeight = 0.001;   // mu

/// Loss parts for one stage of the pipeline (initial combination or one
/// refinement round).
struct StageLosses {
  double photometric = 0.0;
  double consistency = 0.0;
  double smoothness = 0.0;
  std::int64_t valid_pixel_count = 0;
};

struct LossBreakdown {
  double photometric = 0.0;
  double consistency = 0.0;
  double smoothness = 0.0;
  double total = 0.0;
  std::int64_t valid_pixel_count = 0;
};

/// Combines per-stage losses: every stage contributes equally, and
/// total = photometric + lambda * consistency + mu * smoothness over the sums.
inline LossBreakdown full_loss(std::span<const StageLosses> stages,
                               double lambda = kDefaultConsistencyWeight,
                               double mu = kDefaultSmoothnessWeight) {
  LossBreakdown out;
  for (const auto& s : stages) {
    out.photometric += s.photometric;
    out.consistency += s.consistency;
    out.smoothness += s.smoothness;
    out.valid_pixel_count += s.valid_pixel_count;
  }
  out.total = out.photometric + lambda * out.consistency + mu * out.smoothness;
  return out;
}

}  // namespace mcdp
