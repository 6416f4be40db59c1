#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "mcdp/basis.hpp"
#include "mcdp/consistency.hpp"
#include "mcdp/errors.hpp"
#include "mcdp/metrics.hpp"
#include "mcdp/scene.hpp"

namespace mcdp {

struct RefineConfig {
  int rounds = 2;       // m: refinement rounds after the initial combination
  int inner_steps = 50; // gradient steps per camera per round
  double step_size = 0.05;
  double lambda = kDefaultConsistencyWeight;
  double mu = kDefaultSmoothnessWeight;
  double depth_floor = kDefaultDepthFloor;
  double convergence_tol = 1e-6;  // relative objective change; 0 disables
  SplatRule splat = SplatRule::overwrite;

  void check() const {
    if (rounds < 0) throw InvalidConfig("refine: rounds must be >= 0");
    if (inner_steps < 1) throw InvalidConfig("refine: inner_steps must be >= 1");
    if (!(step_size > 0.0)) throw InvalidConfig("refine: step_size must be positive");
    if (!(depth_floor > 0.0)) throw InvalidConfig("refine: depth_floor must be positive");
    if (convergence_tol < 0.0) throw InvalidConfig("refine: convergence_tol must be >= 0");
    if (!std::isfinite(lambda) || !std::isfinite(mu))
      throw InvalidConfig("refine: loss weights must be finite");
  }
};

/// State snapshot after each round (the initial combination included).
struct RoundRecord {
  LossBreakdown objective;
  std::vector<double> pair_dep_con;  // per adjacency pair; NaN without ground truth
  std::vector<WeightVector> weights;
};

struct RefineTrace {
  std::vector<RoundRecord> rounds;
};

struct RefineResult {
  std::vector<DepthMap> depths;
  RefineTrace trace;
  bool aborted = false;  // a round hit a non-finite objective and was discarded
};

namespace detail {

// Combined depth with the camera's own occlusion mask applied, for use as a
// projection source: occluded pixels must not splat into neighbours.
inline DepthMap masked_source_depth(const DepthMap& depth, const OcclusionMask& mask) {
  DepthMap out = depth;
  for (int v = 0; v < out.height(); ++v)
    for (int u = 0; u < out.width(); ++u)
      if (!mask.kept(u, v)) out.invalidate(u, v);
  return out;
}

inline std::vector<DepthMap> combine_all(const RigScene& scene,
                                         const std::vector<WeightVector>& weights,
                                         double floor) {
  std::vector<DepthMap> depths;
  depths.reserve(scene.cameras.size());
  for (std::size_t i = 0; i < scene.cameras.size(); ++i)
    depths.push_back(combine(scene.cameras[i].bases, weights[i], floor));
  return depths;
}

// Cross-camera depth projections for every adjacency pair, computed from the
// given depths. These are what a round freezes.
inline std::vector<DepthMap> project_all(const RigScene& scene,
                                         const std::vector<DepthMap>& depths,
                                         SplatRule rule) {
  std::vector<DepthMap> projected;
  projected.reserve(scene.adjacency.size());
  for (const auto& pair : scene.adjacency) {
    const auto& src_cam = scene.cameras[pair.source];
    const auto& dst_cam = scene.cameras[pair.target];
    projected.push_back(project_depth(masked_source_depth(depths[pair.source], src_cam.mask),
                                      src_cam.intrinsics, dst_cam.intrinsics,
                                      scene.extrinsics(pair.source, pair.target), rule));
  }
  return projected;
}

inline std::vector<SourceView> photometric_sources(const RigScene& scene, int target) {
  std::vector<SourceView> sources;
  for (const auto& pair : scene.adjacency) {
    if (pair.target != target) continue;
    const auto& src_cam = scene.cameras[pair.source];
    sources.push_back(SourceView{&src_cam.image, &src_cam.mask, src_cam.intrinsics,
                                 scene.extrinsics(target, pair.source)});
  }
  return sources;
}

}  // namespace detail

/// Single-stage objective: combine every camera's depth, project depths
/// across every adjacency pair, and sum consistency + photometric +
/// smoothness into one weighted total.
inline LossBreakdown evaluate_objective(const RigScene& scene,
                                        const std::vector<WeightVector>& weights,
                                        const RefineConfig& cfg) {
  const auto depths = detail::combine_all(scene, weights, cfg.depth_floor);
  const auto projected = detail::project_all(scene, depths, cfg.splat);
  StageLosses stage;
  for (std::size_t k = 0; k < scene.adjacency.size(); ++k) {
    const auto& pair = scene.adjacency[k];
    const auto con = depth_consistency_loss(depths[pair.target], projected[k],
                                            scene.cameras[pair.target].mask);
    stage.consistency += con.value;
    stage.valid_pixel_count += con.count;
  }
  for (int i = 0; i < scene.camera_count(); ++i) {
    const auto& cam = scene.cameras[i];
    const auto sources = detail::photometric_sources(scene, i);
    const auto pe = spatial_photometric_loss(cam.image, cam.mask, depths[i],
                                             cam.intrinsics, sources);
    stage.photometric += pe.value;
    stage.valid_pixel_count += pe.count;
    stage.smoothness += smoothness_loss(depths[i], cam.image);
  }
  const StageLosses stages[] = {stage};
  return full_loss(stages, cfg.lambda, cfg.mu);
}

namespace detail {

// ---- frozen-projection per-camera objective and its analytic gradient ----
//
// Within a round the cross-camera projections D_hat are held fixed at the
// round's entry depths, which makes the objective separable per camera: only
// the terms where camera i is the photometric/consistency TARGET depend on
// its weights (as a projection source it is frozen, and as a photometric
// source only its image is read).

struct CameraTerms {
  const RigScene* scene = nullptr;
  int camera = 0;
  std::vector<const DepthMap*> frozen;  // projections into this camera
  std::vector<SourceView> sources;
  const RefineConfig* cfg = nullptr;
};

inline CameraTerms camera_terms(const RigScene& scene, int camera,
                                const std::vector<DepthMap>& projected,
                                const RefineConfig& cfg) {
  CameraTerms t;
  t.scene = &scene;
  t.camera = camera;
  t.cfg = &cfg;
  for (std::size_t k = 0; k < scene.adjacency.size(); ++k)
    if (scene.adjacency[k].target == camera) t.frozen.push_back(&projected[k]);
  t.sources = photometric_sources(scene, camera);
  return t;
}

inline double frozen_objective(const CameraTerms& t, const WeightVector& w) {
  const auto& cam = t.scene->cameras[t.camera];
  const DepthMap depth = combine(cam.bases, w, t.cfg->depth_floor);
  double obj = spatial_photometric_loss(cam.image, cam.mask, depth, cam.intrinsics,
                                        t.sources).value;
  for (const DepthMap* d_hat : t.frozen)
    obj += t.cfg->lambda * depth_consistency_loss(depth, *d_hat, cam.mask).value;
  obj += t.cfg->mu * smoothness_loss(depth, cam.image);
  return obj;
}

inline double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// d(photometric)/d(depth). Reverse-mode through the per-pixel source minimum,
// the mask-aware SSIM windows, the L1 term, and the bilinear sampling whose
// coordinates depend on depth. Pixel coverage and the per-pixel argmin are
// treated as locally constant.
inline double photometric_with_grad(const GrayImage& target_image,
                                    const OcclusionMask& target_mask,
                                    const DepthMap& target_depth,
                                    const CameraIntrinsics& K_target,
                                    const std::vector<SourceView>& sources,
                                    Grid<double>& grad_depth) {
  const int w = target_image.width(), h = target_image.height();
  std::vector<SynthesizedView> synths;
  synths.reserve(sources.size());
  for (const auto& src : sources)
    synths.push_back(synthesize(target_image, target_mask, target_depth, K_target, src));

  std::vector<Grid<double>> pe_maps(sources.size(), Grid<double>());
  for (std::size_t k = 0; k < sources.size(); ++k) {
    Grid<double> pe(w, h, 0.0);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        if (synths[k].include.at(u, v) == 0) continue;
        const double s = ssim_from_stats(window_stats(
            target_image.values, synths[k].intensity, &synths[k].include, u, v));
        const double l1 = std::abs(target_image.at(u, v) - synths[k].intensity.at(u, v));
        pe.at(u, v) = 0.5 * kSsimAlpha * (1.0 - s) + (1.0 - kSsimAlpha) * l1;
      }
    pe_maps[k] = std::move(pe);
  }

  Grid<int> selected(w, h, -1);
  double sum = 0.0;
  std::int64_t count = 0;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      double best = 0.0;
      int best_k = -1;
      for (std::size_t k = 0; k < sources.size(); ++k) {
        if (synths[k].include.at(u, v) == 0) continue;
        const double e = pe_maps[k].at(u, v);
        if (best_k < 0 || e < best) {
          best = e;
          best_k = static_cast<int>(k);
        }
      }
      if (best_k >= 0) {
        selected.at(u, v) = best_k;
        sum += best;
        ++count;
      }
    }
  if (count == 0) return 0.0;
  const double inv_count = 1.0 / static_cast<double>(count);

  // d(loss)/d(synth intensity), per source, then chain through d(synth)/d(depth).
  std::vector<Grid<double>> grad_synth(sources.size());
  for (auto& g : grad_synth) g = Grid<double>(w, h, 0.0);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const int k = selected.at(u, v);
      if (k < 0) continue;
      const auto& synth = synths[k];
      // L1 part touches only the center pixel.
      grad_synth[k].at(u, v) += inv_count * (1.0 - kSsimAlpha) *
                                sign_of(synth.intensity.at(u, v) - target_image.at(u, v));
      // SSIM part spreads over the window.
      const WindowStats st =
          window_stats(target_image.values, synth.intensity, &synth.include, u, v);
      const double mu_a = st.sa / st.n, mu_b = st.sb / st.n;
      const double var_a = st.saa / st.n - mu_a * mu_a;
      const double var_b = st.sbb / st.n - mu_b * mu_b;
      const double cov = st.sab / st.n - mu_a * mu_b;
      const double a1 = 2.0 * mu_a * mu_b + kSsimC1;
      const double a2 = 2.0 * cov + kSsimC2;
      const double b1 = mu_a * mu_a + mu_b * mu_b + kSsimC1;
      const double b2 = var_a + var_b + kSsimC2;
      const double s_val = (a1 * a2) / (b1 * b2);
      const double ds_dmu_b = 2.0 * mu_a * a2 / (b1 * b2) - s_val * 2.0 * mu_b / b1;
      const double ds_dvar_b = -s_val / b2;
      const double ds_dcov = 2.0 * a1 / (b1 * b2);
      const double scale = -inv_count * 0.5 * kSsimAlpha;  // d(pe)/d(ssim) = -alpha/2
      const int u0 = std::max(u - 1, 0), u1 = std::min(u + 1, w - 1);
      const int v0 = std::max(v - 1, 0), v1 = std::min(v + 1, h - 1);
      for (int qv = v0; qv <= v1; ++qv)
        for (int qu = u0; qu <= u1; ++qu) {
          if (synth.include.at(qu, qv) == 0) continue;
          const double tq = synth.intensity.at(qu, qv);
          const double aq = target_image.at(qu, qv);
          const double ds_dt = ds_dmu_b / st.n + ds_dvar_b * 2.0 * (tq - mu_b) / st.n +
                               ds_dcov * (aq - mu_a) / st.n;
          grad_synth[k].at(qu, qv) += scale * ds_dt;
        }
    }
  for (std::size_t k = 0; k < sources.size(); ++k)
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u)
        if (synths[k].include.at(u, v) != 0)
          grad_depth.at(u, v) += grad_synth[k].at(u, v) * synths[k].ddepth.at(u, v);
  return sum * inv_count;
}

// d(smoothness)/d(depth). The mean-normalized inverse depth couples every
// valid pixel through the normalizer, handled via d(loss)/d(mean).
inline double smoothness_with_grad(const DepthMap& depth, const GrayImage& image,
                                   Grid<double>& grad_depth) {
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
  const double m = inv_sum / n_valid;
  auto inv_at = [&](int u, int v) { return 1.0 / depth.values.at(u, v); };

  std::int64_t count_x = 0, count_y = 0;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u + 1 < w; ++u)
      if (depth.is_valid(u, v) && depth.is_valid(u + 1, v)) ++count_x;
  for (int v = 0; v + 1 < h; ++v)
    for (int u = 0; u < w; ++u)
      if (depth.is_valid(u, v) && depth.is_valid(u, v + 1)) ++count_y;

  Grid<double> grad_inv(w, h, 0.0);
  double sum_x = 0.0, sum_y = 0.0;
  if (count_x > 0) {
    const double cx = 1.0 / (m * count_x);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u + 1 < w; ++u) {
        if (!depth.is_valid(u, v) || !depth.is_valid(u + 1, v)) continue;
        const double diff = inv_at(u + 1, v) - inv_at(u, v);
        const double wgt = std::exp(-std::abs(image.at(u + 1, v) - image.at(u, v)));
        sum_x += std::abs(diff) * wgt;
        const double g = sign_of(diff) * wgt * cx;
        grad_inv.at(u + 1, v) += g;
        grad_inv.at(u, v) -= g;
      }
  }
  if (count_y > 0) {
    const double cy = 1.0 / (m * count_y);
    for (int v = 0; v + 1 < h; ++v)
      for (int u = 0; u < w; ++u) {
        if (!depth.is_valid(u, v) || !depth.is_valid(u, v + 1)) continue;
        const double diff = inv_at(u, v + 1) - inv_at(u, v);
        const double wgt = std::exp(-std::abs(image.at(u, v + 1) - image.at(u, v)));
        sum_y += std::abs(diff) * wgt;
        const double g = sign_of(diff) * wgt * cy;
        grad_inv.at(u, v + 1) += g;
        grad_inv.at(u, v) -= g;
      }
  }
  const double loss = (count_x > 0 ? sum_x / (m * count_x) : 0.0) +
                      (count_y > 0 ? sum_y / (m * count_y) : 0.0);
  const double dloss_dm = -loss / m;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!depth.is_valid(u, v)) continue;
      const double total_dinv = grad_inv.at(u, v) + dloss_dm / n_valid;
      const double d = depth.values.at(u, v);
      grad_depth.at(u, v) += total_dinv * (-1.0 / (d * d));
    }
  return loss;
}

inline WeightVector frozen_gradient(const CameraTerms& t, const WeightVector& w) {
  const auto& cam = t.scene->cameras[t.camera];
  const RefineConfig& cfg = *t.cfg;
  const DepthMap depth = combine(cam.bases, w, cfg.depth_floor);
  Grid<double> grad_depth(depth.width(), depth.height(), 0.0);

  photometric_with_grad(cam.image, cam.mask, depth, cam.intrinsics, t.sources, grad_depth);

  for (const DepthMap* d_hat : t.frozen) {
    std::int64_t count = 0;
    for (int v = 0; v < depth.height(); ++v)
      for (int u = 0; u < depth.width(); ++u)
        if (depth.is_valid(u, v) && d_hat->is_valid(u, v) && cam.mask.kept(u, v)) ++count;
    if (count == 0) continue;
    const double scale = cfg.lambda / static_cast<double>(count);
    for (int v = 0; v < depth.height(); ++v)
      for (int u = 0; u < depth.width(); ++u) {
        if (!depth.is_valid(u, v) || !d_hat->is_valid(u, v) || !cam.mask.kept(u, v)) continue;
        grad_depth.at(u, v) +=
            scale * sign_of(depth.values.at(u, v) - d_hat->values.at(u, v));
      }
  }

  if (cfg.mu != 0.0) {
    Grid<double> grad_smooth(depth.width(), depth.height(), 0.0);
    smoothness_with_grad(depth, cam.image, grad_smooth);
    for (int v = 0; v < depth.height(); ++v)
      for (int u = 0; u < depth.width(); ++u)
        grad_depth.at(u, v) += cfg.mu * grad_smooth.at(u, v);
  }

  return combine_gradient(cam.bases, grad_depth, w, cfg.depth_floor);
}

inline bool all_finite(const WeightVector& w) {
  for (double x : w)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

/// One refinement round: cross-camera projections are frozen at the entry
/// depths, then each camera's weights take up to inner_steps of gradient
/// descent with a backtracking line search (a step that would increase the
/// frozen objective halves the step size and retries, up to 20 halvings).
/// A non-finite objective aborts the round; the entry weights come back
/// unchanged and the second member of the result is false.
inline std::pair<std::vector<WeightVector>, bool> refine_round(
    const RigScene& scene, const std::vector<WeightVector>& entry,
    const RefineConfig& cfg) {
  cfg.check();
  const auto entry_depths = detail::combine_all(scene, entry, cfg.depth_floor);
  const auto projected = detail::project_all(scene, entry_depths, cfg.splat);

  std::vector<WeightVector> result = entry;
  for (int i = 0; i < scene.camera_count(); ++i) {
    const auto terms = detail::camera_terms(scene, i, projected, cfg);
    WeightVector w = entry[i];
    double f = detail::frozen_objective(terms, w);
    if (!std::isfinite(f)) return {entry, false};
    double step = cfg.step_size;
    int halvings = 0;
    for (int it = 0; it < cfg.inner_steps && halvings <= 20; ++it) {
      const WeightVector g = detail::frozen_gradient(terms, w);
      if (!detail::all_finite(g)) return {entry, false};
      while (true) {
        WeightVector cand = w;
        for (std::size_t j = 0; j < w.size(); ++j) cand[j] -= step * g[j];
        const double fc = detail::frozen_objective(terms, cand);
        if (std::isfinite(fc) && fc <= f) {
          w = std::move(cand);
          f = fc;
          break;
        }
        ++halvings;
        if (halvings > 20) break;
        step *= 0.5;
      }
    }
    result[i] = std::move(w);
  }
  return {std::move(result), true};
}

namespace detail {

inline RoundRecord record_state(const RigScene& scene,
                                const std::vector<WeightVector>& weights,
                                const RefineConfig& cfg) {
  RoundRecord rec;
  rec.objective = evaluate_objective(scene, weights, cfg);
  rec.weights = weights;
  const auto depths = combine_all(scene, weights, cfg.depth_floor);
  const auto projected = project_all(scene, depths, cfg.splat);
  rec.pair_dep_con.reserve(scene.adjacency.size());
  for (std::size_t k = 0; k < scene.adjacency.size(); ++k) {
    const auto& pair = scene.adjacency[k];
    const auto& cam = scene.cameras[pair.target];
    double value = std::numeric_limits<double>::quiet_NaN();
    if (cam.gt_depth) {
      try {
        value = dep_con(depths[pair.target], projected[k], *cam.gt_depth, cam.mask);
      } catch (const EmptyOverlap&) {
        // leave NaN: the pair has no measurable overlap at this state
      }
    }
    rec.pair_dep_con.push_back(value);
  }
  return rec;
}

}  // namespace detail

/// The full iterative refinement: uniform initial weights, then m rounds of
/// frozen-projection descent, re-deriving the cross-camera projections from
/// the latest depths before each round. Stops early when the relative
/// objective change drops below convergence_tol.
inline RefineResult refine(const RigScene& scene, const RefineConfig& cfg) {
  cfg.check();
  scene.check();
  std::vector<WeightVector> weights;
  weights.reserve(scene.cameras.size());
  for (const auto& cam : scene.cameras) weights.push_back(init_weights(cam.bases.count()));

  RefineResult result;
  result.trace.rounds.push_back(detail::record_state(scene, weights, cfg));
  for (int round = 0; round < cfg.rounds; ++round) {
    auto [updated, ok] = refine_round(scene, weights, cfg);
    if (!ok) {
      result.aborted = true;
      break;
    }
    weights = std::move(updated);
    result.trace.rounds.push_back(detail::record_state(scene, weights, cfg));
    const double prev = result.trace.rounds[result.trace.rounds.size() - 2].objective.total;
    const double cur = result.trace.rounds.back().objective.total;
    if (std::abs(cur - prev) < cfg.convergence_tol * std::max(std::abs(prev), 1e-300)) break;
  }
  result.depths = detail::combine_all(scene, weights, cfg.depth_floor);
  return result;
}

}  // namespace mcdp
