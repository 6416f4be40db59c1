#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcdp/errors.hpp"
#include "mcdp/io.hpp"
#include "mcdp/metrics.hpp"
#include "mcdp/refine.hpp"
#include "mcdp/scene.hpp"
#include "mcdp/synth.hpp"

namespace mcdp {

namespace cli_detail {

inline std::string fmt(const char* format, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, x);
  return buf;
}

inline void run_synth(const std::string& spec_path, const std::string& out_dir,
                      std::optional<std::uint64_t> seed) {
  SceneSpec spec = load_scene_spec(spec_path);
  if (seed) spec.seed = *seed;
  const RigScene scene = make_rig_scene(spec);
  save_rig(std::filesystem::path(out_dir) / "rig.cfg", scene);
}

inline void run_warp(const std::string& rig_path, const std::string& from,
                     const std::string& to, const std::string& out_path,
                     const std::string& pred_dir, SplatRule rule) {
  const RigScene scene = load_rig(rig_path);
  const int src = scene.index_of(from);
  const int dst = scene.index_of(to);
  DepthMap source_depth;
  if (!pred_dir.empty()) {
    source_depth = load_depth_grid(std::filesystem::path(pred_dir) / (from + ".mcdp"));
  } else if (scene.cameras[src].gt_depth) {
    source_depth = *scene.cameras[src].gt_depth;
  } else {
    source_depth = combine(scene.cameras[src].bases,
                           init_weights(scene.cameras[src].bases.count()));
  }
  const DepthMap projected = project_depth(
      detail::masked_source_depth(source_depth, scene.cameras[src].mask),
      scene.cameras[src].intrinsics, scene.cameras[dst].intrinsics,
      scene.extrinsics(src, dst), rule);
  save_depth_grid(out_path, projected);
}

inline void run_refine(const std::string& rig_path, const RefineConfig& cfg,
                       const std::string& out_dir, const std::string& trace_path) {
  const RigScene scene = load_rig(rig_path);
  const RefineResult result = refine(scene, cfg);
  std::filesystem::create_directories(out_dir);
  for (int i = 0; i < scene.camera_count(); ++i)
    save_depth_grid(std::filesystem::path(out_dir) / (scene.cameras[i].name + ".mcdp"),
                    result.depths[i]);
  if (!trace_path.empty()) {
    std::string text = "# round objective";
    for (const auto& pair : scene.adjacency)
      text += " depcon:" + scene.cameras[pair.target].name + "<-" +
              scene.cameras[pair.source].name;
    text += "\n";
    for (std::size_t r = 0; r < result.trace.rounds.size(); ++r) {
      const auto& rec = result.trace.rounds[r];
      text += std::to_string(r) + " " + fmt("%.12e", rec.objective.total);
      for (double dc : rec.pair_dep_con) text += " " + fmt("%.12e", dc);
      text += "\n";
    }
    io_detail::write_all(trace_path, text);
  }
  if (result.aborted)
    throw NonFiniteObjective("refinement aborted on a non-finite objective");
}

struct EvaluateOptions {
  std::string rig_path, pred_dir, gt_dir;
  std::string out_path = "metrics.txt";
  bool shared_scale = false;
  bool no_scale = false;
  double min_depth = kDefaultMinDepth;
  double max_depth = kDefaultMaxDepth;
};

inline void run_evaluate(const EvaluateOptions& opt, std::ostream& os) {
  const RigScene scene = load_rig(opt.rig_path);
  const int n = scene.camera_count();
  std::vector<DepthMap> pred(n), gt(n);
  for (int i = 0; i < n; ++i) {
    const auto& name = scene.cameras[i].name;
    pred[i] = load_depth_grid(std::filesystem::path(opt.pred_dir) / (name + ".mcdp"));
    gt[i] = load_depth_grid(std::filesystem::path(opt.gt_dir) / (name + ".mcdp"));
    if (!pred[i].values.same_shape(gt[i].values) ||
        !pred[i].values.same_shape(scene.cameras[i].mask.keep))
      throw ValidationError("evaluate: shape mismatch for camera '" + name + "'");
    // Self-occlusion masks apply to every metric: drop masked-out pixels.
    pred[i] = detail::masked_source_depth(pred[i], scene.cameras[i].mask);
  }

  std::vector<double> scales(n, 1.0);
  if (!opt.no_scale) {
    if (opt.shared_scale) {
      std::vector<double> all_p, all_g;
      for (int i = 0; i < n; ++i)
        for (int v = 0; v < pred[i].height(); ++v)
          for (int u = 0; u < pred[i].width(); ++u)
            if (pred[i].is_valid(u, v) && gt[i].is_valid(u, v)) {
              all_p.push_back(pred[i].values.at(u, v));
              all_g.push_back(gt[i].values.at(u, v));
            }
      if (all_p.empty()) throw EmptyOverlap("evaluate: no jointly-valid pixel in any camera");
      const double med_p = detail::median_of(std::move(all_p));
      if (med_p == 0.0) throw ZeroMedian("evaluate: prediction median is zero");
      const double scale = detail::median_of(std::move(all_g)) / med_p;
      for (int i = 0; i < n; ++i) {
        scales[i] = scale;
        for (int v = 0; v < pred[i].height(); ++v)
          for (int u = 0; u < pred[i].width(); ++u)
            if (pred[i].is_valid(u, v)) pred[i].values.at(u, v) *= scale;
      }
    } else {
      for (int i = 0; i < n; ++i) {
        auto [scaled, scale] = median_scale(pred[i], gt[i]);
        pred[i] = std::move(scaled);
        scales[i] = scale;
      }
    }
  }

  std::vector<DepthMetrics> metrics(n);
  for (int i = 0; i < n; ++i)
    metrics[i] = depth_metrics(pred[i], gt[i], opt.min_depth, opt.max_depth);

  // Cross-camera consistency of the evaluated predictions.
  std::vector<double> pair_dep_con;
  for (const auto& pair : scene.adjacency) {
    const auto& dst = scene.cameras[pair.target];
    const auto& src = scene.cameras[pair.source];
    const DepthMap projected =
        project_depth(pred[pair.source], src.intrinsics, dst.intrinsics,
                      scene.extrinsics(pair.source, pair.target));
    double value = std::numeric_limits<double>::quiet_NaN();
    try {
      value = dep_con(pred[pair.target], projected, gt[pair.target], dst.mask);
    } catch (const EmptyOverlap&) {
    }
    pair_dep_con.push_back(value);
  }

  char row[256];
  os << "camera        abs_rel     sq_rel       rmse  delta_1.25    pixels      scale\n";
  DepthMetrics mean;
  for (int i = 0; i < n; ++i) {
    const auto& m = metrics[i];
    std::snprintf(row, sizeof(row), "%-10s %10.4f %10.4f %10.4f  %10.4f  %8lld %10.4f\n",
                  scene.cameras[i].name.c_str(), m.abs_rel, m.sq_rel, m.rmse, m.delta_125,
                  static_cast<long long>(m.pixel_count), scales[i]);
    os << row;
    mean.abs_rel += m.abs_rel / n;
    mean.sq_rel += m.sq_rel / n;
    mean.rmse += m.rmse / n;
    mean.delta_125 += m.delta_125 / n;
    mean.pixel_count += m.pixel_count;
  }
  std::snprintf(row, sizeof(row), "%-10s %10.4f %10.4f %10.4f  %10.4f  %8lld\n", "mean",
                mean.abs_rel, mean.sq_rel, mean.rmse, mean.delta_125,
                static_cast<long long>(mean.pixel_count));
  os << row;
  if (!pair_dep_con.empty()) {
    os << "\npair                              dep_con\n";
    double dc_sum = 0.0;
    for (std::size_t k = 0; k < pair_dep_con.size(); ++k) {
      const auto& pair = scene.adjacency[k];
      const std::string label =
          scene.cameras[pair.target].name + "<-" + scene.cameras[pair.source].name;
      std::snprintf(row, sizeof(row), "%-30s %10.4f\n", label.c_str(), pair_dep_con[k]);
      os << row;
      dc_sum += pair_dep_con[k];
    }
    std::snprintf(row, sizeof(row), "%-30s %10.4f\n", "mean",
                  dc_sum / static_cast<double>(pair_dep_con.size()));
    os << row;
  }

  // Machine-readable mirror: name=value, 6 significant digits.
  std::string kv;
  auto put = [&](const std::string& key, double value) {
    kv += key + "=" + fmt("%.6g", value) + "\n";
  };
  for (int i = 0; i < n; ++i) {
    const auto& name = scene.cameras[i].name;
    put(name + ".abs_rel", metrics[i].abs_rel);
    put(name + ".sq_rel", metrics[i].sq_rel);
    put(name + ".rmse", metrics[i].rmse);
    put(name + ".delta_1.25", metrics[i].delta_125);
    kv += name + ".pixels=" + std::to_string(metrics[i].pixel_count) + "\n";
    put(name + ".scale", scales[i]);
  }
  put("mean.abs_rel", mean.abs_rel);
  put("mean.sq_rel", mean.sq_rel);
  put("mean.rmse", mean.rmse);
  put("mean.delta_1.25", mean.delta_125);
  double dc_sum = 0.0;
  for (std::size_t k = 0; k < pair_dep_con.size(); ++k) {
    const auto& pair = scene.adjacency[k];
    put("dep_con." + scene.cameras[pair.target].name + "." +
            scene.cameras[pair.source].name,
        pair_dep_con[k]);
    dc_sum += pair_dep_con[k];
  }
  if (!pair_dep_con.empty())
    put("mean.dep_con", dc_sum / static_cast<double>(pair_dep_con.size()));
  io_detail::write_all(opt.out_path, kv);
}

}  // namespace cli_detail

/// Command-line entry point. Exit codes: 0 success, 1 validation/parse
/// errors, 2 numeric failure during refinement.
inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"multi-camera collaborative depth refinement"};
  app.require_subcommand(1);

  auto* synth_cmd = app.add_subcommand("synth", "render a synthetic rig fixture");
  std::string synth_spec, synth_out;
  std::int64_t synth_seed = -1;
  synth_cmd->add_option("--spec", synth_spec, "scene spec file")->required();
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "override the spec seed");

  auto* warp_cmd = app.add_subcommand("warp", "project one camera's depth into another");
  std::string warp_rig, warp_from, warp_to, warp_out, warp_pred;
  bool warp_zmin = false;
  warp_cmd->add_option("--rig", warp_rig, "rig config")->required();
  warp_cmd->add_option("--from", warp_from, "source camera")->required();
  warp_cmd->add_option("--to", warp_to, "target camera")->required();
  warp_cmd->add_option("--out", warp_out, "output depth file")->required();
  warp_cmd->add_option("--pred", warp_pred,
                       "directory of predicted depths (default: gt, else uniform combination)");
  warp_cmd->add_flag("--z-min", warp_zmin, "nearest-depth splatting instead of overwrite");

  auto* refine_cmd = app.add_subcommand("refine", "optimize basis weights across the rig");
  std::string refine_rig, refine_out = "refined", refine_trace;
  RefineConfig cfg;
  refine_cmd->add_option("--rig", refine_rig, "rig config")->required();
  refine_cmd->add_option("-m,--rounds", cfg.rounds, "refinement rounds");
  refine_cmd->add_option("--lambda", cfg.lambda, "consistency weight");
  refine_cmd->add_option("--mu", cfg.mu, "smoothness weight");
  refine_cmd->add_option("--steps", cfg.inner_steps, "gradient steps per round");
  refine_cmd->add_option("--step-size", cfg.step_size, "initial gradient step size");
  refine_cmd->add_option("--tol", cfg.convergence_tol, "relative objective change to stop");
  refine_cmd->add_option("--floor", cfg.depth_floor, "combined depth floor in meters");
  refine_cmd->add_option("--out", refine_out, "output directory for refined depths");
  refine_cmd->add_option("--trace", refine_trace, "per-round trace file");
  bool refine_zmin = false;
  refine_cmd->add_flag("--z-min", refine_zmin, "nearest-depth splatting instead of overwrite");

  auto* eval_cmd = app.add_subcommand("evaluate", "depth metrics against ground truth");
  cli_detail::EvaluateOptions eopt;
  eval_cmd->add_option("--rig", eopt.rig_path, "rig config")->required();
  eval_cmd->add_option("--pred", eopt.pred_dir, "predicted depth directory")->required();
  eval_cmd->add_option("--gt", eopt.gt_dir, "ground-truth depth directory")->required();
  eval_cmd->add_flag("--shared-scale", eopt.shared_scale,
                     "one median scale pooled over all cameras");
  eval_cmd->add_flag("--no-scale", eopt.no_scale, "disable median scaling");
  eval_cmd->add_option("--max-depth", eopt.max_depth, "max evaluated gt depth in meters");
  eval_cmd->add_option("--min-depth", eopt.min_depth, "min evaluated gt depth in meters");
  eval_cmd->add_option("--out", eopt.out_path, "key-value metrics file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth_cmd) {
      cli_detail::run_synth(synth_spec, synth_out,
                            synth_seed >= 0
                                ? std::optional<std::uint64_t>(std::uint64_t(synth_seed))
                                : std::nullopt);
    } else if (*warp_cmd) {
      cli_detail::run_warp(warp_rig, warp_from, warp_to, warp_out, warp_pred,
                           warp_zmin ? SplatRule::z_min : SplatRule::overwrite);
    } else if (*refine_cmd) {
      if (refine_zmin) cfg.splat = SplatRule::z_min;
      cli_detail::run_refine(refine_rig, cfg, refine_out, refine_trace);
    } else if (*eval_cmd) {
      cli_detail::run_evaluate(eopt, std::cout);
    }
  } catch (const NonFiniteObjective& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mcdp
