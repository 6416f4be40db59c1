// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails.
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mcdp/cli.hpp"
#include "mcdp/mcdp.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace mcdp;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

fs::path g_tmp;

// Runs the CLI in-process with its stdout captured, so the acceptance log
// stays one line per criterion.
int run_cli(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"mcdp"};
  storage.insert(storage.end(), args);
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  std::ostringstream sink;
  std::streambuf* saved = std::cout.rdbuf(sink.rdbuf());
  const int code = cli_main(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(saved);
  return code;
}

std::map<std::string, double> read_kv(const fs::path& path) {
  std::ifstream in(path);
  std::map<std::string, double> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  return kv;
}

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

RigScene random_scene(testutil::Rng& rng, int n_bases) {
  RigScene scene;
  const CameraIntrinsics K(10.0, 10.0, 3.5, 3.5, 8, 8);
  const CameraExtrinsics pose1(testutil::axis_angle(Eigen::Vector3d(0, 1, 0), 0.06),
                               Eigen::Vector3d(0.15, 0.02, 0.0));
  for (int i = 0; i < 2; ++i) {
    CameraView cam;
    cam.name = "cam" + std::to_string(i);
    cam.intrinsics = K;
    cam.cam_to_world = (i == 0) ? CameraExtrinsics::identity() : pose1;
    cam.image = testutil::random_image(rng, 8, 8);
    cam.mask = testutil::random_mask(rng, 8, 8, 0.9);
    std::vector<Grid<double>> bases;
    for (int k = 0; k < n_bases; ++k) bases.push_back(testutil::random_grid(rng, 8, 8, 2.0, 6.0));
    cam.bases = DepthBasisSet(std::move(bases));
    scene.cameras.push_back(std::move(cam));
  }
  scene.adjacency = {{0, 1}, {1, 0}};
  return scene;
}

std::string fixture_scene_text(std::uint64_t seed, int width, int height, double focal,
                               double cam1_scale) {
  std::ostringstream ss;
  ss << "scene 1\nseed " << seed << "\ncameras 2\nyaw_spacing_deg 60\nring_radius 0.5\n"
     << "image " << width << " " << height << "\nfocal " << focal << "\n"
     << "wall 8 10 12\nground 1.6 40\nsphere -0.5 0.2 5.0 0.9\n"
     << "basis scale-family 4\nbasis_pin 0\nbasis_scale 1 " << cam1_scale << "\n";
  return ss.str();
}

// --------------------------------------------------------------------------

Check criterion_geometry() {
  Check c;
  const CameraIntrinsics K(100.0, 100.0, 320.0, 240.0, 640, 480);
  testutil::Rng rng(101);
  for (int i = 0; i < 1000 && c.ok; ++i) {
    const Pixel p{testutil::uniform(rng, -40.0, 680.0), testutil::uniform(rng, -40.0, 520.0)};
    const double d = testutil::uniform(rng, 0.1, 60.0);
    const Pixel back = project(unproject(p, d, K), K);
    c.require(std::hypot(back.u - p.u, back.v - p.v) < 1e-9, "project/unproject round-trip");
  }
  for (int i = 0; i < 1000 && c.ok; ++i) {
    const Eigen::Vector3d axis(testutil::uniform(rng, -1, 1), testutil::uniform(rng, -1, 1),
                               testutil::uniform(rng, -1, 1));
    const CameraExtrinsics e(
        testutil::axis_angle(axis.norm() > 1e-6 ? axis : Eigen::Vector3d::UnitY(),
                             testutil::uniform(rng, -0.25, 0.25)),
        Eigen::Vector3d(testutil::uniform(rng, -0.5, 0.5), testutil::uniform(rng, -0.5, 0.5),
                        testutil::uniform(rng, -0.5, 0.5)));
    const Pixel p{testutil::uniform(rng, 0.0, 639.0), testutil::uniform(rng, 0.0, 479.0)};
    const double d = testutil::uniform(rng, 1.0, 30.0);

    double R[9], t[3];
    for (int r = 0; r < 3; ++r) {
      t[r] = e.translation(r);
      for (int k = 0; k < 3; ++k) R[3 * r + k] = e.rotation(r, k);
    }
    const oracle::Camera oc{K.fx, K.fy, K.cx, K.cy, K.width, K.height};
    const auto got = warp_pixel(p, d, K, K, e);
    const auto expect = oracle::warp(p.u, p.v, d, oc, oc, R, t);
    c.require(got.has_value() == !expect.behind, "warp behind-target agreement");
    if (got) {
      c.require(std::abs(got->pixel.u - expect.u) < 1e-10 &&
                    std::abs(got->pixel.v - expect.v) < 1e-10 &&
                    std::abs(got->depth - expect.z) < 1e-10,
                "warp oracle equivalence at 1e-10");
      const auto back = warp_pixel(got->pixel, got->depth, K, K, e.inverse());
      c.require(back.has_value() && std::abs(back->pixel.u - p.u) < 1e-8 &&
                    std::abs(back->pixel.v - p.v) < 1e-8 && std::abs(back->depth - d) < 1e-8,
                "warp inverse round-trip at 1e-8");
    }
  }
  return c;
}

Check criterion_oracles() {
  Check c;
  testutil::Rng rng(102);
  const CameraIntrinsics K(20.0, 20.0, 3.5, 3.0, 8, 7);
  const oracle::Camera oc{K.fx, K.fy, K.cx, K.cy, K.width, K.height};
  for (int trial = 0; trial < 100 && c.ok; ++trial) {
    const int w = K.width, h = K.height;
    const CameraExtrinsics e(
        testutil::axis_angle(Eigen::Vector3d(0.2, 1.0, 0.1), testutil::uniform(rng, -0.1, 0.1)),
        Eigen::Vector3d(testutil::uniform(rng, -0.3, 0.3), 0.0, 0.0));
    double R[9], t[3];
    for (int r = 0; r < 3; ++r) {
      t[r] = e.translation(r);
      for (int k = 0; k < 3; ++k) R[3 * r + k] = e.rotation(r, k);
    }
    const DepthMap src = testutil::random_depth(rng, w, h, 0.5, 8.0, 0.8);
    const DepthMap got = project_depth(src, K, K, e);
    DepthMap expect;
    oracle::project_depth(src, oc, oc, R, t, expect);
    c.require(oracle::maps_match(got, expect, 1e-10), "project_depth oracle equivalence");

    const DepthMap a = testutil::random_depth(rng, w, h, 0.5, 9.0, 0.8);
    const DepthMap b = testutil::random_depth(rng, w, h, 0.5, 9.0, 0.8);
    const OcclusionMask mask = testutil::random_mask(rng, w, h, 0.8);
    c.require(std::abs(depth_consistency_loss(a, b, mask).value -
                       oracle::masked_l1_mean(a, b, mask.keep)) < 1e-12,
              "depth_consistency_loss oracle at 1e-12");

    const GrayImage ia = testutil::random_image(rng, w, h);
    const GrayImage ib = testutil::random_image(rng, w, h);
    const Grid<double> s = ssim(ia, ib);
    for (int v = 0; v < h && c.ok; ++v)
      for (int u = 0; u < w; ++u)
        c.require(std::abs(s.at(u, v) - oracle::ssim_at(ia.values, ib.values, nullptr, u, v)) <
                      1e-10,
                  "ssim oracle at 1e-10");
    c.require(std::abs(photometric_error(ia, ib, mask) -
                       oracle::photometric_mean(ia.values, ib.values, mask.keep)) < 1e-10,
              "photometric_error oracle at 1e-10");
    c.require(std::abs(smoothness_loss(a, ia) - oracle::smoothness(a, ia.values)) < 1e-12,
              "smoothness_loss oracle at 1e-12");

    const oracle::Metrics em = oracle::depth_metrics(a, b, 1.0, 8.0);
    if (em.count > 0) {
      const DepthMetrics m = depth_metrics(a, b, 1.0, 8.0);
      c.require(std::abs(m.abs_rel - em.abs_rel) < 1e-12 &&
                    std::abs(m.sq_rel - em.sq_rel) < 1e-12 &&
                    std::abs(m.rmse - em.rmse) < 1e-12 && m.delta_125 == em.delta,
                "depth_metrics oracle at 1e-12");
    }
    const DepthMap gt = testutil::random_depth(rng, w, h, 0.5, 9.0, 0.9);
    std::int64_t joint = 0;
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u)
        if (a.is_valid(u, v) && b.is_valid(u, v) && gt.is_valid(u, v) && mask.kept(u, v)) ++joint;
    if (joint > 0)
      c.require(std::abs(dep_con(a, b, gt, mask) - oracle::dep_con(a, b, gt, mask.keep)) < 1e-12,
                "dep_con oracle at 1e-12");
  }
  return c;
}

Check criterion_gradients() {
  Check c;
  testutil::Rng rng(103);
  RefineConfig cfg;
  cfg.lambda = 0.3;
  cfg.mu = 0.01;
  for (int trial = 0; trial < 20 && c.ok; ++trial) {
    const int n = 1 + trial % 8;
    const RigScene scene = random_scene(rng, n);

    // combine_gradient against a random linear probe of the combined map.
    const auto& B = scene.cameras[0].bases;
    const Grid<double> probe = testutil::random_grid(rng, 8, 8, -1.0, 1.0);
    WeightVector w0(n, 0.0);
    for (auto& x : w0) x = testutil::uniform(rng, 0.2, 0.9);
    auto probe_loss = [&](const WeightVector& ws) {
      const DepthMap d = combine(B, ws, cfg.depth_floor);
      double sum = 0.0;
      for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) sum += probe.at(u, v) * d.values.at(u, v);
      return sum;
    };
    c.require(oracle::rel_error(combine_gradient(B, probe, w0, cfg.depth_floor),
                                oracle::central_diff(probe_loss, w0, 1e-4)) < 1e-4,
              "combine_gradient finite differences at 1e-4");

    // Frozen-projection objective gradient for both cameras.
    std::vector<WeightVector> weights{init_weights(n), init_weights(n)};
    const auto depths = detail::combine_all(scene, weights, cfg.depth_floor);
    const auto projected = detail::project_all(scene, depths, cfg.splat);
    for (int cam = 0; cam < 2 && c.ok; ++cam) {
      const auto terms = detail::camera_terms(scene, cam, projected, cfg);
      const auto analytic = detail::frozen_gradient(terms, weights[cam]);
      const auto fd = oracle::central_diff(
          [&](const WeightVector& ws) { return detail::frozen_objective(terms, ws); },
          weights[cam], 1e-6);
      c.require(oracle::rel_error(analytic, fd) < 1e-4,
                "objective gradient finite differences at 1e-4 (trial " +
                    std::to_string(trial) + ")");
    }
  }
  return c;
}

Check criterion_scale_recovery() {
  Check c;
  const fs::path dir = g_tmp / "scale_recovery";
  io_detail::write_all(dir / "scene.cfg", fixture_scene_text(1, 128, 96, 88.0, 1.5));
  c.require(run_cli({"synth", "--spec", (dir / "scene.cfg").string(), "--out",
                     (dir / "fix").string()}) == 0,
            "synth exit code");
  if (!c.ok) return c;
  const std::string rig = (dir / "fix" / "rig.cfg").string();
  const std::string gt = (dir / "fix" / "gt").string();
  for (const auto& [rounds, name] : {std::pair{"0", "m0"}, std::pair{"2", "m2"}}) {
    c.require(run_cli({"refine", "--rig", rig, "-m", rounds, "--out",
                       (dir / ("pred_" + std::string(name))).string()}) == 0,
              "refine exit code");
    if (!c.ok) return c;
    c.require(run_cli({"evaluate", "--rig", rig, "--pred",
                       (dir / ("pred_" + std::string(name))).string(), "--gt", gt, "--no-scale",
                       "--out", (dir / ("metrics_" + std::string(name) + ".txt")).string()}) == 0,
              "evaluate exit code");
    if (!c.ok) return c;
  }
  const auto m0 = read_kv(dir / "metrics_m0.txt");
  const auto m2 = read_kv(dir / "metrics_m2.txt");
  const double dc0 = m0.at("dep_con.cam1.cam0");
  const double dc2 = m2.at("dep_con.cam1.cam0");
  const double ar0 = m0.at("cam1.abs_rel");
  const double ar2 = m2.at("cam1.abs_rel");
  c.require(dc2 <= 0.1 * dc0, "overlap Dep Con reduced by >= 90% (got " +
                                  std::to_string(100.0 * (1.0 - dc2 / dc0)) + "%)");
  c.require(ar2 <= 0.2 * ar0, "full-image Abs Rel reduced by >= 80% (got " +
                                  std::to_string(100.0 * (1.0 - ar2 / ar0)) + "%)");
  return c;
}

std::vector<RefineTrace> g_seeded_traces;      // lambda = 0.001 runs, reused by criterion 6
std::vector<double> g_seeded_final_dep_con;

double mean_dep_con(const RoundRecord& rec) {
  double sum = 0.0;
  for (double x : rec.pair_dep_con) sum += x;
  return rec.pair_dep_con.empty() ? 0.0 : sum / rec.pair_dep_con.size();
}

RigScene seeded_fixture(int idx) {
  SceneSpec spec = canonical_rig_spec(2, 100 + idx);
  spec.image_width = 48;
  spec.image_height = 36;
  spec.focal = 33.0;
  spec.basis_kind = BasisKind::scale_family;
  spec.basis_count = 4;
  spec.basis_scale = {1.0, 1.3 + 0.05 * idx};
  spec.basis_pin = {true, false};
  return make_rig_scene(spec);
}

Check criterion_monotone() {
  Check c;
  g_seeded_traces.clear();
  g_seeded_final_dep_con.clear();
  for (int idx = 0; idx < 10; ++idx) {
    const RigScene scene = seeded_fixture(idx);
    RefineConfig cfg;
    cfg.rounds = 2;
    cfg.inner_steps = 15;
    cfg.convergence_tol = 0.0;
    const RefineResult result = refine(scene, cfg);
    c.require(!result.aborted, "refine completed (seed " + std::to_string(idx) + ")");
    for (std::size_t r = 1; r < result.trace.rounds.size() && c.ok; ++r)
      c.require(mean_dep_con(result.trace.rounds[r]) <=
                    mean_dep_con(result.trace.rounds[r - 1]) + 1e-9,
                "mean Dep Con non-increasing (seed " + std::to_string(idx) + ", round " +
                    std::to_string(r) + ")");
    g_seeded_traces.push_back(result.trace);
    g_seeded_final_dep_con.push_back(mean_dep_con(result.trace.rounds.back()));
  }
  return c;
}

Check criterion_ablation() {
  Check c;
  if (g_seeded_final_dep_con.size() != 10) {
    c.require(false, "criterion 5 fixtures unavailable");
    return c;
  }
  int wins = 0;
  for (int idx = 0; idx < 10; ++idx) {
    const RigScene scene = seeded_fixture(idx);
    RefineConfig cfg;
    cfg.rounds = 2;
    cfg.inner_steps = 15;
    cfg.convergence_tol = 0.0;
    cfg.lambda = 0.0;
    const RefineResult without = refine(scene, cfg);
    c.require(!without.aborted, "lambda=0 refine completed (seed " + std::to_string(idx) + ")");
    if (g_seeded_final_dep_con[idx] < mean_dep_con(without.trace.rounds.back())) ++wins;
  }
  c.require(wins >= 9, "lambda=0.001 beats lambda=0 in >= 9/10 seeds (got " +
                           std::to_string(wins) + ")");
  return c;
}

Check criterion_median_invariance() {
  Check c;
  testutil::Rng rng(107);
  for (int trial = 0; trial < 20 && c.ok; ++trial) {
    const DepthMap pred = testutil::random_depth(rng, 10, 8, 1.0, 40.0, 0.9);
    const DepthMap gt = testutil::random_depth(rng, 10, 8, 1.0, 40.0, 0.9);
    const auto base = depth_metrics(median_scale(pred, gt).first, gt);
    for (double scale : {0.1, 1.0, 17.3}) {
      DepthMap scaled = pred;
      for (auto& x : scaled.values.data()) x *= scale;
      const auto m = depth_metrics(median_scale(scaled, gt).first, gt);
      c.require(std::abs(m.abs_rel - base.abs_rel) < 1e-10 &&
                    std::abs(m.sq_rel - base.sq_rel) < 1e-10 &&
                    std::abs(m.rmse - base.rmse) < 1e-10 && m.delta_125 == base.delta_125,
                "metrics invariant to prediction scale " + std::to_string(scale));
    }
  }
  return c;
}

Check criterion_determinism() {
  Check c;
  for (const char* run : {"det_a", "det_b"}) {
    const fs::path dir = g_tmp / run;
    io_detail::write_all(dir / "scene.cfg", fixture_scene_text(7, 48, 36, 33.0, 1.4));
    c.require(run_cli({"synth", "--spec", (dir / "scene.cfg").string(), "--out",
                       (dir / "fix").string()}) == 0,
              "synth exit code");
    c.require(run_cli({"refine", "--rig", (dir / "fix" / "rig.cfg").string(), "-m", "2",
                       "--out", (dir / "pred").string(), "--trace",
                       (dir / "trace.txt").string()}) == 0,
              "refine exit code");
    c.require(run_cli({"evaluate", "--rig", (dir / "fix" / "rig.cfg").string(), "--pred",
                       (dir / "pred").string(), "--gt", (dir / "fix" / "gt").string(), "--out",
                       (dir / "metrics.txt").string()}) == 0,
              "evaluate exit code");
    if (!c.ok) return c;
  }
  for (const char* rel :
       {"fix/gt/cam0.mcdp", "fix/gt/cam1.mcdp", "fix/cam0_basis0.mcdp", "pred/cam0.mcdp",
        "pred/cam1.mcdp", "trace.txt", "metrics.txt"}) {
    c.require(file_bytes(g_tmp / "det_a" / rel) == file_bytes(g_tmp / "det_b" / rel),
              std::string("bit-identical ") + rel);
  }
  return c;
}

}  // namespace

int main() {
  g_tmp = fs::temp_directory_path() / ("mcdp_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(g_tmp);

  struct Criterion {
    const char* name;
    double budget_sec;
    std::function<Check()> run;
  };
  const std::vector<Criterion> criteria = {
      {"1. geometry round-trips and warp oracle", 1.0, criterion_geometry},
      {"2. scalar-loop oracle equivalence", 10.0, criterion_oracles},
      {"3. finite-difference gradient checks", 30.0, criterion_gradients},
      {"4. scale recovery through small overlap", 60.0, criterion_scale_recovery},
      {"5. Dep Con non-increasing across rounds", 0.0, criterion_monotone},
      {"6. consistency-loss ablation", 0.0, criterion_ablation},
      {"7. median-scaling invariance", 0.0, criterion_median_invariance},
      {"8. end-to-end determinism", 0.0, criterion_determinism},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Check c;
    try {
      c = criterion.run();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (criterion.budget_sec > 0.0 && elapsed >= criterion.budget_sec) {
      c.ok = false;
      c.detail = "runtime budget exceeded";
    }
    std::printf("[%s] %s (%.2fs)%s%s\n", c.ok ? "PASS" : "FAIL", criterion.name, elapsed,
                c.detail.empty() ? "" : " -- ", c.detail.c_str());
    std::fflush(stdout);
    if (!c.ok) ++failures;
  }

  fs::remove_all(g_tmp);
  return failures == 0 ? 0 : 1;
}
