#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mcdp/basis.hpp"
#include "mcdp/errors.hpp"
#include "mcdp/geometry.hpp"
#include "mcdp/grid.hpp"
#include "mcdp/scene.hpp"

namespace mcdp {

// ---------------------------------------------------------------------------
// Deterministic procedural texture: smoothed value noise. Everything here is
// a pure function of coordinates and seed, so renders are reproducible bit
// for bit regardless of evaluation order.
// ---------------------------------------------------------------------------

namespace noise {

inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline double lattice(int ix, int iy, int iz, std::uint64_t seed) {
  std::uint64_t k = mix(seed ^ 0x5bf03635ull);
  k = mix(k ^ static_cast<std::uint32_t>(ix));
  k = mix(k ^ static_cast<std::uint32_t>(iy));
  k = mix(k ^ static_cast<std::uint32_t>(iz));
  return static_cast<double>(k >> 11) * (1.0 / 9007199254740992.0);
}

inline double fade(double t) { return t * t * (3.0 - 2.0 * t); }

inline double value3(double x, double y, double z, std::uint64_t seed) {
  const double fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
  const int ix = static_cast<int>(fx), iy = static_cast<int>(fy), iz = static_cast<int>(fz);
  const double tx = fade(x - fx), ty = fade(y - fy), tz = fade(z - fz);
  double c[2][2][2];
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx)
        c[dz][dy][dx] = lattice(ix + dx, iy + dy, iz + dz, seed);
  auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  const double xy0 = lerp(lerp(c[0][0][0], c[0][0][1], tx), lerp(c[0][1][0], c[0][1][1], tx), ty);
  const double xy1 = lerp(lerp(c[1][0][0], c[1][0][1], tx), lerp(c[1][1][0], c[1][1][1], tx), ty);
  return lerp(xy0, xy1, tz);
}

/// Three octaves of value noise, normalized to [0, 1].
inline double fbm3(double x, double y, double z, std::uint64_t seed) {
  double sum = 0.0, amp = 1.0, freq = 1.0, norm = 0.0;
  for (int octave = 0; octave < 3; ++octave) {
    sum += amp * value3(x * freq, y * freq, z * freq, seed + octave * 7919);
    norm += amp;
    amp *= 0.5;
    freq *= 2.03;
  }
  return sum / norm;
}

}  // namespace noise

// ---------------------------------------------------------------------------
// Scene description: textured rectangle patches and spheres around a ring of
// outward-facing cameras. Rectangles cover both the prism "cylinder wall"
// and the ground plane.
// ---------------------------------------------------------------------------

struct RectPrimitive {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d edge_u = Eigen::Vector3d::UnitX();  // unit vectors spanning the patch
  Eigen::Vector3d edge_v = Eigen::Vector3d::UnitY();
  double half_u = 1.0, half_v = 1.0;
  std::uint32_t texture_seed = 0;
};

struct SpherePrimitive {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
  std::uint32_t texture_seed = 0;
};

enum class BasisKind { scale_family, noise_family, mixed };

struct SceneSpec {
  int camera_count = 2;
  double yaw_spacing_deg = 60.0;
  double ring_radius = 0.5;  // cameras sit on this circle, facing outward
  int image_width = 128;
  int image_height = 96;
  double focal = 88.0;
  std::optional<Pixel> principal;  // defaults to the image center
  std::vector<RectPrimitive> rects;
  std::vector<SpherePrimitive> spheres;
  std::uint64_t seed = 1;

  // Fixture emission: what basis files the synth command writes.
  BasisKind basis_kind = BasisKind::scale_family;
  int basis_count = 4;
  std::vector<double> basis_scale;  // per-camera mis-scale on gt, default 1
  std::vector<bool> basis_pin;      // pinned camera: single exact (scaled) gt basis
  double noise_amplitude = 0.5;     // meters, noise-family field bound
  int mask_bottom_rows = 0;         // simulated ego occlusion

  CameraIntrinsics intrinsics() const {
    const Pixel pp = principal ? *principal
                               : Pixel{(image_width - 1) / 2.0, (image_height - 1) / 2.0};
    return CameraIntrinsics(focal, focal, pp.u, pp.v, image_width, image_height);
  }

  CameraExtrinsics cam_to_world(int k) const {
    const double yaw = k * yaw_spacing_deg * M_PI / 180.0;
    Eigen::Matrix3d R;
    R << std::cos(yaw), 0.0, std::sin(yaw),
         0.0, 1.0, 0.0,
         -std::sin(yaw), 0.0, std::cos(yaw);
    // Camera forward (+z) in world is R * (0,0,1); place the center on the ring.
    CameraExtrinsics pose;
    pose.rotation = R;
    pose.translation = ring_radius * Eigen::Vector3d(std::sin(yaw), 0.0, std::cos(yaw));
    return pose;
  }

  double basis_scale_for(int camera) const {
    return camera < static_cast<int>(basis_scale.size()) ? basis_scale[camera] : 1.0;
  }

  bool basis_pin_for(int camera) const {
    return camera < static_cast<int>(basis_pin.size()) && basis_pin[camera];
  }

  void check() const {
    if (camera_count < 1) throw DegenerateSpec("scene: needs at least one camera");
    if (rects.empty() && spheres.empty())
      throw DegenerateSpec("scene: needs at least one primitive");
    if (!(ring_radius >= 0.0)) throw DegenerateSpec("scene: ring radius must be >= 0");
    if (basis_count < 1) throw DegenerateSpec("scene: basis count must be >= 1");
    if (noise_amplitude < 0.0) throw DegenerateSpec("scene: noise amplitude must be >= 0");
    if (mask_bottom_rows < 0 || mask_bottom_rows >= image_height)
      throw DegenerateSpec("scene: mask_bottom_rows out of range");
    intrinsics();  // validates focal/principal/size
  }
};

/// Regular prism of rectangle patches approximating a surrounding cylinder
/// wall. `radius` is the apothem (camera-to-wall distance).
inline void add_wall(SceneSpec& spec, double radius, double height, int segments) {
  if (segments < 3) throw DegenerateSpec("wall: needs at least 3 segments");
  const double half_w = radius * std::tan(M_PI / segments);
  for (int k = 0; k < segments; ++k) {
    const double phi = (k + 0.5) * 2.0 * M_PI / segments;
    RectPrimitive r;
    r.center = radius * Eigen::Vector3d(std::sin(phi), 0.0, std::cos(phi));
    r.edge_u = Eigen::Vector3d(std::cos(phi), 0.0, -std::sin(phi));
    r.edge_v = Eigen::Vector3d::UnitY();
    r.half_u = half_w;
    r.half_v = height / 2.0;
    r.texture_seed = static_cast<std::uint32_t>(spec.rects.size() + spec.spheres.size());
    spec.rects.push_back(r);
  }
}

/// Horizontal ground patch at level y (y points down, so positive y is below
/// the cameras).
inline void add_ground(SceneSpec& spec, double y, double extent) {
  RectPrimitive r;
  r.center = Eigen::Vector3d(0.0, y, 0.0);
  r.edge_u = Eigen::Vector3d::UnitX();
  r.edge_v = Eigen::Vector3d::UnitZ();
  r.half_u = extent;
  r.half_v = extent;
  r.texture_seed = static_cast<std::uint32_t>(spec.rects.size() + spec.spheres.size());
  spec.rects.push_back(r);
}

inline void add_sphere(SceneSpec& spec, const Eigen::Vector3d& center, double radius) {
  SpherePrimitive s;
  s.center = center;
  s.radius = radius;
  s.texture_seed = static_cast<std::uint32_t>(spec.rects.size() + spec.spheres.size());
  spec.spheres.push_back(s);
}

/// The canonical acceptance fixture: two cameras 60 degrees apart on a small
/// ring inside a textured prism wall with a ground plane and one sphere,
/// giving roughly 12% adjacent overlap at the default focal length. The
/// sphere sits away from the overlap band so the shared region stays smooth.
inline SceneSpec canonical_rig_spec(int cameras = 2, std::uint64_t seed = 1) {
  SceneSpec spec;
  spec.camera_count = cameras;
  spec.seed = seed;
  spec.focal = 88.0;
  spec.ring_radius = 0.5;
  add_wall(spec, 8.0, 10.0, 12);
  add_ground(spec, 1.6, 40.0);
  add_sphere(spec, Eigen::Vector3d(-0.5, 0.2, 5.0), 0.9);
  return spec;
}

struct RenderedView {
  GrayImage image;
  DepthMap depth;  // ground truth
  OcclusionMask mask;
};

namespace detail {

struct RayHit {
  double t = 0.0;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  std::uint32_t texture_seed = 0;
};

constexpr double kRayEps = 1e-9;

inline bool hit_rect(const RectPrimitive& r, const Eigen::Vector3d& origin,
                     const Eigen::Vector3d& dir, RayHit& best) {
  const Eigen::Vector3d n = r.edge_u.cross(r.edge_v).normalized();
  const double denom = dir.dot(n);
  if (std::abs(denom) < 1e-12) return false;
  const double t = (r.center - origin).dot(n) / denom;
  if (t <= kRayEps || (best.t > 0.0 && t >= best.t)) return false;
  const Eigen::Vector3d p = origin + t * dir;
  const Eigen::Vector3d local = p - r.center;
  if (std::abs(local.dot(r.edge_u)) > r.half_u || std::abs(local.dot(r.edge_v)) > r.half_v)
    return false;
  best = RayHit{t, p, n, r.texture_seed};
  return true;
}

inline bool hit_sphere(const SpherePrimitive& s, const Eigen::Vector3d& origin,
                       const Eigen::Vector3d& dir, RayHit& best) {
  const Eigen::Vector3d oc = origin - s.center;
  const double a = dir.dot(dir);
  const double b = 2.0 * oc.dot(dir);
  const double c = oc.dot(oc) - s.radius * s.radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return false;
  const double sq = std::sqrt(disc);
  double t = (-b - sq) / (2.0 * a);
  if (t <= kRayEps) t = (-b + sq) / (2.0 * a);
  if (t <= kRayEps || (best.t > 0.0 && t >= best.t)) return false;
  const Eigen::Vector3d p = origin + t * dir;
  best = RayHit{t, p, (p - s.center).normalized(), s.texture_seed};
  return true;
}

inline double shade(const RayHit& hit, const Eigen::Vector3d& view_dir, std::uint64_t seed) {
  Eigen::Vector3d n = hit.normal;
  if (n.dot(view_dir) > 0.0) n = -n;  // face the viewer
  static const Eigen::Vector3d light = Eigen::Vector3d(0.4, -0.7, 0.35).normalized();
  const double albedo =
      0.2 + 0.6 * noise::fbm3(hit.point.x() * 0.9, hit.point.y() * 0.9, hit.point.z() * 0.9,
                              seed * 1315423911ull + hit.texture_seed);
  const double diffuse = std::max(0.0, n.dot(light));
  const double value = albedo * (0.4 + 0.6 * diffuse);
  return std::min(std::max(value, 0.0), 1.0);
}

}  // namespace detail

/// Ray-casts every pixel of every camera against the scene primitives.
/// Depth is the z coordinate of the nearest hit in the camera frame; rays
/// that miss everything produce invalid pixels. Deterministic per spec+seed.
inline std::vector<RenderedView> render(const SceneSpec& spec) {
  spec.check();
  const CameraIntrinsics K = spec.intrinsics();
  std::vector<RenderedView> views;
  views.reserve(spec.camera_count);
  for (int cam = 0; cam < spec.camera_count; ++cam) {
    const CameraExtrinsics pose = spec.cam_to_world(cam);
    RenderedView view{GrayImage(K.width, K.height, 0.0), DepthMap(K.width, K.height),
                      OcclusionMask(K.width, K.height, true)};
    std::int64_t hits = 0;
    for (int v = 0; v < K.height; ++v)
      for (int u = 0; u < K.width; ++u) {
        // Unit-z camera ray, so the ray parameter along the world ray IS the
        // camera-frame depth of the hit.
        const Eigen::Vector3d dir_cam((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
        const Eigen::Vector3d dir = pose.rotation * dir_cam;
        detail::RayHit best;
        for (const auto& r : spec.rects) detail::hit_rect(r, pose.translation, dir, best);
        for (const auto& s : spec.spheres) detail::hit_sphere(s, pose.translation, dir, best);
        if (best.t <= 0.0) continue;
        view.depth.set(u, v, best.t);
        view.image.at(u, v) = detail::shade(best, dir, spec.seed);
        ++hits;
      }
    if (hits == 0)
      throw DegenerateSpec("render: camera " + std::to_string(cam) + " sees nothing");
    for (int v = K.height - spec.mask_bottom_rows; v < K.height; ++v)
      for (int u = 0; u < K.width; ++u) view.mask.keep.at(u, v) = 0;
    views.push_back(std::move(view));
  }
  return views;
}

/// Share of camera i's valid pixels whose ground-truth warp lands inside
/// camera j's bounds in front of the camera.
inline double overlap_fraction(const SceneSpec& spec, int cam_i, int cam_j) {
  const auto views = render(spec);
  const CameraIntrinsics K = spec.intrinsics();
  const CameraExtrinsics i_to_j = spec.cam_to_world(cam_j).inverse() * spec.cam_to_world(cam_i);
  const DepthMap& depth = views[cam_i].depth;
  std::int64_t valid = 0, landed = 0;
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u) {
      if (!depth.is_valid(u, v)) continue;
      ++valid;
      const auto warped =
          warp_pixel(Pixel{double(u), double(v)}, depth.values.at(u, v), K, K, i_to_j);
      if (warped && K.in_image(warped->pixel)) ++landed;
    }
  return valid > 0 ? static_cast<double>(landed) / valid : 0.0;
}

/// Basis sets for tests and fixtures. scale_family: {s_k * gt} with s_k
/// log-spaced in [0.5, 2] (just {gt} for n = 1). noise_family: gt plus smooth
/// random fields with |field| <= noise_amplitude. mixed: first half scales,
/// second half noise.
inline DepthBasisSet make_basis_fixture(const DepthMap& gt, BasisKind kind, int n,
                                        std::uint64_t seed, double noise_amplitude = 0.5) {
  if (n < 1) throw ZeroBases("make_basis_fixture: n must be >= 1");
  const int w = gt.width(), h = gt.height();
  auto scale_at = [](int k, int count) {
    if (count == 1) return 1.0;
    const double t = static_cast<double>(k) / (count - 1);
    return std::exp(std::log(0.5) + t * (std::log(2.0) - std::log(0.5)));
  };
  auto make_scaled = [&](double s) {
    Grid<double> b(w, h, 0.0);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) b.at(u, v) = s * gt.values.at(u, v);
    return b;
  };
  auto make_noisy = [&](int k) {
    Grid<double> b(w, h, 0.0);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        const double field =
            noise_amplitude *
            (2.0 * noise::fbm3(u / 16.0, v / 16.0, k * 3.7, seed * 2654435761ull + 17) - 1.0);
        b.at(u, v) = gt.values.at(u, v) + field;
      }
    return b;
  };
  std::vector<Grid<double>> bases;
  bases.reserve(n);
  switch (kind) {
    case BasisKind::scale_family:
      for (int k = 0; k < n; ++k) bases.push_back(make_scaled(scale_at(k, n)));
      break;
    case BasisKind::noise_family:
      for (int k = 0; k < n; ++k) bases.push_back(make_noisy(k));
      break;
    case BasisKind::mixed: {
      const int n_scale = (n + 1) / 2;
      for (int k = 0; k < n_scale; ++k) bases.push_back(make_scaled(scale_at(k, n_scale)));
      for (int k = n_scale; k < n; ++k) bases.push_back(make_noisy(k));
      break;
    }
  }
  return DepthBasisSet(std::move(bases));
}

/// Renders the spec and assembles a complete in-memory rig: images, masks,
/// ground truth, per-camera basis fixtures, and ring adjacency (both
/// directions per neighbouring pair).
inline RigScene make_rig_scene(const SceneSpec& spec) {
  auto views = render(spec);
  RigScene scene;
  for (int cam = 0; cam < spec.camera_count; ++cam) {
    CameraView cv;
    cv.name = "cam" + std::to_string(cam);
    cv.intrinsics = spec.intrinsics();
    cv.cam_to_world = spec.cam_to_world(cam);
    cv.image = std::move(views[cam].image);
    cv.mask = std::move(views[cam].mask);
    DepthMap scaled_gt = views[cam].depth;
    const double s = spec.basis_scale_for(cam);
    for (int v = 0; v < scaled_gt.height(); ++v)
      for (int u = 0; u < scaled_gt.width(); ++u)
        if (scaled_gt.is_valid(u, v)) scaled_gt.values.at(u, v) *= s;
    cv.bases = spec.basis_pin_for(cam)
                   ? make_basis_fixture(scaled_gt, BasisKind::scale_family, 1, spec.seed + cam)
                   : make_basis_fixture(scaled_gt, spec.basis_kind, spec.basis_count,
                                        spec.seed + cam, spec.noise_amplitude);
    cv.gt_depth = std::move(views[cam].depth);
    scene.cameras.push_back(std::move(cv));
  }
  for (int cam = 0; cam + 1 < spec.camera_count; ++cam) {
    scene.adjacency.push_back({cam, cam + 1});
    scene.adjacency.push_back({cam + 1, cam});
  }
  // Close the ring when it actually wraps around.
  if (spec.camera_count > 2 && spec.camera_count * spec.yaw_spacing_deg >= 359.0) {
    scene.adjacency.push_back({spec.camera_count - 1, 0});
    scene.adjacency.push_back({0, spec.camera_count - 1});
  }
  scene.check();
  return scene;
}

}  // namespace mcdp
