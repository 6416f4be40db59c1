#pragma once

#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "mcdp/errors.hpp"

namespace mcdp {

// Coordinate convention: x right, y down, z forward (camera looks along +z).
// Pixel (u, v) = (column, row) with the origin at the top-left pixel center.

using Point3 = Eigen::Vector3d;

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Pinhole intrinsics. No distortion model.
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx_, double fy_, double cx_, double cy_, int width_, int height_)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(width_), height(height_) {
    check();
  }

  void check() const {
    if (!(fx > 0.0) || !(fy > 0.0))
      throw ValidationError("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0)
      throw ValidationError("intrinsics: image size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw ValidationError("intrinsics: principal point outside image");
  }

  /// True when (u, v) can be bilinearly sampled (all four neighbours exist).
  bool contains(const Pixel& p) const {
    return p.u >= 0.0 && p.u <= width - 1 && p.v >= 0.0 && p.v <= height - 1;
  }

  /// True when (u, v) rounds to a pixel of the image: the bounds policy of
  /// nearest-pixel splatting and overlap counting.
  bool in_image(const Pixel& p) const {
    return p.u >= -0.5 && p.u < width - 0.5 && p.v >= -0.5 && p.v < height - 0.5;
  }
};

/// Rigid transform between two camera frames: X_to = R * X_from + t.
struct CameraExtrinsics {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static constexpr double kOrthoTol = 1e-9;

  CameraExtrinsics() = default;
  CameraExtrinsics(const Eigen::Matrix3d& R, const Eigen::Vector3d& t)
      : rotation(R), translation(t) {
    check();
  }

  static CameraExtrinsics identity() { return CameraExtrinsics{}; }

  void check(const std::string& label = "") const {
    const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() >= kOrthoTol)
      throw ValidationError("extrinsics" + (label.empty() ? "" : " [" + label + "]") +
                            ": rotation is not orthonormal");
    if (rotation.determinant() <= 0.0)
      throw ValidationError("extrinsics" + (label.empty() ? "" : " [" + label + "]") +
                            ": rotation determinant is not +1");
    if (!translation.allFinite())
      throw ValidationError("extrinsics" + (label.empty() ? "" : " [" + label + "]") +
                            ": translation is not finite");
  }

  CameraExtrinsics inverse() const {
    CameraExtrinsics inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(rotation.transpose() * translation);
    return inv;
  }

  Point3 apply(const Point3& p) const { return rotation * p + translation; }

  /// Composition: (b * a) maps through a first, then b.
  friend CameraExtrinsics operator*(const CameraExtrinsics& b, const CameraExtrinsics& a) {
    CameraExtrinsics out;
    out.rotation = b.rotation * a.rotation;
    out.translation = b.rotation * a.translation + b.translation;
    return out;
  }
};

/// Lifts a pixel with known depth to a 3D point in the camera frame.
inline Point3 unproject(const Pixel& p, double depth, const CameraIntrinsics& K) {
  if (!(depth > 0.0))
    throw NonPositiveDepth("unproject: depth must be positive");
  if (!std::isfinite(p.u) || !std::isfinite(p.v))
    throw ValidationError("unproject: pixel coordinates must be finite");
  return Point3((p.u - K.cx) * depth / K.fx, (p.v - K.cy) * depth / K.fy, depth);
}

/// Projects a camera-frame point onto the image plane.
inline Pixel project(const Point3& P, const CameraIntrinsics& K) {
  if (!(P.z() > 0.0))
    throw BehindCamera("project: point is behind the camera");
  return Pixel{K.fx * P.x() / P.z() + K.cx, K.fy * P.y() / P.z() + K.cy};
}

struct WarpedPixel {
  Pixel pixel;
  double depth = 0.0;  // z of the transformed point in the target frame
};

/// Pixel-warping between two cameras: unproject in the source, rigidly
/// transform, reproject in the target. Returns nullopt when the transformed
/// point ends up behind the target camera (the pixel is invalid, not an
/// error). The warped pixel may lie outside the target bounds; callers pick
/// their own validity policy.
inline std::optional<WarpedPixel> warp_pixel(const Pixel& p, double depth,
                                             const CameraIntrinsics& K_src,
                                             const CameraIntrinsics& K_dst,
                                             const CameraExtrinsics& src_to_dst) {
  const Point3 P = src_to_dst.apply(unproject(p, depth, K_src));
  if (!(P.z() > 0.0)) return std::nullopt;
  return WarpedPixel{project(P, K_dst), P.z()};
}

}  // namespace mcdp
