#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcdp/basis.hpp"
#include "mcdp/errors.hpp"
#include "mcdp/geometry.hpp"
#include "mcdp/grid.hpp"

namespace mcdp {

/// One camera in a rig: calibration, pose, observation, and the depth bases
/// the refinement optimizes over. Ground truth is optional and only consumed
/// by evaluation and trace reporting.
struct CameraView {
  std::string name;
  CameraIntrinsics intrinsics;
  CameraExtrinsics cam_to_world;
  GrayImage image;
  DepthBasisSet bases;
  OcclusionMask mask;
  std::optional<DepthMap> gt_depth;
};

/// Ordered overlap pair: the source camera's depth is projected into the
/// target camera's grid and compared there. List both directions to
/// constrain both cameras.
struct AdjacencyPair {
  int target = 0;
  int source = 0;
};

struct RigScene {
  std::vector<CameraView> cameras;
  std::vector<AdjacencyPair> adjacency;

  int camera_count() const { return static_cast<int>(cameras.size()); }

  int index_of(const std::string& name) const {
    for (int i = 0; i < camera_count(); ++i)
      if (cameras[i].name == name) return i;
    throw ValidationError("rig: unknown camera '" + name + "'");
  }

  /// Pairwise extrinsics composed from world poses: X_to = R X_from + t.
  CameraExtrinsics extrinsics(int from, int to) const {
    return cameras[to].cam_to_world.inverse() * cameras[from].cam_to_world;
  }

  void check() const {
    for (std::size_t i = 0; i < cameras.size(); ++i) {
      const auto& cam = cameras[i];
      if (cam.name.empty())
        throw ValidationError("rig: camera name is empty");
      for (std::size_t j = i + 1; j < cameras.size(); ++j)
        if (cameras[j].name == cam.name)
          throw ValidationError("rig: duplicate camera name '" + cam.name + "'");
      cam.intrinsics.check();
      cam.cam_to_world.check(cam.name);
      const int w = cam.intrinsics.width, h = cam.intrinsics.height;
      if (!cam.image.values.same_shape(w, h))
        throw ValidationError("rig: image shape mismatch for '" + cam.name + "'");
      if (!cam.mask.keep.same_shape(w, h))
        throw ValidationError("rig: mask shape mismatch for '" + cam.name + "'");
      if (cam.bases.width() != w || cam.bases.height() != h)
        throw ValidationError("rig: basis shape mismatch for '" + cam.name + "'");
      cam.bases.check();
      if (cam.gt_depth && !cam.gt_depth->values.same_shape(w, h))
        throw ValidationError("rig: ground-truth shape mismatch for '" + cam.name + "'");
    }
    for (const auto& pair : adjacency) {
      if (pair.target < 0 || pair.target >= camera_count() ||
          pair.source < 0 || pair.source >= camera_count())
        throw ValidationError("rig: adjacency references a missing camera");
      if (pair.target == pair.source)
        throw ValidationError("rig: adjacency pairs a camera with itself");
    }
  }
};

}  // namespace mcdp
