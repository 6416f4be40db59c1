#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mcdp/errors.hpp"

namespace mcdp {

/// Dense row-major 2D grid. Pixel access is (u, v) = (column, row),
/// matching image coordinates throughout the library.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
    if (width <= 0 || height <= 0)
      throw ValidationError("Grid dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T& at(int u, int v) { return data_[static_cast<std::size_t>(v) * width_ + u]; }
  const T& at(int u, int v) const { return data_[static_cast<std::size_t>(v) * width_ + u]; }

  bool in_bounds(int u, int v) const {
    return u >= 0 && u < width_ && v >= 0 && v < height_;
  }

  bool same_shape(int w, int h) const { return width_ == w && height_ == h; }
  template <typename U>
  bool same_shape(const Grid<U>& o) const { return same_shape(o.width(), o.height()); }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  void fill(T value) { data_.assign(data_.size(), value); }

  bool operator==(const Grid& o) const {
    return width_ == o.width_ && height_ == o.height_ && data_ == o.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using MaskGrid = Grid<std::uint8_t>;

/// Dense per-pixel depth with a validity mask. Invalid pixels carry value 0.
struct DepthMap {
  Grid<double> values;
  MaskGrid valid;

  DepthMap() = default;
  DepthMap(int width, int height)
      : values(width, height, 0.0), valid(width, height, 0) {}

  int width() const { return values.width(); }
  int height() const { return values.height(); }

  void set(int u, int v, double depth) {
    values.at(u, v) = depth;
    valid.at(u, v) = 1;
  }
  void invalidate(int u, int v) {
    values.at(u, v) = 0.0;
    valid.at(u, v) = 0;
  }
  bool is_valid(int u, int v) const { return valid.at(u, v) != 0; }

  /// Checks the invariant: valid pixels finite and > 0, invalid pixels 0.
  void check() const {
    if (!values.same_shape(valid))
      throw ShapeMismatch("DepthMap values/valid shapes differ");
    for (int v = 0; v < height(); ++v)
      for (int u = 0; u < width(); ++u) {
        const double d = values.at(u, v);
        if (valid.at(u, v) != 0) {
          if (!(std::isfinite(d) && d > 0.0))
            throw ValidationError("DepthMap valid pixel is not finite and positive");
        } else if (d != 0.0) {
          throw ValidationError("DepthMap invalid pixel is not zero-filled");
        }
      }
  }

  bool operator==(const DepthMap& o) const {
    return values == o.values && valid == o.valid;
  }
};

/// Grayscale image with intensities in [0, 1].
struct GrayImage {
  Grid<double> values;

  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0) : values(width, height, fill) {}
  explicit GrayImage(Grid<double> v) : values(std::move(v)) { check(); }

  int width() const { return values.width(); }
  int height() const { return values.height(); }
  double at(int u, int v) const { return values.at(u, v); }
  double& at(int u, int v) { return values.at(u, v); }

  void check() const {
    for (double x : values.data())
      if (!(std::isfinite(x) && x >= 0.0 && x <= 1.0))
        throw ValidationError("GrayImage intensity outside [0, 1]");
  }

  bool operator==(const GrayImage& o) const { return values == o.values; }
};

/// Per-camera self-occlusion mask: true = pixel participates in losses/metrics.
struct OcclusionMask {
  MaskGrid keep;

  OcclusionMask() = default;
  OcclusionMask(int width, int height, bool keep_all = true)
      : keep(width, height, keep_all ? 1 : 0) {}

  int width() const { return keep.width(); }
  int height() const { return keep.height(); }
  bool kept(int u, int v) const { return keep.at(u, v) != 0; }

  bool operator==(const OcclusionMask& o) const { return keep == o.keep; }
};

}  // namespace mcdp
