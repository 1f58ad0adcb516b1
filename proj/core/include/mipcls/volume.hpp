#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mipcls {

using Dims3 = std::array<std::size_t, 3>;
using Spacing3 = std::array<double, 3>;
using Affine = Eigen::Matrix4d;

/// A 3D scalar grid in voxel order x-fastest, then y, then z.
///
/// The affine maps homogeneous voxel indices (i, j, k, 1) to world
/// millimetres in RAS+ convention. A Volume validates its invariants on
/// construction and is immutable afterwards, so it can be shared across
/// threads without synchronization.
class Volume {
 public:
  Volume(Dims3 dims, Spacing3 spacing, const Affine& affine, std::vector<float> data);

  /// Axis-aligned volume with origin at zero and affine = diag(spacing).
  static Volume filled(Dims3 dims, Spacing3 spacing, float value);

  const Dims3& dims() const noexcept { return dims_; }
  std::size_t nx() const noexcept { return dims_[0]; }
  std::size_t ny() const noexcept { return dims_[1]; }
  std::size_t nz() const noexcept { return dims_[2]; }
  std::size_t size() const noexcept { return data_.size(); }

  const Spacing3& spacing() const noexcept { return spacing_; }
  const Affine& affine() const noexcept { return affine_; }
  std::span<const float> data() const noexcept { return data_; }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + dims_[0] * (y + dims_[1] * z);
  }
  float at(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return data_[index(x, y, z)];
  }

  /// Three-letter axis code ("RAS", "LPS", ...) derived from the affine.
  std::string orientation() const;

  /// Same dims and affine entries equal within tol.
  bool same_grid(const Volume& other, double tol = 1e-6) const;

  /// Copy with identical geometry and replaced voxel values.
  Volume with_data(std::vector<float> data) const;

 private:
  Dims3 dims_;
  Spacing3 spacing_;
  Affine affine_;
  std::vector<float> data_;
};

/// Axis mapping from voxel axes to world axes. world_axis[i] is the world
/// axis (0 = x, 1 = y, 2 = z) that voxel axis i points along most strongly,
/// and flip[i] is true when it points toward the negative direction.
struct AxisCodes {
  std::array<int, 3> world_axis{0, 1, 2};
  std::array<bool, 3> flip{false, false, false};
};

/// Dominant-direction assignment over the 3x3 linear part of an affine.
/// Picks the axis permutation maximizing the sum of absolute direction
/// cosines, so oblique acquisitions still yield a proper permutation.
AxisCodes axis_codes(const Affine& affine);

std::string orientation_string(const AxisCodes& codes);

}  // namespace mipcls
