#pragma once

#include <cstddef>
#include <utility>

#include "mipcls/volume.hpp"

namespace mipcls {

enum class Interp { Trilinear, Nearest };

/// Contiguous window along one axis: [start, start + length).
struct RowWindow {
  std::size_t start = 0;
  std::size_t length = 0;
  int axis = 1;

  std::size_t end() const noexcept { return start + length; }
  bool operator==(const RowWindow&) const = default;
};

/// Height axis after RAS reorientation (anterior-posterior).
inline constexpr int kHeightAxis = 1;
/// Width axis after RAS reorientation (left-right).
inline constexpr int kWidthAxis = 0;

/// Permutes and flips voxel axes so the volume is RAS-oriented while every
/// voxel keeps its world position. Already-RAS volumes are returned as is.
Volume reorient_canonical(const Volume& v);

/// Resamples onto spacing `target`. Output voxel i sits at input coordinate
/// i * target / spacing (origin preserved); the new extent per axis is
/// max(1, round(n * spacing / target)). Samples outside the input grid
/// are clamped to the edge.
Volume resample(const Volume& v, const Spacing3& target, Interp interp);

/// Centers the volume in `target` per axis. When the difference is odd the
/// extra padded voxel goes to the high-index side and the extra cropped
/// voxel is removed from the high-index side.
Volume crop_or_pad(const Volume& v, const Dims3& target, float fill = 0.0f);

/// Window of `window` rows along the height axis with maximal summed
/// intensity; ties go to the lowest start. Axes no longer than `window`
/// yield the full axis.
RowWindow localize_rows(const Volume& v, std::size_t window = 256);

/// Restricts a volume to the window along window.axis.
Volume crop_window(const Volume& v, const RowWindow& window);

/// Splits along the width axis at floor(nx / 2): {[0, nx/2), [nx/2, nx)}.
std::pair<Volume, Volume> split_lr(const Volume& v);

/// Inverse of split_lr: concatenates two volumes along the width axis.
Volume concat_x(const Volume& low, const Volume& high);

}  // namespace mipcls
