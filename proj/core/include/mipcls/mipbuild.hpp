#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mipcls/geometry.hpp"
#include "mipcls/labels.hpp"
#include "mipcls/tensorio.hpp"
#include "mipcls/volume.hpp"

namespace mipcls {

using VolumePtr = std::shared_ptr<const Volume>;

/// One patient's DCE series.
struct Study {
  std::string patient_id;
  VolumePtr pre;
  std::vector<VolumePtr> posts;  // acquisition order
  VolumePtr mask;                // optional breast mask
  LesionClass label_left = LesionClass::NoLesion;
  LesionClass label_right = LesionClass::NoLesion;
  std::vector<std::string> sources;
};

/// The four phases feeding the stack. With exactly two post-contrast
/// phases, post2 and last point at the same volume.
struct PhaseSet {
  VolumePtr pre;
  VolumePtr post1;
  VolumePtr post2;
  VolumePtr last;
};

inline constexpr std::size_t kStackChannels = 4;
inline constexpr std::array<const char*, kStackChannels> kChannelNames{"post1", "sub1", "sub2",
                                                                        "subLast"};

struct NormConstants {
  std::array<double, kStackChannels> means{0.2074, 0.1290, 0.1396, 0.1470};
  std::array<double, kStackChannels> stds{0.2110, 0.1629, 0.1620, 0.1626};

  void validate() const;
};

struct Image2D {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;  // row-major [y][x]

  float at(std::size_t y, std::size_t x) const noexcept { return data[y * width + x]; }
};

/// Four-channel MIP image for one breast, channel order post1, sub1, sub2,
/// subLast, stored channel-major then row-major ([c][y][x]).
struct MipStack {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> channels;
  Side side = Side::Left;
  bool normalized = false;
  NormConstants norm;  // constants used when normalized
  std::array<double, kStackChannels> channel_min{};
  std::array<double, kStackChannels> channel_max{};
  std::string patient_id;
  std::vector<std::string> sources;
  std::size_t window_start = 0;
  Side low_x_side = Side::Right;

  std::size_t plane() const noexcept { return height * width; }
  std::span<float> channel(std::size_t c) noexcept { return {channels.data() + c * plane(), plane()}; }
  std::span<const float> channel(std::size_t c) const noexcept {
    return {channels.data() + c * plane(), plane()};
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return channels[c * plane() + y * width + x];
  }

  nlohmann::json metadata() const;
  TensorBlob to_blob() const;
  static MipStack from_blob(const TensorBlob& blob);
};

/// Geometric standardization parameters for building stacks.
struct StackConfig {
  Spacing3 spacing{0.7, 0.7, 3.0};
  Dims3 shape{512, 512, 32};
  std::size_t row_window = 256;
  /// Which patient side the low-x half of the RAS image is labeled as.
  Side low_x_side = Side::Right;
};

PhaseSet select_phases(const Study& study);

/// Multiplies by the mask thresholded at 0.5. Masks on a different grid are
/// mapped by nearest neighbour through world coordinates; voxels that fall
/// outside the mask grid are treated as outside the mask.
Volume apply_mask(const Volume& v, const Volume& mask);

/// max(post - pre, 0) voxelwise.
Volume subtract_clamped(const Volume& post, const Volume& pre);

/// Maximum along z; the result has height ny and width nx.
Image2D mip_z(const Volume& v);

/// reorient -> resample -> crop/pad with the given interpolation.
Volume standardize(const Volume& v, const StackConfig& cfg, Interp interp);

/// Builds the unnormalized stacks for both sides in one pass: {left, right}.
std::array<MipStack, 2> build_stacks(const Study& study, const StackConfig& cfg);
MipStack build_stack(const Study& study, Side side, const StackConfig& cfg);

/// Per channel: min-max rescale to [0, 1] (constant channels become 0), then
/// (x - mean) / std. Records the min/max used so the step can be inverted.
MipStack normalize_stack(const MipStack& m, const NormConstants& nc);
MipStack denormalize_stack(const MipStack& m);

}  // namespace mipcls
