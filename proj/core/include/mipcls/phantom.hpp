#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mipcls/manifest.hpp"
#include "mipcls/mipbuild.hpp"

namespace mipcls {

/// Synthetic DCE studies with known lesion kinetics.
///
/// Each side holds a half-ellipsoid breast (the mask) over a chest-wall
/// slab. Lesions are small ellipsoids inside the breast whose post-contrast
/// enhancement follows a wash-out curve (malignant: peak at the first post
/// phase, then decay) or a progressive curve (benign: rises to the last
/// phase). Volumes are stored LPS-oriented so reorientation is exercised.
struct PhantomOptions {
  Dims3 dims{128, 128, 16};
  Spacing3 spacing{2.8, 2.8, 6.0};
  Side low_x_side = Side::Right;
  double noise_sigma = 2.0;
};

struct PhantomLesion {
  LesionClass label = LesionClass::NoLesion;
  std::array<double, 3> center{};  // RAS voxel coordinates
  std::array<double, 3> radius{};
  double amplitude = 0.0;
};

struct PhantomStudy {
  Study study;  // volumes + labels
  std::array<PhantomLesion, 2> lesions;  // {left, right}
};

/// Lesion enhancement above baseline at post phase t (1-based) of n phases.
double lesion_enhancement(LesionClass label, double amplitude, int t, int n);

/// Deterministic in (index, seed). Labels cycle so classes stay balanced.
PhantomStudy make_phantom_study(std::size_t index, std::uint64_t seed, const PhantomOptions& opt = {});

/// Writes n studies (NIfTI int16, gzip) under out_dir/<patient>/ plus
/// out_dir/manifest.csv with paths relative to out_dir.
std::vector<ManifestEntry> write_phantom_set(const std::filesystem::path& out_dir, std::size_t n, std::uint64_t seed,
                                             const PhantomOptions& opt = {});

}  // namespace mipcls
