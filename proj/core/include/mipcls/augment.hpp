#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

#include "mipcls/mipbuild.hpp"

namespace mipcls {

/// Probabilities and magnitude ranges for the 2D augmentation chain.
/// Transforms run in this order, each drawing from its own RNG stream
/// (seed, index): hflip, vflip, rotate, affine, brightness/contrast,
/// gaussian noise, gaussian blur, coarse dropout.
struct AugmentPolicy {
  double hflip_p = 0.0;
  double vflip_p = 0.0;

  double rotate_p = 0.0;
  double rotate_max_deg = 0.0;

  double affine_p = 0.0;
  double scale_min = 1.0;
  double scale_max = 1.0;
  double shear_max_deg = 0.0;
  double translate_frac = 0.0;

  double brightness_contrast_p = 0.0;
  double brightness_delta = 0.0;
  double contrast_delta = 0.0;

  double noise_p = 0.0;
  double noise_sigma_max = 0.0;

  double blur_p = 0.0;
  double blur_sigma_max = 0.0;

  double dropout_p = 0.0;
  std::uint32_t dropout_max_holes = 0;
  std::uint32_t dropout_max_size = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const AugmentPolicy& p);
void from_json(const nlohmann::json& j, AugmentPolicy& p);

AugmentPolicy default_policy();

struct AugmentResult {
  MipStack stack;
  nlohmann::json applied = nlohmann::json::array();  // [{"name": ..., params...}]
};

/// Pure function of (m, seed, policy). Geometric transforms use identical
/// parameters for all four channels.
AugmentResult augment(const MipStack& m, std::uint64_t seed, const AugmentPolicy& policy);

/// Pixel value coarse dropout writes into channel c.
float dropout_fill(const MipStack& m, std::size_t c);

}  // namespace mipcls
