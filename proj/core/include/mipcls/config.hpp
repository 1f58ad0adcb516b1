#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "mipcls/augment.hpp"
#include "mipcls/classhead.hpp"
#include "mipcls/mipbuild.hpp"

namespace mipcls {

/// Every pipeline parameter. Defaults reproduce the published setup: 0.7 x
/// 0.7 x 3 mm spacing, 512 x 512 x 32 grid, 256-row window, the published
/// channel statistics, 300 epochs at batch 10 with lr 1e-4, 5 warm-up
/// epochs and 5 folds.
struct PipelineConfig {
  StackConfig stack;
  NormConstants norm;
  AugmentPolicy augment = default_policy();
  /// Augmented copies of each training stack added per fold (0 disables).
  std::size_t augment_copies = 2;
  std::size_t feature_grid = 4;
  TrainConfig train;
  int k = 5;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);
};

}  // namespace mipcls
