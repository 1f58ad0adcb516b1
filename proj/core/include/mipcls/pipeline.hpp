#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mipcls/classhead.hpp"
#include "mipcls/config.hpp"
#include "mipcls/evalkit.hpp"
#include "mipcls/manifest.hpp"
#include "mipcls/mipbuild.hpp"

namespace mipcls {

enum class Weighting { Natural, Inverse };

std::string_view to_string(Weighting w) noexcept;
Weighting parse_weighting(std::string_view s);

/// Outcome of a command that can fail per item without aborting.
struct CommandReport {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> errors;

  int exit_code() const noexcept { return errors.empty() ? 0 : 1; }
};

/// Loads the volumes referenced by a manifest row. Labels are not read.
Study load_study(const Manifest& manifest, const std::string& patient);

/// "<patient>_<side>.mct"
std::string stack_file_name(const std::string& patient, Side side);

/// Builds, normalizes and writes one stack blob per breast. Studies that
/// fail are reported and skipped; the rest complete.
CommandReport preprocess(const Manifest& manifest, const PipelineConfig& cfg, const std::filesystem::path& out_dir,
                         unsigned jobs = 1);

/// Stratifies patients by max(label_left, label_right) and writes folds.json.
FoldPlan split(const Manifest& manifest, int k, std::uint64_t seed, const std::filesystem::path& out_file);

/// Trains one head per fold (or only `fold`) from the training patients'
/// stacks. Writes "<weighting>_fold<f>_W.mct", "_b.mct" and a JSON record
/// "<weighting>_fold<f>.json". Only training patients' labels are read.
CommandReport train(const Manifest& manifest, const FoldPlan& folds, const std::filesystem::path& blobs_dir,
                    const PipelineConfig& cfg, Weighting weighting, const std::filesystem::path& out_dir,
                    std::optional<int> fold = std::nullopt);

struct LoadedModel {
  std::string model_id;
  std::optional<int> fold;
  std::size_t feature_grid = 4;
  HeadParams params;
};

std::vector<LoadedModel> load_models(const std::filesystem::path& models_dir);
void save_model(const LoadedModel& model, const nlohmann::json& record, const std::filesystem::path& out_dir);

/// Writes "<model_id>.csv" per model. With folds, each fold model scores its
/// validation patients only; otherwise every stack in blobs_dir.
CommandReport predict(const std::filesystem::path& models_dir, const std::filesystem::path& blobs_dir,
                      const std::optional<FoldPlan>& folds, const std::filesystem::path& out_dir);

/// Metrics for a prediction list against manifest labels.
MetricsReport evaluate_predictions(std::span<const Prediction> preds, const Manifest& manifest);

CommandReport evaluate(const std::filesystem::path& predictions, const Manifest& manifest,
                       const std::filesystem::path& out_file);

/// Averages the listed prediction CSVs per (patient, side), writes
/// ensemble.csv and, when a manifest is given, ensemble_metrics.json.
CommandReport ensemble(std::span<const std::filesystem::path> inputs, const Manifest* manifest,
                       const std::filesystem::path& out_dir);

/// Writes "<stem>_before.mct" and "<stem>_after.mct" (plus sidecars listing
/// the applied transforms).
CommandReport augment_preview(const std::filesystem::path& blob, std::uint64_t seed, const PipelineConfig& cfg,
                              const std::filesystem::path& out_dir);

}  // namespace mipcls
