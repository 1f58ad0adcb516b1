#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mipcls/classhead.hpp"
#include "mipcls/labels.hpp"

namespace mipcls {

LesionClass max_label(LesionClass left, LesionClass right) noexcept;

/// Patient-level fold assignment.
struct FoldPlan {
  int k = 5;
  std::uint64_t seed = 0;
  std::map<std::string, int> fold_of;
  std::map<std::string, LesionClass> strat_label;

  std::vector<std::string> validation_patients(int fold) const;
  std::vector<std::string> training_patients(int fold) const;
  /// Partition and per-class balance checks; throws InvalidArgument.
  void validate() const;

  nlohmann::json to_json() const;
  static FoldPlan from_json(const nlohmann::json& j);
};

/// Within each label class (ascending), patients are shuffled with
/// CounterRng(seed, class) and dealt round-robin to folds. The deal
/// position carries over between classes, so total fold sizes also differ
/// by at most one.
FoldPlan stratified_kfold(std::span<const std::string> patients, std::span<const LesionClass> labels,
                          int k = 5, std::uint64_t seed = 0);

/// Binary Mann-Whitney AUC: (concordant + ties / 2) / (pos * neg).
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// One-vs-rest flattening over (sample, class) pairs.
double roc_auc_micro(std::span<const Probs> probs, std::span<const int> truths);

/// Max sensitivity over thresholds (positive iff score >= t) whose
/// specificity is at least spec_floor. The all-negative threshold always
/// qualifies, so the result is 0 when nothing else does.
double sens_at_spec(std::span<const double> scores, std::span<const std::uint8_t> labels, double spec_floor = 0.9);
/// Max specificity over thresholds whose sensitivity is at least sens_floor.
double spec_at_sens(std::span<const double> scores, std::span<const std::uint8_t> labels, double sens_floor = 0.9);

double overall_score(double auc, double sens, double spec) noexcept;

using Confusion = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;

/// counts[truth][argmax(pred)], ties toward the lower class index.
Confusion confusion(std::span<const Probs> probs, std::span<const int> truths);

struct Prediction {
  std::string patient_id;
  Side side = Side::Left;
  Probs probs{};
  std::string model_id;
};

/// Arithmetic mean of the members' probabilities. Throws EmptyGroup.
Probs ensemble_probs(std::span<const Prediction> members);

/// Groups by (patient, side) and averages; output sorted by patient then
/// side (left first) with the given model id.
std::vector<Prediction> ensemble(std::span<const Prediction> preds, const std::string& model_id = "ensemble");

struct BinaryMetrics {
  double auc = 0.0;
  double sens_at_90spec = 0.0;
  double spec_at_90sens = 0.0;
};

struct MetricsReport {
  double auc = 0.0;             // micro one-vs-rest
  double sens_at_90spec = 0.0;  // malignant vs rest
  double spec_at_90sens = 0.0;  // malignant vs rest
  double score = 0.0;
  Confusion confusion{};
  std::size_t n = 0;
  double accuracy = 0.0;
  std::array<std::optional<BinaryMetrics>, kNumClasses> per_class;  // one-vs-rest
  std::optional<BinaryMetrics> micro;  // sens/spec on flattened pairs

  nlohmann::json to_json() const;
};

MetricsReport evaluate(std::span<const Probs> probs, std::span<const int> truths);

// Predictions CSV: patient_id,side,p_nolesion,p_benign,p_malignant,model_id
std::string predictions_to_csv(std::span<const Prediction> preds);
std::vector<Prediction> predictions_from_csv(const std::string& text);
void write_predictions(const std::filesystem::path& path, std::span<const Prediction> preds);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

}  // namespace mipcls
