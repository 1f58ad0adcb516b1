#include "mipcls/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <set>
#include <sstream>

#include "io_util.hpp"
#include "mipcls/error.hpp"
#include "mipcls/rng.hpp"

namespace mipcls {

LesionClass max_label(LesionClass left, LesionClass right) noexcept {
  return class_index(left) >= class_index(right) ? left : right;
}

// ---------------------------------------------------------------------------
// Folds

std::vector<std::string> FoldPlan::validation_patients(int fold) const {
  std::vector<std::string> out;
  for (const auto& [p, f] : fold_of) {
    if (f == fold) out.push_back(p);
  }
  return out;
}

std::vector<std::string> FoldPlan::training_patients(int fold) const {
  std::vector<std::string> out;
  for (const auto& [p, f] : fold_of) {
    if (f != fold) out.push_back(p);
  }
  return out;
}

void FoldPlan::validate() const {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "k must be >= 2");
  std::map<LesionClass, std::vector<std::size_t>> per_class;
  for (const auto& [p, f] : fold_of) {
    if (f < 0 || f >= k) throw Error(ErrorCode::InvalidArgument, "patient " + p + " has fold out of range");
    auto it = strat_label.find(p);
    if (it == strat_label.end()) throw Error(ErrorCode::InvalidArgument, "patient " + p + " has no strat label");
    auto& counts = per_class[it->second];
    counts.resize(static_cast<std::size_t>(k), 0);
    ++counts[static_cast<std::size_t>(f)];
  }
  if (strat_label.size() != fold_of.size()) throw Error(ErrorCode::InvalidArgument, "labels and folds disagree");
  for (const auto& [cls, counts] : per_class) {
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    if (*hi - *lo > 1) throw Error(ErrorCode::InvalidArgument, "fold class counts differ by more than one");
  }
}

nlohmann::json FoldPlan::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [p, f] : fold_of) {
    rows.push_back({{"patient_id", p}, {"fold", f}, {"label", std::string(to_string(strat_label.at(p)))}});
  }
  return {{"k", k}, {"seed", seed}, {"patients", rows}};
}

FoldPlan FoldPlan::from_json(const nlohmann::json& j) {
  FoldPlan plan;
  try {
    plan.k = j.at("k").get<int>();
    plan.seed = j.value("seed", std::uint64_t{0});
    for (const auto& row : j.at("patients")) {
      const auto id = row.at("patient_id").get<std::string>();
      plan.fold_of[id] = row.at("fold").get<int>();
      plan.strat_label[id] = parse_lesion_class(row.at("label").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("bad folds file: ") + e.what());
  }
  plan.validate();
  return plan;
}

FoldPlan stratified_kfold(std::span<const std::string> patients, std::span<const LesionClass> labels, int k,
                          std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "k must be >= 2");
  if (patients.size() != labels.size()) throw Error(ErrorCode::DimMismatch, "patients and labels differ in length");
  if (patients.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::TooFewPatients, "need at least k patients");
  }
  std::set<std::string> seen;
  std::array<std::vector<std::string>, kNumClasses> by_class;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    if (!seen.insert(patients[i]).second) throw Error(ErrorCode::InvalidArgument, "duplicate patient " + patients[i]);
    by_class[static_cast<std::size_t>(class_index(labels[i]))].push_back(patients[i]);
  }

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  std::size_t deal = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& group = by_class[static_cast<std::size_t>(c)];
    // Sort first so the result does not depend on input order.
    std::sort(group.begin(), group.end());
    CounterRng rng(seed, static_cast<std::uint64_t>(c));
    for (std::size_t i = group.size(); i > 1; --i) std::swap(group[i - 1], group[rng.below(i)]);
    for (const auto& p : group) {
      plan.fold_of[p] = static_cast<int>(deal % static_cast<std::size_t>(k));
      plan.strat_label[p] = static_cast<LesionClass>(c);
      ++deal;
    }
  }
  plan.validate();
  return plan;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

struct Counts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

Counts count_binary(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::DimMismatch, "scores and labels differ in length");
  Counts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error(ErrorCode::InvalidArgument, "non-finite score");
    (labels[i] ? c.pos : c.neg) += 1;
  }
  if (c.pos == 0 || c.neg == 0) throw Error(ErrorCode::DegenerateLabels, "both classes must be present");
  return c;
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return idx;
}

// Invokes visit(tp, fp) for every distinct-score threshold from high to low.
template <typename Visit>
void sweep_thresholds(std::span<const double> scores, std::span<const std::uint8_t> labels, Visit visit) {
  const auto idx = order_by_score(scores, true);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] ? tp : fp) += 1;
      ++j;
    }
    visit(tp, fp);
    i = j;
  }
}

constexpr double kFloorSlack = 1e-12;

void flatten(std::span<const Probs> probs, std::span<const int> truths, std::vector<double>& scores,
             std::vector<std::uint8_t>& labels) {
  if (probs.size() != truths.size()) throw Error(ErrorCode::DimMismatch, "probs and truths differ in length");
  scores.clear();
  labels.clear();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    for (int c = 0; c < kNumClasses; ++c) {
      scores.push_back(probs[i][c]);
      labels.push_back(truths[i] == c ? 1 : 0);
    }
  }
}

BinaryMetrics binary_metrics(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  return {roc_auc(scores, labels), sens_at_spec(scores, labels, 0.9), spec_at_sens(scores, labels, 0.9)};
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const Counts n = count_binary(scores, labels);
  const auto idx = order_by_score(scores, false);
  double concordant = 0.0, ties = 0.0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i, pos_g = 0, neg_g = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] ? pos_g : neg_g) += 1;
      ++j;
    }
    concordant += static_cast<double>(pos_g) * static_cast<double>(neg_below);
    ties += static_cast<double>(pos_g) * static_cast<double>(neg_g);
    neg_below += neg_g;
    i = j;
  }
  return (concordant + 0.5 * ties) / (static_cast<double>(n.pos) * static_cast<double>(n.neg));
}

double roc_auc_micro(std::span<const Probs> probs, std::span<const int> truths) {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  flatten(probs, truths, scores, labels);
  return roc_auc(scores, labels);
}

double sens_at_spec(std::span<const double> scores, std::span<const std::uint8_t> labels, double spec_floor) {
  const Counts n = count_binary(scores, labels);
  double best = 0.0;
  sweep_thresholds(scores, labels, [&](std::size_t tp, std::size_t fp) {
    const double spec = static_cast<double>(n.neg - fp) / static_cast<double>(n.neg);
    if (spec >= spec_floor - kFloorSlack) best = std::max(best, static_cast<double>(tp) / static_cast<double>(n.pos));
  });
  return best;
}

double spec_at_sens(std::span<const double> scores, std::span<const std::uint8_t> labels, double sens_floor) {
  const Counts n = count_binary(scores, labels);
  // All-negative threshold: sensitivity 0, specificity 1.
  double best = sens_floor <= kFloorSlack ? 1.0 : 0.0;
  sweep_thresholds(scores, labels, [&](std::size_t tp, std::size_t fp) {
    const double sens = static_cast<double>(tp) / static_cast<double>(n.pos);
    if (sens >= sens_floor - kFloorSlack) {
      best = std::max(best, static_cast<double>(n.neg - fp) / static_cast<double>(n.neg));
    }
  });
  return best;
}

double overall_score(double auc, double sens, double spec) noexcept { return (auc + sens + spec) / 3.0; }

Confusion confusion(std::span<const Probs> probs, std::span<const int> truths) {
  if (probs.size() != truths.size()) throw Error(ErrorCode::DimMismatch, "probs and truths differ in length");
  Confusion m{};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (truths[i] < 0 || truths[i] >= kNumClasses) throw Error(ErrorCode::InvalidArgument, "label out of range");
    ++m[static_cast<std::size_t>(truths[i])][static_cast<std::size_t>(argmax(probs[i]))];
  }
  return m;
}

Probs ensemble_probs(std::span<const Prediction> members) {
  if (members.empty()) throw Error(ErrorCode::EmptyGroup, "cannot ensemble an empty group");
  Probs mean{0.0, 0.0, 0.0};
  for (const auto& m : members) {
    for (int c = 0; c < kNumClasses; ++c) mean[c] += m.probs[c];
  }
  for (double& v : mean) v /= static_cast<double>(members.size());
  return mean;
}

std::vector<Prediction> ensemble(std::span<const Prediction> preds, const std::string& model_id) {
  std::map<std::pair<std::string, int>, std::vector<Prediction>> groups;
  for (const auto& p : preds) groups[{p.patient_id, p.side == Side::Left ? 0 : 1}].push_back(p);
  std::vector<Prediction> out;
  out.reserve(groups.size());
  for (const auto& [key, members] : groups) {
    out.push_back({key.first, key.second == 0 ? Side::Left : Side::Right, ensemble_probs(members), model_id});
  }
  return out;
}

MetricsReport evaluate(std::span<const Probs> probs, std::span<const int> truths) {
  if (probs.size() != truths.size()) throw Error(ErrorCode::DimMismatch, "probs and truths differ in length");
  MetricsReport r;
  r.n = probs.size();
  r.auc = roc_auc_micro(probs, truths);

  std::vector<double> scores(probs.size());
  std::vector<std::uint8_t> labels(probs.size());
  for (int c = 0; c < kNumClasses; ++c) {
    for (std::size_t i = 0; i < probs.size(); ++i) {
      scores[i] = probs[i][c];
      labels[i] = truths[i] == c ? 1 : 0;
    }
    try {
      r.per_class[static_cast<std::size_t>(c)] = binary_metrics(scores, labels);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateLabels) throw;
    }
  }
  const auto& malignant = r.per_class[static_cast<std::size_t>(LesionClass::Malignant)];
  if (!malignant) throw Error(ErrorCode::DegenerateLabels, "malignant-vs-rest needs both classes present");
  r.sens_at_90spec = malignant->sens_at_90spec;
  r.spec_at_90sens = malignant->spec_at_90sens;
  r.score = overall_score(r.auc, r.sens_at_90spec, r.spec_at_90sens);

  std::vector<double> flat_scores;
  std::vector<std::uint8_t> flat_labels;
  flatten(probs, truths, flat_scores, flat_labels);
  r.micro = BinaryMetrics{r.auc, sens_at_spec(flat_scores, flat_labels, 0.9), spec_at_sens(flat_scores, flat_labels, 0.9)};

  r.confusion = confusion(probs, truths);
  std::size_t correct = 0;
  for (int c = 0; c < kNumClasses; ++c) correct += r.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
  r.accuracy = r.n ? static_cast<double>(correct) / static_cast<double>(r.n) : 0.0;
  return r;
}

nlohmann::json MetricsReport::to_json() const {
  auto binary = [](const std::optional<BinaryMetrics>& m) -> nlohmann::json {
    if (!m) return nullptr;
    return {{"auc", m->auc}, {"sens_at_90spec", m->sens_at_90spec}, {"spec_at_90sens", m->spec_at_90sens}};
  };
  nlohmann::json classes;
  for (int c = 0; c < kNumClasses; ++c) {
    classes[std::string(to_string(static_cast<LesionClass>(c)))] = binary(per_class[static_cast<std::size_t>(c)]);
  }
  return {{"n", n},
          {"auc", auc},
          {"sens_at_90spec", sens_at_90spec},
          {"spec_at_90sens", spec_at_90sens},
          {"score", score},
          {"accuracy", accuracy},
          {"confusion", confusion},
          {"confusion_axes", {{"rows", "truth"}, {"cols", "argmax prediction"},
                              {"order", {"no_lesion", "benign", "malignant"}}}},
          {"binary_task", "malignant_vs_rest"},
          {"per_class", classes},
          {"micro", binary(micro)}};
}

// ---------------------------------------------------------------------------
// Predictions CSV

namespace {
constexpr const char* kPredictionHeader = "patient_id,side,p_nolesion,p_benign,p_malignant,model_id";

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_prob(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::SchemaMismatch, "bad probability '" + s + "'");
  }
  return v;
}
}  // namespace

std::string predictions_to_csv(std::span<const Prediction> preds) {
  std::ostringstream os;
  os << kPredictionHeader << '\n';
  char buf[64];
  for (const auto& p : preds) {
    os << p.patient_id << ',' << to_string(p.side);
    for (double v : p.probs) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      os << ',' << buf;
    }
    os << ',' << p.model_id << '\n';
  }
  return os.str();
}

std::vector<Prediction> predictions_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || split_commas(line) != split_commas(kPredictionHeader)) {
    throw Error(ErrorCode::SchemaMismatch, "predictions CSV header mismatch");
  }
  std::vector<Prediction> out;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_commas(line);
    if (f.size() != 6) throw Error(ErrorCode::SchemaMismatch, "predictions row needs 6 fields");
    Prediction p;
    p.patient_id = f[0];
    try {
      p.side = parse_side(f[1]);
    } catch (const Error&) {
      throw Error(ErrorCode::SchemaMismatch, "bad side '" + f[1] + "'");
    }
    double sum = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      p.probs[c] = parse_prob(f[2 + static_cast<std::size_t>(c)]);
      if (p.probs[c] < 0.0) throw Error(ErrorCode::SchemaMismatch, "negative probability");
      sum += p.probs[c];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::SchemaMismatch, "probabilities do not sum to 1");
    p.model_id = f[5];
    out.push_back(std::move(p));
  }
  return out;
}

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> preds) {
  detail::write_text_atomic(path, predictions_to_csv(preds));
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  return predictions_from_csv(std::string(bytes.begin(), bytes.end()));
}

}  // namespace mipcls
