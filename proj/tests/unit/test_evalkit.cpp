#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <functional>
#include <set>

#include "mipcls/error.hpp"
#include "mipcls/evalkit.hpp"
#include "oracles.hpp"

using namespace mipcls;

namespace {

std::vector<std::uint8_t> bytes(const std::vector<int>& v) { return {v.begin(), v.end()}; }

void expect_code(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

Probs random_simplex(std::mt19937_64& rng) {
  std::gamma_distribution<double> g(1.0, 1.0);
  Probs p{g(rng), g(rng), g(rng)};
  const double s = p[0] + p[1] + p[2];
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace

TEST(MaxLabel, Ordinal) {
  EXPECT_EQ(max_label(LesionClass::Benign, LesionClass::Malignant), LesionClass::Malignant);
  EXPECT_EQ(max_label(LesionClass::NoLesion, LesionClass::NoLesion), LesionClass::NoLesion);
  EXPECT_EQ(max_label(LesionClass::Malignant, LesionClass::NoLesion), LesionClass::Malignant);
}

TEST(StratifiedKfold, TwoBalancedClasses) {
  std::vector<std::string> ids;
  std::vector<LesionClass> labels;
  for (int i = 0; i < 10; ++i) {
    ids.push_back("p" + std::to_string(i));
    labels.push_back(i < 5 ? LesionClass::NoLesion : LesionClass::Malignant);
  }
  const FoldPlan plan = stratified_kfold(ids, labels, 5, 1);
  for (int f = 0; f < 5; ++f) {
    const auto val = plan.validation_patients(f);
    ASSERT_EQ(val.size(), 2u);
    int mal = 0;
    for (const auto& p : val) mal += plan.strat_label.at(p) == LesionClass::Malignant;
    EXPECT_EQ(mal, 1);
    EXPECT_EQ(plan.training_patients(f).size(), 8u);
  }
}

TEST(StratifiedKfold, PartitionBalanceDeterminism) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const int k = 2 + static_cast<int>(rng() % 6);
    const std::size_t n = static_cast<std::size_t>(k) + rng() % 60;
    std::vector<std::string> ids;
    std::vector<LesionClass> labels;
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back("id" + std::to_string(rng() % 1000000) + "_" + std::to_string(i));
      labels.push_back(static_cast<LesionClass>(rng() % 3));
    }
    const std::uint64_t seed = rng();
    const FoldPlan plan = stratified_kfold(ids, labels, k, seed);
    EXPECT_NO_THROW(plan.validate());
    std::multiset<std::string> seen;
    std::map<std::pair<int, int>, int> per_class;
    for (int f = 0; f < k; ++f) {
      for (const auto& p : plan.validation_patients(f)) {
        seen.insert(p);
        ++per_class[{static_cast<int>(plan.strat_label.at(p)), f}];
      }
      const auto train = plan.training_patients(f);
      for (const auto& p : plan.validation_patients(f))
        EXPECT_FALSE(std::binary_search(train.begin(), train.end(), p));
    }
    EXPECT_EQ(seen, std::multiset<std::string>(ids.begin(), ids.end()));
    for (int c = 0; c < 3; ++c) {
      int lo = 1 << 30, hi = 0;
      for (int f = 0; f < k; ++f) {
        const int v = per_class[{c, f}];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      EXPECT_LE(hi - lo, 1);
    }
    const FoldPlan again = stratified_kfold(ids, labels, k, seed);
    EXPECT_EQ(again.fold_of, plan.fold_of);
    EXPECT_EQ(FoldPlan::from_json(plan.to_json()).fold_of, plan.fold_of);
  }
}

TEST(StratifiedKfold, Errors) {
  const std::vector<std::string> ids{"a", "b", "c"};
  const std::vector<LesionClass> labels(3, LesionClass::Benign);
  expect_code(ErrorCode::TooFewPatients, [&] { stratified_kfold(ids, labels, 5, 0); });
  const std::vector<std::string> dup{"a", "a", "b"};
  expect_code(ErrorCode::InvalidArgument, [&] { stratified_kfold(dup, labels, 2, 0); });
}

TEST(RocAuc, HandCases) {
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, bytes({0, 0, 1, 1})), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, bytes({0, 1, 0, 1})), 0.5);
  EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, bytes({0, 0, 1, 1})), 0.0);
  expect_code(ErrorCode::DegenerateLabels, [] { roc_auc(std::vector<double>{0.1, 0.2}, bytes({1, 1})); });
}

TEST(RocAuc, MicroMatchesPairCount) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<Probs> probs;
    std::vector<int> truths;
    for (int i = 0; i < 200; ++i) {
      Probs p = random_simplex(rng);
      if (t % 2) for (auto& v : p) v = std::round(v * 10) / 10;  // force ties
      probs.push_back(p);
      truths.push_back(static_cast<int>(rng() % 3));
    }
    std::vector<double> flat;
    std::vector<int> lab;
    for (std::size_t i = 0; i < probs.size(); ++i)
      for (int c = 0; c < 3; ++c) {
        flat.push_back(probs[i][c]);
        lab.push_back(truths[i] == c);
      }
    EXPECT_NEAR(roc_auc_micro(probs, truths), oracle::auc_pairs(flat, lab), 1e-9);
  }
}

TEST(SensSpec, SixPointHandCase) {
  const std::vector<double> s{0.1, 0.2, 0.3, 0.6, 0.8, 0.9};
  const auto y = bytes({0, 0, 1, 0, 1, 1});
  // Threshold 0.3 flags {0.3, 0.6, 0.8, 0.9}: sensitivity 1, specificity 2/3.
  EXPECT_DOUBLE_EQ(sens_at_spec(s, y, 2.0 / 3.0), 1.0);
  // Threshold 0.8: sensitivity 2/3, specificity 1.
  EXPECT_DOUBLE_EQ(spec_at_sens(s, y, 2.0 / 3.0), 1.0);
  // Strict floors: only threshold 0.8 reaches specificity 1.
  EXPECT_DOUBLE_EQ(sens_at_spec(s, y, 0.9), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(spec_at_sens(s, y, 0.9), 2.0 / 3.0);
}

TEST(SensSpec, PerfectInvertedAndOracle) {
  const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  EXPECT_EQ(sens_at_spec(s, bytes({0, 0, 1, 1})), 1.0);
  EXPECT_EQ(spec_at_sens(s, bytes({0, 0, 1, 1})), 1.0);
  EXPECT_EQ(sens_at_spec(s, bytes({1, 1, 0, 0})), 0.0);
  EXPECT_EQ(spec_at_sens(s, bytes({1, 1, 0, 0})), 0.0);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> sc;
    std::vector<int> lab;
    for (int i = 0; i < 60; ++i) {
      lab.push_back(static_cast<int>(rng() % 2));
      sc.push_back(std::round((u(rng) + 0.3 * lab.back()) * 20) / 20);
    }
    if (std::count(lab.begin(), lab.end(), 1) == 0 || std::count(lab.begin(), lab.end(), 0) == 0) continue;
    for (double floor : {0.5, 0.9, 0.95}) {
      EXPECT_DOUBLE_EQ(sens_at_spec(sc, bytes(lab), floor), oracle::sens_at_spec(sc, lab, floor));
      EXPECT_DOUBLE_EQ(spec_at_sens(sc, bytes(lab), floor), oracle::spec_at_sens(sc, lab, floor));
    }
    // Looser floors never give a worse answer.
    EXPECT_GE(sens_at_spec(sc, bytes(lab), 0.5), sens_at_spec(sc, bytes(lab), 0.9));
  }
}

TEST(OverallScore, PublishedRows) {
  const std::vector<std::array<double, 4>> rows{
      {0.8670, 0.6707, 0.5915, 0.7097}, {0.8072, 0.4939, 0.4054, 0.5688}, {0.9078, 0.7427, 0.7256, 0.7920},
      {0.8580, 0.5060, 0.6280, 0.6640}, {0.8769, 0.6890, 0.6311, 0.7323}, {0.7578, 0.3720, 0.3567, 0.4955},
      {0.8887, 0.7593, 0.5864, 0.7448}, {0.8551, 0.7222, 0.4599, 0.6791}, {0.8797, 0.7099, 0.64814, 0.7459},
      {0.8116, 0.5309, 0.4383, 0.5936}, {0.8610, 0.6201, 0.5678, 0.6830}};
  for (const auto& r : rows) EXPECT_NEAR(overall_score(r[0], r[1], r[2]), r[3], 5e-4);
  EXPECT_NEAR(overall_score(0.8610, 0.6201, 0.5678), 0.6830, 5e-5);
  EXPECT_EQ(overall_score(1, 1, 1), 1.0);
}

TEST(Confusion, HandTally) {
  const std::vector<Probs> p{{0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}, {0.4, 0.4, 0.2}, {0.2, 0.3, 0.5}, {0.1, 0.6, 0.3}};
  const std::vector<int> t{0, 1, 1, 2, 2};
  const Confusion c = confusion(p, t);
  const Confusion expected{{{1, 0, 0}, {1, 1, 0}, {0, 1, 1}}};
  EXPECT_EQ(c, expected);
  std::size_t total = 0;
  for (const auto& row : c) for (auto v : row) total += v;
  EXPECT_EQ(total, 5u);

  const Confusion diag = confusion(std::vector<Probs>{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, std::vector<int>{0, 1, 2});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(diag[i][j], i == j ? 1u : 0u);
}

TEST(Ensemble, MeansAndGrouping) {
  const std::vector<Prediction> preds{{"b", Side::Right, {0.2, 0.3, 0.5}, "m1"},
                                      {"a", Side::Left, {0.6, 0.2, 0.2}, "m1"},
                                      {"b", Side::Right, {0.4, 0.5, 0.1}, "m2"},
                                      {"b", Side::Left, {1, 0, 0}, "m2"}};
  const auto e = ensemble(preds, "ens");
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0].patient_id, "a");
  EXPECT_EQ(e[1].side, Side::Left);
  EXPECT_EQ(e[2].patient_id, "b");
  EXPECT_NEAR(e[2].probs[0], 0.3, 1e-15);
  EXPECT_NEAR(e[2].probs[1], 0.4, 1e-15);
  EXPECT_NEAR(e[2].probs[2], 0.3, 1e-15);
  EXPECT_EQ(e[2].model_id, "ens");
  expect_code(ErrorCode::EmptyGroup, [] { ensemble_probs({}); });

  // A model ensembled with itself changes nothing.
  const std::vector<Prediction> twice{preds[0], preds[0]};
  EXPECT_EQ(ensemble_probs(twice), preds[0].probs);
}

TEST(Evaluate, ReportFields) {
  std::mt19937_64 rng(5);
  std::vector<Probs> probs;
  std::vector<int> truths;
  for (int i = 0; i < 90; ++i) {
    truths.push_back(i % 3);
    Probs p = random_simplex(rng);
    p[i % 3] += 0.5;
    for (auto& v : p) v /= 1.5;
    probs.push_back(p);
  }
  const MetricsReport r = evaluate(probs, truths);
  EXPECT_EQ(r.n, 90u);
  EXPECT_NEAR(r.score, (r.auc + r.sens_at_90spec + r.spec_at_90sens) / 3, 1e-15);
  ASSERT_TRUE(r.per_class[2].has_value());
  EXPECT_EQ(r.sens_at_90spec, r.per_class[2]->sens_at_90spec);
  const auto j = r.to_json();
  EXPECT_EQ(j["binary_task"], "malignant_vs_rest");
  EXPECT_EQ(j["confusion"].size(), 3u);
}

TEST(PredictionsCsv, RoundTripAndSchema) {
  const std::vector<Prediction> preds{{"P1", Side::Left, {0.1, 0.2, 0.7}, "m"},
                                      {"P1", Side::Right, {1.0 / 3, 1.0 / 3, 1.0 / 3}, "m"}};
  const std::string csv = predictions_to_csv(preds);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "patient_id,side,p_nolesion,p_benign,p_malignant,model_id");
  const auto back = predictions_from_csv(csv);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].probs, preds[1].probs);
  EXPECT_EQ(back[1].side, Side::Right);
  expect_code(ErrorCode::SchemaMismatch, [] { predictions_from_csv("a,b\n1,2\n"); });
  expect_code(ErrorCode::SchemaMismatch, [] {
    predictions_from_csv("patient_id,side,p_nolesion,p_benign,p_malignant,model_id\nP,left,0.5,0.5,0.5,m\n");
  });
}
