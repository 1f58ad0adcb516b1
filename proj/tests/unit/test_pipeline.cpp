#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <set>

#include "mipcls/config.hpp"
#include "mipcls/error.hpp"
#include "mipcls/phantom.hpp"
#include "mipcls/pipeline.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mipcls;
namespace fs = std::filesystem;

namespace {

void expect_code(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

// Stacks on the phantom's native grid keep these tests fast.
PipelineConfig small_config() {
  PipelineConfig c;
  c.stack.spacing = {2.8, 2.8, 6.0};
  c.stack.shape = {128, 128, 16};
  c.stack.row_window = 64;
  c.train.epochs = 60;
  c.train.lr_max = 1e-3;
  c.augment_copies = 1;
  c.k = 3;
  return c;
}

std::set<fs::path> names_in(const fs::path& dir) {
  std::set<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) out.insert(e.path().filename());
  return out;
}

}  // namespace

TEST(Manifest, ParsesColumnsByName) {
  const std::string text =
      "\xEF\xBB\xBFlabel_right,patient_id,pre_path,post_paths,mask_path,label_left\n"
      "malignant,P1,a/pre.nii,\"a/p1.nii;a/p2.nii\",,benign\n"
      "0,P2,b/pre.nii,b/p1.nii;b/p2.nii;b/p3.nii,b/m.nii,2\n";
  const Manifest m = Manifest::parse(text, "/data");
  EXPECT_EQ(m.patient_ids(), (std::vector<std::string>{"P1", "P2"}));
  EXPECT_EQ(m.post_paths("P1").size(), 2u);
  EXPECT_EQ(m.post_paths("P2")[2], "b/p3.nii");
  EXPECT_FALSE(m.mask_path("P1").has_value());
  EXPECT_EQ(*m.mask_path("P2"), "b/m.nii");
  EXPECT_EQ(m.label("P1", Side::Left), LesionClass::Benign);
  EXPECT_EQ(m.label("P1", Side::Right), LesionClass::Malignant);
  EXPECT_EQ(m.label("P2", Side::Left), LesionClass::Malignant);
  EXPECT_EQ(m.resolve("a/pre.nii"), fs::path("/data/a/pre.nii"));
  EXPECT_EQ(m.resolve("/abs/x.nii"), fs::path("/abs/x.nii"));

  std::vector<std::pair<std::string, Side>> seen;
  Manifest audited = m;
  audited.set_label_observer([&](const std::string& p, Side s) { seen.emplace_back(p, s); });
  audited.label("P2", Side::Right);
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_EQ(seen[0].first, "P2");
}

TEST(Manifest, Errors) {
  const std::string header = "patient_id,pre_path,post_paths,mask_path,label_left,label_right\n";
  expect_code(ErrorCode::ManifestParse, [] { Manifest::parse("patient_id,pre_path\nP,a\n"); });
  expect_code(ErrorCode::ManifestParse, [&] { Manifest::parse(header + "P,a,b1,,0,0\n"); });
  expect_code(ErrorCode::ManifestParse, [&] { Manifest::parse(header + "P,a,b1;b2,,0,7\n"); });
  expect_code(ErrorCode::ManifestParse, [&] { Manifest::parse(header + "P,a,b1;b2,,0,0\nP,a,b1;b2,,0,0\n"); });
  expect_code(ErrorCode::ManifestParse, [&] { Manifest::parse(header + "P,a,b1;b2,,0\n"); });
}

TEST(Config, DefaultsAreThePublishedSetup) {
  const PipelineConfig c;
  EXPECT_EQ(c.stack.spacing, (Spacing3{0.7, 0.7, 3.0}));
  EXPECT_EQ(c.stack.shape, (Dims3{512, 512, 32}));
  EXPECT_EQ(c.stack.row_window, 256u);
  EXPECT_EQ(c.norm.means, (std::array<double, 4>{0.2074, 0.1290, 0.1396, 0.1470}));
  EXPECT_EQ(c.norm.stds, (std::array<double, 4>{0.2110, 0.1629, 0.1620, 0.1626}));
  EXPECT_EQ(c.train.epochs, 300);
  EXPECT_EQ(c.train.batch, 10u);
  EXPECT_EQ(c.train.lr_max, 1e-4);
  EXPECT_EQ(c.train.warmup_epochs, 5);
  EXPECT_EQ(c.k, 5);
  EXPECT_EQ(PipelineConfig::from_json(nlohmann::json::object()).to_json(), c.to_json());
}

TEST(Config, PartialOverridesAndErrors) {
  const auto c = PipelineConfig::from_json(nlohmann::json::parse(R"({"train": {"lr_max": 0.001}, "k": 3})"));
  EXPECT_EQ(c.train.lr_max, 1e-3);
  EXPECT_EQ(c.train.epochs, 300);
  EXPECT_EQ(c.k, 3);
  EXPECT_EQ(PipelineConfig::from_json(c.to_json()).to_json(), c.to_json());
  expect_code(ErrorCode::SchemaMismatch, [] { PipelineConfig::from_json(nlohmann::json::parse(R"({"k": "five"})")); });
  EXPECT_THROW(PipelineConfig::from_json(nlohmann::json::parse(R"({"k": 1})")).validate(), Error);

  testutil::TempDir dir("cfg");
  {
    std::ofstream out(dir / "c.json");
    out << "{\n  // comments are allowed\n  \"seed\": 12\n}\n";
  }
  EXPECT_EQ(PipelineConfig::load(dir / "c.json").seed, 12u);
}

TEST(Phantom, SingleStudyFiles) {
  testutil::TempDir dir("ph1");
  const auto entries = write_phantom_set(dir.path(), 1, 0);
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_GE(entries[0].post_paths.size(), 2u);
  EXPECT_LE(entries[0].post_paths.size(), 7u);
  EXPECT_TRUE(fs::exists(dir / entries[0].pre_path));
  EXPECT_TRUE(fs::exists(dir / *entries[0].mask_path));
  const Manifest m = Manifest::load(dir / "manifest.csv");
  EXPECT_EQ(m.patient_ids(), std::vector<std::string>{"P0000"});
  const Volume pre = read_nifti(m.resolve(m.pre_path("P0000")));
  EXPECT_EQ(pre.orientation(), "LPS");
}

TEST(Phantom, KineticsCurves) {
  for (int n = 2; n <= 7; ++n) {
    EXPECT_GT(lesion_enhancement(LesionClass::Malignant, 100, 1, n), lesion_enhancement(LesionClass::Malignant, 100, n, n));
    EXPECT_LT(lesion_enhancement(LesionClass::Benign, 100, 1, n), lesion_enhancement(LesionClass::Benign, 100, n, n));
    for (int t = 2; t <= n; ++t)
      EXPECT_GT(lesion_enhancement(LesionClass::Benign, 100, t, n), lesion_enhancement(LesionClass::Benign, 100, t - 1, n));
    EXPECT_EQ(lesion_enhancement(LesionClass::NoLesion, 100, 1, n), 0.0);
  }
}

class PipelineFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testutil::TempDir("pipe");
    write_phantom_set(dir_->path() / "data", 6, 11);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static fs::path data() { return dir_->path() / "data"; }
  static fs::path scratch(const std::string& name) { return dir_->path() / name; }
  static testutil::TempDir* dir_;
};
testutil::TempDir* PipelineFixture::dir_ = nullptr;

TEST_F(PipelineFixture, PreprocessWritesBlobsIdempotently) {
  const Manifest full = Manifest::load(data() / "manifest.csv");
  // Two-patient manifest.
  std::vector<ManifestEntry> two;
  for (const std::string pid : {"P0000", "P0001"}) {
    ManifestEntry e;
    e.patient_id = pid;
    e.pre_path = full.pre_path(pid);
    e.post_paths = full.post_paths(pid);
    e.mask_path = full.mask_path(pid);
    two.push_back(e);
  }
  const Manifest m = Manifest::parse(Manifest::to_csv(two), data());
  const PipelineConfig cfg = small_config();
  const CommandReport r1 = preprocess(m, cfg, scratch("pp1"));
  EXPECT_EQ(r1.exit_code(), 0);
  const auto names = names_in(scratch("pp1"));
  for (const char* n : {"P0000_left.mct", "P0000_right.mct", "P0001_left.mct", "P0001_right.mct"})
    EXPECT_TRUE(names.contains(n)) << n;
  const CommandReport r2 = preprocess(m, cfg, scratch("pp2"), 2);
  for (const auto& n : names_in(scratch("pp1")))
    EXPECT_EQ(testutil::slurp(scratch("pp1") / n), testutil::slurp(scratch("pp2") / n)) << n;

  const MipStack s = MipStack::from_blob(read_blob(scratch("pp1") / "P0000_left.mct"));
  EXPECT_TRUE(s.normalized);
  EXPECT_EQ(s.height, 64u);
  EXPECT_EQ(s.width, 64u);
  EXPECT_EQ(s.sources.front(), full.pre_path("P0000"));
}

TEST_F(PipelineFixture, MissingFileIsSkippedAndReported) {
  const Manifest full = Manifest::load(data() / "manifest.csv");
  std::vector<ManifestEntry> rows;
  for (const std::string pid : {"P0002", "P0003"}) {
    ManifestEntry e;
    e.patient_id = pid;
    e.pre_path = full.pre_path(pid);
    e.post_paths = full.post_paths(pid);
    rows.push_back(e);
  }
  rows[0].post_paths[0] = "does/not/exist.nii.gz";
  const CommandReport r = preprocess(Manifest::parse(Manifest::to_csv(rows), data()), small_config(), scratch("pp3"));
  EXPECT_EQ(r.exit_code(), 1);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_NE(r.errors[0].find("P0002"), std::string::npos);
  EXPECT_TRUE(fs::exists(scratch("pp3") / "P0003_left.mct"));
  EXPECT_FALSE(fs::exists(scratch("pp3") / "P0002_left.mct"));
}

TEST_F(PipelineFixture, SplitMatchesDirectCallAndIsDeterministic) {
  const Manifest m = Manifest::load(data() / "manifest.csv");
  const FoldPlan a = split(m, 3, 5, scratch("folds_a.json"));
  split(m, 3, 5, scratch("folds_b.json"));
  EXPECT_EQ(testutil::slurp(scratch("folds_a.json")), testutil::slurp(scratch("folds_b.json")));

  std::vector<LesionClass> labels;
  for (const auto& p : m.patient_ids()) labels.push_back(max_label(m.label(p, Side::Left), m.label(p, Side::Right)));
  EXPECT_EQ(stratified_kfold(m.patient_ids(), labels, 3, 5).fold_of, a.fold_of);
  expect_code(ErrorCode::TooFewPatients, [&] { split(m, 7, 5, scratch("folds_c.json")); });
}

TEST_F(PipelineFixture, TrainReadsOnlyTrainingLabels) {
  Manifest m = Manifest::load(data() / "manifest.csv");
  const PipelineConfig cfg = small_config();
  ASSERT_EQ(preprocess(m, cfg, scratch("blobs")).exit_code(), 0);
  const FoldPlan plan = split(m, 3, 1, scratch("folds.json"));

  for (int f = 0; f < 3; ++f) {
    std::set<std::string> touched;
    m.set_label_observer([&](const std::string& p, Side) { touched.insert(p); });
    const CommandReport r = train(m, plan, scratch("blobs"), cfg, Weighting::Inverse, scratch("models"), f);
    m.set_label_observer(nullptr);
    EXPECT_EQ(r.exit_code(), 0);
    for (const auto& p : plan.validation_patients(f)) EXPECT_FALSE(touched.contains(p)) << p;

    // Weights come from training-fold counts, read here without the observer.
    const Manifest plain = Manifest::load(data() / "manifest.csv");
    std::array<std::size_t, 3> counts{0, 0, 0};
    for (const auto& p : plan.training_patients(f))
      for (Side s : {Side::Left, Side::Right}) ++counts[static_cast<std::size_t>(class_index(plain.label(p, s)))];
    const auto rec = nlohmann::json::parse(testutil::slurp_text(scratch("models") / ("inverse_fold" + std::to_string(f) + ".json")));
    EXPECT_EQ(rec["class_counts"].get<std::vector<std::size_t>>(), std::vector<std::size_t>(counts.begin(), counts.end()));
    const ClassWeights cw = class_weights(counts);
    for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(rec["class_weights"][c].get<double>(), cw.w[c]);
  }
}

TEST_F(PipelineFixture, TrainPredictEnsembleEvaluateDeterministic) {
  const Manifest m = Manifest::load(data() / "manifest.csv");
  const PipelineConfig cfg = small_config();
  if (!fs::exists(scratch("blobs") / "P0005_right.mct")) ASSERT_EQ(preprocess(m, cfg, scratch("blobs")).exit_code(), 0);
  const FoldPlan plan = split(m, 3, 1, scratch("folds2.json"));

  for (const std::string run : {"r1", "r2"}) {
    const fs::path models = scratch(run + "_models"), preds = scratch(run + "_preds");
    ASSERT_EQ(train(m, plan, scratch("blobs"), cfg, Weighting::Natural, models).exit_code(), 0);
    ASSERT_EQ(train(m, plan, scratch("blobs"), cfg, Weighting::Inverse, models).exit_code(), 0);
    EXPECT_EQ(load_models(models).size(), 6u);
    ASSERT_EQ(predict(models, scratch("blobs"), plan, preds).exit_code(), 0);
    std::vector<fs::path> inputs;
    for (const auto& n : names_in(preds)) inputs.push_back(preds / n);
    ASSERT_EQ(inputs.size(), 6u);
    ASSERT_EQ(ensemble(inputs, &m, scratch(run + "_ens")).exit_code(), 0);
    ASSERT_EQ(evaluate(scratch(run + "_ens") / "ensemble.csv", m, scratch(run + "_ens") / "metrics.json").exit_code(), 0);
  }
  for (const std::string sub : {"_models", "_preds", "_ens"})
    for (const auto& n : names_in(scratch("r1" + sub)))
      EXPECT_EQ(testutil::slurp(scratch("r1" + sub) / n), testutil::slurp(scratch("r2" + sub) / n)) << n;

  // Fold models only score their own validation patients.
  const auto p0 = read_predictions(scratch("r1_preds") / "natural_fold0.csv");
  EXPECT_EQ(p0.size(), 2 * plan.validation_patients(0).size());
  for (const auto& p : p0) EXPECT_EQ(plan.fold_of.at(p.patient_id), 0);
  const auto ens = read_predictions(scratch("r1_ens") / "ensemble.csv");
  EXPECT_EQ(ens.size(), 12u);
}

TEST_F(PipelineFixture, EnsembleOfOneModelWithItselfKeepsMetrics) {
  const Manifest m = Manifest::load(data() / "manifest.csv");
  std::vector<Prediction> preds;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (const auto& p : m.patient_ids())
    for (Side s : {Side::Left, Side::Right}) {
      Probs pr{u(rng), u(rng), u(rng)};
      const double sum = pr[0] + pr[1] + pr[2];
      for (auto& v : pr) v /= sum;
      preds.push_back({p, s, pr, "solo"});
    }
  write_predictions(scratch("solo.csv"), preds);
  const std::vector<fs::path> inputs{scratch("solo.csv"), scratch("solo.csv")};
  ASSERT_EQ(ensemble(inputs, &m, scratch("solo_ens")).exit_code(), 0);
  ASSERT_EQ(evaluate(scratch("solo.csv"), m, scratch("solo_metrics.json")).exit_code(), 0);
  const auto a = nlohmann::json::parse(testutil::slurp_text(scratch("solo_metrics.json")));
  const auto b = nlohmann::json::parse(testutil::slurp_text(scratch("solo_ens") / "ensemble_metrics.json"));
  EXPECT_EQ(a, b);

  // The reported AUC equals the pair-count oracle on the flattened pairs.
  std::vector<double> flat;
  std::vector<int> lab;
  for (const auto& p : preds)
    for (int c = 0; c < 3; ++c) {
      flat.push_back(p.probs[c]);
      lab.push_back(class_index(m.label(p.patient_id, p.side)) == c);
    }
  EXPECT_NEAR(a["auc"].get<double>(), oracle::auc_pairs(flat, lab), 1e-12);
}

TEST_F(PipelineFixture, MissingBlobAndAugmentPreview) {
  const Manifest m = Manifest::load(data() / "manifest.csv");
  const FoldPlan plan = split(m, 3, 1, scratch("folds3.json"));
  fs::create_directories(scratch("empty_blobs"));
  expect_code(ErrorCode::MissingBlob, [&] {
    train(m, plan, scratch("empty_blobs"), small_config(), Weighting::Natural, scratch("m_missing"), 0);
  });

  const PipelineConfig cfg = small_config();
  if (!fs::exists(scratch("blobs") / "P0000_left.mct")) ASSERT_EQ(preprocess(m, cfg, scratch("blobs")).exit_code(), 0);
  const CommandReport r = augment_preview(scratch("blobs") / "P0000_left.mct", 9, cfg, scratch("preview"));
  EXPECT_EQ(r.exit_code(), 0);
  EXPECT_TRUE(fs::exists(scratch("preview") / "P0000_left_before.mct"));
  const TensorBlob after = read_blob(scratch("preview") / "P0000_left_after.mct");
  EXPECT_TRUE(after.meta.contains("augment"));
}
