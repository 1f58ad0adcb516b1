#include "mipcls/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <iostream>
#include <map>
#include <thread>

#include "io_util.hpp"
#include "mipcls/augment.hpp"
#include "mipcls/error.hpp"
#include "mipcls/rng.hpp"
#include "mipcls/tensorio.hpp"

namespace fs = std::filesystem;

namespace mipcls {

std::string_view to_string(Weighting w) noexcept { return w == Weighting::Natural ? "natural" : "inverse"; }

Weighting parse_weighting(std::string_view s) {
  if (s == "natural") return Weighting::Natural;
  if (s == "inverse") return Weighting::Inverse;
  throw Error(ErrorCode::InvalidArgument, "weighting must be 'natural' or 'inverse'");
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create directory " + dir.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { detail::write_text_atomic(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, "cannot parse " + path.string() + ": " + e.what());
  }
}

std::vector<fs::path> list_files(const fs::path& dir, const std::string& suffix) {
  std::vector<fs::path> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && detail::ends_with(entry.path().filename().string(), suffix)) {
      out.push_back(entry.path());
    }
  }
  if (ec) throw Error(ErrorCode::IoFailure, "cannot list " + dir.string());
  std::sort(out.begin(), out.end());
  return out;
}

MipStack load_stack(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingBlob, "missing stack " + path.string());
  return MipStack::from_blob(read_blob(path));
}

}  // namespace

std::string stack_file_name(const std::string& patient, Side side) {
  return patient + "_" + std::string(to_string(side)) + ".mct";
}

Study load_study(const Manifest& manifest, const std::string& patient) {
  Study s;
  s.patient_id = patient;
  const auto& pre = manifest.pre_path(patient);
  s.pre = std::make_shared<const Volume>(read_nifti(manifest.resolve(pre)));
  s.sources.push_back(pre);
  for (const auto& p : manifest.post_paths(patient)) {
    s.posts.push_back(std::make_shared<const Volume>(read_nifti(manifest.resolve(p))));
    s.sources.push_back(p);
  }
  if (const auto& mask = manifest.mask_path(patient)) {
    s.mask = std::make_shared<const Volume>(read_nifti(manifest.resolve(*mask)));
    s.sources.push_back(*mask);
  }
  return s;
}

CommandReport preprocess(const Manifest& manifest, const PipelineConfig& cfg, const fs::path& out_dir,
                         unsigned jobs) {
  cfg.validate();
  ensure_dir(out_dir);
  const auto& ids = manifest.patient_ids();
  std::vector<std::vector<fs::path>> written(ids.size());
  std::vector<std::string> errors(ids.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < ids.size(); i = next++) {
      try {
        const Study study = load_study(manifest, ids[i]);
        for (const MipStack& raw : build_stacks(study, cfg.stack)) {
          const MipStack m = normalize_stack(raw, cfg.norm);
          const fs::path path = out_dir / stack_file_name(m.patient_id, m.side);
          write_blob(m.to_blob(), path);
          written[i].push_back(path);
        }
      } catch (const std::exception& e) {
        errors[i] = ids[i] + ": " + e.what();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(ids.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  CommandReport report;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    report.written.insert(report.written.end(), written[i].begin(), written[i].end());
    if (!errors[i].empty()) report.errors.push_back(errors[i]);
  }
  nlohmann::json summary = {{"stacks_written", report.written.size()}, {"errors", report.errors}};
  write_json(out_dir / "preprocess_report.json", summary);
  return report;
}

FoldPlan split(const Manifest& manifest, int k, std::uint64_t seed, const fs::path& out_file) {
  std::vector<LesionClass> labels;
  for (const auto& p : manifest.patient_ids()) {
    labels.push_back(max_label(manifest.label(p, Side::Left), manifest.label(p, Side::Right)));
  }
  FoldPlan plan = stratified_kfold(manifest.patient_ids(), labels, k, seed);
  plan.validate();
  if (!out_file.empty()) {
    if (out_file.has_parent_path()) ensure_dir(out_file.parent_path());
    write_json(out_file, plan.to_json());
  }
  return plan;
}

void save_model(const LoadedModel& model, const nlohmann::json& record, const fs::path& out_dir) {
  std::vector<float> w(model.params.weight.begin(), model.params.weight.end());
  std::vector<float> b(model.params.bias.begin(), model.params.bias.end());
  write_blob(TensorBlob::from_f32({static_cast<std::uint32_t>(model.params.dim), kNumClasses}, w),
             out_dir / (model.model_id + "_W.mct"));
  write_blob(TensorBlob::from_f32({kNumClasses}, b), out_dir / (model.model_id + "_b.mct"));
  write_json(out_dir / (model.model_id + ".json"), record);
}

CommandReport train(const Manifest& manifest, const FoldPlan& folds, const fs::path& blobs_dir,
                    const PipelineConfig& cfg, Weighting weighting, const fs::path& out_dir, std::optional<int> fold) {
  cfg.validate();
  folds.validate();
  ensure_dir(out_dir);
  CommandReport report;
  std::vector<int> fold_ids;
  if (fold) {
    if (*fold < 0 || *fold >= folds.k) throw Error(ErrorCode::InvalidArgument, "fold out of range");
    fold_ids.push_back(*fold);
  } else {
    for (int f = 0; f < folds.k; ++f) fold_ids.push_back(f);
  }

  for (int f : fold_ids) {
    const auto patients = folds.training_patients(f);
    std::vector<FeatureVector> features;
    std::vector<int> labels;
    std::array<std::size_t, kNumClasses> counts{0, 0, 0};
    for (const auto& pid : patients) {
      if (!manifest.contains(pid)) throw Error(ErrorCode::SchemaMismatch, "fold patient " + pid + " not in manifest");
      for (Side side : {Side::Left, Side::Right}) {
        const MipStack stack = load_stack(blobs_dir / stack_file_name(pid, side));
        const int y = class_index(manifest.label(pid, side));
        ++counts[static_cast<std::size_t>(y)];
        features.push_back(extract_features(stack, cfg.feature_grid));
        labels.push_back(y);
        for (std::size_t copy = 1; copy <= cfg.augment_copies; ++copy) {
          const auto seed = sample_seed(cfg.seed, pid, to_string(side), copy);
          features.push_back(extract_features(augment(stack, seed, cfg.augment).stack, cfg.feature_grid));
          labels.push_back(y);
        }
      }
    }
    const ClassWeights cw = weighting == Weighting::Inverse ? class_weights(counts) : ClassWeights::uniform();
    TrainConfig tc = cfg.train;
    tc.seed = splitmix64(cfg.train.seed ^ static_cast<std::uint64_t>(f));
    const TrainResult result = train_head(features, labels, tc, cw);

    LoadedModel model{std::string(to_string(weighting)) + "_fold" + std::to_string(f), f, cfg.feature_grid,
                      result.params};
    nlohmann::json record = {{"model_id", model.model_id},
                             {"weighting", std::string(to_string(weighting))},
                             {"fold", f},
                             {"feature_grid", cfg.feature_grid},
                             {"feature_dim", result.params.dim},
                             {"train_config", tc},
                             {"augment_copies", cfg.augment_copies},
                             {"class_counts", counts},
                             {"class_weights", cw.w},
                             {"train_patients", patients},
                             {"n_samples", features.size()},
                             {"loss_trace", result.loss_trace}};
    save_model(model, record, out_dir);
    report.written.push_back(out_dir / (model.model_id + ".json"));
  }
  return report;
}

std::vector<LoadedModel> load_models(const fs::path& models_dir) {
  std::vector<LoadedModel> out;
  for (const auto& path : list_files(models_dir, ".json")) {
    const auto j = read_json(path);
    if (!j.is_object() || !j.contains("model_id")) continue;
    LoadedModel m;
    try {
      m.model_id = j.at("model_id").get<std::string>();
      if (j.contains("fold") && !j.at("fold").is_null()) m.fold = j.at("fold").get<int>();
      m.feature_grid = j.value("feature_grid", std::size_t{4});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaMismatch, "bad model record " + path.string() + ": " + e.what());
    }
    const TensorBlob w = read_blob(models_dir / (m.model_id + "_W.mct"));
    const TensorBlob b = read_blob(models_dir / (m.model_id + "_b.mct"));
    if (w.dims.size() != 2 || w.dims[1] != kNumClasses || b.dims != std::vector<std::uint32_t>{kNumClasses}) {
      throw Error(ErrorCode::SchemaMismatch, "model " + m.model_id + " has unexpected parameter shapes");
    }
    if (w.dims[0] != feature_dim(m.feature_grid)) {
      throw Error(ErrorCode::SchemaMismatch, "model " + m.model_id + " weight rows disagree with feature_grid");
    }
    m.params = HeadParams::zeros(w.dims[0]);
    const auto wv = w.as_f32();
    const auto bv = b.as_f32();
    std::copy(wv.begin(), wv.end(), m.params.weight.begin());
    std::copy(bv.begin(), bv.end(), m.params.bias.begin());
    out.push_back(std::move(m));
  }
  return out;
}

CommandReport predict(const fs::path& models_dir, const fs::path& blobs_dir, const std::optional<FoldPlan>& folds,
                      const fs::path& out_dir) {
  ensure_dir(out_dir);
  const auto models = load_models(models_dir);
  if (models.empty()) throw Error(ErrorCode::MissingBlob, "no models in " + models_dir.string());

  std::vector<MipStack> stacks;
  for (const auto& path : list_files(blobs_dir, ".mct")) stacks.push_back(load_stack(path));
  if (stacks.empty()) throw Error(ErrorCode::MissingBlob, "no stacks in " + blobs_dir.string());

  std::map<std::size_t, std::vector<FeatureVector>> features_by_grid;
  CommandReport report;
  for (const auto& model : models) {
    auto& feats = features_by_grid[model.feature_grid];
    if (feats.empty()) {
      for (const auto& s : stacks) feats.push_back(extract_features(s, model.feature_grid));
    }
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < stacks.size(); ++i) {
      if (folds && model.fold) {
        auto it = folds->fold_of.find(stacks[i].patient_id);
        if (it == folds->fold_of.end() || it->second != *model.fold) continue;
      }
      preds.push_back({stacks[i].patient_id, stacks[i].side, forward(feats[i], model.params), model.model_id});
    }
    const fs::path out = out_dir / (model.model_id + ".csv");
    write_predictions(out, preds);
    report.written.push_back(out);
  }
  return report;
}

MetricsReport evaluate_predictions(std::span<const Prediction> preds, const Manifest& manifest) {
  std::vector<Probs> probs;
  std::vector<int> truths;
  for (const auto& p : preds) {
    if (!manifest.contains(p.patient_id)) {
      throw Error(ErrorCode::SchemaMismatch, "prediction for unknown patient " + p.patient_id);
    }
    probs.push_back(p.probs);
    truths.push_back(class_index(manifest.label(p.patient_id, p.side)));
  }
  return evaluate(probs, truths);
}

CommandReport evaluate(const fs::path& predictions, const Manifest& manifest, const fs::path& out_file) {
  const auto preds = read_predictions(predictions);
  const MetricsReport r = evaluate_predictions(preds, manifest);
  if (out_file.has_parent_path()) ensure_dir(out_file.parent_path());
  write_json(out_file, r.to_json());
  return {{out_file}, {}};
}

CommandReport ensemble(std::span<const fs::path> inputs, const Manifest* manifest, const fs::path& out_dir) {
  if (inputs.empty()) throw Error(ErrorCode::EmptyGroup, "no prediction files to ensemble");
  ensure_dir(out_dir);
  std::vector<Prediction> all;
  for (const auto& in : inputs) {
    auto preds = read_predictions(in);
    all.insert(all.end(), preds.begin(), preds.end());
  }
  const auto merged = ensemble(all, "ensemble");
  CommandReport report;
  write_predictions(out_dir / "ensemble.csv", merged);
  report.written.push_back(out_dir / "ensemble.csv");
  if (manifest) {
    const MetricsReport r = evaluate_predictions(merged, *manifest);
    write_json(out_dir / "ensemble_metrics.json", r.to_json());
    report.written.push_back(out_dir / "ensemble_metrics.json");
  }
  return report;
}

CommandReport augment_preview(const fs::path& blob, std::uint64_t seed, const PipelineConfig& cfg,
                              const fs::path& out_dir) {
  ensure_dir(out_dir);
  const MipStack before = load_stack(blob);
  const AugmentResult after = augment(before, seed, cfg.augment);
  const std::string stem = blob.stem().string();

  TensorBlob b0 = before.to_blob();
  TensorBlob b1 = after.stack.to_blob();
  b1.meta["augment"] = {{"seed", seed}, {"policy", cfg.augment}, {"applied", after.applied}};
  CommandReport report;
  report.written = {out_dir / (stem + "_before.mct"), out_dir / (stem + "_after.mct")};
  write_blob(b0, report.written[0]);
  write_blob(b1, report.written[1]);
  return report;
}

}  // namespace mipcls
