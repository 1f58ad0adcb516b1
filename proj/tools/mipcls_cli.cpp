// mipcls: command line front end for the MIP classification pipeline.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#if __has_include("CLI11.hpp")
#include "CLI11.hpp"
#else
#include <CLI/CLI.hpp>
#endif
#include "mipcls/error.hpp"
#include "mipcls/phantom.hpp"
#include "mipcls/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mipcls;

namespace {

PipelineConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  PipelineConfig cfg = path.empty() ? PipelineConfig{} : PipelineConfig::load(path);
  if (seed) {
    cfg.seed = *seed;
    cfg.train.seed = *seed;
  }
  cfg.validate();
  return cfg;
}

int report(const CommandReport& r, const char* what) {
  for (const auto& e : r.errors) std::cerr << "error: " << e << "\n";
  std::cout << what << ": " << r.written.size() << " file(s) written, " << r.errors.size() << " error(s)\n";
  return r.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mask-guided multi-channel MIP classification pipeline"};
  app.require_subcommand(1);

  std::string manifest_path, config_path, out, folds_path, blobs_dir, models_dir, predictions, input, weighting = "natural";
  std::vector<std::string> inputs;
  std::optional<std::uint64_t> seed;
  std::optional<int> fold, k;
  unsigned jobs = 1;
  std::size_t n = 30;

  auto* phantom = app.add_subcommand("phantom", "Generate synthetic DCE studies and a manifest");
  phantom->add_option("--n", n, "Number of studies")->check(CLI::PositiveNumber);
  phantom->add_option("--seed", seed, "Generator seed");
  phantom->add_option("--out", out, "Output directory")->required();

  auto* pre = app.add_subcommand("preprocess", "Build normalized 4-channel MIP stacks per breast");
  pre->add_option("--manifest", manifest_path, "Manifest CSV")->required()->check(CLI::ExistingFile);
  pre->add_option("--config", config_path, "Pipeline config (JSON)");
  pre->add_option("--out", out, "Output directory for stacks")->required();
  pre->add_option("--jobs", jobs, "Parallel studies")->check(CLI::PositiveNumber);
  pre->add_option("--seed", seed, "Global seed");

  auto* split_cmd = app.add_subcommand("split", "Stratified patient-level k-fold split");
  split_cmd->add_option("--manifest", manifest_path, "Manifest CSV")->required()->check(CLI::ExistingFile);
  split_cmd->add_option("--config", config_path, "Pipeline config (JSON)");
  split_cmd->add_option("--k", k, "Number of folds");
  split_cmd->add_option("--seed", seed, "Shuffle seed");
  split_cmd->add_option("--out", out, "Output folds.json path")->required();

  auto* train_cmd = app.add_subcommand("train", "Train one classification head per fold");
  train_cmd->add_option("--manifest", manifest_path, "Manifest CSV")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--folds", folds_path, "folds.json")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--blobs", blobs_dir, "Directory of stacks")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--config", config_path, "Pipeline config (JSON)");
  train_cmd->add_option("--weighting", weighting, "natural | inverse")->check(CLI::IsMember({"natural", "inverse"}));
  train_cmd->add_option("--fold", fold, "Train a single fold");
  train_cmd->add_option("--seed", seed, "Training seed");
  train_cmd->add_option("--out", out, "Model directory")->required();

  auto* predict_cmd = app.add_subcommand("predict", "Write a predictions CSV per model");
  predict_cmd->add_option("--models", models_dir, "Model directory")->required()->check(CLI::ExistingDirectory);
  predict_cmd->add_option("--blobs", blobs_dir, "Directory of stacks")->required()->check(CLI::ExistingDirectory);
  predict_cmd->add_option("--folds", folds_path, "Score only each fold model's validation patients");
  predict_cmd->add_option("--out", out, "Output directory")->required();

  auto* eval_cmd = app.add_subcommand("evaluate", "Compute metrics for a predictions CSV");
  eval_cmd->add_option("--predictions", predictions, "Predictions CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--manifest", manifest_path, "Manifest CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", out, "Metrics JSON path")->required();

  auto* ens_cmd = app.add_subcommand("ensemble", "Average prediction CSVs and re-evaluate");
  ens_cmd->add_option("--inputs", inputs, "Prediction CSVs")->required()->expected(1, -1);
  ens_cmd->add_option("--manifest", manifest_path, "Manifest CSV for evaluation");
  ens_cmd->add_option("--out", out, "Output directory")->required();

  auto* aug_cmd = app.add_subcommand("augment-preview", "Write before/after stacks for one augmentation draw");
  aug_cmd->add_option("--input", input, "Stack blob (.mct)")->required()->check(CLI::ExistingFile);
  aug_cmd->add_option("--config", config_path, "Pipeline config (JSON)");
  aug_cmd->add_option("--seed", seed, "Augmentation seed");
  aug_cmd->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*phantom) {
      const auto entries = write_phantom_set(out, n, seed.value_or(0));
      std::cout << "phantom: " << entries.size() << " studies written to " << out << "\n";
      return 0;
    }
    if (*pre) {
      const auto cfg = load_config(config_path, seed);
      return report(preprocess(Manifest::load(manifest_path), cfg, out, jobs), "preprocess");
    }
    if (*split_cmd) {
      const auto cfg = load_config(config_path, seed);
      const FoldPlan plan = split(Manifest::load(manifest_path), k.value_or(cfg.k), cfg.seed, out);
      std::cout << "split: " << plan.fold_of.size() << " patients into " << plan.k << " folds\n";
      return 0;
    }
    if (*train_cmd) {
      const auto cfg = load_config(config_path, seed);
      const FoldPlan plan = FoldPlan::from_json(nlohmann::json::parse(std::ifstream(folds_path)));
      return report(train(Manifest::load(manifest_path), plan, blobs_dir, cfg, parse_weighting(weighting), out, fold),
                    "train");
    }
    if (*predict_cmd) {
      std::optional<FoldPlan> plan;
      if (!folds_path.empty()) plan = FoldPlan::from_json(nlohmann::json::parse(std::ifstream(folds_path)));
      return report(predict(models_dir, blobs_dir, plan, out), "predict");
    }
    if (*eval_cmd) {
      return report(evaluate(predictions, Manifest::load(manifest_path), out), "evaluate");
    }
    if (*ens_cmd) {
      std::vector<fs::path> paths(inputs.begin(), inputs.end());
      std::optional<Manifest> manifest;
      if (!manifest_path.empty()) manifest = Manifest::load(manifest_path);
      return report(ensemble(paths, manifest ? &*manifest : nullptr, out), "ensemble");
    }
    if (*aug_cmd) {
      const auto cfg = load_config(config_path, std::nullopt);
      return report(augment_preview(input, seed.value_or(0), cfg, out), "augment-preview");
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
