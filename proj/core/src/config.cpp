#include "mipcls/config.hpp"

#include "io_util.hpp"
#include "mipcls/error.hpp"

namespace mipcls {

void PipelineConfig::validate() const {
  for (double s : stack.spacing) {
    if (!(s > 0.0)) throw Error(ErrorCode::InvalidArgument, "spacing must be > 0");
  }
  for (std::size_t d : stack.shape) {
    if (d < 1) throw Error(ErrorCode::InvalidArgument, "shape must be >= 1");
  }
  if (stack.row_window < 1) throw Error(ErrorCode::InvalidArgument, "row_window must be >= 1");
  if (stack.shape[0] < 2) throw Error(ErrorCode::InvalidArgument, "shape x must be >= 2 for the left/right split");
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "k must be >= 2");
  if (feature_grid < 1) throw Error(ErrorCode::InvalidArgument, "feature_grid must be >= 1");
  norm.validate();
  augment.validate();
  train.validate();
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"spacing", stack.spacing},
          {"shape", stack.shape},
          {"row_window", stack.row_window},
          {"low_x_side", std::string(to_string(stack.low_x_side))},
          {"norm_means", norm.means},
          {"norm_stds", norm.stds},
          {"augment", augment},
          {"augment_copies", augment_copies},
          {"feature_grid", feature_grid},
          {"train", train},
          {"k", k},
          {"seed", seed}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    c.stack.spacing = j.value("spacing", c.stack.spacing);
    c.stack.shape = j.value("shape", c.stack.shape);
    c.stack.row_window = j.value("row_window", c.stack.row_window);
    if (j.contains("low_x_side")) c.stack.low_x_side = parse_side(j.at("low_x_side").get<std::string>());
    c.norm.means = j.value("norm_means", c.norm.means);
    c.norm.stds = j.value("norm_stds", c.norm.stds);
    if (j.contains("augment")) j.at("augment").get_to(c.augment);
    c.augment_copies = j.value("augment_copies", c.augment_copies);
    c.feature_grid = j.value("feature_grid", c.feature_grid);
    if (j.contains("train")) j.at("train").get_to(c.train);
    c.k = j.value("k", c.k);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("bad config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, "cannot parse config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace mipcls
