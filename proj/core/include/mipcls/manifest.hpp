#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mipcls/labels.hpp"

namespace mipcls {

/// One manifest row. Paths are kept exactly as written; resolve them with
/// Manifest::resolve.
struct ManifestEntry {
  std::string patient_id;
  std::string pre_path;
  std::vector<std::string> post_paths;
  std::optional<std::string> mask_path;
  LesionClass label_left = LesionClass::NoLesion;
  LesionClass label_right = LesionClass::NoLesion;
};

/// Study listing parsed from a CSV with header
/// patient_id,pre_path,post_paths,mask_path,label_left,label_right.
/// post_paths is ';'-separated; mask_path may be empty.
///
/// Labels are only reachable through label(), which reports every access to
/// an optional observer so callers can audit which patients' labels a
/// command looked at.
class Manifest {
 public:
  using LabelObserver = std::function<void(const std::string& patient, Side side)>;

  static Manifest parse(const std::string& text, const std::filesystem::path& base_dir = {});
  static Manifest load(const std::filesystem::path& path);

  const std::vector<std::string>& patient_ids() const noexcept { return ids_; }
  bool contains(const std::string& patient) const { return rows_.contains(patient); }

  const std::string& pre_path(const std::string& patient) const;
  const std::vector<std::string>& post_paths(const std::string& patient) const;
  const std::optional<std::string>& mask_path(const std::string& patient) const;

  LesionClass label(const std::string& patient, Side side) const;
  void set_label_observer(LabelObserver observer) { observer_ = std::move(observer); }

  std::filesystem::path resolve(const std::string& path) const;
  const std::filesystem::path& base_dir() const noexcept { return base_dir_; }

  static std::string to_csv(const std::vector<ManifestEntry>& entries);

 private:
  const ManifestEntry& row(const std::string& patient) const;

  std::vector<std::string> ids_;
  std::map<std::string, ManifestEntry> rows_;
  std::filesystem::path base_dir_;
  LabelObserver observer_;
};

}  // namespace mipcls
