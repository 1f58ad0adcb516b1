#include "mipcls/manifest.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "io_util.hpp"
#include "mipcls/error.hpp"

namespace mipcls {

namespace {

constexpr std::array<const char*, 6> kColumns{"patient_id", "pre_path",   "post_paths",
                                              "mask_path",  "label_left", "label_right"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Minimal RFC 4180 field splitting: quoted fields may contain commas and "".
std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (quoted) throw Error(ErrorCode::ManifestParse, "line " + std::to_string(lineno) + ": unterminated quote");
  out.push_back(trim(cur));
  return out;
}

std::vector<std::string> split_semicolons(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ';')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  return out + "\"";
}

}  // namespace

Manifest Manifest::parse(const std::string& raw, const std::filesystem::path& base_dir) {
  std::string text = raw;
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);

  Manifest m;
  m.base_dir_ = base_dir;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  std::array<std::size_t, kColumns.size()> col{};
  bool have_header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line, lineno);
    if (!have_header) {
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        auto it = std::find(fields.begin(), fields.end(), kColumns[c]);
        if (it == fields.end()) {
          throw Error(ErrorCode::ManifestParse, std::string("header is missing column '") + kColumns[c] + "'");
        }
        col[c] = static_cast<std::size_t>(it - fields.begin());
      }
      have_header = true;
      continue;
    }
    auto where = [&] { return "line " + std::to_string(lineno) + ": "; };
    for (std::size_t c : col) {
      if (c >= fields.size()) throw Error(ErrorCode::ManifestParse, where() + "too few fields");
    }
    ManifestEntry e;
    e.patient_id = fields[col[0]];
    e.pre_path = fields[col[1]];
    e.post_paths = split_semicolons(fields[col[2]]);
    if (!fields[col[3]].empty()) e.mask_path = fields[col[3]];
    if (e.patient_id.empty()) throw Error(ErrorCode::ManifestParse, where() + "empty patient_id");
    if (e.post_paths.size() < 2) throw Error(ErrorCode::ManifestParse, where() + "need >= 2 post-contrast paths");
    try {
      e.label_left = parse_lesion_class(fields[col[4]]);
      e.label_right = parse_lesion_class(fields[col[5]]);
    } catch (const Error& err) {
      throw Error(ErrorCode::ManifestParse, where() + err.what());
    }
    if (m.rows_.contains(e.patient_id)) {
      throw Error(ErrorCode::ManifestParse, where() + "duplicate patient_id " + e.patient_id);
    }
    m.ids_.push_back(e.patient_id);
    m.rows_.emplace(e.patient_id, std::move(e));
  }
  if (!have_header) throw Error(ErrorCode::ManifestParse, "manifest has no header");
  return m;
}

Manifest Manifest::load(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = detail::read_file_bytes(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ManifestParse, e.what());
  }
  return parse(std::string(bytes.begin(), bytes.end()), path.parent_path());
}

const ManifestEntry& Manifest::row(const std::string& patient) const {
  auto it = rows_.find(patient);
  if (it == rows_.end()) throw Error(ErrorCode::InvalidArgument, "unknown patient " + patient);
  return it->second;
}

const std::string& Manifest::pre_path(const std::string& patient) const { return row(patient).pre_path; }
const std::vector<std::string>& Manifest::post_paths(const std::string& patient) const {
  return row(patient).post_paths;
}
const std::optional<std::string>& Manifest::mask_path(const std::string& patient) const {
  return row(patient).mask_path;
}

LesionClass Manifest::label(const std::string& patient, Side side) const {
  const auto& r = row(patient);
  if (observer_) observer_(patient, side);
  return side == Side::Left ? r.label_left : r.label_right;
}

std::filesystem::path Manifest::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir_.empty()) return p;
  return base_dir_ / p;
}

std::string Manifest::to_csv(const std::vector<ManifestEntry>& entries) {
  std::ostringstream os;
  os << "patient_id,pre_path,post_paths,mask_path,label_left,label_right\n";
  for (const auto& e : entries) {
    std::string posts;
    for (std::size_t i = 0; i < e.post_paths.size(); ++i) posts += (i ? ";" : "") + e.post_paths[i];
    os << quote_if_needed(e.patient_id) << ',' << quote_if_needed(e.pre_path) << ',' << quote_if_needed(posts)
       << ',' << quote_if_needed(e.mask_path.value_or("")) << ',' << to_string(e.label_left) << ','
       << to_string(e.label_right) << '\n';
  }
  return os.str();
}

}  // namespace mipcls
