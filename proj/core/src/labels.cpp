#include "mipcls/labels.hpp"

#include <string>

#include "mipcls/error.hpp"

namespace mipcls {

std::string_view to_string(LesionClass c) noexcept {
  switch (c) {
    case LesionClass::NoLesion: return "no_lesion";
    case LesionClass::Benign: return "benign";
    case LesionClass::Malignant: return "malignant";
  }
  return "?";
}

std::string_view to_string(Side s) noexcept { return s == Side::Left ? "left" : "right"; }

LesionClass parse_lesion_class(std::string_view s) {
  if (s == "no_lesion" || s == "0") return LesionClass::NoLesion;
  if (s == "benign" || s == "1") return LesionClass::Benign;
  if (s == "malignant" || s == "2") return LesionClass::Malignant;
  throw Error(ErrorCode::InvalidArgument, "unknown lesion label '" + std::string(s) + "'");
}

Side parse_side(std::string_view s) {
  if (s == "left" || s == "L") return Side::Left;
  if (s == "right" || s == "R") return Side::Right;
  throw Error(ErrorCode::InvalidArgument, "unknown side '" + std::string(s) + "'");
}

}  // namespace mipcls
