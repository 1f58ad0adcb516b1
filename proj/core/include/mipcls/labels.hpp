#pragma once

#include <string>
#include <string_view>

namespace mipcls {

/// Ordinal lesion class: NoLesion < Benign < Malignant.
enum class LesionClass : int { NoLesion = 0, Benign = 1, Malignant = 2 };

inline constexpr int kNumClasses = 3;

enum class Side { Left, Right };

std::string_view to_string(LesionClass c) noexcept;
std::string_view to_string(Side s) noexcept;

/// Accepts "no_lesion", "benign", "malignant" (also "0", "1", "2").
LesionClass parse_lesion_class(std::string_view s);
Side parse_side(std::string_view s);

inline int class_index(LesionClass c) noexcept { return static_cast<int>(c); }

}  // namespace mipcls
