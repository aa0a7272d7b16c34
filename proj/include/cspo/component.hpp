#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace cspo {

/// Functional slices of a LaTeX table sequence. The first seven are the
/// rewarded components; kOther collects tokens that match none of them and
/// kGlobal is the synthetic whole-sequence member used by the objective.
enum class ComponentKind : std::uint8_t {
  kPkg = 0,
  kCap,
  kStruct,
  kCellApp,
  kAlign,
  kVline,
  kHline,
  kOther,
  kGlobal,
};

inline constexpr std::size_t kNumRewarded = 7;
inline constexpr std::size_t kNumTokenKinds = 8;  // rewarded + other
inline constexpr std::size_t kNumKinds = 9;

inline constexpr std::array<ComponentKind, kNumRewarded> kRewardedComponents = {
    ComponentKind::kPkg,     ComponentKind::kCap,   ComponentKind::kStruct,
    ComponentKind::kCellApp, ComponentKind::kAlign, ComponentKind::kVline,
    ComponentKind::kHline,
};

inline constexpr std::array<ComponentKind, kNumTokenKinds> kTokenKinds = {
    ComponentKind::kPkg,     ComponentKind::kCap,   ComponentKind::kStruct,
    ComponentKind::kCellApp, ComponentKind::kAlign, ComponentKind::kVline,
    ComponentKind::kHline,   ComponentKind::kOther,
};

constexpr std::size_t index_of(ComponentKind kind) noexcept {
  return static_cast<std::size_t>(kind);
}

constexpr bool is_rewarded(ComponentKind kind) noexcept {
  return index_of(kind) < kNumRewarded;
}

/// "pkg", "cap", "struct", "cell_app", "align", "vline", "hline", "other",
/// "global".
std::string_view component_name(ComponentKind kind) noexcept;
std::optional<ComponentKind> component_from_name(std::string_view name) noexcept;

/// Fixed-size value per rewarded component, indexed by ComponentKind.
template <typename T>
using PerComponent = std::array<T, kNumRewarded>;

}  // namespace cspo
