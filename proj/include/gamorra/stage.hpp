#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace gamorra {

// Pipeline stages in model order. The hull shader slot also carries the
// patch constant function; CS is the optional compute regressor.
enum class Stage : std::uint8_t { kIA, kVS, kHS, kTess, kDS, kGS, kRas, kPS, kOM, kCS };

inline constexpr std::size_t kStageCount = 10;
inline constexpr std::size_t kGraphicsStageCount = 9;

inline constexpr std::array<Stage, kStageCount> kAllStages = {
    Stage::kIA, Stage::kVS, Stage::kHS, Stage::kTess, Stage::kDS,
    Stage::kGS, Stage::kRas, Stage::kPS, Stage::kOM, Stage::kCS};

constexpr std::size_t index_of(Stage s) noexcept { return static_cast<std::size_t>(s); }

constexpr std::string_view stage_name(Stage s) noexcept {
  constexpr std::array<std::string_view, kStageCount> names = {
      "ia", "vs", "hs", "tess", "ds", "gs", "ras", "ps", "om", "cs"};
  return names[index_of(s)];
}

inline std::optional<Stage> stage_from_name(std::string_view name) noexcept {
  for (Stage s : kAllStages) {
    if (stage_name(s) == name) return s;
  }
  return std::nullopt;
}

constexpr bool is_programmable(Stage s) noexcept {
  switch (s) {
    case Stage::kVS:
    case Stage::kHS:
    case Stage::kDS:
    case Stage::kGS:
    case Stage::kPS:
    case Stage::kCS:
      return true;
    default:
      return false;
  }
}

// Sampling and fragment-kill opcodes only exist in pixel shaders.
constexpr bool is_pixel_only_opcode(std::string_view op) noexcept {
  return op.starts_with("sample") || op.starts_with("discard") || op.starts_with("gather");
}

}  // namespace gamorra
