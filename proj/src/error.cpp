#include "cspo/error.hpp"

#include "cspo/component.hpp"

namespace cspo {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kSchema: return "SchemaViolation";
    case ErrorCode::kUnrecoverableStructure: return "UnrecoverableStructure";
    case ErrorCode::kGroupTooSmall: return "GroupTooSmall";
    case ErrorCode::kEmptyComponentSpan: return "EmptyComponentSpan";
    case ErrorCode::kExternalToolUnavailable: return "ExternalToolUnavailable";
    case ErrorCode::kJudgeUnreachable: return "JudgeUnreachable";
    case ErrorCode::kJudgeReplyUnparseable: return "JudgeReplyUnparseable";
    case ErrorCode::kInternal: return "InternalError";
  }
  return "InternalError";
}

namespace {
constexpr std::array<std::string_view, kNumKinds> kNames = {
    "pkg", "cap", "struct", "cell_app", "align", "vline", "hline", "other", "global",
};
}  // namespace

std::string_view component_name(ComponentKind kind) noexcept {
  return kNames[index_of(kind)];
}

std::optional<ComponentKind> component_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<ComponentKind>(i);
  }
  return std::nullopt;
}

}  // namespace cspo
