#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cspo {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kConfig,
  kSchema,
  kUnrecoverableStructure,
  kGroupTooSmall,
  kEmptyComponentSpan,
  kExternalToolUnavailable,
  kJudgeUnreachable,
  kJudgeReplyUnparseable,
  kInternal,
};

/// Stable identifier used in CLI output and across the C boundary,
/// e.g. "GroupTooSmall".
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Judge replies that could not be turned into a verdict keep the raw text.
class JudgeReplyError : public Error {
 public:
  JudgeReplyError(const std::string& message, std::string raw_reply)
      : Error(ErrorCode::kJudgeReplyUnparseable, message),
        raw_reply_(std::move(raw_reply)) {}

  const std::string& raw_reply() const noexcept { return raw_reply_; }

 private:
  std::string raw_reply_;
};

}  // namespace cspo
