#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cspo {

struct Token {
  std::string text;
  std::size_t begin = 0;  // byte offset into the source, inclusive
  std::size_t end = 0;    // exclusive
  std::size_t index = 0;

  bool operator==(const Token&) const = default;
};

/// Tokens over an owned copy of the source. Bytes between tokens are
/// whitespace; reconstruct() reproduces the source exactly.
struct TokenSequence {
  std::string source;
  std::vector<Token> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  const Token& operator[](std::size_t i) const { return tokens[i]; }

  /// Source bytes between token i-1 and token i (or before the first token).
  std::string_view gap_before(std::size_t i) const;
  std::string reconstruct() const;
};

/// Splits LaTeX into control sequences, braces, brackets, `&`, `\\`, `|`,
/// `$`, comments and whitespace-separated text runs. Inside a tabular or
/// \multicolumn column spec every non-space character is its own token,
/// except within width/insert groups such as p{..} or @{..}. Never fails.
TokenSequence tokenize(std::string_view source);

}  // namespace cspo
