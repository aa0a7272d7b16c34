#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cspo/component.hpp"
#include "cspo/tokenizer.hpp"

namespace cspo {

struct ComponentMap {
  std::vector<ComponentKind> assignment;  // one entry per token
  /// Half-open token-index ranges [first, last) per token kind, maximal runs.
  std::array<std::vector<std::pair<std::size_t, std::size_t>>, kNumTokenKinds> spans;
  std::array<std::size_t, kNumTokenKinds> counts{};

  std::size_t count(ComponentKind kind) const { return counts[index_of(kind)]; }
};

enum CellFlag : std::uint8_t {
  kBold = 1u << 0,
  kItalic = 1u << 1,
  kUnderline = 1u << 2,
  kMath = 1u << 3,
  kOtherMarkup = 1u << 4,
};

struct ColumnSpec {
  std::string align;  // "l", "c", "r", "p{3cm}", "X", ...
  int left_vlines = 0;
  int right_vlines = 0;

  bool operator==(const ColumnSpec&) const = default;
};

struct Cell {
  std::string content;
  std::uint8_t formatting = 0;  // CellFlag bits
  int colspan = 1;
  int rowspan = 1;
  std::optional<ColumnSpec> multicolumn_format;

  bool operator==(const Cell&) const = default;
};

struct HorizontalRule {
  std::size_t boundary = 0;  // number of rows above the rule
  std::string kind;          // "hline", "cline", "toprule", "midrule", ...
  bool full = true;
  int first_col = 0;  // 1-based inclusive range for partial rules
  int last_col = 0;

  bool operator==(const HorizontalRule&) const = default;
};

struct ParsedTable {
  std::vector<std::string> packages;
  std::optional<std::string> caption;
  std::vector<ColumnSpec> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<HorizontalRule> hlines;

  bool operator==(const ParsedTable&) const = default;
};

/// Width of a row after expanding \multicolumn spans.
int expanded_width(const std::vector<Cell>& row);

struct Diagnostic {
  std::string message;  // "unclosed environment", "unbalanced group", ...
  std::size_t token_index = 0;

  bool operator==(const Diagnostic&) const = default;
};

struct ParseResult {
  ParsedTable table;
  std::vector<Diagnostic> diagnostics;
};

/// Total, disjoint assignment of every token to one token kind.
ComponentMap decompose(const TokenSequence& tokens);

/// Best-effort table model. Throws Error(kUnrecoverableStructure) only when
/// no tabular-family environment exists anywhere in the input.
ParseResult parse_table(const TokenSequence& tokens);

struct ValidityVerdict {
  bool valid = true;
  std::vector<std::string> reasons;  // empty iff valid
};

/// Compile proxy: balanced environments and groups, rows within the declared
/// width, partial rules within bounds.
ValidityVerdict validate(const ParsedTable& table, const std::vector<Diagnostic>& diagnostics);

/// Everything derived from one source string. `table` is empty when the
/// input holds no tabular; `diagnostics` then carries "no tabular".
struct AnalyzedSource {
  TokenSequence tokens;
  ComponentMap map;
  std::optional<ParsedTable> table;
  std::vector<Diagnostic> diagnostics;
  std::vector<std::string> packages;  // available even without a tabular
  std::optional<std::string> caption;
};

AnalyzedSource analyze_source(std::string_view source);

/// Span report JSON text: {"tokens":[{"text","start","end","component"}],
/// "counts":{component:int}}.
std::string span_report_json(const TokenSequence& tokens, const ComponentMap& map);

}  // namespace cspo
