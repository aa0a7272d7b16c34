#include <algorithm>

#include <gtest/gtest.h>

#include "cspo/error.hpp"
#include "cspo/table_parser.hpp"
#include "json.hpp"
#include "support/table_fixtures.hpp"

using namespace cspo;

namespace {

std::vector<std::string> texts(const TokenSequence& seq) {
  std::vector<std::string> out;
  for (const auto& t : seq.tokens) out.push_back(t.text);
  return out;
}

ComponentKind kind_of(const AnalyzedSource& a, std::string_view text, std::size_t occurrence = 0) {
  for (std::size_t i = 0; i < a.tokens.size(); ++i) {
    if (a.tokens[i].text == text && occurrence-- == 0) return a.map.assignment[i];
  }
  ADD_FAILURE() << "token not found: " << text;
  return ComponentKind::kOther;
}

void expect_partition(const TokenSequence& seq, const ComponentMap& map) {
  ASSERT_EQ(map.assignment.size(), seq.size());
  std::size_t total = 0;
  for (std::size_t k = 0; k < kNumTokenKinds; ++k) {
    const auto n = static_cast<std::size_t>(
        std::count(map.assignment.begin(), map.assignment.end(), static_cast<ComponentKind>(k)));
    EXPECT_EQ(map.counts[k], n);
    total += map.counts[k];
    std::size_t covered = 0;
    for (const auto& [a, b] : map.spans[k]) {
      for (std::size_t i = a; i < b; ++i) EXPECT_EQ(map.assignment[i], static_cast<ComponentKind>(k));
      covered += b - a;
    }
    EXPECT_EQ(covered, n);
  }
  EXPECT_EQ(total, seq.size());
  for (auto kind : map.assignment) EXPECT_NE(kind, ComponentKind::kGlobal);
}

}  // namespace

TEST(Tokenizer, EmptyInput) {
  const auto seq = tokenize("");
  EXPECT_TRUE(seq.empty());
  EXPECT_EQ(seq.reconstruct(), "");
}

TEST(Tokenizer, SingleControlSequence) {
  const auto seq = tokenize("\\hline");
  ASSERT_EQ(seq.size(), 1u);
  EXPECT_EQ(seq[0].text, "\\hline");
  EXPECT_EQ(seq[0].begin, 0u);
  EXPECT_EQ(seq[0].end, 6u);
}

TEST(Tokenizer, CellRowTrimsSpaces) {
  const std::string src = "A & B \\\\";
  const auto seq = tokenize(src);
  EXPECT_EQ(texts(seq), (std::vector<std::string>{"A", "&", "B", "\\\\"}));
  for (const auto& t : seq.tokens) EXPECT_EQ(src.substr(t.begin, t.end - t.begin), t.text);
  EXPECT_EQ(seq.reconstruct(), src);
}

TEST(Tokenizer, ColumnSpecSplitsPerCharacter) {
  const auto seq = tokenize("\\begin{tabular}{|l|p{3cm}|}");
  EXPECT_EQ(texts(seq), (std::vector<std::string>{"\\begin", "{", "tabular", "}", "{", "|", "l", "|", "p", "{",
                                                  "3cm", "}", "|", "}"}));
}

TEST(Tokenizer, RoundTripOnGeneratedCorpus) {
  fixtures::TableGenerator gen(11);
  for (int i = 0; i < 100; ++i) {
    const auto t = gen.table();
    EXPECT_EQ(tokenize(t).reconstruct(), t);
    const auto m = gen.malformed(t);
    EXPECT_EQ(tokenize(m).reconstruct(), m);
  }
}

TEST(Tokenizer, SpansStrictlyIncreasing) {
  const auto seq = tokenize(fixtures::kRichTable);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    EXPECT_LT(seq[i].begin, seq[i].end);
    EXPECT_EQ(seq[i].index, i);
    if (i) EXPECT_LE(seq[i - 1].end, seq[i].begin);
  }
}

TEST(Decompose, PackageTokensArePkg) {
  const auto a = analyze_source("\\usepackage{booktabs}");
  ASSERT_EQ(a.tokens.size(), 4u);
  for (auto k : a.map.assignment) EXPECT_EQ(k, ComponentKind::kPkg);
}

TEST(Decompose, ColumnSpecAlignVlineStruct) {
  const auto a = analyze_source("\\begin{tabular}{|l|c|} a & b \\\\ \\end{tabular}");
  EXPECT_EQ(kind_of(a, "l"), ComponentKind::kAlign);
  EXPECT_EQ(kind_of(a, "c"), ComponentKind::kAlign);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(kind_of(a, "|", i), ComponentKind::kVline);
  EXPECT_EQ(kind_of(a, "{", 1), ComponentKind::kStruct);
  EXPECT_EQ(kind_of(a, "}", 1), ComponentKind::kStruct);
}

TEST(Decompose, HlineInsideBody) {
  const auto a = analyze_source("\\begin{tabular}{c} \\hline x \\\\ \\end{tabular}");
  EXPECT_EQ(kind_of(a, "\\hline"), ComponentKind::kHline);
  EXPECT_EQ(a.map.count(ComponentKind::kHline), 1u);
}

TEST(Decompose, MergePrecedence) {
  const auto a = analyze_source("\\begin{tabular}{cc} \\multicolumn{2}{c}{\\textbf{X}} \\\\ \\end{tabular}");
  EXPECT_EQ(kind_of(a, "\\multicolumn"), ComponentKind::kStruct);
  EXPECT_EQ(kind_of(a, "2"), ComponentKind::kStruct);
  EXPECT_EQ(kind_of(a, "\\textbf"), ComponentKind::kCellApp);
  EXPECT_EQ(kind_of(a, "X"), ComponentKind::kCellApp);
}

TEST(Decompose, BooktabsAndCaption) {
  const auto a = analyze_source(
      "\\begin{table}\\caption{Main results}\\begin{tabular}{c}\\toprule x \\\\ \\midrule y \\\\ "
      "\\cmidrule(lr){1-1} \\bottomrule\\end{tabular}\\end{table}");
  EXPECT_EQ(kind_of(a, "Main"), ComponentKind::kCap);
  EXPECT_EQ(kind_of(a, "\\caption"), ComponentKind::kCap);
  EXPECT_EQ(kind_of(a, "\\toprule"), ComponentKind::kHline);
  EXPECT_EQ(kind_of(a, "\\cmidrule"), ComponentKind::kHline);
  EXPECT_EQ(kind_of(a, "(lr)"), ComponentKind::kHline);
  EXPECT_EQ(kind_of(a, "\\begin"), ComponentKind::kStruct);
}

TEST(Decompose, UnknownCommandIsOther) {
  const auto a = analyze_source("\\centering\\begin{tabular}{c} x \\\\ \\end{tabular}");
  EXPECT_EQ(kind_of(a, "\\centering"), ComponentKind::kOther);
}

TEST(Decompose, PartitionOnGeneratedCorpus) {
  fixtures::TableGenerator gen(5);
  for (int i = 0; i < 100; ++i) {
    const auto t = gen.table();
    const auto seq = tokenize(t);
    expect_partition(seq, decompose(seq));
    const auto m = gen.malformed(t);
    const auto mseq = tokenize(m);
    expect_partition(mseq, decompose(mseq));
  }
}

TEST(Decompose, Deterministic) {
  const auto a = analyze_source(fixtures::kRichTable);
  const auto b = analyze_source(fixtures::kRichTable);
  EXPECT_EQ(a.map.assignment, b.map.assignment);
  EXPECT_EQ(a.table, b.table);
}

TEST(Decompose, CellEditIsLocal) {
  const auto base = analyze_source(fixtures::kRichTable);
  for (const auto& [from, to] : std::vector<std::pair<std::string, std::string>>{
           {"80.4", "81.9"}, {"Base", "Baseline"}, {"Score", "Final score"}}) {
    auto src = fixtures::kRichTable;
    src.replace(src.find(from), from.size(), to);
    const auto edited = analyze_source(src);
    const auto extra = edited.tokens.size() - base.tokens.size();
    std::size_t i = 0;
    while (i < base.tokens.size() && base.tokens[i].text == edited.tokens[i].text) {
      EXPECT_EQ(base.map.assignment[i], edited.map.assignment[i]);
      ++i;
    }
    for (std::size_t k = i; k <= i + extra; ++k) EXPECT_EQ(edited.map.assignment[k], ComponentKind::kCellApp);
    for (std::size_t k = i + 1; k < base.tokens.size(); ++k) {
      EXPECT_EQ(base.map.assignment[k], edited.map.assignment[k + extra]);
    }
  }
}

TEST(ParseTable, MinimalTable) {
  const auto r = parse_table(tokenize(fixtures::kMinimalTable));
  ASSERT_EQ(r.table.columns.size(), 2u);
  EXPECT_EQ(r.table.columns[0].align, "l");
  EXPECT_EQ(r.table.columns[1].align, "c");
  ASSERT_EQ(r.table.rows.size(), 1u);
  ASSERT_EQ(r.table.rows[0].size(), 2u);
  EXPECT_EQ(r.table.rows[0][0].content, "A");
  EXPECT_EQ(r.table.rows[0][1].content, "B");
  EXPECT_TRUE(r.table.hlines.empty());
  EXPECT_TRUE(r.diagnostics.empty());
}

TEST(ParseTable, MulticolumnSpan) {
  const auto r = parse_table(tokenize("\\begin{tabular}{cc} \\multicolumn{2}{c}{X} \\\\ \\end{tabular}"));
  ASSERT_EQ(r.table.rows.size(), 1u);
  ASSERT_EQ(r.table.rows[0].size(), 1u);
  EXPECT_EQ(r.table.rows[0][0].colspan, 2);
  EXPECT_EQ(r.table.rows[0][0].content, "X");
  EXPECT_EQ(expanded_width(r.table.rows[0]), 2);
}

TEST(ParseTable, MissingEndIsDiagnosed) {
  const auto r = parse_table(tokenize("\\begin{tabular}{lc} A & B \\\\"));
  ASSERT_EQ(r.table.rows.size(), 1u);
  const bool found = std::any_of(r.diagnostics.begin(), r.diagnostics.end(),
                                 [](const Diagnostic& d) { return d.message == "unclosed environment"; });
  EXPECT_TRUE(found);
}

TEST(ParseTable, RichTableModel) {
  const auto r = parse_table(tokenize(fixtures::kRichTable));
  EXPECT_EQ(r.table.packages, std::vector<std::string>{"booktabs"});
  EXPECT_EQ(r.table.caption, "Accuracy by model");
  ASSERT_EQ(r.table.columns.size(), 3u);
  EXPECT_EQ(r.table.columns[0], (ColumnSpec{"l", 1, 1}));
  EXPECT_EQ(r.table.columns[2], (ColumnSpec{"r", 0, 1}));
  ASSERT_EQ(r.table.rows.size(), 3u);
  EXPECT_EQ(r.table.rows[0][0].colspan, 2);
  EXPECT_EQ(r.table.rows[1][1].formatting, kBold);
  EXPECT_EQ(r.table.rows[1][1].content, "71.2");
  ASSERT_EQ(r.table.hlines.size(), 3u);
  EXPECT_EQ(r.table.hlines[2].kind, "cline");
  EXPECT_EQ(r.table.hlines[2].boundary, 3u);
  EXPECT_EQ(r.table.hlines[2].first_col, 2);
  EXPECT_EQ(r.table.hlines[2].last_col, 3);
}

TEST(ParseTable, ThrowsOnlyWithoutTabular) {
  try {
    parse_table(tokenize("just text & more"));
    FAIL() << "expected UnrecoverableStructure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnrecoverableStructure);
  }
  fixtures::TableGenerator gen(9);
  for (int i = 0; i < 100; ++i) {
    const auto m = gen.malformed(gen.table());
    if (m.find("\\begin{tabular}") != std::string::npos) EXPECT_NO_THROW(parse_table(tokenize(m))) << m;
    EXPECT_NO_THROW(analyze_source(m)) << m;
  }
}

TEST(Validate, WellFormedMinimalTable) {
  const auto r = parse_table(tokenize(fixtures::kMinimalTable));
  const auto v = validate(r.table, r.diagnostics);
  EXPECT_TRUE(v.valid);
  EXPECT_TRUE(v.reasons.empty());
}

TEST(Validate, RowOverflow) {
  const auto r = parse_table(tokenize("\\begin{tabular}{lc} A & B & C \\\\ \\end{tabular}"));
  const auto v = validate(r.table, r.diagnostics);
  EXPECT_FALSE(v.valid);
  EXPECT_EQ(v.reasons, std::vector<std::string>{"row overflow"});
}

TEST(Validate, UnbalancedBraceInCaption) {
  const auto a = analyze_source("\\begin{table}\\caption{Broken \\begin{tabular}{c} x \\\\ \\end{tabular}\\end{table}");
  ASSERT_TRUE(a.table.has_value());
  const auto v = validate(*a.table, a.diagnostics);
  EXPECT_FALSE(v.valid);
  EXPECT_NE(std::find(v.reasons.begin(), v.reasons.end(), "unbalanced group"), v.reasons.end());
}

TEST(Validate, ClineOutOfRange) {
  const auto r = parse_table(tokenize("\\begin{tabular}{cc} a & b \\\\ \\cline{2-4} \\end{tabular}"));
  const auto v = validate(r.table, r.diagnostics);
  EXPECT_FALSE(v.valid);
  EXPECT_EQ(v.reasons, std::vector<std::string>{"cline out of range"});
}

TEST(SpanReport, FieldNamesAndCounts) {
  const auto seq = tokenize("\\begin{tabular}{c} \\hline x \\\\ \\end{tabular}");
  const auto j = nlohmann::json::parse(span_report_json(seq, decompose(seq)));
  ASSERT_TRUE(j.contains("tokens"));
  ASSERT_TRUE(j.contains("counts"));
  EXPECT_EQ(j["tokens"].size(), seq.size());
  const auto& first = j["tokens"][0];
  EXPECT_EQ(first["text"], "\\begin");
  EXPECT_EQ(first["start"], 0);
  EXPECT_EQ(first["end"], 6);
  EXPECT_EQ(first["component"], "struct");
  EXPECT_EQ(j["counts"]["hline"], 1);
  EXPECT_FALSE(j["counts"].contains("global"));
}
