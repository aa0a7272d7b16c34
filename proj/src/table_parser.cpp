#include "cspo/table_parser.hpp"

#include <algorithm>
#include <array>
#include <charconv>

#include "cspo/error.hpp"
#include "json.hpp"

namespace cspo {
namespace {

using Range = std::pair<std::size_t, std::size_t>;

bool is_tabular_env(std::string_view name) {
  static constexpr std::array<std::string_view, 9> kNames = {
      "tabular", "tabular*", "tabularx", "tabulary", "array",
      "longtable", "longtable*", "supertabular", "xtabular",
  };
  return std::find(kNames.begin(), kNames.end(), name) != kNames.end();
}

bool env_takes_width(std::string_view name) {
  return name == "tabular*" || name == "tabularx" || name == "tabulary";
}

bool is_table_wrapper(std::string_view name) {
  return name == "table" || name == "table*" || name == "sidewaystable" ||
         name == "sidewaystable*";
}

bool is_rule_command(std::string_view t) {
  static constexpr std::array<std::string_view, 11> kRules = {
      "\\hline",    "\\cline",     "\\toprule",  "\\midrule",
      "\\bottomrule", "\\cmidrule", "\\specialrule", "\\Xhline",
      "\\cdashline", "\\hdashline", "\\hhline",
  };
  return std::find(kRules.begin(), kRules.end(), t) != kRules.end();
}

bool is_partial_rule(std::string_view kind) {
  return kind == "cline" || kind == "cmidrule" || kind == "cdashline";
}

struct Formatting {
  std::uint8_t flag;
  int leading_args;  // brace groups that are parameters, not cell text
};

std::optional<Formatting> formatting_command(std::string_view t) {
  struct Entry {
    std::string_view name;
    Formatting fmt;
  };
  static constexpr std::array<Entry, 52> kTable = {{
      {"\\textbf", {kBold, 0}},        {"\\bf", {kBold, 0}},
      {"\\bfseries", {kBold, 0}},      {"\\mathbf", {kBold, 0}},
      {"\\boldmath", {kBold, 0}},      {"\\bm", {kBold, 0}},
      {"\\boldsymbol", {kBold, 0}},    {"\\textit", {kItalic, 0}},
      {"\\it", {kItalic, 0}},          {"\\itshape", {kItalic, 0}},
      {"\\emph", {kItalic, 0}},        {"\\em", {kItalic, 0}},
      {"\\mathit", {kItalic, 0}},      {"\\textsl", {kItalic, 0}},
      {"\\slshape", {kItalic, 0}},     {"\\underline", {kUnderline, 0}},
      {"\\uline", {kUnderline, 0}},    {"\\uuline", {kUnderline, 0}},
      {"\\ensuremath", {kMath, 0}},    {"\\(", {kMath, 0}},
      {"\\)", {kMath, 0}},             {"\\textsc", {kOtherMarkup, 0}},
      {"\\scshape", {kOtherMarkup, 0}}, {"\\texttt", {kOtherMarkup, 0}},
      {"\\ttfamily", {kOtherMarkup, 0}}, {"\\textsf", {kOtherMarkup, 0}},
      {"\\sffamily", {kOtherMarkup, 0}}, {"\\textrm", {kOtherMarkup, 0}},
      {"\\rmfamily", {kOtherMarkup, 0}}, {"\\mathrm", {kOtherMarkup, 0}},
      {"\\textnormal", {kOtherMarkup, 0}}, {"\\tiny", {kOtherMarkup, 0}},
      {"\\scriptsize", {kOtherMarkup, 0}}, {"\\footnotesize", {kOtherMarkup, 0}},
      {"\\small", {kOtherMarkup, 0}},  {"\\normalsize", {kOtherMarkup, 0}},
      {"\\large", {kOtherMarkup, 0}},  {"\\Large", {kOtherMarkup, 0}},
      {"\\LARGE", {kOtherMarkup, 0}},  {"\\huge", {kOtherMarkup, 0}},
      {"\\makecell", {kOtherMarkup, 0}}, {"\\shortstack", {kOtherMarkup, 0}},
      {"\\centering", {kOtherMarkup, 0}}, {"\\raggedright", {kOtherMarkup, 0}},
      {"\\raggedleft", {kOtherMarkup, 0}}, {"\\textsuperscript", {kOtherMarkup, 0}},
      {"\\textsubscript", {kOtherMarkup, 0}}, {"\\textcolor", {kOtherMarkup, 1}},
      {"\\color", {kOtherMarkup, 1}},  {"\\cellcolor", {kOtherMarkup, 1}},
      {"\\rowcolor", {kOtherMarkup, 1}}, {"\\hspace", {kOtherMarkup, 1}},
  }};
  for (const auto& e : kTable) {
    if (e.name == t) return e.fmt;
  }
  return std::nullopt;
}

bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  });
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

std::string trim(std::string_view s) { return collapse_whitespace(s); }

std::optional<int> parse_int(std::string_view s) {
  const std::string t = trim(s);
  int v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) return std::nullopt;
  return v;
}

// Column-spec items before vline attachment.
struct SpecItem {
  bool vline = false;
  std::string align;
};

std::vector<ColumnSpec> columns_from_items(const std::vector<SpecItem>& items) {
  std::vector<ColumnSpec> cols;
  int leading = 0;
  for (const auto& item : items) {
    if (item.vline) {
      if (cols.empty()) {
        ++leading;
      } else {
        ++cols.back().right_vlines;
      }
      continue;
    }
    ColumnSpec spec;
    spec.align = item.align;
    if (cols.empty()) spec.left_vlines = leading;
    cols.push_back(std::move(spec));
  }
  return cols;
}

struct CellBuilder {
  Cell cell;
  bool pending_space = false;

  void append(std::string_view text) {
    if (pending_space && !cell.content.empty()) cell.content.push_back(' ');
    pending_space = false;
    cell.content.append(text);
  }
};

class Analyzer {
 public:
  explicit Analyzer(const TokenSequence& ts)
      : ts_(ts), kinds_(ts.size(), ComponentKind::kOther) {}

  void run() {
    std::size_t i = 0;
    while (i < ts_.size()) i = top_level(i);
    for (auto it = env_stack_.rbegin(); it != env_stack_.rend(); ++it) {
      diag("unclosed environment", ts_.size());
    }
    check_brace_balance();
  }

  std::vector<ComponentKind> kinds_out() { return std::move(kinds_); }

  const TokenSequence& ts_;
  std::vector<ComponentKind> kinds_;
  ParsedTable table_;
  bool found_tabular_ = false;
  std::vector<Diagnostic> diags_;
  std::vector<std::string> packages_;
  std::optional<std::string> caption_;

 private:
  const std::string& text(std::size_t i) const {
    static const std::string kEmpty;
    return i < ts_.size() ? ts_[i].text : kEmpty;
  }

  void mark(std::size_t first, std::size_t last, ComponentKind kind) {
    for (std::size_t k = first; k < last && k < kinds_.size(); ++k) kinds_[k] = kind;
  }

  void diag(std::string message, std::size_t index) {
    diags_.push_back(Diagnostic{std::move(message), index});
  }

  bool has_diag(std::string_view message) const {
    return std::any_of(diags_.begin(), diags_.end(),
                       [&](const Diagnostic& d) { return d.message == message; });
  }

  std::string source_between(std::size_t first, std::size_t last) const {
    if (first >= last || first >= ts_.size()) return {};
    const std::size_t b = ts_[first].begin;
    const std::size_t e = ts_[std::min(last, ts_.size()) - 1].end;
    return ts_.source.substr(b, e - b);
  }

  // Index one past the token closing the group opened at `open`.
  std::size_t group_end(std::size_t open, std::string_view open_tok, std::string_view close_tok) {
    int depth = 0;
    for (std::size_t k = open; k < ts_.size(); ++k) {
      if (text(k) == open_tok) ++depth;
      if (text(k) == close_tok && --depth == 0) return k + 1;
    }
    if (!has_diag("unbalanced group")) diag("unbalanced group", open);
    return ts_.size();
  }

  // If token `i` opens a brace group, marks it whole and returns the inner
  // range, advancing `i` past the closing brace.
  std::optional<Range> take_group(std::size_t& i, ComponentKind kind) {
    if (text(i) != "{") return std::nullopt;
    const std::size_t end = group_end(i, "{", "}");
    mark(i, end, kind);
    Range inner{i + 1, end > i + 1 && text(end - 1) == "}" ? end - 1 : end};
    i = end;
    return inner;
  }

  // Like take_group, but an argument never extends over a table or tabular
  // \begin/\end: an unclosed caption or package argument ends there.
  std::optional<Range> take_argument(std::size_t& i, ComponentKind kind) {
    if (text(i) != "{") return std::nullopt;
    int depth = 0;
    std::size_t end = ts_.size();
    for (std::size_t k = i; k < ts_.size(); ++k) {
      if ((text(k) == "\\begin" || text(k) == "\\end") && k > i) {
        const auto name = env_name(k);
        if (name && (is_tabular_env(*name) || is_table_wrapper(*name))) {
          end = k;
          break;
        }
      }
      if (text(k) == "{") ++depth;
      if (text(k) == "}" && --depth == 0) {
        end = k + 1;
        break;
      }
    }
    const bool closed = end > i + 1 && text(end - 1) == "}" && depth == 0;
    if (!closed && !has_diag("unbalanced group")) diag("unbalanced group", i);
    mark(i, end, kind);
    Range inner{i + 1, closed ? end - 1 : end};
    i = end;
    return inner;
  }

  std::optional<Range> take_bracket(std::size_t& i, ComponentKind kind) {
    if (text(i) != "[") return std::nullopt;
    std::size_t end = i + 1;
    while (end < ts_.size() && text(end) != "]") ++end;
    end = std::min(end + 1, ts_.size());
    mark(i, end, kind);
    Range inner{i + 1, text(end - 1) == "]" ? end - 1 : end};
    i = end;
    return inner;
  }

  std::optional<std::string> env_name(std::size_t i) const {
    if (text(i + 1) == "{" && text(i + 3) == "}" && i + 3 < ts_.size()) return text(i + 2);
    return std::nullopt;
  }

  void check_brace_balance() {
    int depth = 0;
    bool broken = false;
    for (const auto& tok : ts_.tokens) {
      if (tok.text == "{") ++depth;
      if (tok.text == "}" && --depth < 0) broken = true;
    }
    if ((broken || depth != 0) && !has_diag("unbalanced group")) {
      diag("unbalanced group", ts_.size());
    }
  }

  // ---- top level -------------------------------------------------------

  std::size_t top_level(std::size_t i) {
    const std::string& t = text(i);
    if (t == "\\usepackage" || t == "\\RequirePackage") return take_usepackage(i);
    if (t == "\\caption" || t == "\\caption*") return take_caption(i);
    if (is_rule_command(t)) return take_rule(i, nullptr);
    if (t == "\\begin") return take_begin(i);
    if (t == "\\end") return take_end(i);
    if (t == "&" || t == "\\\\" || t == "\\multicolumn" || t == "\\multirow" ||
        t == "\\tabularnewline") {
      kinds_[i] = ComponentKind::kStruct;
      return i + 1;
    }
    kinds_[i] = ComponentKind::kOther;
    return i + 1;
  }

  std::size_t take_usepackage(std::size_t i) {
    kinds_[i] = ComponentKind::kPkg;
    std::size_t j = i + 1;
    take_bracket(j, ComponentKind::kPkg);
    if (auto inner = take_argument(j, ComponentKind::kPkg)) {
      const std::string names = source_between(inner->first, inner->second);
      std::size_t start = 0;
      while (start <= names.size()) {
        std::size_t comma = names.find(',', start);
        if (comma == std::string::npos) comma = names.size();
        std::string name = trim(std::string_view(names).substr(start, comma - start));
        if (!name.empty()) packages_.push_back(std::move(name));
        start = comma + 1;
      }
    }
    return j;
  }

  std::size_t take_caption(std::size_t i) {
    kinds_[i] = ComponentKind::kCap;
    std::size_t j = i + 1;
    take_bracket(j, ComponentKind::kCap);
    if (auto inner = take_argument(j, ComponentKind::kCap)) {
      std::string cap = collapse_whitespace(source_between(inner->first, inner->second));
      if (caption_) {
        diag("multiple captions", i);
      } else {
        caption_ = std::move(cap);
      }
    }
    return j;
  }

  // Marks a rule command and its arguments as hline; records it when a
  // table is being built.
  std::size_t take_rule(std::size_t i, std::vector<HorizontalRule>* out, std::size_t boundary = 0) {
    kinds_[i] = ComponentKind::kHline;
    const std::string kind = text(i).substr(1);
    std::size_t j = i + 1;
    HorizontalRule rule;
    rule.boundary = boundary;
    rule.kind = kind;
    rule.full = !is_partial_rule(kind);
    std::optional<Range> range_arg;
    if (kind == "cmidrule") {
      if (j < ts_.size() && text(j).starts_with("(")) {
        while (j < ts_.size()) {
          kinds_[j] = ComponentKind::kHline;
          if (text(j++).ends_with(")")) break;
        }
      }
      take_bracket(j, ComponentKind::kHline);
      range_arg = take_group(j, ComponentKind::kHline);
    } else if (kind == "cline" || kind == "cdashline") {
      range_arg = take_group(j, ComponentKind::kHline);
    } else if (kind == "specialrule") {
      for (int k = 0; k < 3; ++k) take_group(j, ComponentKind::kHline);
    } else if (kind == "Xhline" || kind == "hhline") {
      take_group(j, ComponentKind::kHline);
    } else if (kind != "hline" && kind != "hdashline") {
      take_bracket(j, ComponentKind::kHline);
    }
    if (range_arg) {
      const std::string spec = trim(source_between(range_arg->first, range_arg->second));
      const auto dash = spec.find('-');
      const auto a = parse_int(spec.substr(0, dash));
      const auto b = dash == std::string::npos ? a : parse_int(spec.substr(dash + 1));
      rule.first_col = a.value_or(0);
      rule.last_col = b.value_or(0);
    } else if (!rule.full) {
      diag("missing rule range", i);
    }
    if (out) out->push_back(std::move(rule));
    return j;
  }

  std::size_t take_begin(std::size_t i) {
    const auto name = env_name(i);
    if (!name) {
      kinds_[i] = ComponentKind::kOther;
      return i + 1;
    }
    if (is_tabular_env(*name)) return take_tabular(i, *name);
    const ComponentKind kind =
        is_table_wrapper(*name) ? ComponentKind::kStruct : ComponentKind::kOther;
    mark(i, i + 4, kind);
    env_stack_.push_back(*name);
    std::size_t j = i + 4;
    if (is_table_wrapper(*name)) take_bracket(j, ComponentKind::kStruct);
    return j;
  }

  std::size_t take_end(std::size_t i) {
    const auto name = env_name(i);
    if (!name) {
      kinds_[i] = ComponentKind::kOther;
      return i + 1;
    }
    const bool structural = is_table_wrapper(*name) || is_tabular_env(*name);
    mark(i, i + 4, structural ? ComponentKind::kStruct : ComponentKind::kOther);
    auto it = std::find(env_stack_.rbegin(), env_stack_.rend(), *name);
    if (it == env_stack_.rend()) {
      diag("mismatched environment", i);
    } else {
      if (it != env_stack_.rbegin()) diag("mismatched environment", i);
      env_stack_.erase(std::prev(it.base()), env_stack_.end());
    }
    return i + 4;
  }

  // ---- column specs ----------------------------------------------------

  void spec_items(std::size_t first, std::size_t last, std::vector<SpecItem>& items) {
    std::size_t i = first;
    while (i < last) {
      const std::string& t = text(i);
      if (t == "|") {
        kinds_[i++] = ComponentKind::kVline;
        items.push_back({true, {}});
      } else if (t == "l" || t == "c" || t == "r" || t == "X" || t == "S" || t == "L" ||
                 t == "C" || t == "R" || t == "J" || t == "Y") {
        kinds_[i++] = ComponentKind::kAlign;
        items.push_back({false, t});
      } else if (t == "p" || t == "m" || t == "b" || t == "w" || t == "W") {
        kinds_[i++] = ComponentKind::kAlign;
        std::string align = t;
        const int groups = (t == "w" || t == "W") ? 2 : 1;
        for (int g = 0; g < groups; ++g) {
          if (auto inner = take_group(i, ComponentKind::kAlign)) {
            align += "{" + trim(source_between(inner->first, inner->second)) + "}";
          }
        }
        items.push_back({false, align});
      } else if (t == "*") {
        kinds_[i++] = ComponentKind::kStruct;
        int count = 1;
        if (auto inner = take_group(i, ComponentKind::kStruct)) {
          std::string digits;
          for (std::size_t k = inner->first; k < inner->second; ++k) digits += text(k);
          count = std::clamp(parse_int(digits).value_or(1), 0, 256);
        }
        if (text(i) == "{") {
          const std::size_t open = i;
          const std::size_t end = group_end(open, "{", "}");
          kinds_[open] = ComponentKind::kStruct;
          if (end > open + 1 && text(end - 1) == "}") kinds_[end - 1] = ComponentKind::kStruct;
          std::vector<SpecItem> unit;
          spec_items(open + 1, text(end - 1) == "}" ? end - 1 : end, unit);
          for (int r = 0; r < count; ++r) items.insert(items.end(), unit.begin(), unit.end());
          i = end;
        }
      } else if (t == "@" || t == "!" || t == ">" || t == "<") {
        kinds_[i++] = ComponentKind::kOther;
        take_group(i, ComponentKind::kOther);
      } else if (t == "{" || t == "}") {
        kinds_[i++] = ComponentKind::kStruct;
      } else {
        kinds_[i++] = ComponentKind::kOther;
      }
    }
  }

  // ---- tabular body ----------------------------------------------------

  struct BodyState {
    std::vector<std::vector<Cell>> rows;
    std::vector<Cell> row;
    CellBuilder cell;
    bool row_started = false;
    std::vector<HorizontalRule> rules;
  };

  void finish_cell(BodyState& st) {
    st.row.push_back(std::move(st.cell.cell));
    st.cell = CellBuilder{};
  }

  void finish_row(BodyState& st) {
    finish_cell(st);
    st.rows.push_back(std::move(st.row));
    st.row.clear();
    st.row_started = false;
  }

  std::size_t take_tabular(std::size_t begin, const std::string& env) {
    const bool primary = !found_tabular_;
    if (!primary) diag("multiple tabulars", begin);
    found_tabular_ = true;
    mark(begin, begin + 4, ComponentKind::kStruct);
    std::size_t i = begin + 4;
    if (env_takes_width(env)) take_group(i, ComponentKind::kStruct);
    take_bracket(i, ComponentKind::kStruct);

    std::vector<ColumnSpec> columns;
    if (text(i) == "{") {
      const std::size_t open = i;
      const std::size_t end = group_end(open, "{", "}");
      kinds_[open] = ComponentKind::kStruct;
      const bool closed = end > open + 1 && text(end - 1) == "}";
      if (closed) kinds_[end - 1] = ComponentKind::kStruct;
      std::vector<SpecItem> items;
      spec_items(open + 1, closed ? end - 1 : end, items);
      columns = columns_from_items(items);
      i = end;
    } else {
      diag("missing column spec", begin);
    }

    BodyState st;
    bool closed = false;
    int depth = 0;
    while (i < ts_.size()) {
      const std::string& t = text(i);
      if (t.starts_with("%")) {
        kinds_[i++] = ComponentKind::kOther;
        continue;
      }
      if (depth == 0) {
        if (t == "&") {
          kinds_[i++] = ComponentKind::kStruct;
          finish_cell(st);
          st.row_started = true;
          continue;
        }
        if (t == "\\\\" || t == "\\tabularnewline") {
          kinds_[i++] = ComponentKind::kStruct;
          take_bracket(i, ComponentKind::kStruct);
          finish_row(st);
          continue;
        }
        if (t == "\\end") {
          const auto name = env_name(i);
          if (name && *name == env) {
            mark(i, i + 4, ComponentKind::kStruct);
            i += 4;
            closed = true;
            break;
          }
          if (name) break;  // an outer environment closes first
        }
        if (is_rule_command(t)) {
          i = take_rule(i, &st.rules, st.rows.size());
          continue;
        }
      }
      if (t == "{") {
        ++depth;
      } else if (t == "}") {
        if (depth == 0) {
          // Stray close brace; belongs to nothing inside the body.
          kinds_[i++] = ComponentKind::kOther;
          continue;
        }
        --depth;
      }
      i = absorb_cell_token(i, ts_.size(), st);
    }
    if (st.row_started) finish_row(st);
    if (!closed) diag("unclosed environment", begin);

    if (primary) {
      table_.columns = std::move(columns);
      table_.rows = std::move(st.rows);
      table_.hlines = std::move(st.rules);
    }
    return i;
  }

  void note_gap(std::size_t i, BodyState& st) {
    if (has_whitespace(ts_.gap_before(i))) st.cell.pending_space = true;
  }

  // Consumes one logical cell element starting at token i and returns the
  // index after it. Everything consumed is cell_app unless it is a merge
  // command's syntax.
  std::size_t absorb_cell_token(std::size_t i, std::size_t limit, BodyState& st) {
    const std::string& t = text(i);
    note_gap(i, st);
    st.row_started = true;
    if (t == "\\multicolumn") return take_multicolumn(i, st);
    if (t == "\\multirow") return take_multirow(i, st);
    if (t == "\\caption" || t == "\\caption*") return take_caption(i);
    if (t == "\\begin") {
      const auto name = env_name(i);
      if (name && is_tabular_env(*name)) return take_nested_tabular(i, st);
    }
    kinds_[i] = ComponentKind::kCellApp;
    if (t == "$") {
      st.cell.cell.formatting |= kMath;
      return i + 1;
    }
    if (t == "{" || t == "}" || t.starts_with("%")) return i + 1;
    if (t == "\\\\" || t == "&") {
      // Only reachable inside a nested group, e.g. \makecell{a \\ b}.
      st.cell.pending_space = true;
      return i + 1;
    }
    if (auto fmt = formatting_command(t)) {
      st.cell.cell.formatting |= fmt->flag;
      std::size_t j = i + 1;
      for (int a = 0; a < fmt->leading_args && j < limit; ++a) {
        take_group(j, ComponentKind::kCellApp);
      }
      return j;
    }
    st.cell.append(t);
    return i + 1;
  }

  void absorb_range(std::size_t first, std::size_t last, BodyState& st) {
    std::size_t k = first;
    while (k < last) k = absorb_cell_token(k, last, st);
  }

  std::size_t take_multicolumn(std::size_t i, BodyState& st) {
    kinds_[i] = ComponentKind::kStruct;
    std::size_t j = i + 1;
    if (auto span = take_group(j, ComponentKind::kStruct)) {
      const auto n = parse_int(source_between(span->first, span->second));
      if (!n || *n < 1) {
        diag("invalid multicolumn span", i);
      } else {
        st.cell.cell.colspan = *n;
      }
    }
    if (text(j) == "{") {
      const std::size_t open = j;
      const std::size_t end = group_end(open, "{", "}");
      kinds_[open] = ComponentKind::kStruct;
      const bool closed = end > open + 1 && text(end - 1) == "}";
      if (closed) kinds_[end - 1] = ComponentKind::kStruct;
      std::vector<SpecItem> items;
      spec_items(open + 1, closed ? end - 1 : end, items);
      auto cols = columns_from_items(items);
      if (cols.size() != 1) diag("multicolumn spec width", i);
      if (!cols.empty()) st.cell.cell.multicolumn_format = cols.front();
      j = end;
    }
    j = take_content_arg(j, st);
    return j;
  }

  std::size_t take_multirow(std::size_t i, BodyState& st) {
    kinds_[i] = ComponentKind::kStruct;
    std::size_t j = i + 1;
    take_bracket(j, ComponentKind::kStruct);
    if (auto span = take_group(j, ComponentKind::kStruct)) {
      const auto n = parse_int(source_between(span->first, span->second));
      if (!n || *n < 1) {
        diag("invalid multirow span", i);
      } else {
        st.cell.cell.rowspan = *n;
      }
    }
    take_bracket(j, ComponentKind::kStruct);
    take_group(j, ComponentKind::kStruct);
    take_bracket(j, ComponentKind::kStruct);
    return take_content_arg(j, st);
  }

  // Content argument of a merge command: the delimiting braces belong to the
  // command, the tokens inside are cell text.
  std::size_t take_content_arg(std::size_t j, BodyState& st) {
    if (text(j) != "{") return j;
    const std::size_t open = j;
    const std::size_t end = group_end(open, "{", "}");
    kinds_[open] = ComponentKind::kStruct;
    const bool closed = end > open + 1 && text(end - 1) == "}";
    if (closed) kinds_[end - 1] = ComponentKind::kStruct;
    absorb_range(open + 1, closed ? end - 1 : end, st);
    return end;
  }

  std::size_t take_nested_tabular(std::size_t i, BodyState& st) {
    diag("nested tabular", i);
    int depth = 0;
    std::size_t k = i;
    for (; k < ts_.size(); ++k) {
      const auto name = env_name(k);
      if (text(k) == "\\begin" && name && is_tabular_env(*name)) ++depth;
      if (text(k) == "\\end" && name && is_tabular_env(*name) && --depth == 0) {
        k += 4;
        break;
      }
    }
    k = std::min(k, ts_.size());
    mark(i, k, ComponentKind::kCellApp);
    st.cell.append(collapse_whitespace(source_between(i, k)));
    return k;
  }

  std::vector<std::string> env_stack_;
};

ComponentMap build_map(std::vector<ComponentKind> kinds) {
  ComponentMap map;
  map.assignment = std::move(kinds);
  for (std::size_t i = 0; i < map.assignment.size(); ++i) {
    const std::size_t k = index_of(map.assignment[i]);
    ++map.counts[k];
    auto& spans = map.spans[k];
    if (!spans.empty() && spans.back().second == i) {
      spans.back().second = i + 1;
    } else {
      spans.emplace_back(i, i + 1);
    }
  }
  return map;
}

}  // namespace

int expanded_width(const std::vector<Cell>& row) {
  int width = 0;
  for (const auto& cell : row) width += std::max(cell.colspan, 1);
  return width;
}

ComponentMap decompose(const TokenSequence& tokens) {
  Analyzer a(tokens);
  a.run();
  return build_map(a.kinds_out());
}

ParseResult parse_table(const TokenSequence& tokens) {
  Analyzer a(tokens);
  a.run();
  if (!a.found_tabular_) {
    throw Error(ErrorCode::kUnrecoverableStructure, "no tabular environment found");
  }
  ParseResult result;
  result.table = std::move(a.table_);
  result.table.packages = std::move(a.packages_);
  result.table.caption = std::move(a.caption_);
  result.diagnostics = std::move(a.diags_);
  return result;
}

ValidityVerdict validate(const ParsedTable& table, const std::vector<Diagnostic>& diagnostics) {
  ValidityVerdict v;
  auto add = [&](const std::string& reason) {
    if (std::find(v.reasons.begin(), v.reasons.end(), reason) == v.reasons.end()) {
      v.reasons.push_back(reason);
    }
  };
  for (const auto& d : diagnostics) {
    if (d.message == "unclosed environment" || d.message == "mismatched environment") {
      add("unclosed environment");
    } else if (d.message == "unbalanced group") {
      add("unbalanced group");
    } else if (d.message == "no tabular") {
      add("no tabular");
    }
  }
  const int ncols = static_cast<int>(table.columns.size());
  for (const auto& row : table.rows) {
    if (expanded_width(row) > ncols) {
      add("row overflow");
      break;
    }
  }
  for (const auto& rule : table.hlines) {
    if (rule.full) continue;
    if (rule.first_col < 1 || rule.last_col > ncols || rule.first_col > rule.last_col) {
      add("cline out of range");
    }
  }
  v.valid = v.reasons.empty();
  return v;
}

AnalyzedSource analyze_source(std::string_view source) {
  AnalyzedSource out;
  out.tokens = tokenize(source);
  Analyzer a(out.tokens);
  a.run();
  out.packages = a.packages_;
  out.caption = a.caption_;
  if (a.found_tabular_) {
    out.table = std::move(a.table_);
    out.table->packages = std::move(a.packages_);
    out.table->caption = std::move(a.caption_);
  } else {
    a.diags_.push_back(Diagnostic{"no tabular", 0});
  }
  out.diagnostics = std::move(a.diags_);
  out.map = build_map(a.kinds_out());
  return out;
}

std::string span_report_json(const TokenSequence& tokens, const ComponentMap& map) {
  nlohmann::ordered_json report;
  auto list = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    nlohmann::ordered_json tok;
    tok["text"] = tokens[i].text;
    tok["start"] = tokens[i].begin;
    tok["end"] = tokens[i].end;
    tok["component"] = std::string(component_name(map.assignment[i]));
    list.push_back(std::move(tok));
  }
  report["tokens"] = std::move(list);
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (ComponentKind k : kTokenKinds) counts[std::string(component_name(k))] = map.count(k);
  report["counts"] = std::move(counts);
  return report.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace cspo
