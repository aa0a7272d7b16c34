#include "cspo/rewards.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <tuple>

#include "cspo/error.hpp"

namespace cspo {
namespace {

std::vector<std::string> words(const std::optional<std::string>& s) {
  std::vector<std::string> out;
  if (!s) return out;
  std::istringstream in(*s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

int levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

ComponentDiscrepancy absent_if(bool absent, int count) {
  return ComponentDiscrepancy{absent ? std::max(count, 1) : count, absent};
}

std::size_t cell_total(const ParsedTable& t) {
  std::size_t n = 0;
  for (const auto& row : t.rows) n += row.size();
  return n;
}

int total_vlines(const ParsedTable& t) {
  int n = 0;
  for (const auto& c : t.columns) n += c.left_vlines + c.right_vlines;
  return n;
}

// Visits every grid position present in either table's rows.
template <typename Fn>
void for_each_position(const ParsedTable& a, const ParsedTable& b, Fn&& fn) {
  const std::size_t rows = std::max(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t na = i < a.rows.size() ? a.rows[i].size() : 0;
    const std::size_t nb = i < b.rows.size() ? b.rows[i].size() : 0;
    for (std::size_t j = 0; j < std::max(na, nb); ++j) {
      fn(j < na ? &a.rows[i][j] : nullptr, j < nb ? &b.rows[i][j] : nullptr);
    }
  }
}

int struct_count(const ParsedTable& p, const ParsedTable& r) {
  int count = std::abs(static_cast<int>(p.rows.size()) - static_cast<int>(r.rows.size())) +
              std::abs(static_cast<int>(p.columns.size()) - static_cast<int>(r.columns.size()));
  const std::size_t rows = std::min(p.rows.size(), r.rows.size());
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& pr = p.rows[i];
    const auto& rr = r.rows[i];
    count += std::abs(static_cast<int>(pr.size()) - static_cast<int>(rr.size()));
    for (std::size_t j = 0; j < std::min(pr.size(), rr.size()); ++j) {
      if (pr[j].colspan != rr[j].colspan || pr[j].rowspan != rr[j].rowspan) ++count;
    }
  }
  return count;
}

int cell_count(const ParsedTable& p, const ParsedTable& r) {
  int count = 0;
  for_each_position(p, r, [&](const Cell* a, const Cell* b) {
    if (!a || !b || a->content != b->content || a->formatting != b->formatting) ++count;
  });
  return count;
}

std::optional<std::string> format_align(const Cell* c) {
  if (!c || !c->multicolumn_format) return std::nullopt;
  return c->multicolumn_format->align;
}

std::optional<std::pair<int, int>> format_vlines(const Cell* c) {
  if (!c || !c->multicolumn_format) return std::nullopt;
  return std::pair{c->multicolumn_format->left_vlines, c->multicolumn_format->right_vlines};
}

int align_count(const ParsedTable& p, const ParsedTable& r) {
  int count = 0;
  for (std::size_t j = 0; j < std::max(p.columns.size(), r.columns.size()); ++j) {
    if (j >= p.columns.size() || j >= r.columns.size() || p.columns[j].align != r.columns[j].align) {
      ++count;
    }
  }
  for_each_position(p, r, [&](const Cell* a, const Cell* b) {
    if (format_align(a) != format_align(b)) ++count;
  });
  return count;
}

int vline_count(const ParsedTable& p, const ParsedTable& r) {
  int count = 0;
  for (std::size_t j = 0; j < std::max(p.columns.size(), r.columns.size()); ++j) {
    const auto pv = j < p.columns.size() ? std::pair{p.columns[j].left_vlines, p.columns[j].right_vlines}
                                         : std::pair{0, 0};
    const auto rv = j < r.columns.size() ? std::pair{r.columns[j].left_vlines, r.columns[j].right_vlines}
                                         : std::pair{0, 0};
    if (pv != rv) ++count;
  }
  for_each_position(p, r, [&](const Cell* a, const Cell* b) {
    if (format_vlines(a) != format_vlines(b)) ++count;
  });
  return count;
}

int hline_count(const ParsedTable& p, const ParsedTable& r) {
  using Key = std::tuple<std::size_t, std::string, bool, int, int>;
  auto keys = [](const ParsedTable& t) {
    std::multiset<Key> out;
    for (const auto& h : t.hlines) out.emplace(h.boundary, h.kind, h.full, h.first_col, h.last_col);
    return out;
  };
  const auto a = keys(p);
  const auto b = keys(r);
  std::vector<Key> diff;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
  return static_cast<int>(diff.size());
}

std::optional<std::filesystem::path> find_executable(const std::string& name) {
  namespace fs = std::filesystem;
  if (name.find('/') != std::string::npos) {
    if (::access(name.c_str(), X_OK) == 0) return fs::path(name);
    return std::nullopt;
  }
  const char* path = std::getenv("PATH");
  if (!path) return std::nullopt;
  std::istringstream dirs(path);
  std::string dir;
  while (std::getline(dirs, dir, ':')) {
    if (dir.empty()) continue;
    const fs::path candidate = fs::path(dir) / name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
  }
  return std::nullopt;
}

// Standalone document: package lines go to the preamble, the rest to the body.
std::string standalone_document(const AnalyzedSource& source) {
  const std::string& src = source.tokens.source;
  if (src.find("\\documentclass") != std::string::npos) return src;
  std::string preamble = "\\documentclass{article}\n";
  std::string body;
  std::size_t cursor = 0;
  for (const auto& [first, last] : source.map.spans[index_of(ComponentKind::kPkg)]) {
    const std::size_t b = source.tokens[first].begin;
    const std::size_t e = source.tokens[last - 1].end;
    body.append(src, cursor, b - cursor);
    preamble.append(src, b, e - b);
    preamble.push_back('\n');
    cursor = e;
  }
  body.append(src, cursor, std::string::npos);
  return preamble + "\\begin{document}\n" + body + "\n\\end{document}\n";
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  return out + "'";
}

}  // namespace

std::string_view scheme_name(RewardScheme scheme) noexcept {
  return scheme == RewardScheme::kGraded ? "graded" : "binary";
}

std::optional<RewardScheme> scheme_from_name(std::string_view name) noexcept {
  if (name == "binary") return RewardScheme::kBinary;
  if (name == "graded") return RewardScheme::kGraded;
  return std::nullopt;
}

PerComponent<ComponentDiscrepancy> component_discrepancies(const AnalyzedSource& pred,
                                                           const AnalyzedSource& ref) {
  PerComponent<ComponentDiscrepancy> out{};

  const std::set<std::string> pp(pred.packages.begin(), pred.packages.end());
  const std::set<std::string> rp(ref.packages.begin(), ref.packages.end());
  std::vector<std::string> pkg_diff;
  std::set_symmetric_difference(pp.begin(), pp.end(), rp.begin(), rp.end(),
                                std::back_inserter(pkg_diff));
  out[index_of(ComponentKind::kPkg)] =
      absent_if(pp.empty() && !rp.empty(), static_cast<int>(pkg_diff.size()));

  int cap = levenshtein(words(pred.caption), words(ref.caption));
  if (pred.caption.has_value() != ref.caption.has_value() || pred.caption != ref.caption) {
    cap = std::max(cap, 1);
  }
  out[index_of(ComponentKind::kCap)] = absent_if(!pred.caption && ref.caption, cap);

  constexpr std::array kBody = {ComponentKind::kStruct, ComponentKind::kCellApp,
                                ComponentKind::kAlign, ComponentKind::kVline,
                                ComponentKind::kHline};
  if (!pred.table || !ref.table) {
    const bool differ = pred.table.has_value() != ref.table.has_value();
    for (ComponentKind k : kBody) {
      out[index_of(k)] = absent_if(!pred.table && ref.table, differ ? 1 : 0);
    }
    return out;
  }
  const ParsedTable& p = *pred.table;
  const ParsedTable& r = *ref.table;
  out[index_of(ComponentKind::kStruct)] =
      absent_if(p.rows.empty() && !r.rows.empty(), struct_count(p, r));
  out[index_of(ComponentKind::kCellApp)] =
      absent_if(cell_total(p) == 0 && cell_total(r) > 0, cell_count(p, r));
  out[index_of(ComponentKind::kAlign)] =
      absent_if(p.columns.empty() && !r.columns.empty(), align_count(p, r));
  out[index_of(ComponentKind::kVline)] =
      absent_if(total_vlines(p) == 0 && total_vlines(r) > 0, vline_count(p, r));
  out[index_of(ComponentKind::kHline)] =
      absent_if(p.hlines.empty() && !r.hlines.empty(), hline_count(p, r));
  return out;
}

int graded_value(const ComponentDiscrepancy& d) noexcept {
  if (d.count == 0) return 3;
  if (d.absent) return 0;
  return d.count <= 1 ? 2 : 1;
}

ComponentRewards oracle_component_rewards(const AnalyzedSource& pred, const AnalyzedSource& ref,
                                          RewardScheme scheme) {
  const auto diffs = component_discrepancies(pred, ref);
  ComponentRewards out;
  out.scheme = scheme;
  for (std::size_t c = 0; c < kNumRewarded; ++c) {
    out.values[c] = scheme == RewardScheme::kBinary ? (diffs[c].count == 0 ? 1 : 0)
                                                    : graded_value(diffs[c]);
  }
  return out;
}

bool cell_contents_equal(const AnalyzedSource& pred, const AnalyzedSource& ref) {
  if (!pred.table || !ref.table) return pred.table.has_value() == ref.table.has_value();
  bool equal = true;
  for_each_position(*pred.table, *ref.table, [&](const Cell* a, const Cell* b) {
    if (!a || !b || a->content != b->content) equal = false;
  });
  return equal;
}

bool cell_formatting_equal(const AnalyzedSource& pred, const AnalyzedSource& ref) {
  if (!pred.table || !ref.table) return pred.table.has_value() == ref.table.has_value();
  bool equal = true;
  for_each_position(*pred.table, *ref.table, [&](const Cell* a, const Cell* b) {
    if (!a || !b || a->formatting != b->formatting) equal = false;
  });
  return equal;
}

ValidityVerdict validate_source(const AnalyzedSource& source) {
  if (!source.table) return ValidityVerdict{false, {"no tabular"}};
  return validate(*source.table, source.diagnostics);
}

int compile_reward(const ValidityVerdict& verdict, const CompileCheck& check,
                   const AnalyzedSource* source) {
  if (check.command.empty()) return verdict.valid ? 1 : 0;

  std::istringstream cmd(check.command);
  std::string program;
  cmd >> program;
  if (program.empty() || !find_executable(program)) {
    throw Error(ErrorCode::kExternalToolUnavailable,
                "compile command not found: " + (program.empty() ? check.command : program));
  }
  if (!verdict.valid) return 0;
  if (!source) throw Error(ErrorCode::kInvalidArgument, "external compile check needs the source");

  namespace fs = std::filesystem;
  std::string dir_template = (fs::temp_directory_path() / "cspo-compile-XXXXXX").string();
  if (!::mkdtemp(dir_template.data())) {
    throw Error(ErrorCode::kIo, "cannot create scratch directory for compile check");
  }
  const fs::path dir(dir_template);
  {
    std::ofstream out(dir / "table.tex", std::ios::binary);
    out << standalone_document(*source);
  }
  const std::string line = "cd " + shell_quote(dir.string()) + " && " + check.command +
                           " table.tex >/dev/null 2>&1 </dev/null";
  const int status = std::system(line.c_str());
  std::error_code ec;
  fs::remove_all(dir, ec);
  return status == 0 ? 1 : 0;
}

GlobalReward global_reward(const TableTree& pred, const TableTree& ref, int cmp) {
  GlobalReward g;
  g.teds = teds(pred, ref);
  g.cmp = cmp;
  g.total = g.teds + static_cast<double>(cmp);
  return g;
}

TableTree tree_of(const AnalyzedSource& source) {
  if (source.table) return build_tree(*source.table);
  ParsedTable empty;
  empty.caption = source.caption;
  return build_tree(empty);
}

}  // namespace cspo
