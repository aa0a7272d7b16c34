#include "cspo/teds.hpp"

#include <algorithm>
#include <cstdint>
#include <unordered_map>

namespace cspo {
namespace {

std::string flags_label(std::uint8_t flags) {
  std::string out;
  if (flags & kBold) out += 'b';
  if (flags & kItalic) out += 'i';
  if (flags & kUnderline) out += 'u';
  if (flags & kMath) out += 'm';
  if (flags & kOtherMarkup) out += 'o';
  return out;
}

std::string spec_label(const ColumnSpec& spec) {
  return std::string(spec.left_vlines, '|') + spec.align + std::string(spec.right_vlines, '|');
}

std::string cell_label(const Cell& cell) {
  std::string label = "cell:" + cell.content;
  label += '\x1f';
  label += flags_label(cell.formatting);
  label += '\x1f';
  label += std::to_string(cell.colspan) + "x" + std::to_string(cell.rowspan);
  if (cell.multicolumn_format) {
    label += '\x1f';
    label += spec_label(*cell.multicolumn_format);
  }
  return label;
}

std::string rule_label(const HorizontalRule& rule) {
  std::string label = "line:" + rule.kind;
  if (!rule.full) {
    label += ":" + std::to_string(rule.first_col) + "-" + std::to_string(rule.last_col);
  }
  return label;
}

TreeNode leaf(std::string label) { return TreeNode{std::move(label), {}}; }

// Postorder view of a tree: interned labels and leftmost-leaf indices.
struct Flat {
  std::vector<int> label;
  std::vector<std::size_t> leftmost;
  std::vector<std::size_t> keyroots;
};

std::size_t flatten(const TreeNode& node, Flat& out,
                    std::unordered_map<std::string, int>& interned) {
  std::size_t first_leaf = SIZE_MAX;
  for (const auto& child : node.children) {
    const std::size_t l = flatten(child, out, interned);
    if (first_leaf == SIZE_MAX) first_leaf = l;
  }
  const std::size_t index = out.label.size();
  auto [it, inserted] = interned.try_emplace(node.label, static_cast<int>(interned.size()));
  out.label.push_back(it->second);
  out.leftmost.push_back(first_leaf == SIZE_MAX ? index : first_leaf);
  return out.leftmost.back();
}

Flat flatten_tree(const TreeNode& root, std::unordered_map<std::string, int>& interned) {
  Flat f;
  flatten(root, f, interned);
  // A keyroot is the highest-numbered node for its leftmost leaf.
  std::vector<bool> seen(f.label.size(), false);
  for (std::size_t i = f.label.size(); i-- > 0;) {
    if (!seen[f.leftmost[i]]) {
      seen[f.leftmost[i]] = true;
      f.keyroots.push_back(i);
    }
  }
  std::reverse(f.keyroots.begin(), f.keyroots.end());
  return f;
}

}  // namespace

std::size_t node_count(const TreeNode& node) {
  std::size_t n = 1;
  for (const auto& child : node.children) n += node_count(child);
  return n;
}

std::size_t TableTree::size() const { return node_count(root); }

TableTree build_tree(const ParsedTable& table) {
  TableTree tree;
  tree.root.label = "table";
  if (table.caption) tree.root.children.push_back(leaf("caption:" + *table.caption));

  TreeNode tabular{"tabular", {}};
  for (const auto& col : table.columns) {
    for (int k = 0; k < col.left_vlines; ++k) tabular.children.push_back(leaf("vline"));
    tabular.children.push_back(leaf("align:" + col.align));
    for (int k = 0; k < col.right_vlines; ++k) tabular.children.push_back(leaf("vline"));
  }
  tree.root.children.push_back(std::move(tabular));

  std::vector<const HorizontalRule*> rules;
  for (const auto& r : table.hlines) rules.push_back(&r);
  std::stable_sort(rules.begin(), rules.end(),
                   [](const auto* a, const auto* b) { return a->boundary < b->boundary; });
  auto next_rule = rules.begin();
  for (std::size_t b = 0; b <= table.rows.size(); ++b) {
    while (next_rule != rules.end() && (*next_rule)->boundary <= b) {
      tree.root.children.push_back(leaf(rule_label(**next_rule)));
      ++next_rule;
    }
    if (b == table.rows.size()) break;
    TreeNode row{"row", {}};
    for (const auto& cell : table.rows[b]) row.children.push_back(leaf(cell_label(cell)));
    tree.root.children.push_back(std::move(row));
  }
  for (; next_rule != rules.end(); ++next_rule) {
    tree.root.children.push_back(leaf(rule_label(**next_rule)));
  }
  return tree;
}

std::size_t tree_edit_distance(const TableTree& a, const TableTree& b) {
  std::unordered_map<std::string, int> interned;
  const Flat fa = flatten_tree(a.root, interned);
  const Flat fb = flatten_tree(b.root, interned);
  const std::size_t na = fa.label.size();
  const std::size_t nb = fb.label.size();

  std::vector<std::size_t> tree_dist(na * nb, 0);
  auto td = [&](std::size_t i, std::size_t j) -> std::size_t& { return tree_dist[i * nb + j]; };

  std::vector<std::size_t> forest;
  for (std::size_t i1 : fa.keyroots) {
    for (std::size_t j1 : fb.keyroots) {
      const std::size_t li = fa.leftmost[i1];
      const std::size_t lj = fb.leftmost[j1];
      const std::size_t rows = i1 - li + 2;
      const std::size_t cols = j1 - lj + 2;
      forest.assign(rows * cols, 0);
      auto fd = [&](std::size_t x, std::size_t y) -> std::size_t& { return forest[x * cols + y]; };
      for (std::size_t x = 1; x < rows; ++x) fd(x, 0) = fd(x - 1, 0) + 1;
      for (std::size_t y = 1; y < cols; ++y) fd(0, y) = fd(0, y - 1) + 1;
      for (std::size_t x = li; x <= i1; ++x) {
        for (std::size_t y = lj; y <= j1; ++y) {
          const std::size_t xi = x - li + 1;
          const std::size_t yj = y - lj + 1;
          const std::size_t del = fd(xi - 1, yj) + 1;
          const std::size_t ins = fd(xi, yj - 1) + 1;
          if (fa.leftmost[x] == li && fb.leftmost[y] == lj) {
            const std::size_t rel = fd(xi - 1, yj - 1) + (fa.label[x] != fb.label[y] ? 1 : 0);
            fd(xi, yj) = std::min({del, ins, rel});
            td(x, y) = fd(xi, yj);
          } else {
            const std::size_t sub = fd(fa.leftmost[x] - li, fb.leftmost[y] - lj) + td(x, y);
            fd(xi, yj) = std::min({del, ins, sub});
          }
        }
      }
    }
  }
  return td(na - 1, nb - 1);
}

TedsResult compare_trees(const TableTree& pred, const TableTree& ref) {
  TedsResult r;
  r.distance = tree_edit_distance(pred, ref);
  r.pred_nodes = pred.size();
  r.ref_nodes = ref.size();
  const double denom = static_cast<double>(std::max(r.pred_nodes, r.ref_nodes));
  r.teds = std::clamp(1.0 - static_cast<double>(r.distance) / denom, 0.0, 1.0);
  return r;
}

double teds(const TableTree& a, const TableTree& b) { return compare_trees(a, b).teds; }

}  // namespace cspo
