#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cspo/table_parser.hpp"

namespace cspo {

struct TreeNode {
  std::string label;
  std::vector<TreeNode> children;

  bool operator==(const TreeNode&) const = default;
};

/// Rooted, ordered, labeled tree. Built from a ParsedTable the root's
/// children are: an optional caption node, the tabular node (one leaf per
/// column alignment and per vertical rule, in spec order), then row
/// entities (one leaf per cell) interleaved with line entities by row
/// boundary. Packages are not represented.
struct TableTree {
  TreeNode root;

  std::size_t size() const;
};

std::size_t node_count(const TreeNode& node);

TableTree build_tree(const ParsedTable& table);

/// Exact ordered tree edit distance with unit insert/delete/relabel costs
/// (Zhang-Shasha).
std::size_t tree_edit_distance(const TableTree& a, const TableTree& b);

/// 1 - dist / max(|a|, |b|), clamped to [0, 1]. Node counts include the root.
double teds(const TableTree& a, const TableTree& b);

struct TedsResult {
  double teds = 0.0;
  std::size_t distance = 0;
  std::size_t pred_nodes = 0;
  std::size_t ref_nodes = 0;
};

TedsResult compare_trees(const TableTree& pred, const TableTree& ref);

}  // namespace cspo
