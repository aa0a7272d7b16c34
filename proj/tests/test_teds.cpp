#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cspo/rewards.hpp"
#include "cspo/teds.hpp"
#include "oracles/ted_bruteforce.hpp"
#include "support/table_fixtures.hpp"

using namespace cspo;

namespace {

TreeNode leaf(std::string label) { return TreeNode{std::move(label), {}}; }

// root -> tabular(l, c), row(a, b)
TableTree seven_nodes() {
  TableTree t;
  t.root = TreeNode{"table",
                    {TreeNode{"tabular", {leaf("l"), leaf("c")}}, TreeNode{"row", {leaf("a"), leaf("b")}}}};
  return t;
}

TableTree tree_of_source(const std::string& src) { return tree_of(analyze_source(src)); }

const std::vector<std::string> kAlphabet = {"a", "b", "c"};

}  // namespace

TEST(BuildTree, MinimalTableWithCaptionHasEightNodes) {
  const auto t = tree_of_source("\\begin{table}\\caption{Tiny}\\begin{tabular}{lc} A & B \\\\ \\end{tabular}\\end{table}");
  EXPECT_EQ(t.size(), 8u);
}

TEST(BuildTree, EmptyTableIsRootAndTabular) {
  const auto t = build_tree(ParsedTable{});
  EXPECT_EQ(t.size(), 2u);
  ASSERT_EQ(t.root.children.size(), 1u);
}

TEST(BuildTree, OneHlineGivesOneLineEntity) {
  const auto with = tree_of_source("\\begin{tabular}{l} \\hline A \\\\ \\end{tabular}");
  const auto without = tree_of_source("\\begin{tabular}{l} A \\\\ \\end{tabular}");
  EXPECT_EQ(with.root.children.size(), without.root.children.size() + 1);
}

TEST(BuildTree, PackagesAreIgnored) {
  const auto a = tree_of_source("\\usepackage{booktabs}\\begin{tabular}{l} A \\\\ \\end{tabular}");
  const auto b = tree_of_source("\\begin{tabular}{l} A \\\\ \\end{tabular}");
  EXPECT_EQ(a.root, b.root);
}

TEST(BuildTree, RowLeavesMatchExpandedWidth) {
  const auto a = analyze_source(fixtures::kRichTable);
  ASSERT_TRUE(a.table);
  const auto t = build_tree(*a.table);
  EXPECT_EQ(t.size(), node_count(t.root));
  EXPECT_GE(t.size(), 1u);
}

TEST(TreeEditDistance, IdenticalIsZero) {
  EXPECT_EQ(tree_edit_distance(seven_nodes(), seven_nodes()), 0u);
}

TEST(TreeEditDistance, OneRelabelIsOne) {
  auto b = seven_nodes();
  b.root.children[1].children[1].label = "z";
  EXPECT_EQ(tree_edit_distance(seven_nodes(), b), 1u);
}

TEST(TreeEditDistance, MatchesBruteForceOnSmallTrees) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const TableTree a{oracle::random_tree(rng, 1 + rng() % 6, kAlphabet)};
    const TableTree b{oracle::random_tree(rng, 1 + rng() % 6, kAlphabet)};
    ASSERT_EQ(tree_edit_distance(a, b), oracle::brute_force_ted(a.root, b.root)) << "case " << i;
  }
}

TEST(TreeEditDistance, KnownHardPair) {
  // Sibling order matters: a(b, c) vs a(c, b) needs two relabels.
  const TableTree x{TreeNode{"a", {leaf("b"), leaf("c")}}};
  const TableTree y{TreeNode{"a", {leaf("c"), leaf("b")}}};
  EXPECT_EQ(tree_edit_distance(x, y), 2u);
  // Deleting an inner node lifts its children.
  const TableTree p{TreeNode{"a", {TreeNode{"d", {leaf("b"), leaf("c")}}}}};
  EXPECT_EQ(tree_edit_distance(p, x), 1u);
}

TEST(TreeEditDistance, TriangleInequality) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const TableTree a{oracle::random_tree(rng, 1 + rng() % 8, kAlphabet)};
    const TableTree b{oracle::random_tree(rng, 1 + rng() % 8, kAlphabet)};
    const TableTree c{oracle::random_tree(rng, 1 + rng() % 8, kAlphabet)};
    EXPECT_LE(tree_edit_distance(a, c), tree_edit_distance(a, b) + tree_edit_distance(b, c));
  }
}

TEST(Teds, IdentityIsExactlyOne) {
  EXPECT_EQ(teds(seven_nodes(), seven_nodes()), 1.0);
  const auto t = tree_of_source(fixtures::kRichTable);
  EXPECT_EQ(teds(t, t), 1.0);
}

TEST(Teds, SevenNodeSingleRelabel) {
  auto b = seven_nodes();
  b.root.children[0].children[0].label = "r";
  EXPECT_NEAR(teds(seven_nodes(), b), 1.0 - 1.0 / 7.0, 1e-12);
}

TEST(Teds, RootOnlyVersusFiveChildren) {
  const TableTree a{leaf("table")};
  TableTree b{leaf("table")};
  for (int i = 0; i < 5; ++i) b.root.children.push_back(leaf("x"));
  EXPECT_NEAR(teds(a, b), 1.0 / 6.0, 1e-12);
}

TEST(Teds, SymmetricAndInRange) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 300; ++i) {
    const TableTree a{oracle::random_tree(rng, 1 + rng() % 10, kAlphabet)};
    const TableTree b{oracle::random_tree(rng, 1 + rng() % 10, kAlphabet)};
    const double ab = teds(a, b);
    EXPECT_NEAR(ab, teds(b, a), 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(Teds, CompareTreesReportsCounts) {
  auto b = seven_nodes();
  b.root.children.pop_back();
  const auto r = compare_trees(seven_nodes(), b);
  EXPECT_EQ(r.pred_nodes, 7u);
  EXPECT_EQ(r.ref_nodes, 4u);
  EXPECT_EQ(r.distance, 3u);
  EXPECT_NEAR(r.teds, 1.0 - 3.0 / 7.0, 1e-12);
}

TEST(Teds, CellTextMutationLowersScore) {
  const auto ref = tree_of_source(fixtures::kRichTable);
  for (const auto& m : fixtures::mutation_family()) {
    if (m.target == ComponentKind::kPkg) continue;
    const auto pred = tree_of_source(fixtures::apply(fixtures::kRichTable, m));
    EXPECT_LT(teds(pred, ref), 1.0) << m.name;
  }
}
