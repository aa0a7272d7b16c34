#pragma once

// Exhaustive ordered tree edit distance for small trees. Enumerates every
// mapping that preserves preorder and postorder (the valid edit mappings)
// and takes the cheapest. Independent of the production dynamic program.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "cspo/teds.hpp"

namespace oracle {

struct FlatNode {
  std::string label;
  int pre = 0;
  int post = 0;
};

inline void flatten(const cspo::TreeNode& n, std::vector<FlatNode>& out, int& pre, int& post) {
  const auto idx = out.size();
  out.push_back({n.label, pre++, 0});
  for (const auto& c : n.children) flatten(c, out, pre, post);
  out[idx].post = post++;
}

inline std::vector<FlatNode> flatten(const cspo::TreeNode& root) {
  std::vector<FlatNode> out;
  int pre = 0;
  int post = 0;
  flatten(root, out, pre, post);
  return out;
}

class BruteForceTed {
 public:
  BruteForceTed(const cspo::TreeNode& a, const cspo::TreeNode& b) : a_(flatten(a)), b_(flatten(b)) {}

  std::size_t distance() {
    used_.assign(b_.size(), false);
    pairs_.clear();
    best_ = a_.size() + b_.size();
    search(0, 0);
    return best_;
  }

 private:
  bool consistent(std::size_t i, std::size_t j) const {
    for (const auto& [pi, pj] : pairs_) {
      if ((a_[pi].pre < a_[i].pre) != (b_[pj].pre < b_[j].pre)) return false;
      if ((a_[pi].post < a_[i].post) != (b_[pj].post < b_[j].post)) return false;
    }
    return true;
  }

  void search(std::size_t i, std::size_t relabels) {
    const std::size_t m = pairs_.size();
    if (i == a_.size()) {
      best_ = std::min(best_, relabels + (a_.size() - m) + (b_.size() - m));
      return;
    }
    // Lower bound: every remaining node of a mapped at best for free.
    const std::size_t remaining = a_.size() - i;
    const std::size_t max_pairs = std::min(m + remaining, b_.size());
    if (relabels + (a_.size() - max_pairs) + (b_.size() - max_pairs) >= best_) return;

    search(i + 1, relabels);
    for (std::size_t j = 0; j < b_.size(); ++j) {
      if (used_[j] || !consistent(i, j)) continue;
      used_[j] = true;
      pairs_.emplace_back(i, j);
      search(i + 1, relabels + (a_[i].label == b_[j].label ? 0 : 1));
      pairs_.pop_back();
      used_[j] = false;
    }
  }

  std::vector<FlatNode> a_;
  std::vector<FlatNode> b_;
  std::vector<bool> used_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::size_t best_ = 0;
};

inline std::size_t brute_force_ted(const cspo::TreeNode& a, const cspo::TreeNode& b) {
  return BruteForceTed(a, b).distance();
}

// Random ordered tree with exactly `nodes` nodes and labels from `alphabet`.
template <typename Rng>
cspo::TreeNode random_tree(Rng& rng, std::size_t nodes, const std::vector<std::string>& alphabet) {
  std::vector<cspo::TreeNode> pool(nodes);
  std::vector<int> parent(nodes, -1);
  for (std::size_t i = 0; i < nodes; ++i) pool[i].label = alphabet[rng() % alphabet.size()];
  for (std::size_t i = 1; i < nodes; ++i) parent[i] = static_cast<int>(rng() % i);
  // Attach deepest first so children are complete before they are copied.
  for (std::size_t i = nodes; i-- > 1;) {
    auto& siblings = pool[parent[i]].children;
    siblings.insert(siblings.begin() + static_cast<std::ptrdiff_t>(rng() % (siblings.size() + 1)), pool[i]);
  }
  return pool[0];
}

}  // namespace oracle
