#pragma once

#include <cstddef>
#include <vector>

namespace relkin {

/// Unordered node pair with i < j (0-based node indices).
struct NodePair {
  int i = 0;
  int j = 0;

  friend bool operator==(const NodePair&, const NodePair&) = default;
};

/// Number of unique links in a network of n nodes, n(n-1)/2.
std::size_t pair_count(int n);

/// Canonical stacking order (0,1),(0,2),...,(0,n-1),(1,2),...
std::vector<NodePair> canonical_pairs(int n);

/// Position of (i,j) in canonical_pairs(n). Order of i and j does not matter.
std::size_t pair_index(int n, int i, int j);

}  // namespace relkin
