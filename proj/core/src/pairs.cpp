#include "relkin/pairs.hpp"

#include <stdexcept>
#include <utility>

namespace relkin {

std::size_t pair_count(int n) {
  if (n < 2) return 0;
  const auto m = static_cast<std::size_t>(n);
  return m * (m - 1) / 2;
}

std::vector<NodePair> canonical_pairs(int n) {
  std::vector<NodePair> out;
  out.reserve(pair_count(n));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) out.push_back({i, j});
  return out;
}

std::size_t pair_index(int n, int i, int j) {
  if (i == j || i < 0 || j < 0 || i >= n || j >= n)
    throw std::out_of_range("pair_index: invalid pair");
  if (i > j) std::swap(i, j);
  // Links owned by rows 0..i-1 come first.
  const auto ui = static_cast<std::size_t>(i);
  const auto un = static_cast<std::size_t>(n);
  return ui * un - ui * (ui + 1) / 2 + static_cast<std::size_t>(j - i - 1);
}

}  // namespace relkin
