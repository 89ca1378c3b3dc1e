#pragma once
#include <cstdint>
#include <numeric>
#include <vector>

namespace oz {

struct UnionFind {
  std::vector<int32_t> parent;

  explicit UnionFind(size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }

  int32_t find(int32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }

  // Returns true when the two sets were previously distinct.
  bool unite(int32_t a, int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (a < b) parent[b] = a; else parent[a] = b;
    return true;
  }

  void reset() { std::iota(parent.begin(), parent.end(), 0); }
};

}  // namespace oz
