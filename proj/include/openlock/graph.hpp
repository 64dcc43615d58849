#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace openlock {

struct CapabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Small directed graph on nodes 0..n-1 with optional node labels. Edges are
// stored as one bit row per node.
class Digraph {
 public:
  static constexpr int kMaxNodes = 32;

  Digraph() = default;
  explicit Digraph(int n) : rows_(n, 0u), labels_(n) {
    if (n > kMaxNodes) throw CapabilityError("Digraph supports at most 32 nodes");
  }

  int add_node(std::string label = {}) {
    if (size() >= kMaxNodes) throw CapabilityError("Digraph supports at most 32 nodes");
    rows_.push_back(0u);
    labels_.push_back(std::move(label));
    return size() - 1;
  }

  int size() const { return static_cast<int>(rows_.size()); }

  void add_edge(int from, int to) { rows_.at(from) |= (1u << to); }
  bool has_edge(int from, int to) const { return (rows_[from] >> to) & 1u; }

  int edge_count() const {
    int c = 0;
    for (auto r : rows_) c += std::popcount(r);
    return c;
  }

  const std::string& label(int i) const { return labels_.at(i); }

  // Index of the node with this label, or -1.
  int find(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    return it == labels_.end() ? -1 : static_cast<int>(it - labels_.begin());
  }

  // Edge set equality under the identity node order; labels are ignored.
  friend bool operator==(const Digraph& a, const Digraph& b) { return a.rows_ == b.rows_; }

  // Same graph with one node and its incident edges removed.
  Digraph without_node(int victim) const {
    Digraph out;
    std::vector<int> remap(size(), -1);
    for (int i = 0; i < size(); ++i) {
      if (i != victim) remap[i] = out.add_node(labels_[i]);
    }
    for (int i = 0; i < size(); ++i) {
      for (int j = 0; j < size(); ++j) {
        if (remap[i] >= 0 && remap[j] >= 0 && has_edge(i, j)) out.add_edge(remap[i], remap[j]);
      }
    }
    return out;
  }

 private:
  std::vector<std::uint32_t> rows_;
  std::vector<std::string> labels_;
};

inline constexpr int kMaxGedNodes = 8;

// Exact graph edit distance with unit node insert/delete and edge
// insert/delete costs; node substitution is free. The smaller graph is padded
// with isolated dummy nodes and every bijection is scored, so cost is
// |n1 - n2| plus the edge mismatches under the best mapping.
inline int graph_edit_distance(const Digraph& g1, const Digraph& g2) {
  if (g1.size() > kMaxGedNodes || g2.size() > kMaxGedNodes) {
    throw CapabilityError("graph_edit_distance: graphs above " + std::to_string(kMaxGedNodes) +
                          " nodes are beyond the exhaustive search bound");
  }
  const int n = std::max(g1.size(), g2.size());
  const int node_cost = std::abs(g1.size() - g2.size());
  auto edge1 = [&](int u, int v) { return u < g1.size() && v < g1.size() && g1.has_edge(u, v); };
  auto edge2 = [&](int u, int v) { return u < g2.size() && v < g2.size() && g2.has_edge(u, v); };

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  int best = std::numeric_limits<int>::max();
  do {
    int cost = node_cost;
    for (int u = 0; u < n && cost < best; ++u) {
      for (int v = 0; v < n; ++v) {
        if (edge1(u, v) != edge2(perm[u], perm[v])) ++cost;
      }
    }
    best = std::min(best, cost);
  } while (best > node_cost && std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace openlock
