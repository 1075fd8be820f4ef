#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <utility>
#include <vector>

#include "gridloc/error.hpp"

namespace gridloc {

enum class NodeId : std::uint32_t {};

inline constexpr std::uint32_t to_int(NodeId id) noexcept { return static_cast<std::uint32_t>(id); }

inline std::ostream& operator<<(std::ostream& os, NodeId id) { return os << to_int(id); }

// Hop count, or no path at all. Never encoded as a large integer.
using HopCount = std::optional<std::uint32_t>;
inline constexpr std::nullopt_t kUnreachable = std::nullopt;

// Undirected, loop-free adjacency over an ordered key type. Iteration order is
// the key order, which keeps every consumer deterministic.
template <typename Key>
class BasicGraph {
 public:
  using key_type = Key;

  BasicGraph() = default;

  template <typename Range>
  explicit BasicGraph(const Range& nodes) {
    for (const auto& n : nodes) add_node(n);
  }

  void add_node(const Key& n) { adj_.try_emplace(n); }

  bool contains(const Key& n) const { return adj_.find(n) != adj_.end(); }

  // Adds both endpoints if missing. Self-loops are rejected.
  void add_edge(const Key& u, const Key& v) {
    if (u == v) throw DomainError("self-loop edges are not allowed");
    adj_[u].insert(v);
    adj_[v].insert(u);
  }

  bool remove_edge(const Key& u, const Key& v) {
    auto iu = adj_.find(u);
    auto iv = adj_.find(v);
    if (iu == adj_.end() || iv == adj_.end()) return false;
    const bool had = iu->second.erase(v) > 0;
    iv->second.erase(u);
    return had;
  }

  bool has_edge(const Key& u, const Key& v) const {
    auto it = adj_.find(u);
    return it != adj_.end() && it->second.count(v) > 0;
  }

  const std::set<Key>& neighbors(const Key& n) const {
    auto it = adj_.find(n);
    if (it == adj_.end()) throw DomainError("node not in graph");
    return it->second;
  }

  std::vector<Key> nodes() const {
    std::vector<Key> out;
    out.reserve(adj_.size());
    for (const auto& [k, _] : adj_) out.push_back(k);
    return out;
  }

  std::size_t node_count() const noexcept { return adj_.size(); }

  std::size_t edge_count() const noexcept {
    std::size_t twice = 0;
    for (const auto& [_, nbrs] : adj_) twice += nbrs.size();
    return twice / 2;
  }

  // Each undirected edge once, as (smaller, larger).
  std::vector<std::pair<Key, Key>> edges() const {
    std::vector<std::pair<Key, Key>> out;
    for (const auto& [u, nbrs] : adj_)
      for (const auto& v : nbrs)
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  std::size_t max_degree() const noexcept {
    std::size_t d = 0;
    for (const auto& [_, nbrs] : adj_) d = std::max(d, nbrs.size());
    return d;
  }

  friend bool operator==(const BasicGraph&, const BasicGraph&) = default;

 private:
  std::map<Key, std::set<Key>> adj_;
};

using NeighborGraph = BasicGraph<NodeId>;

// Breadth-first hop counts from `source` to every node of `graph`.
template <typename Key>
std::map<Key, HopCount> bfs_hops(const BasicGraph<Key>& graph, const Key& source) {
  if (!graph.contains(source)) throw DomainError("bfs source is not in the graph");
  std::map<Key, HopCount> hops;
  for (const auto& n : graph.nodes()) hops.emplace(n, kUnreachable);
  hops[source] = 0;
  std::deque<Key> frontier{source};
  while (!frontier.empty()) {
    const Key u = frontier.front();
    frontier.pop_front();
    const std::uint32_t next = *hops[u] + 1;
    for (const auto& v : graph.neighbors(u)) {
      auto& h = hops[v];
      if (!h) {
        h = next;
        frontier.push_back(v);
      }
    }
  }
  return hops;
}

}  // namespace gridloc
