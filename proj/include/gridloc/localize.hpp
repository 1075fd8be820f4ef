#pragma once

// Table lookup and refinement: turn per-node hop tuples measured over an
// estimated neighbour graph into a node <-> position matching.

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gridloc/anchors.hpp"
#include "gridloc/error.hpp"
#include "gridloc/graph.hpp"
#include "gridloc/grid.hpp"

namespace gridloc {

using AnchorNodes = std::array<NodeId, kAnchorCount>;
using TuplesByNode = std::map<NodeId, HopTuple>;
using TruePlacement = std::map<NodeId, GridPos>;

enum class Provenance { kAnchor, kLookupHit, kRefined };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::kAnchor: return "ANCHOR";
    case Provenance::kLookupHit: return "LOOKUP_HIT";
    case Provenance::kRefined: return "REFINED";
  }
  return "?";
}

struct Slot {
  NodeId node{};
  Provenance provenance = Provenance::kLookupHit;
  friend bool operator==(const Slot&, const Slot&) = default;
};

// Centralized matching. Injective both ways: a position holds at most one
// node and a node sits in at most one position.
class Assignment {
 public:
  Assignment() = default;

  template <typename NodeRange>
  Assignment(std::span<const GridPos> positions, const NodeRange& nodes)
      : positions_(positions.begin(), positions.end()), nodes_(nodes.begin(), nodes.end()) {}

  void assign(const GridPos& pos, NodeId node, Provenance how) {
    if (by_position_.count(pos)) throw DomainError("position " + gridloc::to_string(pos) + " already occupied");
    if (by_node_.count(node))
      throw DomainError("node " + std::to_string(to_int(node)) + " already assigned");
    if (!nodes_.count(node)) throw DomainError("node " + std::to_string(to_int(node)) + " is not a participant");
    by_position_.emplace(pos, Slot{node, how});
    by_node_.emplace(node, pos);
  }

  bool occupied(const GridPos& pos) const { return by_position_.count(pos) > 0; }
  bool assigned(NodeId node) const { return by_node_.count(node) > 0; }

  std::optional<Slot> at(const GridPos& pos) const {
    auto it = by_position_.find(pos);
    if (it == by_position_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<GridPos> position_of(NodeId node) const {
    auto it = by_node_.find(node);
    if (it == by_node_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<GridPos>& positions() const noexcept { return positions_; }
  const std::set<NodeId>& nodes() const noexcept { return nodes_; }
  const std::map<GridPos, Slot>& slots() const noexcept { return by_position_; }

  // Row-major.
  std::vector<GridPos> unoccupied() const {
    std::vector<GridPos> out;
    for (const auto& p : positions_)
      if (!occupied(p)) out.push_back(p);
    return out;
  }

  // Ascending id.
  std::vector<NodeId> unassigned() const {
    std::vector<NodeId> out;
    for (auto n : nodes_)
      if (!assigned(n)) out.push_back(n);
    return out;
  }

  friend bool operator==(const Assignment&, const Assignment&) = default;

 private:
  std::vector<GridPos> positions_;
  std::set<NodeId> nodes_;
  std::map<GridPos, Slot> by_position_;
  std::map<NodeId, GridPos> by_node_;
};

// Component i = hop count from anchor i's node over `graph`.
inline TuplesByNode hop_tuples(const NeighborGraph& graph, const AnchorNodes& anchor_nodes) {
  TuplesByNode out;
  for (auto n : graph.nodes()) out.emplace(n, HopTuple{});
  for (std::size_t i = 0; i < kAnchorCount; ++i) {
    if (!graph.contains(anchor_nodes[i]))
      throw DomainError("anchor node " + std::to_string(to_int(anchor_nodes[i])) + " is not in the graph");
    for (const auto& [node, h] : bfs_hops(graph, anchor_nodes[i])) out[node][i] = h;
  }
  return out;
}

// First come, first served: in `node_order`, a node whose tuple equals the
// entry of a still-free position takes it. Nodes already placed in `partial`
// are skipped.
inline Assignment lookup_phase(const AnchorTable& table, const TuplesByNode& tuples,
                               std::span<const NodeId> node_order, Assignment partial) {
  for (auto node : node_order) {
    if (partial.assigned(node)) continue;
    auto it = tuples.find(node);
    if (it == tuples.end()) continue;
    const auto pos = table.lookup(it->second);
    if (pos && !partial.occupied(*pos)) partial.assign(*pos, node, Provenance::kLookupHit);
  }
  return partial;
}

inline Assignment lookup_phase(const AnchorTable& table, const TuplesByNode& tuples,
                               std::span<const NodeId> node_order) {
  std::vector<NodeId> nodes;
  for (const auto& [n, _] : tuples) nodes.push_back(n);
  return lookup_phase(table, tuples, node_order, Assignment(table.positions(), nodes));
}

// L1 distance between a measured tuple and a table entry; nullopt (infinite)
// if any component is unreachable.
inline std::optional<std::uint32_t> tuple_mismatch(const HopTuple& measured, const DistanceTuple& entry) {
  std::uint32_t m = 0;
  for (std::size_t i = 0; i < kAnchorCount; ++i) {
    if (!measured[i]) return std::nullopt;
    m += *measured[i] > entry[i] ? *measured[i] - entry[i] : entry[i] - *measured[i];
  }
  return m;
}

// For each free position in row-major order, the remaining node with the
// smallest mismatch (smaller id on ties) takes it if mismatch <= threshold.
inline Assignment refine(const AnchorTable& table, Assignment partial, const TuplesByNode& tuples,
                         std::uint32_t threshold) {
  std::vector<NodeId> pool;
  for (auto n : partial.unassigned())
    if (tuples.count(n)) pool.push_back(n);
  for (const auto& pos : partial.unoccupied()) {
    const auto& entry = table.entry(pos);
    std::optional<std::uint32_t> best;
    std::size_t best_idx = 0;
    for (std::size_t k = 0; k < pool.size(); ++k) {
      const auto m = tuple_mismatch(tuples.at(pool[k]), entry);
      if (m && (!best || *m < *best)) {
        best = m;
        best_idx = k;
      }
    }
    if (best && *best <= threshold) {
      partial.assign(pos, pool[best_idx], Provenance::kRefined);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best_idx));
    }
  }
  return partial;
}

struct LocalizeParams {
  std::uint32_t refine_threshold = 2;
};

// Anchors are placed first; then lookup over ascending node ids; then refine.
inline Assignment localize_centralized(const AnchorTable& table, const NeighborGraph& graph,
                                       const AnchorNodes& anchor_nodes, const LocalizeParams& params = {}) {
  const auto tuples = hop_tuples(graph, anchor_nodes);
  const auto order = graph.nodes();
  Assignment partial(table.positions(), order);
  for (std::size_t i = 0; i < kAnchorCount; ++i)
    partial.assign(table.spec().anchors[i], anchor_nodes[i], Provenance::kAnchor);
  partial = lookup_phase(table, tuples, order, std::move(partial));
  return refine(table, std::move(partial), tuples, params.refine_threshold);
}

struct Metrics {
  double rate_c = 0.0;
  std::optional<double> avg_error;  // undefined when nothing is mis-assigned
  std::size_t correct = 0;
  std::size_t misassigned = 0;
  std::size_t unoccupied = 0;
};

// rate_c counts every position (unoccupied ones as incorrect). avg_error
// averages the grid distance between a mis-assigned node's true position and
// the position it was given; unoccupied positions and nodes listed in
// `foreign` (no position in this segment) add no error term.
inline Metrics metrics(const Assignment& assignment, const TruePlacement& truth,
                       std::span<const NodeId> foreign = {}) {
  const std::set<NodeId> outside(foreign.begin(), foreign.end());
  Metrics m;
  std::uint64_t error_sum = 0;
  std::size_t error_terms = 0;
  for (const auto& pos : assignment.positions()) {
    const auto slot = assignment.at(pos);
    if (!slot) {
      ++m.unoccupied;
      continue;
    }
    auto it = truth.find(slot->node);
    if (it == truth.end()) {
      if (!outside.count(slot->node))
        throw DomainError("assignment references unknown node " + std::to_string(to_int(slot->node)));
      ++m.misassigned;
      continue;
    }
    if (it->second == pos) {
      ++m.correct;
    } else {
      ++m.misassigned;
      error_sum += grid_distance(it->second, pos);
      ++error_terms;
    }
  }
  const auto total = assignment.positions().size();
  m.rate_c = total == 0 ? 0.0 : static_cast<double>(m.correct) / static_cast<double>(total);
  if (error_terms > 0) m.avg_error = static_cast<double>(error_sum) / static_cast<double>(error_terms);
  return m;
}

// One `x y node provenance` line per position (row-major; `- UNOCCUPIED` when
// free), then `unassigned node` lines.
inline void write_assignment(std::ostream& os, const Assignment& a) {
  for (const auto& pos : a.positions()) {
    os << pos.x << ' ' << pos.y << ' ';
    if (auto slot = a.at(pos))
      os << to_int(slot->node) << ' ' << to_string(slot->provenance) << '\n';
    else
      os << "- UNOCCUPIED\n";
  }
  for (auto n : a.unassigned()) os << "unassigned " << to_int(n) << '\n';
}

}  // namespace gridloc
