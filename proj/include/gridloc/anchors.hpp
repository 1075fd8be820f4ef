#pragma once

// Anchor distance table: for every position of a segment, the hop distances
// to the four anchors. Lookup inverts the table and is only meaningful when no
// two positions share a tuple.

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gridloc/error.hpp"
#include "gridloc/grid.hpp"

namespace gridloc {

using DistanceTuple = std::array<std::uint32_t, kAnchorCount>;

// Per-node tuple measured over an estimated graph; components may be missing.
using HopTuple = std::array<HopCount, kAnchorCount>;

inline HopTuple to_hop_tuple(const DistanceTuple& t) {
  HopTuple out;
  for (std::size_t i = 0; i < kAnchorCount; ++i) out[i] = t[i];
  return out;
}

inline std::optional<DistanceTuple> to_distance_tuple(const HopTuple& t) {
  DistanceTuple out{};
  for (std::size_t i = 0; i < kAnchorCount; ++i) {
    if (!t[i]) return std::nullopt;
    out[i] = *t[i];
  }
  return out;
}

inline DistanceTuple distance_tuple(const SegmentSpec& spec, const GridPos& p) {
  DistanceTuple t{};
  for (std::size_t i = 0; i < kAnchorCount; ++i) t[i] = grid_distance(p, spec.anchors[i]);
  return t;
}

class AnchorTable;
AnchorTable build_table(const SegmentSpec& spec);

// Read-only after construction.
class AnchorTable {
 public:
  const SegmentSpec& spec() const noexcept { return spec_; }
  const std::vector<GridPos>& positions() const noexcept { return positions_; }
  const std::vector<DistanceTuple>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return positions_.size(); }

  // True iff all tuples are pairwise distinct.
  bool valid() const noexcept { return collisions_.empty(); }

  // Position pairs (row-major, first < second) sharing a tuple.
  const std::vector<std::pair<GridPos, GridPos>>& collisions() const noexcept { return collisions_; }

  bool contains(const GridPos& p) const { return index_.count(p) > 0; }

  std::size_t index_of(const GridPos& p) const {
    auto it = index_.find(p);
    if (it == index_.end()) throw DomainError("position " + to_string(p) + " is not in the table");
    return it->second;
  }

  const DistanceTuple& entry(const GridPos& p) const { return entries_[index_of(p)]; }

  // Exact reverse lookup; nullopt when no position carries the tuple.
  std::optional<GridPos> lookup(const DistanceTuple& t) const {
    require_valid();
    auto it = reverse_.find(t);
    if (it == reverse_.end()) return std::nullopt;
    return it->second;
  }

  // Tuples with a missing component never match.
  std::optional<GridPos> lookup(const HopTuple& t) const {
    require_valid();
    auto full = to_distance_tuple(t);
    if (!full) return std::nullopt;
    return lookup(*full);
  }

 private:
  friend AnchorTable build_table(const SegmentSpec& spec);

  void require_valid() const {
    if (!valid()) throw DomainError("lookup on an anchor table with colliding tuples");
  }

  SegmentSpec spec_;
  std::vector<GridPos> positions_;
  std::vector<DistanceTuple> entries_;
  std::map<GridPos, std::size_t> index_;
  std::map<DistanceTuple, GridPos> reverse_;
  std::vector<std::pair<GridPos, GridPos>> collisions_;
};

inline AnchorTable build_table(const SegmentSpec& spec) {
  spec.validate();
  AnchorTable table;
  table.spec_ = spec;
  table.positions_ = positions(spec);
  table.entries_.reserve(table.positions_.size());
  std::map<DistanceTuple, std::vector<GridPos>> groups;
  for (std::size_t i = 0; i < table.positions_.size(); ++i) {
    const GridPos& p = table.positions_[i];
    table.entries_.push_back(distance_tuple(spec, p));
    table.index_.emplace(p, i);
    groups[table.entries_.back()].push_back(p);
  }
  for (const auto& [tuple, members] : groups)
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j)
        table.collisions_.emplace_back(members[i], members[j]);
  std::sort(table.collisions_.begin(), table.collisions_.end());
  if (table.collisions_.empty())
    for (const auto& [tuple, members] : groups) table.reverse_.emplace(tuple, members.front());
  return table;
}

struct AnchorReport {
  bool distinct = false;
  std::vector<std::pair<GridPos, GridPos>> collisions;
  bool collinear = false;
  // Diagonals share a midpoint for some pairing, on lattice coordinates.
  bool parallelogram = false;
  // Same test after mapping to metres (x * 4.5, y * 9). Midpoint coincidence
  // is affine-invariant, so this always agrees with `parallelogram`.
  bool parallelogram_physical = false;
};

namespace detail {

inline bool all_collinear(const std::array<GridPos, kAnchorCount>& a) {
  const long ux = a[1].x - a[0].x, uy = a[1].y - a[0].y;
  for (std::size_t k = 2; k < kAnchorCount; ++k) {
    const long vx = a[k].x - a[0].x, vy = a[k].y - a[0].y;
    if (ux * vy - uy * vx != 0) return false;
  }
  return true;
}

// Compares doubled midpoints (sums) so everything stays integral. `sx`/`sy`
// scale the axes; a degenerate (collinear) quadruple is not a parallelogram.
inline bool has_parallelogram(const std::array<GridPos, kAnchorCount>& a, long sx, long sy) {
  if (all_collinear(a)) return false;
  static constexpr std::array<std::array<std::size_t, 4>, 3> kPairings{
      {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}}};
  for (const auto& [i, j, k, l] : kPairings) {
    if (sx * (a[i].x + a[j].x) == sx * (a[k].x + a[l].x) &&
        sy * (a[i].y + a[j].y) == sy * (a[k].y + a[l].y))
      return true;
  }
  return false;
}

}  // namespace detail

inline AnchorReport validate_anchors(const SegmentSpec& spec) {
  const AnchorTable table = build_table(spec);
  AnchorReport r;
  r.distinct = table.valid();
  r.collisions = table.collisions();
  r.collinear = detail::all_collinear(spec.anchors);
  r.parallelogram = detail::has_parallelogram(spec.anchors, 1, 1);
  r.parallelogram_physical = detail::has_parallelogram(spec.anchors, 9, 18);  // half-metres
  return r;
}

// Text export: one `x y d1 d2 d3 d4` line per position, row-major.
inline void write_table(std::ostream& os, const AnchorTable& table) {
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& p = table.positions()[i];
    const auto& t = table.entries()[i];
    os << p.x << ' ' << p.y;
    for (auto d : t) os << ' ' << d;
    os << '\n';
  }
}

struct TableRow {
  GridPos pos;
  DistanceTuple tuple;
  friend bool operator==(const TableRow&, const TableRow&) = default;
};

inline std::vector<TableRow> read_table(std::istream& is, const std::string& source = "table") {
  std::vector<TableRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    TableRow row{};
    long vals[6];
    for (long& v : vals)
      if (!(ls >> v)) throw ParseError(source, lineno, "expected `x y d1 d2 d3 d4`");
    std::string extra;
    if (ls >> extra) throw ParseError(source, lineno, "trailing field `" + extra + "`");
    if (vals[0] < 0 || vals[1] < 0 || (vals[0] + vals[1]) % 2 != 0)
      throw ParseError(source, lineno, "position is off-lattice");
    row.pos = GridPos{static_cast<int>(vals[0]), static_cast<int>(vals[1])};
    for (std::size_t i = 0; i < kAnchorCount; ++i) {
      if (vals[2 + i] < 0) throw ParseError(source, lineno, "negative hop distance");
      row.tuple[i] = static_cast<std::uint32_t>(vals[2 + i]);
    }
    if (!rows.empty() && !(rows.back().pos < row.pos))
      throw ParseError(source, lineno, "rows are not in row-major order");
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gridloc
