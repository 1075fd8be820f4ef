#pragma once

// Segment geometry. Positions live on a skewed lattice where one y unit is
// twice an x unit (4.5 m per x step, 9 m per y step in the deployed grid), so
// every position has (x + y) even and interior nodes see six 1-hop neighbours.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <ostream>
#include <string>
#include <vector>

#include "gridloc/error.hpp"
#include "gridloc/graph.hpp"

namespace gridloc {

struct GridPos {
  int x = 0;
  int y = 0;

  // Row-major: y first, then x.
  friend constexpr auto operator<=>(const GridPos& a, const GridPos& b) noexcept {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
  friend constexpr bool operator==(const GridPos&, const GridPos&) noexcept = default;
};

inline std::ostream& operator<<(std::ostream& os, const GridPos& p) {
  return os << '(' << p.x << ',' << p.y << ')';
}

inline std::string to_string(const GridPos& p) {
  return "(" + std::to_string(p.x) + "," + std::to_string(p.y) + ")";
}

inline constexpr std::size_t kAnchorCount = 4;

using PositionGraph = BasicGraph<GridPos>;

struct SegmentSpec {
  int rows = 0;
  int cols = 0;
  std::array<GridPos, kAnchorCount> anchors{};

  bool on_lattice(const GridPos& p) const noexcept {
    return p.x >= 0 && p.y >= 0 && p.y < rows && p.x < 2 * cols && (p.x + p.y) % 2 == 0;
  }

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }

  // Shape and anchor placement; anchors may coincide. Throws ValidationError
  // naming the offending field.
  void validate_lattice() const {
    if (rows <= 0) throw ValidationError("rows: must be positive, got " + std::to_string(rows));
    if (cols <= 0) throw ValidationError("cols: must be positive, got " + std::to_string(cols));
    for (std::size_t i = 0; i < kAnchorCount; ++i)
      if (!on_lattice(anchors[i]))
        throw ValidationError("anchors[" + std::to_string(i) + "]: " + to_string(anchors[i]) +
                              " is not a position of the " + std::to_string(rows) + "x" +
                              std::to_string(cols) + " segment");
  }

  // Full validity: lattice checks plus pairwise-distinct anchors.
  void validate() const {
    validate_lattice();
    for (std::size_t i = 0; i < kAnchorCount; ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (anchors[i] == anchors[j])
          throw ValidationError("anchors[" + std::to_string(i) + "]: duplicates anchors[" +
                                std::to_string(j) + "] at " + to_string(anchors[i]));
  }
};

// The 5x10 segment used in the field deployment.
inline SegmentSpec field_segment() {
  return SegmentSpec{5, 10, {GridPos{12, 0}, GridPos{3, 1}, GridPos{17, 3}, GridPos{8, 4}}};
}

// Lattice enumeration without anchor checks; shared by positions() and callers
// that only know the shape.
inline std::vector<GridPos> lattice(int rows, int cols) {
  std::vector<GridPos> out;
  if (rows <= 0 || cols <= 0) return out;
  out.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (int y = 0; y < rows; ++y)
    for (int x = y % 2; x < 2 * cols; x += 2) out.push_back(GridPos{x, y});
  return out;
}

inline std::vector<GridPos> positions(const SegmentSpec& spec) {
  spec.validate_lattice();
  return lattice(spec.rows, spec.cols);
}

// Hop distance on the lattice: max((|dx| + |dy|) / 2, |dy|).
constexpr std::uint32_t grid_distance(const GridPos& p, const GridPos& q) {
  const int dx = p.x > q.x ? p.x - q.x : q.x - p.x;
  const int dy = p.y > q.y ? p.y - q.y : q.y - p.y;
  if ((dx + dy) % 2 != 0) throw DomainError("grid_distance: positions have mismatched parity");
  const int half = (dx + dy) / 2;
  return static_cast<std::uint32_t>(half > dy ? half : dy);
}

inline std::vector<GridPos> ideal_neighbors(const SegmentSpec& spec, const GridPos& p) {
  if (!spec.on_lattice(p)) throw DomainError("ideal_neighbors: " + to_string(p) + " is off-lattice");
  static constexpr std::array<std::array<int, 2>, 6> kSteps{
      {{0, -1}, {0, 1}, {-1, -1}, {1, -1}, {-1, 1}, {1, 1}}};
  std::vector<GridPos> out;
  for (const auto& [dy, sx] : kSteps) {
    const GridPos q{p.x + (dy == 0 ? 2 * sx : sx), p.y + dy};
    if (spec.on_lattice(q)) out.push_back(q);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline PositionGraph ideal_adjacency(const SegmentSpec& spec) {
  const auto all = positions(spec);
  PositionGraph g(all);
  for (const auto& p : all)
    for (const auto& q : ideal_neighbors(spec, p))
      if (p < q) g.add_edge(p, q);
  return g;
}

}  // namespace gridloc
