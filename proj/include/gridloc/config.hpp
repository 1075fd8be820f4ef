#pragma once

// Run configuration shared by the CLI commands: a `key = value` text file
// (`#` starts a comment) whose entries can be overridden one by one.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "gridloc/error.hpp"
#include "gridloc/grid.hpp"
#include "gridloc/localize.hpp"
#include "gridloc/protocol.hpp"
#include "gridloc/ranging.hpp"
#include "gridloc/sim.hpp"

namespace gridloc {

struct RunConfig {
  SegmentSpec segment = field_segment();
  std::optional<AnchorNodes> anchor_nodes;  // default: row-major node ids
  FuzzyParams fuzzy;
  LocalizeParams localize;
  Symmetrization symmetrization = Symmetrization::kOr;
  std::optional<std::uint64_t> seed;
  std::size_t runs = 1000;
  unsigned threads = 1;
  std::vector<sim::ErrorLevel> levels{{0, 0}};
  sim::ErrorModel error_model;
  std::vector<std::size_t> sizes{50, 60, 70, 80, 90, 100, 150, 200};
  protocol::NetworkModel network;
  std::size_t inject_a = 0;  // distributed: errors injected into the ideal graph
  std::size_t inject_b = 0;
  int chi_square_bins = 18;
  std::string out;
  std::string summary;
  std::string trace;

  std::uint64_t require_seed() const {
    if (!seed) throw ValidationError("seed: randomized commands need an explicit seed");
    return *seed;
  }
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T v{};
  if (!(is >> v)) throw ValidationError(key + ": cannot parse `" + text + "` as a number");
  std::string rest;
  if (is >> rest) throw ValidationError(key + ": unexpected `" + rest + "`");
  if constexpr (std::is_unsigned_v<T>)
    if (text.find('-') != std::string::npos) throw ValidationError(key + ": must not be negative");
  return v;
}

inline std::vector<std::string> split_ws(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

inline std::pair<long, long> parse_pair(const std::string& key, const std::string& tok) {
  const auto comma = tok.find(',');
  if (comma == std::string::npos) throw ValidationError(key + ": expected `a,b`, got `" + tok + "`");
  return {parse_number<long>(key, tok.substr(0, comma)), parse_number<long>(key, tok.substr(comma + 1))};
}

}  // namespace detail

// Applies one `key = value` setting; unknown keys and bad values throw
// ValidationError naming the key.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "rows") {
    c.segment.rows = parse_number<int>(key, value);
  } else if (key == "cols") {
    c.segment.cols = parse_number<int>(key, value);
  } else if (key == "anchors") {
    const auto toks = detail::split_ws(value);
    if (toks.size() != kAnchorCount) throw ValidationError("anchors: expected 4 `x,y` positions");
    for (std::size_t i = 0; i < kAnchorCount; ++i) {
      const auto [x, y] = detail::parse_pair(key, toks[i]);
      c.segment.anchors[i] = GridPos{static_cast<int>(x), static_cast<int>(y)};
    }
  } else if (key == "anchor_nodes") {
    const auto toks = detail::split_ws(value);
    if (toks.size() != kAnchorCount) throw ValidationError("anchor_nodes: expected 4 node ids");
    AnchorNodes ids{};
    for (std::size_t i = 0; i < kAnchorCount; ++i) ids[i] = NodeId(parse_number<std::uint32_t>(key, toks[i]));
    c.anchor_nodes = ids;
  } else if (key == "a") {
    c.fuzzy.a = parse_number<double>(key, value);
  } else if (key == "b") {
    c.fuzzy.b = parse_number<double>(key, value);
  } else if (key == "rel_lo") {
    c.fuzzy.rel_lo = parse_number<double>(key, value);
  } else if (key == "rel_hi") {
    c.fuzzy.rel_hi = parse_number<double>(key, value);
  } else if (key == "num_lo") {
    c.fuzzy.num_lo = parse_number<double>(key, value);
  } else if (key == "num_hi") {
    c.fuzzy.num_hi = parse_number<double>(key, value);
  } else if (key == "theta") {
    c.fuzzy.theta = parse_number<double>(key, value);
  } else if (key == "group_size") {
    c.fuzzy.group_size = parse_number<std::uint32_t>(key, value);
  } else if (key == "T" || key == "refine_threshold") {
    c.localize.refine_threshold = parse_number<std::uint32_t>(key, value);
  } else if (key == "symmetrization") {
    if (value == "or")
      c.symmetrization = Symmetrization::kOr;
    else if (value == "and")
      c.symmetrization = Symmetrization::kAnd;
    else
      throw ValidationError("symmetrization: expected `or` or `and`");
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "runs") {
    c.runs = parse_number<std::size_t>(key, value);
  } else if (key == "threads") {
    c.threads = parse_number<unsigned>(key, value);
  } else if (key == "levels") {
    c.levels.clear();
    for (const auto& tok : detail::split_ws(value)) {
      const auto [na, nb] = detail::parse_pair(key, tok);
      if (na < 0 || nb < 0) throw ValidationError("levels: counts must not be negative");
      c.levels.push_back({static_cast<std::size_t>(na), static_cast<std::size_t>(nb)});
    }
    if (c.levels.empty()) throw ValidationError("levels: at least one `nA,nB` level is required");
  } else if (key == "error_mode") {
    if (value == "rates")
      c.error_model.kind = sim::ErrorModel::Kind::kRates;
    else if (value == "counts")
      c.error_model.kind = sim::ErrorModel::Kind::kCounts;
    else
      throw ValidationError("error_mode: expected `rates` or `counts`");
  } else if (key == "rate_a") {
    c.error_model.rate_a = parse_number<double>(key, value);
  } else if (key == "rate_b") {
    c.error_model.rate_b = parse_number<double>(key, value);
  } else if (key == "count_a") {
    c.error_model.count_a = parse_number<std::size_t>(key, value);
  } else if (key == "count_b") {
    c.error_model.count_b = parse_number<std::size_t>(key, value);
  } else if (key == "sizes") {
    c.sizes.clear();
    for (const auto& tok : detail::split_ws(value)) c.sizes.push_back(parse_number<std::size_t>(key, tok));
    if (c.sizes.empty()) throw ValidationError("sizes: at least one segment size is required");
  } else if (key == "ranging_loss") {
    c.network.ranging_loss = parse_number<double>(key, value);
  } else if (key == "report_loss") {
    c.network.report_loss = parse_number<double>(key, value);
  } else if (key == "beacon_loss") {
    c.network.beacon_loss = parse_number<double>(key, value);
  } else if (key == "anchor_beacon_loss") {
    // `index:probability` entries
    for (const auto& tok : detail::split_ws(value)) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ValidationError(key + ": expected `index:probability`");
      const auto idx = parse_number<std::size_t>(key, tok.substr(0, colon));
      if (idx >= kAnchorCount) throw ValidationError(key + ": anchor index out of range");
      c.network.anchor_beacon_loss[idx] = parse_number<double>(key, tok.substr(colon + 1));
    }
  } else if (key == "latency") {
    c.network.latency = parse_number<double>(key, value);
  } else if (key == "jitter") {
    c.network.jitter = parse_number<double>(key, value);
  } else if (key == "inject_a") {
    c.inject_a = parse_number<std::size_t>(key, value);
  } else if (key == "inject_b") {
    c.inject_b = parse_number<std::size_t>(key, value);
  } else if (key == "bins") {
    c.chi_square_bins = parse_number<int>(key, value);
  } else if (key == "out") {
    c.out = value;
  } else if (key == "summary") {
    c.summary = value;
  } else if (key == "trace") {
    c.trace = value;
  } else {
    throw ValidationError("unknown configuration key `" + key + "`");
  }
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// `key=value` as given on the command line.
inline void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ValidationError("override `" + assignment + "`: expected key=value");
  apply_setting(c, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

inline void load_config(RunConfig& c, std::istream& is, const std::string& source = "config") {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected `key = value`");
    try {
      apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ValidationError& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
}

inline AnchorNodes resolve_anchor_nodes(const RunConfig& c) {
  if (c.anchor_nodes) return *c.anchor_nodes;
  return sim::anchor_nodes_for(c.segment, sim::identity_placement(c.segment));
}

// Ground-truth file: `node_id x y` per line.
inline TruePlacement read_placement(std::istream& is, const std::string& source = "truth") {
  TruePlacement out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    long long id = -1;
    int x = -1, y = -1;
    if (!(ls >> id >> x >> y) || id < 0) throw ParseError(source, lineno, "expected `node_id x y`");
    if (!out.emplace(NodeId(static_cast<std::uint32_t>(id)), GridPos{x, y}).second)
      throw ParseError(source, lineno, "duplicate node id");
  }
  return out;
}

// Edge-list file: `u v` per line.
inline NeighborGraph read_graph(std::istream& is, const std::string& source = "graph") {
  NeighborGraph g;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    long long u = -1, v = -1;
    if (!(ls >> u >> v) || u < 0 || v < 0) throw ParseError(source, lineno, "expected `u v`");
    if (u == v) {
      g.add_node(NodeId(static_cast<std::uint32_t>(u)));  // `n n` declares an isolated node
      continue;
    }
    g.add_edge(NodeId(static_cast<std::uint32_t>(u)), NodeId(static_cast<std::uint32_t>(v)));
  }
  return g;
}

}  // namespace gridloc
