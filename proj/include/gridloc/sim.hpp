#pragma once

// Monte Carlo evaluation: inject type A (false 1-hop edge between a true
// 2-hop pair) and type B (missing true 1-hop edge) errors into the ideal
// neighbour graph, localize, and aggregate rate_c / avg_error.

#include <atomic>
#include <exception>
#include <iterator>
#include <limits>
#include <mutex>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gridloc/anchors.hpp"
#include "gridloc/error.hpp"
#include "gridloc/graph.hpp"
#include "gridloc/grid.hpp"
#include "gridloc/localize.hpp"

namespace gridloc::sim {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; a stable mixing step for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed of one trial; depends only on its coordinates, never on scheduling.
constexpr std::uint64_t run_seed(std::uint64_t master, std::uint64_t level, std::uint64_t run) noexcept {
  return mix64(mix64(mix64(master) ^ level) ^ run);
}

// Uniform integer in [0, bound) by rejection; unlike std::uniform_int_distribution
// the sequence is the same on every standard library.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  if (bound == 0) throw DomainError("uniform_below: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do v = rng(); while (v >= limit);
  return v % bound;
}

// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  if (k > n) throw DomainError("cannot sample " + std::to_string(k) + " of " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

using NodePair = std::pair<NodeId, NodeId>;

// Node i sits at the i-th position in row-major order.
inline TruePlacement identity_placement(const SegmentSpec& spec) {
  TruePlacement out;
  const auto all = positions(spec);
  for (std::size_t i = 0; i < all.size(); ++i) out.emplace(NodeId(static_cast<std::uint32_t>(i)), all[i]);
  return out;
}

inline AnchorNodes anchor_nodes_for(const SegmentSpec& spec, const TruePlacement& placement) {
  AnchorNodes out{};
  for (std::size_t i = 0; i < kAnchorCount; ++i) {
    bool found = false;
    for (const auto& [n, p] : placement)
      if (p == spec.anchors[i]) {
        out[i] = n;
        found = true;
        break;
      }
    if (!found) throw DomainError("no node is placed at anchor " + gridloc::to_string(spec.anchors[i]));
  }
  return out;
}

// Node pairs (ascending ids) whose true positions are exactly `hops` apart.
inline std::vector<NodePair> pairs_at_distance(const TruePlacement& placement, std::uint32_t hops) {
  std::vector<NodePair> out;
  for (auto i = placement.begin(); i != placement.end(); ++i)
    for (auto j = std::next(i); j != placement.end(); ++j)
      if (grid_distance(i->second, j->second) == hops) out.emplace_back(i->first, j->first);
  return out;
}

inline NeighborGraph ideal_graph(const SegmentSpec& spec, const TruePlacement& placement) {
  for (const auto& [n, p] : placement)
    if (!spec.on_lattice(p))
      throw DomainError("node " + std::to_string(to_int(n)) + " placed off-lattice at " + gridloc::to_string(p));
  NeighborGraph g;
  for (const auto& [n, _] : placement) g.add_node(n);
  for (const auto& [u, v] : pairs_at_distance(placement, 1)) g.add_edge(u, v);
  return g;
}

struct GroundTruth {
  std::vector<NodePair> one_hop;
  std::vector<NodePair> two_hop;

  static GroundTruth from(const TruePlacement& placement) {
    return GroundTruth{pairs_at_distance(placement, 1), pairs_at_distance(placement, 2)};
  }
};

struct ErrorInjection {
  std::size_t type_a = 0;  // false edges added between true 2-hop pairs
  std::size_t type_b = 0;  // true 1-hop edges removed
  std::uint64_t seed = 0;
};

// Type B removals are drawn first, then type A additions, each uniformly
// without replacement, from one generator seeded with `inj.seed`.
inline NeighborGraph inject_errors(NeighborGraph graph, const GroundTruth& truth, const ErrorInjection& inj) {
  if (inj.type_a > truth.two_hop.size())
    throw DomainError("type A count " + std::to_string(inj.type_a) + " exceeds " +
                      std::to_string(truth.two_hop.size()) + " 2-hop pairs");
  if (inj.type_b > truth.one_hop.size())
    throw DomainError("type B count " + std::to_string(inj.type_b) + " exceeds " +
                      std::to_string(truth.one_hop.size()) + " 1-hop pairs");
  Rng rng(inj.seed);
  for (auto k : sample_without_replacement(truth.one_hop.size(), inj.type_b, rng))
    graph.remove_edge(truth.one_hop[k].first, truth.one_hop[k].second);
  for (auto k : sample_without_replacement(truth.two_hop.size(), inj.type_a, rng))
    graph.add_edge(truth.two_hop[k].first, truth.two_hop[k].second);
  return graph;
}

struct RunRecord {
  std::uint64_t seed = 0;
  double rate_c = 0.0;
  std::optional<double> avg_error;
};

struct LevelResult {
  std::size_t size = 0;  // positions in the segment
  std::size_t type_a = 0;
  std::size_t type_b = 0;
  std::vector<RunRecord> runs;
  double mean_rate_c = 0.0;
  double stddev_rate_c = 0.0;
  std::optional<double> mean_avg_error;  // over runs where avg_error is defined
};

inline void summarize(LevelResult& r) {
  const double n = static_cast<double>(r.runs.size());
  if (r.runs.empty()) return;
  double sum = 0.0, err_sum = 0.0;
  std::size_t err_n = 0;
  for (const auto& run : r.runs) {
    sum += run.rate_c;
    if (run.avg_error) {
      err_sum += *run.avg_error;
      ++err_n;
    }
  }
  r.mean_rate_c = sum / n;
  double ss = 0.0;
  for (const auto& run : r.runs) ss += (run.rate_c - r.mean_rate_c) * (run.rate_c - r.mean_rate_c);
  r.stddev_rate_c = r.runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  r.mean_avg_error = err_n ? std::optional<double>(err_sum / static_cast<double>(err_n)) : std::nullopt;
}

// Everything a trial needs that does not change between runs.
struct Scenario {
  AnchorTable table;
  TruePlacement placement;
  AnchorNodes anchor_nodes;
  NeighborGraph ideal;
  GroundTruth truth;

  explicit Scenario(const SegmentSpec& spec)
      : table(build_table(spec)),
        placement(identity_placement(spec)),
        anchor_nodes(anchor_nodes_for(spec, placement)),
        ideal(ideal_graph(spec, placement)),
        truth(GroundTruth::from(placement)) {
    if (!table.valid()) throw ValidationError("anchors: table tuples are not distinct");
  }

  RunRecord trial(std::size_t type_a, std::size_t type_b, std::uint64_t seed,
                  const LocalizeParams& params) const {
    const auto g = inject_errors(ideal, truth, ErrorInjection{type_a, type_b, seed});
    const auto m = metrics(localize_centralized(table, g, anchor_nodes, params), placement);
    return RunRecord{seed, m.rate_c, m.avg_error};
  }
};

// Runs body(i) for i in [0, n) across `threads` workers. Each index is
// handled exactly once, so results written by index are schedule-independent.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mu;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

struct ErrorLevel {
  std::size_t type_a = 0;
  std::size_t type_b = 0;
};

struct McConfig {
  std::size_t runs = 1000;
  std::uint64_t master_seed = 0;
  LocalizeParams localize;
  unsigned threads = 1;
};

inline std::vector<LevelResult> monte_carlo(const SegmentSpec& spec, const std::vector<ErrorLevel>& levels,
                                            const McConfig& cfg) {
  if (cfg.runs == 0) throw ValidationError("runs: must be at least 1");
  const Scenario scenario(spec);
  std::vector<LevelResult> out;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    LevelResult r;
    r.size = spec.size();
    r.type_a = levels[li].type_a;
    r.type_b = levels[li].type_b;
    r.runs.resize(cfg.runs);
    parallel_for(cfg.runs, cfg.threads, [&](std::size_t run) {
      r.runs[run] = scenario.trial(r.type_a, r.type_b, run_seed(cfg.master_seed, li, run), cfg.localize);
    });
    summarize(r);
    out.push_back(std::move(r));
  }
  return out;
}

// Either fixed counts or fractions of the segment's 1-hop / 2-hop pair counts.
struct ErrorModel {
  enum class Kind { kRates, kCounts } kind = Kind::kRates;
  double rate_a = 0.047;  // of 2-hop pairs taken for neighbours
  double rate_b = 0.14;   // of 1-hop pairs missed
  std::size_t count_a = 0;
  std::size_t count_b = 0;

  ErrorLevel level_for(std::size_t one_hop_pairs, std::size_t two_hop_pairs) const {
    if (kind == Kind::kCounts) return ErrorLevel{count_a, count_b};
    return ErrorLevel{static_cast<std::size_t>(std::llround(rate_a * static_cast<double>(two_hop_pairs))),
                      static_cast<std::size_t>(std::llround(rate_b * static_cast<double>(one_hop_pairs)))};
  }
};

inline constexpr int kSweepRows = 5;

namespace detail {

inline int snap_x(double target, int y, int max_x) {
  int x = static_cast<int>(std::lround(target));
  if ((x + y) % 2 != 0) {
    // Nearer of the two same-row lattice neighbours; the lower one on ties.
    const int lo = x - 1, hi = x + 1;
    x = (target - lo <= hi - target) ? lo : hi;
  }
  if (x < 0) x += 2;
  if (x > max_x) x -= 2;
  return x;
}

}  // namespace detail

// Stretches the anchors' x coordinates to a segment of `cols` columns (same
// rows), snapping to the lattice. If that leaves colliding tuples, anchors are
// shifted one lattice step (+2 in x) at a time, first anchor first, until the
// table is distinct; an anchor that runs off its row is restored and the next
// one is tried.
inline SegmentSpec scale_anchors(const SegmentSpec& base, int cols) {
  base.validate();
  if (cols <= 0) throw ValidationError("cols: must be positive");
  SegmentSpec out{base.rows, cols, base.anchors};
  const double span_from = 2.0 * base.cols - 1.0;
  const double span_to = 2.0 * cols - 1.0;
  for (auto& a : out.anchors) {
    const double target = span_from > 0 ? a.x * span_to / span_from : 0.0;
    a.x = detail::snap_x(target, a.y, 2 * cols - 1);
  }
  const auto distinct = [](const SegmentSpec& s) {
    try {
      s.validate();
    } catch (const ValidationError&) {
      return false;
    }
    return build_table(s).valid();
  };
  if (distinct(out)) return out;
  for (std::size_t k = 0; k < kAnchorCount; ++k) {
    SegmentSpec trial = out;
    while (true) {
      trial.anchors[k].x += 2;
      if (!trial.on_lattice(trial.anchors[k])) break;
      if (distinct(trial)) return trial;
    }
  }
  throw DomainError("cannot place distinct-tuple anchors on a " + std::to_string(base.rows) + "x" +
                    std::to_string(cols) + " segment");
}

inline SegmentSpec sweep_segment(const SegmentSpec& base, std::size_t size) {
  if (size == 0 || size % static_cast<std::size_t>(base.rows) != 0)
    throw DomainError("segment size " + std::to_string(size) + " is not a multiple of " +
                      std::to_string(base.rows) + " rows");
  return scale_anchors(base, static_cast<int>(size / static_cast<std::size_t>(base.rows)));
}

inline std::vector<LevelResult> sweep_segment_sizes(const SegmentSpec& base, const std::vector<std::size_t>& sizes,
                                                    const ErrorModel& model, const McConfig& cfg) {
  if (cfg.runs == 0) throw ValidationError("runs: must be at least 1");
  std::vector<LevelResult> out;
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    const Scenario scenario(sweep_segment(base, sizes[si]));
    const auto level = model.level_for(scenario.truth.one_hop.size(), scenario.truth.two_hop.size());
    LevelResult r;
    r.size = sizes[si];
    r.type_a = level.type_a;
    r.type_b = level.type_b;
    r.runs.resize(cfg.runs);
    parallel_for(cfg.runs, cfg.threads, [&](std::size_t run) {
      r.runs[run] = scenario.trial(r.type_a, r.type_b, run_seed(cfg.master_seed, si, run), cfg.localize);
    });
    summarize(r);
    out.push_back(std::move(r));
  }
  return out;
}

// --- output ---------------------------------------------------------------

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string format_rate(double v) { return format_fixed(v, 4); }

inline std::string format_error(const std::optional<double>& v) { return v ? format_fixed(*v, 2) : "NA"; }

// `size nA nB seed rate_c avg_error` per run, then a `# summary` line per level.
inline void write_results(std::ostream& os, const std::vector<LevelResult>& levels) {
  for (const auto& l : levels) {
    for (const auto& run : l.runs)
      os << l.size << ' ' << l.type_a << ' ' << l.type_b << ' ' << run.seed << ' ' << format_rate(run.rate_c)
         << ' ' << format_error(run.avg_error) << '\n';
    os << "# summary size=" << l.size << " nA=" << l.type_a << " nB=" << l.type_b << " runs=" << l.runs.size()
       << " mean_rate_c=" << format_rate(l.mean_rate_c) << " stddev_rate_c=" << format_rate(l.stddev_rate_c)
       << " mean_avg_error=" << format_error(l.mean_avg_error) << '\n';
  }
}

inline void write_summary_csv(std::ostream& os, const std::vector<LevelResult>& levels) {
  os << "size,nA,nB,mean_rate_c,stddev_rate_c,mean_avg_error\n";
  for (const auto& l : levels)
    os << l.size << ',' << l.type_a << ',' << l.type_b << ',' << format_rate(l.mean_rate_c) << ','
       << format_rate(l.stddev_rate_c) << ',' << format_error(l.mean_avg_error) << '\n';
}

}  // namespace gridloc::sim
