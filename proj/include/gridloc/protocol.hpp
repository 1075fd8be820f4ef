#pragma once

// Distributed variant of the localizer as a discrete-event simulation. Every
// node runs the same state machine:
//
//   1. broadcast a group of RANGING messages;
//   2. for each sender heard, return a STATS_REPORT once that group is over;
//   3. score the reports it got back and keep the receivers that pass as its
//      1-hop neighbours;
//   4. flood BFS_BEACONs: anchors start at 0, everyone else adopts h + 1 from
//      a neighbour when it improves on what it knows and rebroadcasts;
//   5. at quiescence, look its tuple up in the read-only table, falling back
//      to the closest table entry.
//
// Quiescence is detected by the simulator (empty event queue); nodes run no
// termination protocol of their own.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gridloc/anchors.hpp"
#include "gridloc/error.hpp"
#include "gridloc/graph.hpp"
#include "gridloc/grid.hpp"
#include "gridloc/localize.hpp"
#include "gridloc/ranging.hpp"

namespace gridloc::protocol {

enum class MessageKind { kRanging, kStatsReport, kBfsBeacon };

inline const char* to_string(MessageKind k) {
  switch (k) {
    case MessageKind::kRanging: return "RANGING";
    case MessageKind::kStatsReport: return "STATS_REPORT";
    case MessageKind::kBfsBeacon: return "BFS_BEACON";
  }
  return "?";
}

// One delivered copy. Beacons also carry the sender's current neighbour
// verdicts so the receiver can apply the symmetrization rule locally.
struct Message {
  MessageKind kind = MessageKind::kRanging;
  NodeId sender{};
  NodeId receiver{};
  std::uint32_t seq = 0;      // RANGING
  double rssi = 0.0;          // RANGING, as measured by the receiver
  RssiStats stats{};          // STATS_REPORT
  std::size_t anchor = 0;     // BFS_BEACON
  std::uint32_t hops = 0;     // BFS_BEACON
  std::vector<NodeId> sender_neighbors;  // BFS_BEACON
};

// Per-link loss by message kind, plus optional extra loss for beacons of a
// given anchor. Delays are `latency * (1 + jitter * u)` with u uniform in
// [0, 1); per-link delivery stays FIFO regardless.
struct NetworkModel {
  double ranging_loss = 0.0;
  double report_loss = 0.0;
  double beacon_loss = 0.0;
  std::array<double, kAnchorCount> anchor_beacon_loss{};
  double latency = 0.001;
  double jitter = 0.1;

  double loss_for(const Message& m) const {
    switch (m.kind) {
      case MessageKind::kRanging: return ranging_loss;
      case MessageKind::kStatsReport: return report_loss;
      case MessageKind::kBfsBeacon: return std::max(beacon_loss, anchor_beacon_loss[m.anchor]);
    }
    return 0.0;
  }
};

// Readings a receiver would measure, per directed link, in group order. A
// link with k readings hears the first k messages of the group (before
// network loss); absent links hear nothing.
using RangingTrace = std::map<std::pair<NodeId, NodeId>, std::vector<double>>;

// Each directed edge of `graph` hears the whole group at `reading`.
inline RangingTrace trace_from_graph(const NeighborGraph& graph, std::uint32_t group_size, double reading) {
  RangingTrace t;
  for (const auto& [u, v] : graph.edges()) {
    t[{u, v}].assign(group_size, reading);
    t[{v, u}].assign(group_size, reading);
  }
  return t;
}

inline RangingTrace trace_from_readings(std::span<const RawReading> readings, std::uint32_t group_size) {
  RangingTrace t;
  for (const auto& r : readings) {
    auto& v = t[{r.sender, r.receiver}];
    if (v.size() >= group_size)
      throw ValidationError("trace: more than " + std::to_string(group_size) + " readings for a link");
    v.push_back(r.rssi);
  }
  return t;
}

enum class ClaimKind { kAnchor, kLookupHit, kBestMatch, kUndecided };

inline const char* to_string(ClaimKind k) {
  switch (k) {
    case ClaimKind::kAnchor: return "ANCHOR";
    case ClaimKind::kLookupHit: return "LOOKUP_HIT";
    case ClaimKind::kBestMatch: return "BEST_MATCH";
    case ClaimKind::kUndecided: return "UNDECIDED";
  }
  return "?";
}

struct Claim {
  std::optional<GridPos> position;
  ClaimKind kind = ClaimKind::kUndecided;
  friend bool operator==(const Claim&, const Claim&) = default;
};

struct HopUpdate {
  NodeId node{};
  std::size_t anchor = 0;
  std::uint32_t hops = 0;
};

struct DistributedConfig {
  FuzzyParams fuzzy;
  Symmetrization symmetrization = Symmetrization::kOr;
  NetworkModel network;
  std::uint64_t seed = 0;
  std::size_t event_budget = 5'000'000;
  double message_interval = 0.1;   // 10 messages per second
  double group_stagger = 0.5;      // start offset between consecutive senders
  std::ostream* trace = nullptr;   // `time kind sender receiver payload...`
};

struct DistributedResult {
  std::map<NodeId, Claim> claims;
  std::map<NodeId, HopTuple> tuples;
  std::map<NodeId, std::set<NodeId>> neighbors;  // each node's own verdicts
  std::vector<HopUpdate> hop_updates;             // in adoption order
  std::map<MessageKind, std::size_t> sent;        // per-receiver copies handed to the network
  std::map<MessageKind, std::size_t> delivered;
  std::size_t events = 0;
  double finish_time = 0.0;

  std::size_t total_delivered() const {
    std::size_t n = 0;
    for (const auto& [_, c] : delivered) n += c;
    return n;
  }
};

namespace detail {

struct NodeState {
  NodeId id{};
  std::optional<std::size_t> anchor_index;
  std::map<NodeId, std::vector<double>> heard;   // readings per sender
  std::map<NodeId, RssiStats> reports;           // stats returned to us as sender
  std::set<NodeId> neighbors;
  HopTuple hops{};
};

class Simulator {
 public:
  Simulator(const AnchorTable& table, const AnchorNodes& anchors, std::vector<NodeId> nodes,
            const RangingTrace& trace, const DistributedConfig& cfg)
      : table_(table), anchors_(anchors), trace_(trace), cfg_(cfg), rng_(cfg.seed) {
    cfg_.fuzzy.validate();
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    for (auto n : nodes) state_[n].id = n;
    for (std::size_t i = 0; i < kAnchorCount; ++i) {
      auto it = state_.find(anchors_[i]);
      if (it == state_.end())
        throw DomainError("anchor node " + std::to_string(to_int(anchors_[i])) + " is not a participant");
      it->second.anchor_index = i;
      it->second.hops[i] = 0;
    }
    for (const auto& [link, readings] : trace_) {
      if (!state_.count(link.first) || !state_.count(link.second))
        throw DomainError("trace references a node that is not a participant");
      if (readings.size() > cfg_.fuzzy.group_size)
        throw ValidationError("trace: link hears more than group_size messages");
      if (!readings.empty()) range_[link.first].push_back(link.second);
    }
  }

  DistributedResult run() {
    schedule_ranging();
    while (!queue_.empty()) {
      if (++result_.events > cfg_.event_budget) throw TimeoutError(dump());
      Event e = queue_.top();
      queue_.pop();
      now_ = e.time;
      if (e.timer)
        fire(e);
      else
        deliver(e.msg);
    }
    result_.finish_time = now_;
    finish();
    return std::move(result_);
  }

 private:
  struct Event {
    double time = 0.0;
    std::uint64_t order = 0;
    bool timer = false;
    int timer_kind = 0;  // 0: report to `peer`, 1: decide neighbours
    NodeId owner{};
    NodeId peer{};
    Message msg;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.order > b.order;
    }
  };

  // 53 random bits in [0, 1); same sequence on every standard library.
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double group_duration() const { return cfg_.message_interval * cfg_.fuzzy.group_size; }

  void push(Event e) {
    e.order = next_order_++;
    queue_.push(std::move(e));
  }

  void schedule_ranging() {
    std::size_t k = 0;
    for (const auto& [id, _] : state_) {
      const double start = static_cast<double>(k++) * cfg_.group_stagger;
      for (std::uint32_t seq = 0; seq < cfg_.fuzzy.group_size; ++seq) {
        Message m;
        m.kind = MessageKind::kRanging;
        m.sender = id;
        m.seq = seq;
        const double at = start + cfg_.message_interval * seq;
        for (auto r : range_[id]) {
          const auto& readings = trace_.at({id, r});
          if (seq >= readings.size()) continue;
          m.receiver = r;
          m.rssi = readings[seq];
          send_at(at, m);
        }
      }
    }
    // Everyone settles its neighbour set after the last group and its reports.
    decide_time_ = static_cast<double>(state_.size()) * cfg_.group_stagger + group_duration() +
                   2.0 * cfg_.network.latency * (1.0 + cfg_.network.jitter) + 1.0;
    for (const auto& [id, _] : state_) {
      Event e;
      e.time = decide_time_;
      e.timer = true;
      e.timer_kind = 1;
      e.owner = id;
      push(e);
    }
  }

  void send_at(double at, const Message& m) {
    ++result_.sent[m.kind];
    const double draw = unit();
    if (draw < cfg_.network.loss_for(m)) return;
    const double delay = cfg_.network.latency * (1.0 + cfg_.network.jitter * unit());
    auto& last = link_clock_[{m.sender, m.receiver}];
    const double arrival = std::max(at + delay, last);
    last = arrival;
    Event e;
    e.time = arrival;
    e.msg = m;
    push(std::move(e));
  }

  void deliver(const Message& m) {
    ++result_.delivered[m.kind];
    if (cfg_.trace) write_trace(m);
    auto& node = state_.at(m.receiver);
    switch (m.kind) {
      case MessageKind::kRanging: {
        auto& heard = node.heard[m.sender];
        if (heard.empty()) {
          // Group end is known from the sequence number.
          Event t;
          t.time = now_ + cfg_.message_interval * (cfg_.fuzzy.group_size - m.seq);
          t.timer = true;
          t.timer_kind = 0;
          t.owner = m.receiver;
          t.peer = m.sender;
          push(t);
        }
        heard.push_back(m.rssi);
        break;
      }
      case MessageKind::kStatsReport:
        node.reports[m.sender] = m.stats;
        break;
      case MessageKind::kBfsBeacon: {
        const bool mine = node.neighbors.count(m.sender) > 0;
        const bool theirs = std::find(m.sender_neighbors.begin(), m.sender_neighbors.end(), m.receiver) !=
                            m.sender_neighbors.end();
        const bool linked = cfg_.symmetrization == Symmetrization::kOr ? (mine || theirs) : (mine && theirs);
        if (!linked) break;
        auto& h = node.hops[m.anchor];
        const std::uint32_t offer = m.hops + 1;
        if (!h || offer < *h) {
          h = offer;
          result_.hop_updates.push_back(HopUpdate{node.id, m.anchor, offer});
          broadcast_beacon(node, m.anchor);
        }
        break;
      }
    }
  }

  void fire(const Event& e) {
    auto& node = state_.at(e.owner);
    if (e.timer_kind == 0) {
      const auto& heard = node.heard.at(e.peer);
      std::vector<RawReading> raw;
      raw.reserve(heard.size());
      for (double v : heard) raw.push_back(RawReading{e.peer, node.id, v});
      Message m;
      m.kind = MessageKind::kStatsReport;
      m.sender = node.id;
      m.receiver = e.peer;
      m.stats = aggregate(raw, cfg_.fuzzy.group_size).front();
      send_at(now_, m);
      return;
    }
    decide(node);
  }

  // Scores this node's own reports (it is the sender in every one of them).
  void decide(NodeState& node) {
    std::vector<RssiStats> ctx;
    for (const auto& [r, st] : node.reports) {
      RssiStats s = st;
      s.sender = node.id;
      s.receiver = r;
      ctx.push_back(s);
    }
    for (const auto& s : ctx)
      if (score(s, ctx, cfg_.fuzzy) >= cfg_.fuzzy.theta) node.neighbors.insert(s.receiver);
    if (node.anchor_index) broadcast_beacon(node, *node.anchor_index);
  }

  void broadcast_beacon(const NodeState& node, std::size_t anchor) {
    if (now_ < decide_time_) return;  // neighbour sets are not settled yet
    Message m;
    m.kind = MessageKind::kBfsBeacon;
    m.sender = node.id;
    m.anchor = anchor;
    m.hops = *node.hops[anchor];
    m.sender_neighbors.assign(node.neighbors.begin(), node.neighbors.end());
    for (auto r : range_[node.id]) {
      m.receiver = r;
      send_at(now_, m);
    }
  }

  void finish() {
    for (auto& [id, node] : state_) {
      result_.tuples[id] = node.hops;
      result_.neighbors[id] = node.neighbors;
      result_.claims[id] = claim(node);
    }
  }

  Claim claim(const NodeState& node) const {
    if (node.anchor_index) return Claim{table_.spec().anchors[*node.anchor_index], ClaimKind::kAnchor};
    const auto full = to_distance_tuple(node.hops);
    if (!full) return Claim{std::nullopt, ClaimKind::kUndecided};
    if (auto hit = table_.lookup(*full)) return Claim{*hit, ClaimKind::kLookupHit};
    std::optional<std::uint32_t> best;
    GridPos best_pos{};
    for (std::size_t i = 0; i < table_.size(); ++i) {
      const auto m = tuple_mismatch(node.hops, table_.entries()[i]);
      if (m && (!best || *m < *best)) {
        best = m;
        best_pos = table_.positions()[i];
      }
    }
    return Claim{best_pos, ClaimKind::kBestMatch};
  }

  void write_trace(const Message& m) const {
    char t[32];
    std::snprintf(t, sizeof t, "%.4f", now_);
    auto& os = *cfg_.trace;
    os << t << ' ' << to_string(m.kind) << ' ' << to_int(m.sender) << ' ' << to_int(m.receiver);
    switch (m.kind) {
      case MessageKind::kRanging: os << " seq=" << m.seq << " rssi=" << m.rssi; break;
      case MessageKind::kStatsReport:
        os << " count=" << m.stats.count << " avg=" << m.stats.avg << " min=" << m.stats.min
           << " max=" << m.stats.max;
        break;
      case MessageKind::kBfsBeacon: os << " anchor=" << m.anchor << " hops=" << m.hops; break;
    }
    os << '\n';
  }

  std::string dump() const {
    std::ostringstream os;
    os << "distributed simulation exceeded its event budget of " << cfg_.event_budget << " at t=" << now_
       << " with " << queue_.size() << " events pending\n";
    for (const auto& [id, node] : state_) {
      os << "  node " << to_int(id) << " neighbors=" << node.neighbors.size() << " hops=";
      for (const auto& h : node.hops) os << (h ? std::to_string(*h) : std::string("-")) << ' ';
      os << '\n';
    }
    return os.str();
  }

  const AnchorTable& table_;
  AnchorNodes anchors_;
  const RangingTrace& trace_;
  DistributedConfig cfg_;
  std::mt19937_64 rng_;
  std::map<NodeId, NodeState> state_;
  std::map<NodeId, std::vector<NodeId>> range_;  // who hears this node
  std::map<std::pair<NodeId, NodeId>, double> link_clock_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t next_order_ = 0;
  double now_ = 0.0;
  double decide_time_ = 0.0;
  DistributedResult result_;
};

}  // namespace detail

inline DistributedResult run_distributed(const AnchorTable& table, const AnchorNodes& anchor_nodes,
                                         const std::vector<NodeId>& nodes, const RangingTrace& trace,
                                         const DistributedConfig& cfg) {
  if (!table.valid()) throw DomainError("distributed run needs a table with distinct tuples");
  return detail::Simulator(table, anchor_nodes, nodes, trace, cfg).run();
}

// Graph mode: every edge of `graph` is heard in full at a reading that scores
// as a certain 1-hop neighbour, and nothing else is heard.
inline DistributedResult run_distributed(const AnchorTable& table, const AnchorNodes& anchor_nodes,
                                         const NeighborGraph& graph, const DistributedConfig& cfg) {
  const auto trace = trace_from_graph(graph, cfg.fuzzy.group_size, cfg.fuzzy.a * 0.9);
  return run_distributed(table, anchor_nodes, graph.nodes(), trace, cfg);
}

enum class DivergenceReason { kDuplicateClaim, kRefineOrder, kCentrallyUnassigned, kOther };

inline const char* to_string(DivergenceReason r) {
  switch (r) {
    case DivergenceReason::kDuplicateClaim: return "DUPLICATE_CLAIM";
    case DivergenceReason::kRefineOrder: return "REFINE_ORDER";
    case DivergenceReason::kCentrallyUnassigned: return "CENTRALLY_UNASSIGNED";
    case DivergenceReason::kOther: return "OTHER";
  }
  return "?";
}

struct Divergence {
  NodeId node{};
  std::optional<GridPos> centralized;
  std::optional<Provenance> provenance;
  Claim distributed;
  DivergenceReason reason = DivergenceReason::kOther;
};

struct ModeComparison {
  Assignment centralized;
  DistributedResult distributed;
  std::vector<Divergence> divergences;
};

// Nodes whose distributed claim differs from their centralized position.
inline std::vector<Divergence> divergences(const Assignment& centralized, const DistributedResult& distributed) {
  std::vector<Divergence> out;
  std::map<GridPos, std::size_t> claim_count;
  for (const auto& [_, c] : distributed.claims)
    if (c.position) ++claim_count[*c.position];
  for (const auto& [node, c] : distributed.claims) {
    const auto pos = centralized.position_of(node);
    if (pos == c.position) continue;
    Divergence d;
    d.node = node;
    d.centralized = pos;
    if (pos) d.provenance = centralized.at(*pos)->provenance;
    d.distributed = c;
    const bool shared = c.position && claim_count[*c.position] > 1;
    if (shared && c.kind == ClaimKind::kLookupHit)
      d.reason = DivergenceReason::kDuplicateClaim;
    else if (d.provenance == Provenance::kRefined)
      d.reason = DivergenceReason::kRefineOrder;
    else if (shared)
      d.reason = DivergenceReason::kDuplicateClaim;
    else if (!pos)
      d.reason = DivergenceReason::kCentrallyUnassigned;
    out.push_back(d);
  }
  return out;
}

// Runs both pipelines on the same graph.
inline ModeComparison compare_modes(const AnchorTable& table, const NeighborGraph& graph,
                                    const AnchorNodes& anchor_nodes, const LocalizeParams& params,
                                    const DistributedConfig& cfg) {
  ModeComparison out;
  out.centralized = localize_centralized(table, graph, anchor_nodes, params);
  out.distributed = run_distributed(table, anchor_nodes, graph, cfg);
  out.divergences = divergences(out.centralized, out.distributed);
  return out;
}

// `node_id x y kind` per node (`node_id - - UNDECIDED` without a position).
inline void write_claims(std::ostream& os, const DistributedResult& r) {
  for (const auto& [node, c] : r.claims) {
    os << to_int(node) << ' ';
    if (c.position)
      os << c.position->x << ' ' << c.position->y;
    else
      os << "- -";
    os << ' ' << to_string(c.kind) << '\n';
  }
}

inline void write_divergences(std::ostream& os, const std::vector<Divergence>& divs) {
  os << "# divergences " << divs.size() << '\n';
  for (const auto& d : divs) {
    os << to_int(d.node) << " centralized=";
    if (d.centralized)
      os << d.centralized->x << ',' << d.centralized->y << '/' << to_string(*d.provenance);
    else
      os << "unassigned";
    os << " distributed=";
    if (d.distributed.position)
      os << d.distributed.position->x << ',' << d.distributed.position->y;
    else
      os << '-';
    os << '/' << to_string(d.distributed.kind) << ' ' << to_string(d.reason) << '\n';
  }
}

}  // namespace gridloc::protocol
