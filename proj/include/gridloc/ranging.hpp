#pragma once

// RSSI ranging: per-pair reading statistics, the three fuzzy membership
// functions, the combined score and the neighbour classification built on it.
//
// Raw readings follow the radio's convention: a numerically smaller value is
// a stronger signal, i.e. a shorter distance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gridloc/error.hpp"
#include "gridloc/graph.hpp"

namespace gridloc {

struct RawReading {
  NodeId sender{};
  NodeId receiver{};
  double rssi = 0.0;
};

struct RssiStats {
  NodeId sender{};
  NodeId receiver{};
  std::uint32_t count = 0;
  double avg = 0.0;
  double min = 0.0;
  double max = 0.0;

  friend bool operator==(const RssiStats&, const RssiStats&) = default;
};

enum class Symmetrization { kOr, kAnd };

struct FuzzyParams {
  double a = 343.0;
  double b = 361.0;
  double rel_lo = 1.05;
  double rel_hi = 1.15;
  double num_lo = 0.65;
  double num_hi = 0.9;
  double theta = 0.5;
  std::uint32_t group_size = 30;

  void validate() const {
    if (!(a < b)) throw ValidationError("fuzzy.a/b: require a < b");
    if (!(rel_lo < rel_hi)) throw ValidationError("fuzzy.rel_lo/rel_hi: require rel_lo < rel_hi");
    if (!(0.0 < num_lo && num_lo < num_hi && num_hi <= 1.0))
      throw ValidationError("fuzzy.num_lo/num_hi: require 0 < num_lo < num_hi <= 1");
    if (!(theta >= 0.0 && theta <= 1.0)) throw ValidationError("fuzzy.theta: must lie in [0,1]");
    if (group_size == 0) throw ValidationError("fuzzy.group_size: must be positive");
  }
};

namespace detail {

inline void check_reading(double v, const char* what) {
  if (!std::isfinite(v) || v <= 0.0)
    throw ValidationError(std::string(what) + ": RSSI readings must be finite and positive");
}

}  // namespace detail

inline void validate_stats(const RssiStats& s, std::uint32_t group_size) {
  if (s.sender == s.receiver) throw ValidationError("stats: sender equals receiver");
  if (s.count == 0 || s.count > group_size)
    throw ValidationError("stats: count " + std::to_string(s.count) + " outside [1, " +
                          std::to_string(group_size) + "]");
  detail::check_reading(s.avg, "stats.avg");
  detail::check_reading(s.min, "stats.min");
  detail::check_reading(s.max, "stats.max");
  if (!(s.min <= s.avg && s.avg <= s.max)) throw ValidationError("stats: require min <= avg <= max");
}

// One RssiStats per (sender, receiver) pair seen, ordered by (sender, receiver).
inline std::vector<RssiStats> aggregate(std::span<const RawReading> readings,
                                        std::uint32_t group_size = 30) {
  struct Acc {
    std::uint32_t count = 0;
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
  };
  std::map<std::pair<NodeId, NodeId>, Acc> acc;
  for (const auto& r : readings) {
    detail::check_reading(r.rssi, "reading");
    if (r.sender == r.receiver) throw ValidationError("reading: sender equals receiver");
    auto& a = acc[{r.sender, r.receiver}];
    if (++a.count > group_size)
      throw ValidationError("reading: more than " + std::to_string(group_size) +
                            " messages for pair " + std::to_string(to_int(r.sender)) + "->" +
                            std::to_string(to_int(r.receiver)));
    a.sum += r.rssi;
    a.lo = std::min(a.lo, r.rssi);
    a.hi = std::max(a.hi, r.rssi);
  }
  std::vector<RssiStats> out;
  out.reserve(acc.size());
  for (const auto& [key, a] : acc) {
    // Clamp guards the mean against rounding just outside [min, max].
    const double mean = std::clamp(a.sum / a.count, a.lo, a.hi);
    out.push_back(RssiStats{key.first, key.second, a.count, mean, a.lo, a.hi});
  }
  return out;
}

// "Numerically like" a 1-hop reading.
inline double f_avg(double x, const FuzzyParams& p) {
  if (x < p.a) return 1.0;
  if (x < p.b) return (p.b - x) / (p.b - p.a);
  return 0.0;
}

// Mean of the two strongest (smallest) average readings for one sender, or
// nullopt when fewer than two receivers reported.
inline std::optional<double> strongest_pair_mean(std::span<const RssiStats> sender_context) {
  if (sender_context.size() < 2) return std::nullopt;
  double lo1 = std::numeric_limits<double>::infinity();
  double lo2 = lo1;
  for (const auto& s : sender_context) {
    if (s.avg < lo1) {
      lo2 = lo1;
      lo1 = s.avg;
    } else if (s.avg < lo2) {
      lo2 = s.avg;
    }
  }
  return (lo1 + lo2) / 2.0;
}

// "Relatively like" a 1-hop reading, compared with the same sender's strongest
// receivers.
inline double f_rel(double x, std::span<const RssiStats> sender_context, const FuzzyParams& p) {
  const auto max_s = strongest_pair_mean(sender_context);
  if (!max_s) return 1.0;
  const double lo = p.rel_lo * *max_s;
  const double hi = p.rel_hi * *max_s;
  if (x < lo) return 1.0;
  if (x < hi) return 1.0 - (x - lo) / ((p.rel_hi - p.rel_lo) * *max_s);
  return 0.0;
}

inline std::uint32_t most_received(std::span<const RssiStats> sender_context) {
  std::uint32_t most = 0;
  for (const auto& s : sender_context) most = std::max(most, s.count);
  return most;
}

// "Like in volume": how many of the group this receiver heard, relative to the
// best receiver of the same sender.
inline double f_num(const RssiStats& stats, std::span<const RssiStats> sender_context,
                    const FuzzyParams& p) {
  const double most = most_received(sender_context);
  if (most < 1.0) throw DomainError("f_num: sender context has no receptions");
  const double x = stats.count;
  const double lo = p.num_lo * most;
  const double hi = p.num_hi * most;
  if (x < lo) return 0.0;
  if (x < hi) return (x - lo) / ((p.num_hi - p.num_lo) * most);
  return 1.0;
}

// numerically-like OR (relatively-like AND very like-in-volume)
inline double combine_score(double avg, double rel, double num) {
  return std::max(avg, std::min(rel, num * num));
}

inline double score(const RssiStats& stats, std::span<const RssiStats> sender_context,
                    const FuzzyParams& p) {
  return combine_score(f_avg(stats.avg, p), f_rel(stats.avg, sender_context, p),
                       f_num(stats, sender_context, p));
}

struct DirectedScore {
  NodeId sender{};
  NodeId receiver{};
  double score = 0.0;
};

// Scores every (sender, receiver) pair against its own sender's context.
inline std::vector<DirectedScore> score_all(std::span<const RssiStats> stats, const FuzzyParams& p) {
  std::vector<RssiStats> sorted(stats.begin(), stats.end());
  std::sort(sorted.begin(), sorted.end(), [](const RssiStats& l, const RssiStats& r) {
    return std::pair(l.sender, l.receiver) < std::pair(r.sender, r.receiver);
  });
  std::vector<DirectedScore> out;
  out.reserve(sorted.size());
  for (std::size_t begin = 0; begin < sorted.size();) {
    std::size_t end = begin;
    while (end < sorted.size() && sorted[end].sender == sorted[begin].sender) ++end;
    const std::span<const RssiStats> ctx(sorted.data() + begin, end - begin);
    for (const auto& s : ctx) out.push_back(DirectedScore{s.sender, s.receiver, score(s, ctx, p)});
    begin = end;
  }
  return out;
}

// Every node mentioned in `stats` or `nodes` appears in the result, edges or not.
inline NeighborGraph classify_neighbors(std::span<const RssiStats> stats, const FuzzyParams& p,
                                        Symmetrization mode = Symmetrization::kOr,
                                        std::span<const NodeId> nodes = {}) {
  p.validate();
  NeighborGraph g(nodes);
  std::map<std::pair<NodeId, NodeId>, bool> accepted;
  for (const auto& s : stats) {
    validate_stats(s, p.group_size);
    g.add_node(s.sender);
    g.add_node(s.receiver);
  }
  for (const auto& d : score_all(stats, p)) accepted[{d.sender, d.receiver}] = d.score >= p.theta;
  for (const auto& [key, ok] : accepted) {
    const auto [u, v] = key;
    if (mode == Symmetrization::kOr) {
      if (ok) g.add_edge(u, v);
    } else if (ok) {
      auto rev = accepted.find({v, u});
      if (rev != accepted.end() && rev->second) g.add_edge(u, v);
    }
  }
  return g;
}

// Linear interpolation between order statistics at rank pct/100 * (n - 1).
inline double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw DomainError("percentile of an empty sample");
  if (!(pct >= 0.0 && pct <= 100.0)) throw DomainError("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  if (frac == 0.0) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

struct TrainingSample {
  int hops = 1;  // 1 or 2
  double avg = 0.0;
};

inline constexpr double kLowerPercentile = 10.0;   // of 2-hop readings -> a
inline constexpr double kUpperPercentile = 95.0;   // of 1-hop readings -> b

inline FuzzyParams calibrate(std::span<const TrainingSample> training, FuzzyParams base = {}) {
  std::vector<double> one, two;
  for (const auto& s : training) {
    if (s.hops == 1)
      one.push_back(s.avg);
    else if (s.hops == 2)
      two.push_back(s.avg);
    else
      throw CalibrationError("training label must be 1 or 2, got " + std::to_string(s.hops));
  }
  if (one.empty()) throw CalibrationError("no 1-hop training samples");
  if (two.empty()) throw CalibrationError("no 2-hop training samples");
  base.a = percentile(two, kLowerPercentile);
  base.b = percentile(one, kUpperPercentile);
  if (!(base.a < base.b))
    throw CalibrationError("degenerate separation: a = " + std::to_string(base.a) +
                           " is not below b = " + std::to_string(base.b));
  return base;
}

struct ChiSquare {
  double statistic = 0.0;
  int dof = 0;
};

// Pearson statistic sum (obs - exp)^2 / exp; dof = bins - 1 - fitted_params.
inline ChiSquare chi_square_gof(std::span<const double> observed, std::span<const double> expected,
                                int fitted_params = 0) {
  if (observed.size() != expected.size())
    throw DomainError("chi_square_gof: observed and expected bin counts differ");
  if (observed.size() < 2) throw DomainError("chi_square_gof: need at least 2 bins");
  ChiSquare r;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(expected[i] > 0.0)) throw DomainError("chi_square_gof: expected count must be positive");
    const double d = observed[i] - expected[i];
    r.statistic += d * d / expected[i];
  }
  r.dof = static_cast<int>(observed.size()) - 1 - fitted_params;
  if (r.dof < 1) throw DomainError("chi_square_gof: no degrees of freedom left");
  return r;
}

struct NormalityReport {
  std::size_t samples = 0;
  double mean = 0.0;
  double stddev = 0.0;
  ChiSquare test;
};

// Goodness of fit against a normal with the sample's mean and stddev. Bins are
// equal-width over [min, max]; the outer bins extend to +-infinity when
// computing expected counts, so none is empty under the fitted normal.
inline NormalityReport normality_test(std::span<const double> values, int bins) {
  if (bins < 4) throw DomainError("normality_test: need at least 4 bins");
  if (values.size() < 2) throw DomainError("normality_test: need at least 2 samples");
  NormalityReport r;
  r.samples = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  if (!(r.stddev > 0.0)) throw DomainError("normality_test: sample has zero spread");

  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, width = (*hi_it - lo) / bins;
  std::vector<double> observed(static_cast<std::size_t>(bins), 0.0), expected(observed.size());
  for (double v : values) {
    auto k = static_cast<std::size_t>((v - lo) / width);
    observed[std::min(k, observed.size() - 1)] += 1.0;
  }
  const auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - r.mean) / (r.stddev * std::sqrt(2.0))); };
  const double n = static_cast<double>(values.size());
  for (std::size_t k = 0; k < expected.size(); ++k) {
    const double left = k == 0 ? 0.0 : cdf(lo + width * static_cast<double>(k));
    const double right = k + 1 == expected.size() ? 1.0 : cdf(lo + width * static_cast<double>(k + 1));
    expected[k] = n * (right - left);
  }
  r.test = chi_square_gof(observed, expected, 2);
  return r;
}

// --- text ingestion -------------------------------------------------------

// Readings file: `R sender receiver rssi` lines or `S sender receiver count avg
// min max` lines; a single file uses one kind only. Blank lines and `#`
// comments are skipped.
struct ReadingsFile {
  std::vector<RawReading> raw;    // R records, in file order
  std::vector<RssiStats> stats;   // S records, sorted by (sender, receiver)
  bool aggregated = false;
};

inline ReadingsFile parse_readings(std::istream& is, std::uint32_t group_size,
                                   const std::string& source = "readings") {
  ReadingsFile f;
  char kind = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag != "R" && tag != "S") throw ParseError(source, lineno, "unknown record tag `" + tag + "`");
    if (kind != 0 && kind != tag[0])
      throw ParseError(source, lineno, "raw (R) and aggregated (S) records cannot be mixed");
    kind = tag[0];
    long long s = -1, r = -1;
    if (!(ls >> s >> r) || s < 0 || r < 0)
      throw ParseError(source, lineno, "expected non-negative sender and receiver ids");
    const NodeId sender{static_cast<std::uint32_t>(s)}, receiver{static_cast<std::uint32_t>(r)};
    try {
      if (kind == 'R') {
        RawReading rd{sender, receiver, 0.0};
        if (!(ls >> rd.rssi)) throw ParseError(source, lineno, "expected `R sender receiver rssi`");
        detail::check_reading(rd.rssi, "reading");
        if (sender == receiver) throw ValidationError("reading: sender equals receiver");
        f.raw.push_back(rd);
      } else {
        RssiStats st{sender, receiver, 0, 0, 0, 0};
        long long count = 0;
        if (!(ls >> count >> st.avg >> st.min >> st.max) || count < 0)
          throw ParseError(source, lineno, "expected `S sender receiver count avg min max`");
        st.count = static_cast<std::uint32_t>(count);
        validate_stats(st, group_size);
        f.stats.push_back(st);
      }
    } catch (const ValidationError& e) {
      throw ParseError(source, lineno, e.what());
    }
    std::string extra;
    if (ls >> extra) throw ParseError(source, lineno, "trailing field `" + extra + "`");
  }
  f.aggregated = kind == 'S';
  std::sort(f.stats.begin(), f.stats.end(), [](const RssiStats& l, const RssiStats& r) {
    return std::pair(l.sender, l.receiver) < std::pair(r.sender, r.receiver);
  });
  for (std::size_t i = 1; i < f.stats.size(); ++i)
    if (f.stats[i].sender == f.stats[i - 1].sender && f.stats[i].receiver == f.stats[i - 1].receiver)
      throw ValidationError("readings: duplicate aggregated record for pair " +
                            std::to_string(to_int(f.stats[i].sender)) + "->" +
                            std::to_string(to_int(f.stats[i].receiver)));
  return f;
}

// Statistics from either kind of readings file; raw records are aggregated.
inline std::vector<RssiStats> read_readings(std::istream& is, std::uint32_t group_size,
                                            const std::string& source = "readings") {
  auto f = parse_readings(is, group_size, source);
  if (f.aggregated) return std::move(f.stats);
  return aggregate(f.raw, group_size);
}

// Training file: `label avg_reading` per line, label 1 or 2.
inline std::vector<TrainingSample> read_training(std::istream& is,
                                                 const std::string& source = "training") {
  std::vector<TrainingSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    TrainingSample s;
    if (!(ls >> s.hops >> s.avg)) throw ParseError(source, lineno, "expected `label avg_reading`");
    if (s.hops != 1 && s.hops != 2) throw ParseError(source, lineno, "label must be 1 or 2");
    if (!std::isfinite(s.avg) || s.avg <= 0.0)
      throw ParseError(source, lineno, "reading must be finite and positive");
    std::string extra;
    if (ls >> extra) throw ParseError(source, lineno, "trailing field `" + extra + "`");
    out.push_back(s);
  }
  return out;
}

}  // namespace gridloc
