// Acceptance suite. `acceptance N` checks criterion N; no argument checks all.
// Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gridloc/anchors.hpp"
#include "gridloc/localize.hpp"
#include "gridloc/protocol.hpp"
#include "gridloc/ranging.hpp"
#include "gridloc/sim.hpp"

namespace {

using namespace gridloc;
using namespace gridloc::protocol;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

unsigned worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(double v, int decimals = 4) { return sim::format_fixed(v, decimals); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(GRIDLOC_CLI) + " " + args + " >" + log.string() + " 2>&1";
  return std::system(cmd.c_str());
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("gridloc_acceptance_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// 1 ---------------------------------------------------------------------------

Outcome grid_distance_oracle() {
  const auto spec = field_segment();
  const auto ps = positions(spec);
  const auto t0 = Clock::now();
  const auto adj = ideal_adjacency(spec);
  std::size_t pairs = 0, mismatches = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto hops = bfs_hops(adj, ps[i]);
    for (std::size_t j = i + 1; j < ps.size(); ++j) {
      ++pairs;
      auto it = hops.find(ps[j]);
      if (it == hops.end() || it->second != grid_distance(ps[i], ps[j])) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  return {pairs == 1225 && mismatches == 0 && secs < 1.0,
          "pairs=" + std::to_string(pairs) + " mismatches=" + std::to_string(mismatches) + " time=" +
              fmt(secs, 3) + "s"};
}

// 2 ---------------------------------------------------------------------------

Outcome pair_counts() {
  const auto placement = sim::identity_placement(field_segment());
  const auto one = sim::pairs_at_distance(placement, 1).size();
  const auto two = sim::pairs_at_distance(placement, 2).size();
  return {one == 121 && two == 192, "one_hop=" + std::to_string(one) + " two_hop=" + std::to_string(two)};
}

// 3 ---------------------------------------------------------------------------

Outcome table_distinctness() {
  const auto table = build_table(field_segment());
  const std::set<DistanceTuple> unique(table.entries().begin(), table.entries().end());
  const SegmentSpec collinear{5, 10, {GridPos{0, 0}, GridPos{2, 0}, GridPos{4, 0}, GridPos{6, 0}}};
  const auto report = validate_anchors(collinear);
  return {table.size() == 50 && unique.size() == 50 && table.valid() && !report.distinct &&
              !report.collisions.empty(),
          "field_distinct=" + std::to_string(unique.size()) +
              " collinear_collisions=" + std::to_string(report.collisions.size())};
}

// 4 ---------------------------------------------------------------------------

double ideal_rate(const SegmentSpec& spec) {
  const auto table = build_table(spec);
  const auto placement = sim::identity_placement(spec);
  const auto a = localize_centralized(table, sim::ideal_graph(spec, placement), sim::anchor_nodes_for(spec, placement));
  return metrics(a, placement).rate_c;
}

Outcome perfect_input() {
  const double field = ideal_rate(field_segment());
  const auto lat = lattice(5, 10);
  std::mt19937_64 rng(4);
  std::size_t sets = 0, exact = 0, rejected = 0;
  while (sets < 100) {
    SegmentSpec spec{5, 10, {}};
    std::vector<std::size_t> idx(lat.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < kAnchorCount; ++i) spec.anchors[i] = lat[idx[i]];
    if (!build_table(spec).valid()) {
      ++rejected;
      continue;
    }
    ++sets;
    exact += ideal_rate(spec) == 1.0;
  }
  return {field == 1.0 && exact == 100,
          "field_rate_c=" + fmt(field) + " random_sets_exact=" + std::to_string(exact) + "/100 (rejected " +
              std::to_string(rejected) + " colliding sets)"};
}

// 5 ---------------------------------------------------------------------------

Outcome metrics_fixture() {
  const auto spec = field_segment();
  const auto table = build_table(spec);
  const auto placement = sim::identity_placement(spec);
  // Two swaps of horizontal neighbours and a 3-cycle round a triangle.
  std::map<GridPos, GridPos> moved{{{0, 0}, {2, 0}}, {{2, 0}, {0, 0}}, {{4, 0}, {6, 0}}, {{6, 0}, {4, 0}},
                                   {{1, 1}, {3, 1}}, {{3, 1}, {2, 2}}, {{2, 2}, {1, 1}}};
  Assignment a(table.positions(), [&] {
    std::vector<NodeId> ids;
    for (const auto& [n, _] : placement) ids.push_back(n);
    return ids;
  }());
  for (const auto& [n, p] : placement) {
    auto it = moved.find(p);
    a.assign(it == moved.end() ? p : it->second, n, Provenance::kLookupHit);
  }
  const auto m = metrics(a, placement);
  return {m.correct == 43 && m.misassigned == 7 && m.rate_c == 0.86 && m.avg_error && *m.avg_error == 1.0,
          "correct=" + std::to_string(m.correct) + " rate_c=" + fmt(m.rate_c) +
              " avg_error=" + sim::format_error(m.avg_error)};
}

// 6 ---------------------------------------------------------------------------

Outcome type_asymmetry() {
  const auto t0 = Clock::now();
  sim::McConfig cfg;
  cfg.runs = 1000;
  cfg.master_seed = 6;
  cfg.threads = worker_threads();
  const auto r = sim::monte_carlo(field_segment(), {{5, 0}, {0, 5}, {10, 0}, {0, 10}}, cfg);
  const double secs = seconds_since(t0);
  const bool ok = r[0].mean_rate_c <= r[1].mean_rate_c && r[2].mean_rate_c <= r[3].mean_rate_c && secs < 60.0;
  return {ok, "k=5 A=" + fmt(r[0].mean_rate_c) + " B=" + fmt(r[1].mean_rate_c) + "; k=10 A=" +
                  fmt(r[2].mean_rate_c) + " B=" + fmt(r[3].mean_rate_c) + "; time=" + fmt(secs, 1) + "s"};
}

// 7 ---------------------------------------------------------------------------

Outcome error_threshold() {
  const auto t0 = Clock::now();
  sim::McConfig cfg;
  cfg.runs = 1000;
  cfg.master_seed = 7;
  cfg.threads = worker_threads();
  const auto r = sim::monte_carlo(field_segment(), {{0, 0}, {5, 15}, {11, 30}, {20, 50}}, cfg);
  const double secs = seconds_since(t0);

  bool ladder = true;
  std::string steps;
  for (std::size_t i = 1; i < r.size(); ++i) {
    const double drop = r[i - 1].mean_rate_c - r[i].mean_rate_c;
    ladder = ladder && drop >= -0.01;
    steps += " " + fmt(r[i].mean_rate_c);
  }
  std::string sensitivity;
  for (std::uint32_t t = 0; t <= 4; ++t) {
    auto c = cfg;
    c.localize.refine_threshold = t;
    sensitivity += " T" + std::to_string(t) + "=" + fmt(sim::monte_carlo(field_segment(), {{11, 30}}, c)[0].mean_rate_c);
  }
  std::cout << "  diagnostics criterion 7: (11,30) mean rate_c by refine threshold:" << sensitivity << '\n';

  const bool ok = r[0].mean_rate_c == 1.0 && r[2].mean_rate_c >= 0.70 && ladder && secs < 120.0;
  return {ok, "(11,30) mean_rate_c=" + fmt(r[2].mean_rate_c) + " (floor 0.70); (0,0)=" + fmt(r[0].mean_rate_c) +
                  "; ladder " + fmt(r[0].mean_rate_c) + steps + (ladder ? " weakly decreasing" : " NOT decreasing") +
                  "; time=" + fmt(secs, 1) + "s"};
}

// 8 ---------------------------------------------------------------------------

Outcome sweep_trend() {
  const auto t0 = Clock::now();
  sim::McConfig cfg;
  cfg.runs = 1000;
  cfg.master_seed = 8;
  cfg.threads = worker_threads();
  const auto r = sim::sweep_segment_sizes(field_segment(), {50, 100, 150, 200}, sim::ErrorModel{}, cfg);
  const double secs = seconds_since(t0);
  std::string rows;
  for (const auto& l : r)
    rows += " " + std::to_string(l.size) + ":(" + std::to_string(l.type_a) + "," + std::to_string(l.type_b) + ") " +
            fmt(l.mean_rate_c) + "/" + sim::format_error(l.mean_avg_error);
  const bool ok = r[3].mean_rate_c < r[0].mean_rate_c && r[0].mean_avg_error && r[3].mean_avg_error &&
                  *r[3].mean_avg_error > *r[0].mean_avg_error && secs < 600.0;
  return {ok, "size:(nA,nB) rate_c/avg_error" + rows + "; time=" + fmt(secs, 1) + "s"};
}

// 9 ---------------------------------------------------------------------------

namespace oracle {

double ramp_down(double x, double lo, double hi) {
  if (x <= lo) return 1.0;
  if (x >= hi) return 0.0;
  return (hi - x) / (hi - lo);
}

double f_avg(double x, double a, double b) { return ramp_down(x, a, b); }

double f_rel(double x, const std::vector<double>& avgs, double lo, double hi) {
  if (avgs.size() < 2) return 1.0;
  auto s = avgs;
  std::sort(s.begin(), s.end());
  const double m = (s[0] + s[1]) / 2.0;
  return ramp_down(x, lo * m, hi * m);
}

double f_num(double count, double most, double lo, double hi) { return 1.0 - ramp_down(count, lo * most, hi * most); }

}  // namespace oracle

Outcome fuzzy_suite() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  std::size_t range_bad = 0, cont_bad = 0, mono_bad = 0, oracle_bad = 0, score_bad = 0;
  double worst_oracle = 0.0;
  for (int draw = 0; draw < 10000; ++draw) {
    FuzzyParams p;
    p.a = uni(200, 400);
    p.b = p.a + uni(0.5, 100);
    p.rel_lo = uni(1.0, 1.2);
    p.rel_hi = p.rel_lo + uni(0.01, 0.3);
    const std::uint32_t most = 10 + static_cast<std::uint32_t>(u01(rng) * 990);
    const std::uint32_t lo_count = 1 + static_cast<std::uint32_t>(u01(rng) * (most - 2));
    const std::uint32_t hi_count = lo_count + 1 + static_cast<std::uint32_t>(u01(rng) * (most - lo_count - 1));
    p.num_lo = static_cast<double>(lo_count) / most;
    p.num_hi = static_cast<double>(hi_count) / most;
    p.group_size = most;

    const std::size_t ctx_n = 1 + static_cast<std::size_t>(u01(rng) * 6);
    std::vector<RssiStats> ctx;
    std::vector<double> avgs;
    for (std::size_t i = 0; i < ctx_n; ++i) {
      RssiStats s;
      s.sender = NodeId{0};
      s.receiver = NodeId{static_cast<std::uint32_t>(i + 1)};
      s.count = 1 + static_cast<std::uint32_t>(u01(rng) * (most - 1));
      s.avg = uni(200, 500);
      s.min = s.max = s.avg;
      ctx.push_back(s);
      avgs.push_back(s.avg);
    }
    ctx[0].count = most;
    const auto& probe = ctx[static_cast<std::size_t>(u01(rng) * ctx_n)];

    const double x = uni(150, 600), y = x + uni(0, 50);
    const double va = f_avg(x, p), vr = f_rel(x, ctx, p), vn = f_num(probe, ctx, p);
    for (double v : {va, vr, vn, f_avg(y, p), f_rel(y, ctx, p)}) range_bad += !(v >= 0.0 && v <= 1.0);

    // Monotone: f_avg and f_rel non-increasing in the reading, f_num non-decreasing in count.
    mono_bad += f_avg(y, p) > va || f_rel(y, ctx, p) > vr;
    RssiStats more = probe;
    more.count = std::min(most, probe.count + 1 + static_cast<std::uint32_t>(u01(rng) * 5));
    mono_bad += f_num(more, ctx, p) < vn;

    // Continuity: the value at each breakpoint meets the neighbouring piece.
    const double eps = 1e-9 * std::max(1.0, p.b);
    cont_bad += std::abs(f_avg(p.a, p) - 1.0) > 1e-9 || std::abs(f_avg(p.b, p)) > 1e-9 ||
                std::abs(f_avg(p.a - eps, p) - f_avg(p.a + eps, p)) > 1e-6;
    if (ctx_n >= 2) {
      auto s = avgs;
      std::sort(s.begin(), s.end());
      const double m = (s[0] + s[1]) / 2.0;
      cont_bad += std::abs(f_rel(p.rel_lo * m, ctx, p) - 1.0) > 1e-9 || std::abs(f_rel(p.rel_hi * m, ctx, p)) > 1e-9;
    }
    RssiStats at_lo = probe, at_hi = probe;
    at_lo.count = lo_count;
    at_hi.count = hi_count;
    cont_bad += std::abs(f_num(at_lo, ctx, p)) > 1e-9 || std::abs(f_num(at_hi, ctx, p) - 1.0) > 1e-9;

    const double oa = oracle::f_avg(x, p.a, p.b);
    const double orl = oracle::f_rel(x, avgs, p.rel_lo, p.rel_hi);
    const double on = oracle::f_num(probe.count, most, p.num_lo, p.num_hi);
    const double diff = std::max({std::abs(oa - va), std::abs(orl - vr), std::abs(on - vn)});
    worst_oracle = std::max(worst_oracle, diff);
    oracle_bad += diff > 1e-9;

    const double sc = score(probe, ctx, p);
    const double pa = f_avg(probe.avg, p), pr = f_rel(probe.avg, ctx, p);
    score_bad += sc != std::max(pa, std::min(pr, vn * vn));
  }

  // Point checks.
  const FuzzyParams field;
  const bool point_avg = f_avg(352, field) == 0.5;
  bool point_rel = true;
  for (double x : {100.0, 343.0, 352.0, 999.0}) {
    point_rel = point_rel && f_rel(x, std::span<const RssiStats>{}, field) == 1.0;
    const RssiStats one{NodeId{0}, NodeId{1}, 30, x, x, x};
    point_rel = point_rel && f_rel(x, std::span<const RssiStats>(&one, 1), field) == 1.0;
  }

  const bool ok = !range_bad && !cont_bad && !mono_bad && !oracle_bad && !score_bad && point_avg && point_rel;
  std::ostringstream os;
  os << "draws=10000 range_violations=" << range_bad << " continuity_violations=" << cont_bad
     << " monotonicity_violations=" << mono_bad << " oracle_mismatches=" << oracle_bad << " (max diff "
     << worst_oracle << ") score_mismatches=" << score_bad << " f_avg(352)=" << f_avg(352, field)
     << " f_rel_small_context=" << (point_rel ? "1" : "not 1");
  return {ok, os.str()};
}

// 10 --------------------------------------------------------------------------

std::optional<double> field_value(const std::string& text, const std::string& key) {
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);)
    if (line.rfind(key + " ", 0) == 0) return std::stod(line.substr(key.size() + 1));
  return std::nullopt;
}

Outcome calibration_oracle() {
  const auto dir = scratch_dir("calibrate");
  struct Case {
    std::vector<double> two, one;
    double a, b;
  };
  // Exact order statistic (ranks 10 and 95 of 0..100) and an interpolated one
  // (ranks 0.9 and 8.55 of ten evenly spaced readings).
  std::vector<Case> cases;
  {
    Case c;
    for (int i = 0; i <= 100; ++i) c.two.push_back(300 + i);
    for (int i = 0; i <= 100; ++i) c.one.push_back(250 + i);
    c.a = 310;
    c.b = 345;
    cases.push_back(c);
  }
  {
    Case c;
    for (int i = 0; i < 10; ++i) c.two.push_back(350 + 10 * i);
    for (int i = 0; i < 10; ++i) c.one.push_back(330 + 10 * i);
    c.a = 359;
    c.b = 415.5;
    cases.push_back(c);
  }
  bool ok = true;
  std::string detail;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto& c = cases[k];
    std::vector<TrainingSample> samples;
    std::ostringstream file;
    std::mt19937_64 rng(10 + k);
    for (double v : c.two) samples.push_back({2, v});
    for (double v : c.one) samples.push_back({1, v});
    std::shuffle(samples.begin(), samples.end(), rng);
    for (const auto& s : samples) file << s.hops << ' ' << s.avg << '\n';
    const auto path = dir / ("training" + std::to_string(k) + ".txt");
    std::ofstream(path) << file.str();

    const auto lib = calibrate(samples);
    const auto log = dir / ("calibrate" + std::to_string(k) + ".log");
    const int status = run_cli("calibrate --training " + path.string(), log);
    const auto out = slurp(log);
    const auto a = field_value(out, "a"), b = field_value(out, "b");
    const bool case_ok = lib.a == c.a && lib.b == c.b && status == 0 && a && b && *a == c.a && *b == c.b;
    ok = ok && case_ok;
    std::ostringstream os;
    os << " case" << k << ": expected a=" << c.a << " b=" << c.b << " got library a=" << lib.a << " b=" << lib.b
       << " cli a=" << (a ? std::to_string(*a) : "?") << " b=" << (b ? std::to_string(*b) : "?");
    detail += os.str();
  }
  const std::vector<double> e{10, 10};
  const double chi0 = chi_square_gof(std::vector<double>{10, 10}, e).statistic;
  const double chi8 = chi_square_gof(std::vector<double>{12, 8}, e).statistic;
  ok = ok && chi0 == 0.0 && chi8 == 0.8;
  fs::remove_all(dir);
  return {ok, detail.substr(1) + "; chi2=" + fmt(chi0) + "," + fmt(chi8)};
}

// 11 --------------------------------------------------------------------------

Outcome mode_agreement() {
  const auto spec = field_segment();
  const auto table = build_table(spec);
  const auto placement = sim::identity_placement(spec);
  const auto anchors = sim::anchor_nodes_for(spec, placement);
  const auto ideal = sim::ideal_graph(spec, placement);
  DistributedConfig cfg;
  cfg.seed = 11;

  const auto cmp = compare_modes(table, ideal, anchors, {}, cfg);
  std::size_t equal = 0;
  for (const auto& [node, claim] : cmp.distributed.claims) equal += claim.position == cmp.centralized.position_of(node);
  const bool ideal_ok = equal == 50 && cmp.distributed.claims.size() == 50 && cmp.divergences.empty();

  // A clone of node 22 shares its neighbourhood and therefore its tuple.
  const NodeId original{22}, clone{50};
  auto dup = ideal;
  dup.add_node(clone);
  for (auto n : std::vector<NodeId>(dup.neighbors(original).begin(), dup.neighbors(original).end()))
    dup.add_edge(clone, n);
  const auto d = compare_modes(table, dup, anchors, {}, cfg);
  bool confined = !d.divergences.empty();
  std::string nodes;
  for (const auto& div : d.divergences) {
    confined = confined && (div.node == original || div.node == clone);
    nodes += " " + std::to_string(to_int(div.node)) + ":" + to_string(div.reason);
  }
  return {ideal_ok && confined, "ideal agreeing=" + std::to_string(equal) + "/50 divergences=" +
                                    std::to_string(cmp.divergences.size()) + "; duplicate fixture divergences:" +
                                    nodes};
}

// 12 --------------------------------------------------------------------------

Outcome determinism() {
  sim::McConfig cfg;
  cfg.runs = 200;
  cfg.master_seed = 12;
  const auto render = [](const std::vector<sim::LevelResult>& r) {
    std::ostringstream os;
    sim::write_results(os, r);
    sim::write_summary_csv(os, r);
    return os.str();
  };
  const std::vector<sim::ErrorLevel> levels{{5, 15}, {11, 30}};
  const auto mc1 = render(sim::monte_carlo(field_segment(), levels, cfg));
  const auto sw1 = render(sim::sweep_segment_sizes(field_segment(), {50, 100}, sim::ErrorModel{}, cfg));
  cfg.threads = 4;
  const bool lib_ok = mc1 == render(sim::monte_carlo(field_segment(), levels, cfg)) &&
                      sw1 == render(sim::sweep_segment_sizes(field_segment(), {50, 100}, sim::ErrorModel{}, cfg));

  const auto dir = scratch_dir("determinism");
  bool cli_ok = true;
  std::size_t compared = 0;
  for (const std::string cmd : {"simulate --set 'levels=5,15 11,30'", "sweep --set 'sizes=50 100 150'"}) {
    std::vector<std::string> outputs;
    for (const std::string threads : {"1", "1", "4"}) {
      const auto out = dir / ("out" + std::to_string(outputs.size()) + ".txt");
      const auto csv = dir / ("sum" + std::to_string(outputs.size()) + ".csv");
      const int status = run_cli(cmd + " --seed 12 --runs 100 --threads " + threads + " --out " + out.string() +
                                     " --summary " + csv.string(),
                                 dir / "log.txt");
      cli_ok = cli_ok && status == 0;
      outputs.push_back(slurp(out) + slurp(csv));
    }
    for (const auto& o : outputs) cli_ok = cli_ok && !o.empty() && o == outputs[0];
    compared += outputs.size();
  }
  fs::remove_all(dir);
  return {lib_ok && cli_ok, std::string("library threads 1 vs 4 ") + (lib_ok ? "identical" : "DIFFER") +
                                "; cli reruns and threads 1/1/4 " + (cli_ok ? "byte-identical" : "DIFFER") + " (" +
                                std::to_string(compared) + " result files)"};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>> kCriteria{
    {"grid distance equals BFS hop count on all position pairs", grid_distance_oracle},
    {"one-hop and two-hop pair counts", pair_counts},
    {"anchor table distinctness", table_distinctness},
    {"perfect input localizes exactly", perfect_input},
    {"metrics on the 43 correct / 7 one-hop-wrong fixture", metrics_fixture},
    {"type A errors hurt at least as much as type B", type_asymmetry},
    {"error-threshold regime and level ladder", error_threshold},
    {"segment sweep trend", sweep_trend},
    {"fuzzy membership function suite", fuzzy_suite},
    {"calibration percentiles and chi-square fixtures", calibration_oracle},
    {"distributed and centralized agreement", mode_agreement},
    {"determinism across reruns and thread counts", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::size_t> which;
  if (argc > 1) {
    for (int i = 1; i < argc; ++i) {
      const long n = std::strtol(argv[i], nullptr, 10);
      if (n < 1 || n > static_cast<long>(kCriteria.size())) {
        std::cerr << "usage: acceptance [criterion 1-" << kCriteria.size() << "]...\n";
        return 2;
      }
      which.push_back(static_cast<std::size_t>(n));
    }
  } else {
    for (std::size_t n = 1; n <= kCriteria.size(); ++n) which.push_back(n);
  }
  int failures = 0;
  for (auto n : which) {
    const auto& [name, check] = kCriteria[n - 1];
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << name << "): " << o.detail << std::endl;
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
