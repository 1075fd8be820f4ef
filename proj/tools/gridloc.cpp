// gridloc: command-line front end for the grid localization library.
//
//   gridloc table       [--config F] [--out F]
//   gridloc localize    --readings F [--truth F] [--out F]
//   gridloc simulate    --seed N [--runs N] [--out F] [--summary F]
//   gridloc sweep       --seed N [--runs N] [--out F] [--summary F]
//   gridloc calibrate   --training F
//   gridloc distributed --seed N [--graph F | --readings F] [--out F] [--trace F]
//
// Any config key can also be given as `--set key=value`; flags win over the
// config file. Exit status: 0 success, 1 table validation failure, 2 invalid
// input or configuration.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gridloc/anchors.hpp"
#include "gridloc/config.hpp"
#include "gridloc/localize.hpp"
#include "gridloc/protocol.hpp"
#include "gridloc/ranging.hpp"
#include "gridloc/sim.hpp"

namespace {

using namespace gridloc;

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::string out;
  std::string summary;
  std::string readings;
  std::string truth;
  std::string training;
  std::string graph;
  std::string trace;
  std::optional<unsigned> threads;
};

RunConfig resolve(const Options& o) {
  RunConfig c;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw ValidationError("config: cannot open `" + o.config + "`");
    load_config(c, in, o.config);
  }
  for (const auto& kv : o.overrides) apply_override(c, kv);
  if (o.seed) c.seed = *o.seed;
  if (o.runs) c.runs = *o.runs;
  if (o.threads) c.threads = *o.threads;
  if (!o.out.empty()) c.out = o.out;
  if (!o.summary.empty()) c.summary = o.summary;
  if (!o.trace.empty()) c.trace = o.trace;
  return c;
}

// Writes to `path`, or stdout when empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ValidationError("out: cannot open `" + path + "` for writing");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::ifstream open_input(const std::string& path, const char* what) {
  if (path.empty()) throw ValidationError(std::string(what) + ": a file is required");
  std::ifstream in(path);
  if (!in) throw ValidationError(std::string(what) + ": cannot open `" + path + "`");
  return in;
}

void print_report(std::ostream& os, const AnchorReport& r) {
  os << "distinct " << (r.distinct ? "yes" : "no") << '\n';
  for (const auto& [p, q] : r.collisions) os << "collision " << p << ' ' << q << '\n';
  os << "collinear " << (r.collinear ? "yes" : "no") << '\n';
  os << "parallelogram " << (r.parallelogram ? "yes" : "no") << '\n';
  os << "parallelogram_physical " << (r.parallelogram_physical ? "yes" : "no") << '\n';
  os << "validation " << (r.distinct ? "PASS" : "FAIL") << '\n';
}

int cmd_table(const Options& o) {
  const auto c = resolve(o);
  const auto table = build_table(c.segment);
  const auto report = validate_anchors(c.segment);
  Output out(c.out);
  write_table(out.stream(), table);
  print_report(c.out.empty() ? std::cerr : std::cout, report);
  return report.distinct ? 0 : 1;
}

int cmd_localize(const Options& o) {
  auto c = resolve(o);
  c.fuzzy.validate();
  const auto table = build_table(c.segment);
  if (!table.valid()) throw ValidationError("anchors: table tuples are not distinct");
  auto in = open_input(o.readings, "readings");
  const auto stats = read_readings(in, c.fuzzy.group_size, o.readings);

  std::optional<TruePlacement> truth;
  if (!o.truth.empty()) {
    auto tin = open_input(o.truth, "truth");
    truth = read_placement(tin, o.truth);
  }
  const AnchorNodes anchors = resolve_anchor_nodes(c);
  std::vector<NodeId> nodes(anchors.begin(), anchors.end());
  if (truth)
    for (const auto& [n, _] : *truth) nodes.push_back(n);
  const auto graph = classify_neighbors(stats, c.fuzzy, c.symmetrization, nodes);
  const auto assignment = localize_centralized(table, graph, anchors, c.localize);

  Output out(c.out);
  write_assignment(out.stream(), assignment);
  if (truth) {
    std::vector<NodeId> foreign;
    for (auto n : graph.nodes())
      if (!truth->count(n)) foreign.push_back(n);
    const auto m = metrics(assignment, *truth, foreign);
    std::cout << "rate_c " << sim::format_rate(m.rate_c) << '\n'
              << "avg_error " << sim::format_error(m.avg_error) << '\n';
  }
  return 0;
}

void write_level_outputs(const RunConfig& c, const std::vector<sim::LevelResult>& levels) {
  {
    Output out(c.out);
    sim::write_results(out.stream(), levels);
  }
  if (!c.summary.empty()) {
    Output s(c.summary);
    sim::write_summary_csv(s.stream(), levels);
  } else if (!c.out.empty()) {
    sim::write_summary_csv(std::cout, levels);
  }
}

sim::McConfig mc_config(const RunConfig& c) {
  if (c.runs == 0) throw ValidationError("runs: must be at least 1");
  sim::McConfig mc;
  mc.runs = c.runs;
  mc.master_seed = c.require_seed();
  mc.localize = c.localize;
  mc.threads = std::max(1u, c.threads);
  return mc;
}

int cmd_simulate(const Options& o) {
  const auto c = resolve(o);
  const auto mc = mc_config(c);
  write_level_outputs(c, sim::monte_carlo(c.segment, c.levels, mc));
  return 0;
}

int cmd_sweep(const Options& o) {
  const auto c = resolve(o);
  const auto mc = mc_config(c);
  write_level_outputs(c, sim::sweep_segment_sizes(c.segment, c.sizes, c.error_model, mc));
  return 0;
}

int cmd_calibrate(const Options& o) {
  const auto c = resolve(o);
  auto in = open_input(o.training, "training");
  const auto samples = read_training(in, o.training);
  const auto fitted = calibrate(samples, c.fuzzy);
  Output out(c.out);
  auto& os = out.stream();
  os << "a " << fitted.a << '\n' << "b " << fitted.b << '\n';
  for (int label : {1, 2}) {
    std::vector<double> values;
    for (const auto& s : samples)
      if (s.hops == label) values.push_back(s.avg);
    os << "chi2 " << label << "-hop ";
    try {
      const auto r = normality_test(values, c.chi_square_bins);
      os << "n=" << r.samples << " mean=" << r.mean << " stddev=" << r.stddev
         << " statistic=" << sim::format_fixed(r.test.statistic, 4) << " dof=" << r.test.dof << '\n';
    } catch (const DomainError& e) {
      os << "unavailable (" << e.what() << ")\n";
    }
  }
  return 0;
}

int cmd_distributed(const Options& o) {
  const auto c = resolve(o);
  const auto table = build_table(c.segment);
  if (!table.valid()) throw ValidationError("anchors: table tuples are not distinct");
  const AnchorNodes anchors = resolve_anchor_nodes(c);

  protocol::DistributedConfig dc;
  dc.fuzzy = c.fuzzy;
  dc.symmetrization = c.symmetrization;
  dc.network = c.network;
  dc.seed = c.require_seed();
  std::unique_ptr<std::ofstream> trace;
  if (!c.trace.empty()) {
    trace = std::make_unique<std::ofstream>(c.trace);
    if (!*trace) throw ValidationError("trace: cannot open `" + c.trace + "` for writing");
    dc.trace = trace.get();
  }

  Assignment centralized;
  protocol::DistributedResult distributed;
  if (!o.readings.empty()) {
    // Raw readings drive both the simulated radio and the centralized baseline.
    auto in = open_input(o.readings, "readings");
    const auto file = parse_readings(in, c.fuzzy.group_size, o.readings);
    if (file.aggregated)
      throw ValidationError("readings: distributed runs need raw `R sender receiver rssi` records");
    const auto& raw = file.raw;
    const auto stats = aggregate(raw, c.fuzzy.group_size);
    std::vector<NodeId> nodes(anchors.begin(), anchors.end());
    const auto graph = classify_neighbors(stats, c.fuzzy, c.symmetrization, nodes);
    centralized = localize_centralized(table, graph, anchors, c.localize);
    distributed = protocol::run_distributed(table, anchors, graph.nodes(),
                                            protocol::trace_from_readings(raw, c.fuzzy.group_size), dc);
  } else {
    NeighborGraph graph;
    if (!o.graph.empty()) {
      auto in = open_input(o.graph, "graph");
      graph = read_graph(in, o.graph);
      for (auto a : anchors) graph.add_node(a);
    } else {
      const auto placement = sim::identity_placement(c.segment);
      graph = sim::inject_errors(sim::ideal_graph(c.segment, placement), sim::GroundTruth::from(placement),
                                 sim::ErrorInjection{c.inject_a, c.inject_b, dc.seed});
    }
    centralized = localize_centralized(table, graph, anchors, c.localize);
    distributed = protocol::run_distributed(table, anchors, graph, dc);
  }

  Output out(c.out);
  protocol::write_claims(out.stream(), distributed);
  auto& report = c.out.empty() ? std::cerr : std::cout;
  protocol::write_divergences(report, protocol::divergences(centralized, distributed));
  report << "# messages delivered " << distributed.total_delivered() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Table-lookup localization for grid sensor segments"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key=value configuration file");
    sub->add_option("--set", o.overrides, "override one config key (key=value)");
    sub->add_option("--seed", o.seed, "master RNG seed");
    sub->add_option("--out", o.out, "output file (default stdout)");
    sub->add_option("--runs", o.runs, "Monte Carlo runs per level");
  };

  auto* table = app.add_subcommand("table", "write the anchor distance table and validate anchors");
  common(table);
  auto* localize = app.add_subcommand("localize", "classify neighbours from readings and assign positions");
  common(localize);
  localize->add_option("--readings", o.readings, "readings file (R or S records)")->required();
  localize->add_option("--truth", o.truth, "ground truth `node x y` file for metrics");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo error-injection study");
  common(simulate);
  simulate->add_option("--summary", o.summary, "CSV summary output");
  simulate->add_option("--threads", o.threads, "worker threads");
  auto* sweep = app.add_subcommand("sweep", "segment size sweep under a fixed error model");
  common(sweep);
  sweep->add_option("--summary", o.summary, "CSV summary output");
  sweep->add_option("--threads", o.threads, "worker threads");
  auto* calib = app.add_subcommand("calibrate", "fit f_avg breakpoints from labelled readings");
  common(calib);
  calib->add_option("--training", o.training, "`label avg` training file")->required();
  auto* dist = app.add_subcommand("distributed", "simulate the distributed protocol");
  common(dist);
  dist->add_option("--graph", o.graph, "edge list `u v` to use as the neighbourhood");
  dist->add_option("--readings", o.readings, "raw `R sender receiver rssi` trace");
  dist->add_option("--trace", o.trace, "event trace output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*table) return cmd_table(o);
    if (*localize) return cmd_localize(o);
    if (*simulate) return cmd_simulate(o);
    if (*sweep) return cmd_sweep(o);
    if (*calib) return cmd_calibrate(o);
    if (*dist) return cmd_distributed(o);
  } catch (const gridloc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
