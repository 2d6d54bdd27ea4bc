/*
 * Copyright 2026 The incsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "incsim/bench.hpp"
#include "incsim/sandbox.hpp"
#include "incsim/workload.hpp"

namespace {

using namespace incsim;

SystemConfig config_from(const std::string& preset, const std::string& dims) {
  if (!dims.empty()) {
    if (!preset.empty()) throw SimError(ErrorCode::InvalidArgument, "give a preset or --dims, not both");
    SystemConfig c;
    c.dims = parse_coord(dims);
    return c;
  }
  return SystemConfig::preset(preset.empty() ? "card" : preset);
}

Axis parse_axis(const std::string& s) {
  if (s == "x" || s == "X") return Axis::X;
  if (s == "y" || s == "Y") return Axis::Y;
  if (s == "z" || s == "Z") return Axis::Z;
  throw SimError(ErrorCode::InvalidArgument, "axis must be x, y or z");
}

std::string gbps(std::uint64_t bytes_per_s) {
  std::ostringstream os;
  os << static_cast<double>(bytes_per_s) / 1e9 << " GB/s";
  return os.str();
}

int cmd_topo(const std::string& preset, const std::string& dims, const std::string& bisection,
             const std::string& offcard, const std::string& export_path) {
  const SystemConfig cfg = config_from(preset, dims);
  const Topology topo = Topology::build(cfg);
  std::cout << "dims " << topo.dims() << '\n'
            << "cards " << topo.card_count() << '\n'
            << "nodes " << topo.node_count() << '\n'
            << "links " << topo.link_count() << " (" << topo.count_links(Span::Single) << " single-span, "
            << topo.count_links(Span::Multi) << " multi-span, unidirectional)\n"
            << "link bandwidth " << gbps(cfg.link_bandwidth) << '\n';
  if (!bisection.empty()) {
    const Axis a = parse_axis(bisection);
    std::cout << "bisection " << axis_name(a) << ": " << topo.bisection_link_count(a) << " links, "
              << gbps(topo.bisection_bandwidth(a)) << '\n';
    if (topo.dims() == Coord{12, 12, 12}) {
      std::cout << "note: the published INC 9000 figure is 864 GB/s; this count includes every unidirectional "
                   "single- and multi-span link crossing the cut (see README)\n";
    }
  }
  if (!offcard.empty()) {
    const Coord card = parse_coord(offcard);
    const Coord origin{card.x * 3, card.y * 3, card.z * 3};
    const OffCardCount oc = topo.offcard_link_count(origin);
    std::cout << "off-card links of card " << card << ": " << oc.links << " (" << gbps(oc.bandwidth) << ")"
              << (oc.boundary_card ? ", card is on the system boundary" : "") << '\n';
  }
  if (!export_path.empty()) {
    std::ofstream f(export_path);
    if (!f) throw SimError(ErrorCode::InvalidArgument, "cannot write '" + export_path + "'");
    f << topo.to_json().dump(2) << '\n';
    std::cout << "exported " << export_path << '\n';
  }
  return 0;
}

int cmd_run(const std::string& workload, const std::string& trace_path, const std::string& stats_path) {
  std::ifstream in(workload, std::ios::binary);
  if (!in) throw SimError(ErrorCode::InvalidArgument, "cannot read '" + workload + "'");
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  WorkloadSpec spec = parse_workload(text, workload);
  std::ofstream trace;
  if (!trace_path.empty()) {
    trace.open(trace_path, std::ios::binary);
    if (!trace) throw SimError(ErrorCode::InvalidArgument, "cannot write '" + trace_path + "'");
  }
  WorkloadRunner runner(std::move(spec), trace_path.empty() ? nullptr : &trace);
  const auto stats = runner.run();
  const std::string doc = stats.dump(2) + "\n";
  if (stats_path.empty()) {
    std::cout << doc;
  } else {
    std::ofstream f(stats_path, std::ios::binary);
    if (!f) throw SimError(ErrorCode::InvalidArgument, "cannot write '" + stats_path + "'");
    f << doc;
    const auto& fab = stats["fabric"];
    std::cerr << "delivered " << fab["delivered"] << " packets (" << fab["directed_delivered"] << " directed, "
              << fab["broadcast_deliveries"] << " broadcast copies), dropped " << fab["dropped"] << ", last delivery at "
              << stats["last_delivery_ns"] << " ns\n";
  }
  return stats["fabric"]["dropped"] == 0 ? 0 : 2;
}

int cmd_bench(const std::string& preset, const std::string& dims, bool load, int width) {
  BenchOptions opt;
  opt.load = load;
  opt.width = width;
  const auto rows = bench_latency(config_from(preset, dims), opt);
  std::cout << "single-word bridge FIFO latency, width " << width << " bits, " << (load ? "loaded" : "idle")
            << " system\n";
  std::cout << "hops  src     dst      samples  measured_us  reference_us  deviation\n";
  for (const BenchRow& r : rows) {
    std::ostringstream src;
    std::ostringstream dst;
    src << r.src;
    dst << r.dst;
    std::cout << std::setw(4) << r.hops << "  " << std::left << std::setw(6) << src.str() << "  " << std::setw(7)
              << dst.str() << std::right << std::setw(9) << r.samples << std::fixed << std::setprecision(3)
              << std::setw(13) << r.measured_ns / 1000 << std::setw(14) << r.reference_ns / 1000 << std::showpos
              << std::setprecision(2) << std::setw(10) << r.deviation_pct << "%" << std::noshowpos
              << std::defaultfloat << '\n';
  }
  return 0;
}

int cmd_sandbox(const std::string& preset, const std::string& dims, const std::string& script) {
  SystemOptions o;
  o.topology = config_from(preset, dims);
  System sys(o);
  Sandbox box(sys, std::cout, std::cerr);
  if (!script.empty()) {
    std::ifstream in(script);
    if (!in) throw SimError(ErrorCode::InvalidArgument, "cannot read '" + script + "'");
    box.run(in, false);
  } else {
    const bool tty = isatty(fileno(stdin)) != 0;
    if (tty) std::cout << "incsim sandbox on " << sys.topology().dims() << "; type help\n";
    box.run(std::cin, tty);
  }
  return box.errors() == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"incsim: interconnect simulator"};
  app.require_subcommand(1);

  std::string preset;
  std::string dims;

  auto* topo = app.add_subcommand("topo", "topology census and metrics");
  std::string bisection;
  std::string offcard;
  std::string export_path;
  topo->add_option("preset", preset, "card, inc3000 or inc9000");
  topo->add_option("--dims", dims, "mesh extents x,y,z (multiples of 3)");
  topo->add_option("--bisection", bisection, "report the bisection across this axis (x, y or z)");
  topo->add_option("--offcard", offcard, "report off-card links of the card at card grid position cx,cy,cz");
  topo->add_option("--export", export_path, "write the topology as JSON");

  auto* run = app.add_subcommand("run", "simulate a workload file");
  std::string workload;
  std::string trace_path;
  std::string stats_path;
  run->add_option("workload", workload, "workload JSON file")->required();
  run->add_option("--trace", trace_path, "write a JSON-lines packet trace");
  run->add_option("--stats", stats_path, "write stats JSON here instead of standard output");

  auto* bench = app.add_subcommand("bench-latency", "single-word latency at 0, 1, 3 and 6 hops");
  bool load = false;
  int width = 8;
  bench->add_option("preset", preset, "card, inc3000 or inc9000");
  bench->add_option("--dims", dims, "mesh extents x,y,z");
  bench->add_flag("--load", load, "run with cross traffic");
  bench->add_option("--width", width, "bridge FIFO word width in bits")->check(CLI::Range(7, 64));

  auto* sandbox = app.add_subcommand("sandbox", "interactive memory console");
  std::string script;
  sandbox->add_option("preset", preset, "card, inc3000 or inc9000");
  sandbox->add_option("--dims", dims, "mesh extents x,y,z");
  sandbox->add_option("--script", script, "read commands from a file instead of standard input");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*topo) return cmd_topo(preset, dims, bisection, offcard, export_path);
    if (*run) return cmd_run(workload, trace_path, stats_path);
    if (*bench) return cmd_bench(preset, dims, load, width);
    if (*sandbox) return cmd_sandbox(preset, dims, script);
  } catch (const SimError& e) {
    std::cerr << "incsim: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "incsim: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
