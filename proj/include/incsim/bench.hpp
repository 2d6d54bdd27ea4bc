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

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "incsim/load.hpp"
#include "incsim/system.hpp"

namespace incsim {

struct BenchRow {
  int hops = 0;
  Coord src;
  Coord dst;
  std::size_t samples = 0;
  double measured_ns = 0;
  double reference_ns = 0;
  double deviation_pct = 0;
};

/// Reference single-word latencies in ns at 0, 1, 3 and 6 hops.
inline constexpr std::array<std::pair<int, double>, 4> kReferenceLatency{{{0, 250}, {1, 1100}, {3, 2500}, {6, 4700}}};

struct BenchOptions {
  int width = 8;
  bool load = false;
  SimTime load_period_ns = 20;
  std::size_t loaded_samples = 200;
  std::uint64_t seed = 1;
};

/// First node, in id order, exactly `hops` minimal hops from (0,0,0).
inline std::optional<NodeId> node_at_distance(const Topology& topo, int hops) {
  for (NodeId n = 0; n < topo.node_count(); ++n) {
    if (topo.min_hops(0, n) == hops) return n;
  }
  return std::nullopt;
}

/// Single-word Bridge FIFO transfers from (0,0,0) to a node at each reference
/// distance. Idle runs push one word; loaded runs average many words pushed
/// while cross traffic is running.
inline std::vector<BenchRow> bench_latency(const SystemConfig& cfg, const BenchOptions& opt = {}) {
  std::vector<BenchRow> rows;
  for (auto [hops, reference] : kReferenceLatency) {
    SystemOptions so;
    so.topology = cfg;
    so.seed = opt.seed;
    System sys(so);
    auto dst = node_at_distance(sys.topology(), hops);
    if (!dst) continue;
    auto& ch = sys.open_bridge_fifo(0, 0, *dst, {.width = opt.width});
    std::unique_ptr<BackgroundLoad> load;
    const std::size_t samples = opt.load ? opt.loaded_samples : 1;
    const SimTime start = opt.load ? 5'000 : 0;
    const SimTime spacing = 3'000;
    if (opt.load) {
      load = std::make_unique<BackgroundLoad>(sys, opt.load_period_ns,
                                              start + static_cast<SimTime>(samples) * spacing, opt.seed + 1);
    }
    for (std::size_t i = 0; i < samples; ++i) {
      sys.sim().schedule_at(start + static_cast<SimTime>(i) * spacing, [&ch, i] { ch.push(i & 0x7F); });
    }
    sys.sim().run();
    BenchRow r;
    r.hops = hops;
    r.src = sys.topology().coord(0);
    r.dst = sys.topology().coord(*dst);
    r.samples = ch.latency().count();
    r.measured_ns = ch.latency().mean();
    r.reference_ns = reference;
    r.deviation_pct = 100.0 * (r.measured_ns - reference) / reference;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace incsim
