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

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "incsim/common.hpp"
#include "incsim/engine.hpp"
#include "incsim/fabric.hpp"
#include "incsim/packet.hpp"
#include "incsim/topology.hpp"

namespace incsim {

struct NetworkConfig {
  LatencyModel latency;
  std::uint32_t rx_capacity = 4096;
  std::uint32_t credit_return_threshold = 256;
  /// Per-queue capacity in packets. The injection queue holds this many; the
  /// transit store holds this many per outgoing link.
  std::uint32_t router_queue_packets = 16;
  std::uint32_t payload_max_bytes = 256;
  bool record_paths = false;
};

struct Direction {
  Axis axis;
  int dir;
  friend bool operator==(const Direction&, const Direction&) = default;
};

/// How a broadcast copy reached a node.
struct BroadcastArrival {
  bool source_injection = true;
  Axis axis = Axis::X;
  int dir = +1;

  static BroadcastArrival injection() { return {}; }
  static BroadcastArrival from(Axis a, int d) { return {false, a, d}; }
};

/// Dimension-ordered broadcast rule (X < Y < Z). A source forwards in all six
/// directions; a copy that arrived travelling along axis a in direction d
/// continues along (a, d) and fans out both ways on every axis above a.
/// Every node is reached once, along its unique X-then-Y-then-Z path.
/// Directions whose neighbour is off the mesh are dropped.
inline std::vector<Direction> broadcast_forward_set(const Topology& topo, NodeId node, BroadcastArrival arrival) {
  std::vector<Direction> out;
  const Coord here = topo.coord(node);
  auto add = [&](Axis a, int d) {
    Coord next = here;
    next[a] += d;
    if (topo.in_bounds(next)) out.push_back({a, d});
  };
  if (arrival.source_injection) {
    for (Axis a : kAxes) {
      add(a, +1);
      add(a, -1);
    }
    return out;
  }
  add(arrival.axis, arrival.dir);
  for (Axis a : kAxes) {
    if (static_cast<int>(a) > static_cast<int>(arrival.axis)) {
      add(a, +1);
      add(a, -1);
    }
  }
  return out;
}

struct RoutingDecision {
  enum class Reason { Idle, AllBusyQueued };
  LinkId chosen = kNoLink;
  std::vector<LinkId> candidates;
  Reason reason = Reason::AllBusyQueued;
};

enum class InjectResult { Accepted, Backpressured };

struct NetworkStats {
  std::uint64_t injected = 0;
  std::uint64_t injected_broadcasts = 0;
  std::uint64_t delivered = 0;            // directed deliveries plus one per broadcast copy delivered
  std::uint64_t directed_delivered = 0;
  std::uint64_t broadcast_deliveries = 0;
  std::uint64_t injection_backpressure = 0;
  std::uint64_t minimality_violations = 0;
  std::uint64_t broadcast_multispan_hops = 0;
  std::uint64_t misdeliveries = 0;
  std::size_t max_injection_depth = 0;
  std::size_t max_transit_depth = 0;
  std::size_t max_rx_blocked = 0;
};

/// Per-node routers joined by credited links. Directed packets take any idle
/// productive (distance-reducing) link and otherwise wait at the node; broadcast
/// copies use single-span links only.
class Network {
 public:
  using DeliveryHandler = std::function<void(NodeId at, const Packet&)>;
  using ReadyHandler = std::function<void(NodeId)>;
  using TraceSink = std::function<void(NodeId at, const Packet&, SimTime t)>;

  Network(Simulator& sim, const Topology& topo, NetworkConfig config)
      : sim_(sim), topo_(topo), config_(config), nodes_(topo.node_count()) {
    config_.latency.validate();
    if (config_.payload_max_bytes == 0 || config_.payload_max_bytes > 0xFFFF ||
        kHeaderBytes + config_.payload_max_bytes > config_.rx_capacity) {
      throw SimError(ErrorCode::InvalidArgument, "payload_max must be positive and a full packet must fit rx_capacity");
    }
    if (config_.router_queue_packets == 0) {
      throw SimError(ErrorCode::InvalidArgument, "router_queue_packets must be positive");
    }
    FabricConfig fc{config_.rx_capacity, config_.credit_return_threshold, config_.latency.per_additional_hop_ns};
    links_.reserve(topo.link_count());
    for (const LinkSpec& s : topo.links()) links_.emplace_back(s, fc);
    for (NodeId n = 0; n < nodes_.size(); ++n) {
      nodes_[n].transit_capacity = config_.router_queue_packets * static_cast<std::uint32_t>(topo.out_links(n).size());
    }
  }

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const Topology& topology() const { return topo_; }
  const NetworkConfig& config() const { return config_; }
  Simulator& simulator() { return sim_; }
  const NetworkStats& stats() const { return stats_; }
  const CreditedLink& link(LinkId l) const { return links_[l]; }
  std::span<const CreditedLink> links() const { return links_; }

  void set_delivery_handler(DeliveryHandler h) { on_deliver_ = std::move(h); }
  void set_ready_handler(ReadyHandler h) { on_ready_ = std::move(h); }
  void set_trace_sink(TraceSink s) { on_trace_ = std::move(s); }

  /// Packets injected but not yet fully delivered (broadcast copies count separately).
  std::size_t live_packets() const { return packets_.size() - free_slots_.size(); }

  bool can_inject(NodeId node) const { return nodes_[node].injected_waiting < config_.router_queue_packets; }

  /// As can_inject, but a refusal also arranges a ready callback once space frees.
  bool reserve_wakeup(NodeId node) {
    if (can_inject(node)) return true;
    nodes_[node].backpressured = true;
    return false;
  }

  bool credits_conserved() const {
    return std::all_of(links_.begin(), links_.end(), [](const CreditedLink& l) { return l.conserves_credits(); });
  }

  /// Hands a packet to the router at `node`. The header's source and length are
  /// filled in here.
  InjectResult inject(NodeId node, PacketHeader header, Bytes payload) {
    if (payload.size() > config_.payload_max_bytes) {
      throw SimError(ErrorCode::PayloadTooLarge, std::to_string(payload.size()) + " bytes exceeds payload_max " +
                                                     std::to_string(config_.payload_max_bytes));
    }
    if (header.channel >= kMaxChannels) throw SimError(ErrorCode::InvalidHeader, "channel out of range");
    if (header.broadcast && header.protocol == ProtocolId::Postmaster) {
      throw SimError(ErrorCode::InvalidArgument, "postmaster packets cannot be broadcast");
    }
    header.src = topo_.coord(node);
    header.payload_len = static_cast<std::uint16_t>(payload.size());
    NodeId dst = header.broadcast ? node : topo_.id(header.dst);

    NodeState& ns = nodes_[node];
    const bool local = !header.broadcast && dst == node;
    if (!local && ns.injected_waiting >= config_.router_queue_packets) {
      ++stats_.injection_backpressure;
      ns.backpressured = true;
      return InjectResult::Backpressured;
    }
    ++stats_.injected;
    if (header.broadcast) ++stats_.injected_broadcasts;

    std::uint32_t slot = allocate();
    Packet& p = packets_[slot];
    p.header = header;
    p.payload = std::move(payload);
    p.id = next_packet_id_++;
    p.injected_at = sim_.now();
    p.hops = 0;
    p.path.clear();
    if (config_.record_paths) p.path.push_back(node);

    const SimTime overhead = config_.latency.endpoint_overhead_ns;
    if (local) {
      sim_.schedule_in(overhead, [this, node, slot] { deliver(node, slot); });
      return InjectResult::Accepted;
    }

    std::vector<std::pair<std::uint32_t, LinkId>> entries;
    if (header.broadcast) {
      std::uint32_t self = clone(slot);
      sim_.schedule_in(overhead, [this, node, self] { deliver(node, self); });
      for (Direction d : broadcast_forward_set(topo_, node, BroadcastArrival::injection())) {
        entries.emplace_back(clone(slot), topo_.link_at(node, Span::Single, d.axis, d.dir));
      }
      release(slot);
    } else {
      entries.emplace_back(slot, kNoLink);
    }
    ns.injected_waiting += static_cast<std::uint32_t>(entries.size());
    stats_.max_injection_depth = std::max<std::size_t>(stats_.max_injection_depth, ns.injected_waiting);
    sim_.schedule_in(config_.latency.injection_ns(), [this, node, entries = std::move(entries)] {
      NodeState& st = nodes_[node];
      for (auto [s, forced] : entries) st.waiting.push_back(Waiting{s, forced, true});
      request_dispatch(node);
    });
    return InjectResult::Accepted;
  }

  /// Outgoing links of `node` that bring a packet one hop closer to `dst`, in tie-break order.
  std::vector<LinkId> productive_links(NodeId node, NodeId dst) const {
    std::vector<LinkId> out;
    const int here = topo_.min_hops(node, dst);
    for (LinkId l : topo_.out_links(node)) {
      if (topo_.min_hops(topo_.link_dst(l), dst) == here - 1) out.push_back(l);
    }
    return out;
  }

  /// The decision the router at `node` would make right now for a packet to `header.dst`.
  RoutingDecision route_directed(NodeId node, const PacketHeader& header) const {
    NodeId dst = topo_.id(header.dst);
    if (dst == node) throw SimError(ErrorCode::InvalidArgument, "packet is already at its destination");
    RoutingDecision d;
    d.candidates = productive_links(node, dst);
    if (d.candidates.empty()) throw SimError(ErrorCode::Unroutable, "no productive link");
    const std::uint32_t wire = static_cast<std::uint32_t>(kHeaderBytes) + header.payload_len;
    for (LinkId l : d.candidates) {
      const CreditedLink& link = links_[l];
      if (link.idle_at(sim_.now()) && link.tx_credits() >= wire) {
        d.chosen = l;
        d.reason = RoutingDecision::Reason::Idle;
        return d;
      }
    }
    d.reason = RoutingDecision::Reason::AllBusyQueued;
    return d;
  }

 private:
  struct Waiting {
    std::uint32_t slot;
    LinkId forced;   // broadcast copies are bound to one link
    bool injected;   // counts against the injection queue rather than transit
  };

  struct NodeState {
    std::vector<Waiting> waiting;
    std::uint32_t injected_waiting = 0;
    std::uint32_t transit_waiting = 0;
    std::uint32_t transit_capacity = 0;
    std::deque<std::pair<LinkId, std::uint32_t>> rx_blocked;  // arrived, still holding link buffer space
    bool dispatch_pending = false;
    bool backpressured = false;
  };

  std::uint32_t allocate() {
    if (!free_slots_.empty()) {
      std::uint32_t s = free_slots_.back();
      free_slots_.pop_back();
      return s;
    }
    packets_.emplace_back();
    return static_cast<std::uint32_t>(packets_.size() - 1);
  }

  std::uint32_t clone(std::uint32_t slot) {
    std::uint32_t s = allocate();
    packets_[s] = packets_[slot];
    return s;
  }

  void release(std::uint32_t slot) {
    packets_[slot].payload.clear();
    packets_[slot].path.clear();
    free_slots_.push_back(slot);
  }

  void request_dispatch(NodeId node) {
    NodeState& ns = nodes_[node];
    if (ns.dispatch_pending) return;
    ns.dispatch_pending = true;
    sim_.schedule_in(0, [this, node] {
      nodes_[node].dispatch_pending = false;
      dispatch(node);
    });
  }

  bool try_send(NodeId node, LinkId l, std::uint32_t slot) {
    CreditedLink& link = links_[l];
    Packet& p = packets_[slot];
    TransmitResult r = link.try_transmit(p.wire_bytes(), p.payload.size(), sim_.now());
    const auto* ok = std::get_if<Accepted>(&r);
    if (ok == nullptr) return false;
    if (ok->tx_done > sim_.now()) sim_.schedule_at(ok->tx_done, [this, node] { request_dispatch(node); });
    sim_.schedule_at(ok->arrival, [this, l, slot] { arrive(l, slot); });
    return true;
  }

  void dispatch(NodeId node) {
    NodeState& ns = nodes_[node];
    bool injection_freed = false;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < ns.waiting.size(); ++i) {
      Waiting w = ns.waiting[i];
      bool sent = false;
      if (w.forced != kNoLink) {
        sent = try_send(node, w.forced, w.slot);
      } else {
        NodeId dst = topo_.id(packets_[w.slot].header.dst);
        const int here = topo_.min_hops(node, dst);
        for (LinkId l : topo_.out_links(node)) {
          if (topo_.min_hops(topo_.link_dst(l), dst) != here - 1) continue;
          if (try_send(node, l, w.slot)) {
            sent = true;
            break;
          }
        }
      }
      if (!sent) {
        ns.waiting[kept++] = w;
        continue;
      }
      if (w.injected) {
        --ns.injected_waiting;
        injection_freed = true;
      } else {
        --ns.transit_waiting;
      }
    }
    ns.waiting.resize(kept);

    while (!ns.rx_blocked.empty() && ns.transit_waiting < ns.transit_capacity) {
      auto [l, slot] = ns.rx_blocked.front();
      ns.rx_blocked.pop_front();
      accept(node, l, slot);
    }

    if (injection_freed && ns.backpressured && on_ready_) {
      ns.backpressured = false;
      sim_.schedule_in(0, [this, node] { on_ready_(node); });
    }
  }

  void arrive(LinkId l, std::uint32_t slot) {
    CreditedLink& link = links_[l];
    Packet& p = packets_[slot];
    link.complete_transfer(p.wire_bytes(), sim_.now());
    const NodeId node = topo_.link_dst(l);
    p.hops += 1;
    if (config_.record_paths) p.path.push_back(node);
    if (p.header.broadcast && link.spec().span != Span::Single) ++stats_.broadcast_multispan_hops;

    NodeState& ns = nodes_[node];
    const bool terminal = !p.header.broadcast && topo_.id(p.header.dst) == node;
    if (terminal) {
      free_link_buffer(l, p.wire_bytes());
      sim_.schedule_in(config_.latency.endpoint_overhead_ns, [this, node, slot] { deliver(node, slot); });
      return;
    }
    if (ns.transit_waiting < ns.transit_capacity) {
      accept(node, l, slot);
    } else {
      ns.rx_blocked.emplace_back(l, slot);
      stats_.max_rx_blocked = std::max(stats_.max_rx_blocked, ns.rx_blocked.size());
    }
  }

  // Moves a packet from link `l`'s receive buffer into the router at `node`.
  void accept(NodeId node, LinkId l, std::uint32_t slot) {
    NodeState& ns = nodes_[node];
    free_link_buffer(l, packets_[slot].wire_bytes());
    if (packets_[slot].header.broadcast) {
      const LinkSpec& via = links_[l].spec();
      std::uint32_t self = clone(slot);
      sim_.schedule_in(config_.latency.endpoint_overhead_ns, [this, node, self] { deliver(node, self); });
      for (Direction d : broadcast_forward_set(topo_, node, BroadcastArrival::from(via.axis, via.dir))) {
        ns.waiting.push_back(Waiting{clone(slot), topo_.link_at(node, Span::Single, d.axis, d.dir), false});
        ++ns.transit_waiting;
      }
      release(slot);
    } else {
      ns.waiting.push_back(Waiting{slot, kNoLink, false});
      ++ns.transit_waiting;
    }
    stats_.max_transit_depth = std::max<std::size_t>(stats_.max_transit_depth, ns.transit_waiting);
    request_dispatch(node);
  }

  void free_link_buffer(LinkId l, std::uint32_t bytes) {
    if (auto batch = links_[l].free_and_credit(bytes, sim_.now())) {
      const std::uint32_t amount = *batch;
      sim_.schedule_in(config_.latency.per_additional_hop_ns, [this, l, amount] {
        links_[l].credit_returned(amount, sim_.now());
        request_dispatch(topo_.link_src(l));
      });
    }
  }

  void deliver(NodeId node, std::uint32_t slot) {
    const Packet& p = packets_[slot];
    ++stats_.delivered;
    if (p.header.broadcast) {
      ++stats_.broadcast_deliveries;
    } else {
      ++stats_.directed_delivered;
      const NodeId dst = topo_.id(p.header.dst);
      if (dst != node) ++stats_.misdeliveries;
      if (static_cast<int>(p.hops) != topo_.min_hops(topo_.id(p.header.src), dst)) ++stats_.minimality_violations;
    }
    if (on_trace_) on_trace_(node, p, sim_.now());
    if (on_deliver_) on_deliver_(node, p);
    release(slot);
  }

  Simulator& sim_;
  const Topology& topo_;
  NetworkConfig config_;
  std::vector<CreditedLink> links_;
  std::vector<NodeState> nodes_;
  std::deque<Packet> packets_;  // stable addresses while handlers run
  std::vector<std::uint32_t> free_slots_;
  std::uint64_t next_packet_id_ = 0;
  NetworkStats stats_;
  DeliveryHandler on_deliver_;
  ReadyHandler on_ready_;
  TraceSink on_trace_;
};

}  // namespace incsim
