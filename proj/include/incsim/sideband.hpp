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

#include <cstdint>
#include <functional>
#include <iomanip>
#include <deque>
#include <map>
#include <memory>
#include <ostream>
#include <unordered_map>
#include <vector>

#include "incsim/mux.hpp"
#include "incsim/topology.hpp"

namespace incsim {

using Address = std::uint32_t;
using Word = std::uint32_t;

/// Sparse 4 GB word-addressed memory of one node. Unwritten words read as zero.
class NodeMemory {
 public:
  static void check_aligned(Address addr) {
    if (addr % 4 != 0) throw SimError(ErrorCode::UnalignedAddress, "address is not word-aligned");
  }

  Word read(Address addr) const {
    check_aligned(addr);
    auto it = words_.find(addr);
    return it == words_.end() ? 0 : it->second;
  }

  void write(Address addr, Word value) {
    check_aligned(addr);
    if (value == 0) {
      words_.erase(addr);
    } else {
      words_[addr] = value;
    }
  }

  /// Little-endian block store starting at a word-aligned address; the tail is zero-padded.
  void write_block(Address addr, const Bytes& data) {
    check_aligned(addr);
    for (std::size_t off = 0; off < data.size(); off += 4) {
      Word w = 0;
      for (std::size_t b = 0; b < 4 && off + b < data.size(); ++b) w |= Word{data[off + b]} << (8 * b);
      write(static_cast<Address>(addr + off), w);
    }
  }

  std::size_t words_in_use() const { return words_.size(); }

  bool operator==(const NodeMemory& o) const { return words_ == o.words_; }

  /// "address: word" lines in ascending address order.
  void dump_hex(std::ostream& os) const {
    std::map<Address, Word> sorted(words_.begin(), words_.end());
    for (auto [a, w] : sorted) {
      os << std::hex << std::setfill('0') << std::setw(8) << a << ": " << std::setw(8) << w << std::dec << '\n';
    }
  }

 private:
  std::unordered_map<Address, Word> words_;
};

/// Demo register map every node exposes, all within the 4 GB address space.
namespace regs {
inline constexpr Address kBuildId = 0xFFFF'0000;
inline constexpr Address kTemperature = 0xFFFF'0004;
inline constexpr Address kBootCommand = 0xFFFF'0008;
inline constexpr Address kEepromBase = 0xFFFF'0100;  // 64 words of EEPROM stub
inline constexpr Word kBuildIdValue = 0x1AC0'3000;
inline constexpr Word kBootMagic = 0xB007'0001;
}  // namespace regs

struct SidebandConfig {
  SimTime ring_hop_ns = 100;
};

struct SidebandStats {
  std::uint64_t ring_ops = 0;
  std::uint64_t ring_hops = 0;
  std::uint64_t tunnel_requests = 0;
  std::uint64_t tunnel_responses = 0;
  std::uint64_t tunnel_broadcasts = 0;
};

/// Ring Bus (per card, no fabric involvement) and NetTunnel (same operations
/// carried as fabric packets) over the per-node memories.
///
/// Each card's ring visits its 27 nodes in ascending card-local index order and
/// is unidirectional; a response keeps travelling forward to the origin, so
/// every ring operation takes 27 hops.
class Sideband {
 public:
  using WordCallback = std::function<void(Word value, SimTime done)>;
  using AckCallback = std::function<void(SimTime done)>;

  Sideband(ChannelHub& hub, SidebandConfig config = {})
      : hub_(hub), config_(config), memory_(hub.topology().node_count()),
        broadcast_applies_(hub.topology().node_count(), 0) {
    const Topology& topo = hub.topology();
    for (NodeId n = 0; n < topo.node_count(); ++n) {
      memory_[n].write(regs::kBuildId, regs::kBuildIdValue);
      memory_[n].write(regs::kTemperature, 40 + topo.local_index(topo.coord(n)) % 8);
      hub_.mux(n).register_tx(n, ProtocolId::NetTunnel, 0);
      hub_.mux(n).register_rx(n, ProtocolId::NetTunnel, 0, [this, n](const Packet& p) { on_tunnel_packet(n, p); });
      hub_.add_waiter(n, [this, n] { pump(n); });
    }
    outbox_.resize(topo.node_count());
  }

  Sideband(const Sideband&) = delete;
  Sideband& operator=(const Sideband&) = delete;

  NodeMemory& memory(NodeId n) { return memory_.at(n); }
  const NodeMemory& memory(NodeId n) const { return memory_.at(n); }
  const SidebandStats& stats() const { return stats_; }
  const SidebandConfig& config() const { return config_; }

  /// Total broadcast writes each node has applied (ring or tunnel).
  const std::vector<std::uint64_t>& broadcast_applies() const { return broadcast_applies_; }

  // ---- Ring Bus ---------------------------------------------------------

  /// Forward hops from `origin` to `target` on their card's ring.
  int ring_hops(NodeId origin, NodeId target) const {
    const Topology& topo = hub_.topology();
    int o = Topology::local_index(topo.coord(origin));
    int t = Topology::local_index(topo.coord(target));
    return (t - o + 27) % 27;
  }

  void ring_read(NodeId origin, NodeId target, Address addr, WordCallback done) {
    check_same_card(origin, target);
    NodeMemory::check_aligned(addr);
    Simulator& sim = hub_.simulator();
    const SimTime t0 = sim.now();
    count_ring();
    sim.schedule_at(t0 + ring_hops(origin, target) * config_.ring_hop_ns,
                    [this, target, addr, t0, done = std::move(done)]() mutable {
                      Word v = memory_[target].read(addr);
                      hub_.simulator().schedule_at(t0 + 27 * config_.ring_hop_ns,
                                                   [v, done = std::move(done), this] { done(v, hub_.simulator().now()); });
                    });
  }

  void ring_write(NodeId origin, NodeId target, Address addr, Word value, AckCallback done) {
    check_same_card(origin, target);
    NodeMemory::check_aligned(addr);
    Simulator& sim = hub_.simulator();
    const SimTime t0 = sim.now();
    count_ring();
    sim.schedule_at(t0 + ring_hops(origin, target) * config_.ring_hop_ns,
                    [this, target, addr, value] { memory_[target].write(addr, value); });
    sim.schedule_at(t0 + 27 * config_.ring_hop_ns, [this, done = std::move(done)] {
      if (done) done(hub_.simulator().now());
    });
  }

  /// The write is applied at each node as the command passes, origin first.
  void ring_broadcast_write(NodeId origin, Address addr, Word value, AckCallback done) {
    NodeMemory::check_aligned(addr);
    Simulator& sim = hub_.simulator();
    const SimTime t0 = sim.now();
    count_ring();
    for (NodeId n : card_ring(origin)) {
      sim.schedule_at(t0 + ring_hops(origin, n) * config_.ring_hop_ns, [this, n, addr, value] {
        memory_[n].write(addr, value);
        ++broadcast_applies_[n];
      });
    }
    sim.schedule_at(t0 + 27 * config_.ring_hop_ns, [this, done = std::move(done)] {
      if (done) done(hub_.simulator().now());
    });
  }

  /// Reads `addr` at every node of the origin's card in one trip round the
  /// ring. Values are returned in ring order starting at local index 0.
  void ring_read_all(NodeId origin, Address addr, std::function<void(std::vector<Word>, SimTime)> done) {
    NodeMemory::check_aligned(addr);
    Simulator& sim = hub_.simulator();
    const SimTime t0 = sim.now();
    count_ring();
    auto values = std::make_shared<std::vector<Word>>(27, 0);
    std::vector<NodeId> ring = card_ring(origin);
    for (std::size_t i = 0; i < ring.size(); ++i) {
      NodeId n = ring[i];
      sim.schedule_at(t0 + ring_hops(origin, n) * config_.ring_hop_ns,
                      [this, n, i, addr, values] { (*values)[i] = memory_[n].read(addr); });
    }
    sim.schedule_at(t0 + 27 * config_.ring_hop_ns, [this, values, done = std::move(done)] {
      done(*values, hub_.simulator().now());
    });
  }

  // ---- NetTunnel --------------------------------------------------------

  void tunnel_read(NodeId origin, NodeId target, Address addr, WordCallback done) {
    NodeMemory::check_aligned(addr);
    std::uint32_t tag = new_tag();
    pending_reads_[tag] = std::move(done);
    send(origin, target, tag, Op::ReadReq, addr, 0, {});
  }

  void tunnel_write(NodeId origin, NodeId target, Address addr, Word value, AckCallback done) {
    NodeMemory::check_aligned(addr);
    std::uint32_t tag = new_tag();
    pending_acks_[tag] = std::move(done);
    send(origin, target, tag, Op::WriteReq, addr, value, {});
  }

  /// Fabric broadcast; `done` fires once every node has applied the write.
  void tunnel_broadcast_write(NodeId origin, Address addr, Word value, AckCallback done) {
    NodeMemory::check_aligned(addr);
    Bytes data(4);
    for (int i = 0; i < 4; ++i) data[i] = static_cast<std::uint8_t>(value >> (8 * i));
    tunnel_broadcast_block(origin, addr, std::move(data), std::move(done));
  }

  /// Block-write extension: bytes stored little-endian from `addr` at every node.
  void tunnel_broadcast_block(NodeId origin, Address addr, Bytes data, AckCallback done) {
    NodeMemory::check_aligned(addr);
    if (data.size() > max_block_bytes()) throw SimError(ErrorCode::PayloadTooLarge, "tunnel block too large");
    std::uint32_t tag = new_tag();
    broadcasts_[tag] = BroadcastProgress{hub_.topology().node_count(), std::move(done)};
    ++stats_.tunnel_broadcasts;
    send(origin, origin, tag, Op::BroadcastWrite, addr, 0, std::move(data), /*broadcast=*/true);
  }

  /// Largest block payload in one tunnel packet.
  std::size_t max_block_bytes() const {
    return (hub_.payload_max() - kTunnelHeader) / 4 * 4;
  }

  /// Outstanding tunnel requests and broadcasts.
  std::size_t tunnel_outstanding() const {
    return pending_reads_.size() + pending_acks_.size() + broadcasts_.size();
  }

 private:
  enum class Op : std::uint8_t { ReadReq = 1, WriteReq = 2, BroadcastWrite = 3, ReadResp = 4, WriteAck = 5 };
  static constexpr std::size_t kTunnelHeader = 12;  // op, 3 reserved, address, word

  struct BroadcastProgress {
    std::size_t remaining = 0;
    AckCallback done;
  };

  struct Outgoing {
    PacketHeader header;
    Bytes payload;
  };

  void count_ring() { ++stats_.ring_ops; stats_.ring_hops += 27; }

  void check_same_card(NodeId origin, NodeId target) const {
    const Topology& topo = hub_.topology();
    if (topo.card_index(origin) != topo.card_index(target)) {
      throw SimError(ErrorCode::OffCardTarget, "Ring Bus target is on another card");
    }
  }

  std::vector<NodeId> card_ring(NodeId origin) const {
    return hub_.topology().card_nodes(hub_.topology().card_index(origin));
  }

  std::uint32_t new_tag() { return next_tag_++; }

  void send(NodeId from, NodeId to, std::uint32_t tag, Op op, Address addr, Word word, Bytes extra,
            bool broadcast = false) {
    Bytes payload(kTunnelHeader);
    payload[0] = static_cast<std::uint8_t>(op);
    for (int i = 0; i < 4; ++i) {
      payload[4 + i] = static_cast<std::uint8_t>(addr >> (8 * i));
      payload[8 + i] = static_cast<std::uint8_t>(word >> (8 * i));
    }
    payload.insert(payload.end(), extra.begin(), extra.end());
    PacketHeader h;
    h.protocol = ProtocolId::NetTunnel;
    h.broadcast = broadcast;
    h.dst = hub_.topology().coord(to);
    h.seq = tag;
    if (op == Op::ReadReq || op == Op::WriteReq || op == Op::BroadcastWrite) ++stats_.tunnel_requests;
    outbox_[from].push_back(Outgoing{h, std::move(payload)});
    pump(from);
  }

  void pump(NodeId node) {
    Network& net = hub_.network();
    auto& q = outbox_[node];
    while (!q.empty()) {
      Outgoing& o = q.front();
      const bool local = !o.header.broadcast && hub_.topology().id(o.header.dst) == node;
      if (!local && !net.reserve_wakeup(node)) return;
      if (net.inject(node, o.header, o.payload) != InjectResult::Accepted) return;
      q.pop_front();
    }
  }

  void on_tunnel_packet(NodeId at, const Packet& p) {
    const Bytes& b = p.payload;
    if (b.size() < kTunnelHeader) throw SimError(ErrorCode::InternalInvariantViolation, "short tunnel packet");
    auto op = static_cast<Op>(b[0]);
    Address addr = 0;
    Word word = 0;
    for (int i = 0; i < 4; ++i) {
      addr |= Address{b[4 + i]} << (8 * i);
      word |= Word{b[8 + i]} << (8 * i);
    }
    const std::uint32_t tag = p.header.seq;
    const NodeId from = hub_.topology().id(p.header.src);
    switch (op) {
      case Op::ReadReq:
        send(at, from, tag, Op::ReadResp, addr, memory_[at].read(addr), {});
        break;
      case Op::WriteReq:
        memory_[at].write(addr, word);
        send(at, from, tag, Op::WriteAck, addr, 0, {});
        break;
      case Op::BroadcastWrite: {
        memory_[at].write_block(addr, Bytes(b.begin() + kTunnelHeader, b.end()));
        ++broadcast_applies_[at];
        auto it = broadcasts_.find(tag);
        if (it != broadcasts_.end() && --it->second.remaining == 0) {
          AckCallback done = std::move(it->second.done);
          broadcasts_.erase(it);
          if (done) done(hub_.simulator().now());
        }
        break;
      }
      case Op::ReadResp: {
        ++stats_.tunnel_responses;
        auto it = pending_reads_.find(tag);
        if (it == pending_reads_.end()) break;
        WordCallback done = std::move(it->second);
        pending_reads_.erase(it);
        if (done) done(word, hub_.simulator().now());
        break;
      }
      case Op::WriteAck: {
        ++stats_.tunnel_responses;
        auto it = pending_acks_.find(tag);
        if (it == pending_acks_.end()) break;
        AckCallback done = std::move(it->second);
        pending_acks_.erase(it);
        if (done) done(hub_.simulator().now());
        break;
      }
    }
  }

  ChannelHub& hub_;
  SidebandConfig config_;
  std::vector<NodeMemory> memory_;
  std::vector<std::uint64_t> broadcast_applies_;
  std::vector<std::deque<Outgoing>> outbox_;
  std::map<std::uint32_t, WordCallback> pending_reads_;
  std::map<std::uint32_t, AckCallback> pending_acks_;
  std::map<std::uint32_t, BroadcastProgress> broadcasts_;
  std::uint32_t next_tag_ = 0;
  SidebandStats stats_;
};

}  // namespace incsim
