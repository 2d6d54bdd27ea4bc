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
#include <deque>
#include <functional>
#include <map>
#include <vector>

#include "incsim/mux.hpp"
#include "incsim/topology.hpp"

namespace incsim {

enum class EthMode { Interrupt, Polling };

struct EthConfig {
  std::uint32_t mtu = 1500;
  std::uint32_t tx_ring_entries = 64;
  std::uint32_t rx_ring_entries = 64;
  EthMode mode = EthMode::Interrupt;
  SimTime reassembly_timeout_ns = 1'000'000;
};

/// Ethernet channel 0 carries node-to-node frames; channel 1 carries frames
/// leaving the system through a gateway node.
inline constexpr std::uint8_t kEthInternalChannel = 0;
inline constexpr std::uint8_t kEthEgressChannel = 1;

struct Frame {
  Coord src;
  Coord dst;
  Bytes data;
  std::uint32_t seq = 0;
  SimTime sent_at = 0;
  SimTime received_at = 0;
};

enum class DescOwner : std::uint8_t { Driver, Device };

struct Descriptor {
  std::uint64_t address = 0;
  std::uint32_t length = 0;
  DescOwner owner = DescOwner::Driver;
};

struct EthStats {
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_received = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t packets_sent = 0;
  std::uint64_t delivery_events = 0;   // interrupts raised, or non-empty polls
  std::uint64_t ring_full_events = 0;
  std::uint64_t reassembly_timeouts = 0;
  std::size_t max_rx_backlog = 0;
};

/// Ethernet-like interface over the fabric. The driver hands frames to the
/// device through a transmit descriptor ring; the device fragments them into
/// packets, and the receiving device reassembles frames into receive
/// descriptors. Completed receives raise an interrupt per frame, or wait for
/// the driver to poll.
class EthInterface {
 public:
  enum class SendStatus { Queued, RingFull };
  using FrameHandler = std::function<void(const Frame&)>;

  EthInterface(ChannelHub& hub, NodeId node, EthConfig config = {})
      : hub_(hub), node_(node), config_(config), tx_ring_(config.tx_ring_entries), rx_ring_(config.rx_ring_entries) {
    if (config_.tx_ring_entries == 0 || config_.rx_ring_entries == 0) {
      throw SimError(ErrorCode::InvalidArgument, "descriptor rings need at least one entry");
    }
    for (std::size_t i = 0; i < tx_ring_.size(); ++i) tx_ring_[i].address = kTxBase + i * kBufferStride;
    // The driver posts every receive buffer to the device up front.
    for (std::size_t i = 0; i < rx_ring_.size(); ++i) {
      rx_ring_[i] = Descriptor{kRxBase + i * kBufferStride, 0, DescOwner::Device};
    }
    tx_buffers_.resize(tx_ring_.size());
    rx_buffers_.resize(rx_ring_.size());
    hub_.mux(node_).register_tx(node_, ProtocolId::Ethernet, kEthInternalChannel);
    hub_.mux(node_).register_rx(node_, ProtocolId::Ethernet, kEthInternalChannel,
                                [this](const Packet& p) { receive(p); });
    hub_.add_waiter(node_, [this] { pump(); });
  }

  EthInterface(const EthInterface&) = delete;
  EthInterface& operator=(const EthInterface&) = delete;

  NodeId node() const { return node_; }
  EthMode mode() const { return config_.mode; }
  const EthConfig& config() const { return config_; }
  const EthStats& stats() const { return stats_; }
  const LatencyRecorder& latency() const { return latency_; }
  const std::vector<Descriptor>& tx_ring() const { return tx_ring_; }
  const std::vector<Descriptor>& rx_ring() const { return rx_ring_; }

  /// Interrupt mode only: called from the interrupt for every received frame.
  void set_interrupt_handler(FrameHandler h) { on_frame_ = std::move(h); }

  SendStatus send(const Coord& dst, Bytes frame) { return enqueue(dst, std::move(frame), kEthInternalChannel); }

  /// Sends a frame out of the system through the gateway node `gateway`.
  SendStatus send_external(const Coord& gateway, std::uint32_t external_id, const Bytes& frame) {
    Bytes tagged;
    tagged.reserve(frame.size() + 4);
    for (int i = 0; i < 4; ++i) tagged.push_back(static_cast<std::uint8_t>(external_id >> (8 * i)));
    tagged.insert(tagged.end(), frame.begin(), frame.end());
    if (frame.size() > config_.mtu) throw SimError(ErrorCode::FrameTooLarge, "frame exceeds MTU");
    return enqueue(gateway, std::move(tagged), kEthEgressChannel, /*check_mtu=*/false);
  }

  /// Returns received frames. In polling mode this drains the receive ring; in
  /// interrupt mode it returns frames the interrupt handler did not consume.
  std::vector<Frame> poll() {
    std::vector<Frame> out;
    if (config_.mode == EthMode::Polling) {
      out = drain_rx_ring();
      if (!out.empty()) ++stats_.delivery_events;
    } else {
      out.assign(std::make_move_iterator(inbox_.begin()), std::make_move_iterator(inbox_.end()));
      inbox_.clear();
    }
    return out;
  }

  std::size_t tx_in_use() const { return tx_count_; }

  /// Resolves the interface at a node; used to look up a frame's send time.
  void set_peer_lookup(std::function<EthInterface*(NodeId)> peers) { peers_ = std::move(peers); }

  /// Send time of frame `seq`, forgotten once taken. -1 if unknown.
  SimTime take_sent_time(std::uint32_t seq) {
    auto it = sent_at_.find(seq);
    if (it == sent_at_.end()) return -1;
    SimTime t = it->second;
    sent_at_.erase(it);
    return t;
  }

 private:
  static constexpr std::uint64_t kTxBase = 0x1000'0000;
  static constexpr std::uint64_t kRxBase = 0x2000'0000;
  static constexpr std::uint64_t kBufferStride = 0x800;

  struct TxMeta {
    Coord dst;
    std::uint8_t channel = 0;
    std::uint32_t seq = 0;
    std::vector<Bytes> fragments;
    std::size_t next = 0;
  };

  SendStatus enqueue(const Coord& dst, Bytes frame, std::uint8_t channel, bool check_mtu = true) {
    if (check_mtu && frame.size() > config_.mtu) {
      throw SimError(ErrorCode::FrameTooLarge, std::to_string(frame.size()) + " bytes exceeds MTU");
    }
    hub_.topology().id(dst);  // bounds check
    Descriptor& d = tx_ring_[tx_tail_];
    if (d.owner != DescOwner::Driver || tx_count_ == tx_ring_.size()) {
      ++stats_.ring_full_events;
      return SendStatus::RingFull;
    }
    const std::uint32_t seq = next_seq_++;
    d.length = static_cast<std::uint32_t>(frame.size());
    d.owner = DescOwner::Device;
    sent_at_[seq] = hub_.simulator().now();
    tx_buffers_[tx_tail_] = TxMeta{dst, channel, seq, fragment(frame, hub_.payload_max()), 0};
    tx_tail_ = (tx_tail_ + 1) % tx_ring_.size();
    ++tx_count_;
    ++stats_.frames_sent;
    pump();
    return SendStatus::Queued;
  }

  // Device side of the transmit ring.
  void pump() {
    Network& net = hub_.network();
    while (tx_count_ > 0) {
      Descriptor& d = tx_ring_[tx_head_];
      TxMeta& m = tx_buffers_[tx_head_];
      while (m.next < m.fragments.size()) {
        const bool local = hub_.topology().id(m.dst) == node_;
        if (!local && !net.reserve_wakeup(node_)) return;
        PacketHeader h;
        h.dst = m.dst;
        h.protocol = ProtocolId::Ethernet;
        h.channel = m.channel;
        h.seq = m.seq;
        h.frag_index = static_cast<std::uint8_t>(m.next);
        h.frag_count = static_cast<std::uint8_t>(m.fragments.size());
        if (net.inject(node_, h, m.fragments[m.next]) != InjectResult::Accepted) return;
        ++m.next;
        ++stats_.packets_sent;
      }
      // DMA complete: hand the descriptor back to the driver.
      m.fragments.clear();
      d.owner = DescOwner::Driver;
      tx_head_ = (tx_head_ + 1) % tx_ring_.size();
      --tx_count_;
    }
  }

  void receive(const Packet& p) {
    Simulator& sim = hub_.simulator();
    const NodeId from = hub_.topology().id(p.header.src);
    const bool first = p.header.frag_count > 1 && !assembler_.pending(from, p.header.seq);
    auto complete = assembler_.add(from, p.header, p.payload, sim.now());
    if (first && !complete) {
      const std::uint32_t seq = p.header.seq;
      sim.schedule_in(config_.reassembly_timeout_ns, [this, from, seq] {
        if (assembler_.pending(from, seq)) ++stats_.reassembly_timeouts;
      });
    }
    if (!complete) return;
    Frame f;
    f.src = p.header.src;
    f.dst = hub_.topology().coord(node_);
    f.data = std::move(*complete);
    f.seq = p.header.seq;
    f.received_at = sim.now();
    if (EthInterface* sender = peers_ ? peers_(from) : nullptr) {
      f.sent_at = sender->take_sent_time(f.seq);
      if (f.sent_at >= 0) latency_.add(f.received_at - f.sent_at);
    }
    backlog_.push_back(std::move(f));
    stats_.max_rx_backlog = std::max(stats_.max_rx_backlog, backlog_.size());
    fill_rx_ring();
  }

  // Moves completed frames into receive descriptors the device owns.
  void fill_rx_ring() {
    while (!backlog_.empty() && rx_ring_[rx_tail_].owner == DescOwner::Device) {
      Frame f = std::move(backlog_.front());
      backlog_.pop_front();
      Descriptor& d = rx_ring_[rx_tail_];
      d.length = static_cast<std::uint32_t>(f.data.size());
      d.owner = DescOwner::Driver;
      rx_buffers_[rx_tail_] = std::move(f);
      rx_tail_ = (rx_tail_ + 1) % rx_ring_.size();
      if (config_.mode == EthMode::Interrupt) raise_interrupt();
    }
  }

  void raise_interrupt() {
    ++stats_.delivery_events;
    for (Frame& f : drain_rx_ring()) {
      if (on_frame_) {
        on_frame_(f);
      } else {
        inbox_.push_back(std::move(f));
      }
    }
  }

  // Driver side: consume completed receive descriptors and repost them.
  std::vector<Frame> drain_rx_ring() {
    std::vector<Frame> out;
    while (rx_ring_[rx_head_].owner == DescOwner::Driver) {
      Frame f = std::move(rx_buffers_[rx_head_]);
      rx_ring_[rx_head_].owner = DescOwner::Device;
      rx_ring_[rx_head_].length = 0;
      rx_head_ = (rx_head_ + 1) % rx_ring_.size();
      ++stats_.frames_received;
      stats_.bytes_received += f.data.size();
      out.push_back(std::move(f));
    }
    if (!backlog_.empty()) fill_rx_ring();
    return out;
  }

  ChannelHub& hub_;
  NodeId node_;
  EthConfig config_;
  std::vector<Descriptor> tx_ring_;
  std::vector<Descriptor> rx_ring_;
  std::vector<TxMeta> tx_buffers_;
  std::vector<Frame> rx_buffers_;
  std::size_t tx_head_ = 0;
  std::size_t tx_tail_ = 0;
  std::size_t tx_count_ = 0;
  std::size_t rx_head_ = 0;
  std::size_t rx_tail_ = 0;
  std::deque<Frame> backlog_;
  std::vector<Frame> inbox_;
  Reassembler assembler_;
  std::uint32_t next_seq_ = 0;
  std::map<std::uint32_t, SimTime> sent_at_;
  FrameHandler on_frame_;
  std::function<EthInterface*(NodeId)> peers_;
  EthStats stats_;
  LatencyRecorder latency_;
};

struct ExternalFrame {
  std::uint32_t external_src = 0;
  std::uint32_t external_dst = 0;
  Bytes data;
  Coord internal_src;  // set on egress
};

/// Ethernet gateway at a card's (1,0,0) node: bridges frames between an
/// external port model and the internal Ethernet using a static address map.
class Gateway {
 public:
  Gateway(ChannelHub& hub, EthInterface& iface) : hub_(hub), iface_(iface) {
    const NodeId node = iface.node();
    if (hub.topology().role(node) != NodeRole::EthernetGateway) {
      throw SimError(ErrorCode::NotGateway, "node is not an Ethernet gateway");
    }
    hub_.mux(node).register_rx(node, ProtocolId::Ethernet, kEthEgressChannel, [this](const Packet& p) { egress(p); });
  }

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  NodeId node() const { return iface_.node(); }

  void map_address(std::uint32_t external_id, NodeId internal) { map_[external_id] = internal; }

  /// A frame from the external port enters the internal Ethernet.
  EthInterface::SendStatus ingress(const ExternalFrame& frame) {
    auto it = map_.find(frame.external_dst);
    if (it == map_.end()) throw SimError(ErrorCode::UnknownTarget, "external id has no internal mapping");
    ++ingress_frames_;
    return iface_.send(hub_.topology().coord(it->second), frame.data);
  }

  /// Frames that left the system, in arrival order.
  const std::vector<ExternalFrame>& host_capture() const { return capture_; }
  std::uint64_t ingress_frames() const { return ingress_frames_; }

 private:
  void egress(const Packet& p) {
    const NodeId from = hub_.topology().id(p.header.src);
    auto complete = assembler_.add(from, p.header, p.payload, hub_.simulator().now());
    if (!complete || complete->size() < 4) return;
    ExternalFrame f;
    for (int i = 0; i < 4; ++i) f.external_dst |= std::uint32_t{(*complete)[i]} << (8 * i);
    f.external_src = 0;
    f.data.assign(complete->begin() + 4, complete->end());
    f.internal_src = p.header.src;
    capture_.push_back(std::move(f));
  }

  ChannelHub& hub_;
  EthInterface& iface_;
  std::map<std::uint32_t, NodeId> map_;
  std::vector<ExternalFrame> capture_;
  Reassembler assembler_;
  std::uint64_t ingress_frames_ = 0;
};

/// Checks the gateway precondition without constructing one.
inline void require_gateway(const Topology& topo, NodeId node) {
  if (topo.role(node) != NodeRole::EthernetGateway) {
    throw SimError(ErrorCode::NotGateway, "node is not an Ethernet gateway");
  }
}

}  // namespace incsim
