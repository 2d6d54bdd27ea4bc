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
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "incsim/common.hpp"
#include "incsim/packet.hpp"
#include "incsim/router.hpp"

namespace incsim {

struct MuxHandle {
  NodeId node = 0;
  ProtocolId protocol = ProtocolId::Ethernet;
  std::uint8_t channel = 0;
};

/// Packet Mux/Demux of one node. Transmit endpoints are counted so the
/// 32-channel bridge FIFO limit holds per direction; delivered packets go to
/// exactly one receive endpoint chosen by (protocol, channel).
class PacketMux {
 public:
  using Handler = std::function<void(const Packet&)>;

  MuxHandle register_tx(NodeId node, ProtocolId protocol, std::uint8_t channel) {
    check_channel(channel);
    auto key = std::make_pair(protocol, channel);
    if (tx_.count(key)) throw SimError(ErrorCode::ChannelInUse, "transmit channel already registered");
    if (protocol == ProtocolId::BridgeFifo && count(tx_, protocol) >= kMaxChannels) {
      throw SimError(ErrorCode::ChannelExhausted, "all 32 bridge FIFO transmit channels are in use");
    }
    tx_.emplace(key, true);
    return {node, protocol, channel};
  }

  MuxHandle register_rx(NodeId node, ProtocolId protocol, std::uint8_t channel, Handler handler) {
    check_channel(channel);
    auto key = std::make_pair(protocol, channel);
    if (rx_.count(key)) throw SimError(ErrorCode::ChannelInUse, "receive channel already registered");
    if (protocol == ProtocolId::BridgeFifo && count(rx_, protocol) >= kMaxChannels) {
      throw SimError(ErrorCode::ChannelExhausted, "all 32 bridge FIFO receive channels are in use");
    }
    rx_.emplace(key, std::move(handler));
    return {node, protocol, channel};
  }

  /// Returns false, and counts the drop, when no endpoint matches.
  bool dispatch(const Packet& p) {
    auto it = rx_.find({p.header.protocol, p.header.channel});
    if (!is_known_protocol(static_cast<std::uint8_t>(p.header.protocol)) || it == rx_.end()) {
      ++unknown_dropped_;
      return false;
    }
    it->second(p);
    return true;
  }

  std::uint64_t unknown_dropped() const { return unknown_dropped_; }

 private:
  static void check_channel(std::uint8_t channel) {
    if (channel >= kMaxChannels) {
      throw SimError(ErrorCode::ChannelExhausted, "channel " + std::to_string(channel) + " is outside 0..31");
    }
  }

  template <typename Map>
  static int count(const Map& m, ProtocolId protocol) {
    int n = 0;
    for (const auto& [key, value] : m) n += key.first == protocol;
    return n;
  }

  std::map<std::pair<ProtocolId, std::uint8_t>, bool> tx_;
  std::map<std::pair<ProtocolId, std::uint8_t>, Handler> rx_;
  std::uint64_t unknown_dropped_ = 0;
};

/// Glue between the network and protocol endpoints: one PacketMux per node,
/// and per-node wake-up lists for transmitters waiting on injection space.
class ChannelHub {
 public:
  explicit ChannelHub(Network& net) : net_(net), muxes_(net.topology().node_count()), waiters_(muxes_.size()) {
    net_.set_delivery_handler([this](NodeId at, const Packet& p) { muxes_[at].dispatch(p); });
    net_.set_ready_handler([this](NodeId n) { wake(n); });
  }

  ChannelHub(const ChannelHub&) = delete;
  ChannelHub& operator=(const ChannelHub&) = delete;

  Network& network() { return net_; }
  const Topology& topology() const { return net_.topology(); }
  Simulator& simulator() { return net_.simulator(); }
  PacketMux& mux(NodeId node) { return muxes_.at(node); }
  std::uint32_t payload_max() const { return net_.config().payload_max_bytes; }

  /// `on_space` runs whenever the node's injection queue drains after a refusal.
  void add_waiter(NodeId node, std::function<void()> on_space) { waiters_.at(node).push_back(std::move(on_space)); }

  std::uint64_t unknown_dropped() const {
    std::uint64_t n = 0;
    for (const PacketMux& m : muxes_) n += m.unknown_dropped();
    return n;
  }

 private:
  void wake(NodeId node) {
    // Copy: a waiter may register further waiters.
    auto list = waiters_[node];
    for (auto& fn : list) fn();
  }

  Network& net_;
  std::vector<PacketMux> muxes_;
  std::vector<std::vector<std::function<void()>>> waiters_;
};

/// Collects the fragments of a message split across several packets.
class Reassembler {
 public:
  /// Returns the complete message once its last fragment has arrived.
  std::optional<Bytes> add(NodeId src, const PacketHeader& h, const Bytes& payload, SimTime now) {
    const std::uint8_t count = h.frag_count == 0 ? 1 : h.frag_count;
    if (count == 1) return payload;
    auto key = std::make_pair(src, h.seq);
    Partial& part = partial_[key];
    if (part.parts.empty()) {
      part.parts.resize(count);
      part.have.assign(count, false);
      part.started = now;
    }
    if (h.frag_index >= count || part.have[h.frag_index]) {
      throw SimError(ErrorCode::InternalInvariantViolation, "duplicate or out-of-range fragment");
    }
    part.parts[h.frag_index] = payload;
    part.have[h.frag_index] = true;
    if (++part.received < count) return std::nullopt;
    Bytes out;
    for (Bytes& b : part.parts) out.insert(out.end(), b.begin(), b.end());
    partial_.erase(key);
    return out;
  }

  bool pending(NodeId src, std::uint32_t seq) const { return partial_.count({src, seq}) != 0; }
  std::size_t in_progress() const { return partial_.size(); }

 private:
  struct Partial {
    std::vector<Bytes> parts;
    std::vector<bool> have;
    std::uint32_t received = 0;
    SimTime started = 0;
  };
  std::map<std::pair<NodeId, std::uint32_t>, Partial> partial_;
};

/// Splits `data` into payload_max-sized fragments.
inline std::vector<Bytes> fragment(const Bytes& data, std::uint32_t payload_max) {
  std::vector<Bytes> out;
  for (std::size_t off = 0; off < data.size(); off += payload_max) {
    std::size_t n = std::min<std::size_t>(payload_max, data.size() - off);
    out.emplace_back(data.begin() + static_cast<std::ptrdiff_t>(off),
                     data.begin() + static_cast<std::ptrdiff_t>(off + n));
  }
  if (out.empty()) out.emplace_back();
  return out;
}

/// Latency samples with summary statistics.
class LatencyRecorder {
 public:
  void add(SimTime ns) { samples_.push_back(ns); }
  std::size_t count() const { return samples_.size(); }
  const std::vector<SimTime>& samples() const { return samples_; }

  double mean() const {
    if (samples_.empty()) return 0.0;
    long double sum = 0;
    for (SimTime s : samples_) sum += s;
    return static_cast<double>(sum / samples_.size());
  }

  /// Nearest-rank percentile, q in (0, 100].
  SimTime percentile(double q) const {
    if (samples_.empty()) return 0;
    std::vector<SimTime> sorted = samples_;
    std::sort(sorted.begin(), sorted.end());
    auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(sorted.size())));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
  }

  void merge(const LatencyRecorder& o) { samples_.insert(samples_.end(), o.samples_.begin(), o.samples_.end()); }

 private:
  std::vector<SimTime> samples_;
};

}  // namespace incsim
